#pragma once

// QA records, prediction records and their line-oriented JSON forms. Record
// ids are positional: the 0-based line index of the dataset file. Key order
// is fixed (ordered_json) so identical data serializes byte-identically.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hvqr/entry.hpp"
#include "hvqr/error.hpp"
#include "hvqr/exec.hpp"
#include "hvqr/query.hpp"
#include "hvqr/triplet.hpp"

namespace hvqr {

enum class Split { Train, Val, Test };

inline const char* to_string(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "train";
}

inline Split split_from(std::string_view s) {
    if (s == "train") return Split::Train;
    if (s == "val") return Split::Val;
    if (s == "test") return Split::Test;
    raise(ErrorKind::Ingest, "unknown split '" + std::string(s) + "'");
}

struct QARecord {
    std::string image_id;
    std::string question;
    std::string answer;            // normalized entry name
    int qtype = 0;
    int order = 1;
    bool kb_related = false;
    QueryLayout layout = QueryLayout::leaf(Entry{"none", EntryKind::Entity});
    std::vector<Triplet> supporting_facts;   // canonical order
    Split split = Split::Train;
    GroundingMode grounding = GroundingMode::Plain;   // derived, not serialized
};

// First-order KB-related questions ground their KB root in the image; this is
// the file-schema-free derivation of QARecord.grounding (see --grounded).
inline GroundingMode derived_grounding(int order, bool kb_related, bool grounding_enabled) {
    return order == 1 && kb_related && grounding_enabled ? GroundingMode::Grounded
                                                         : GroundingMode::Plain;
}

inline nlohmann::ordered_json to_json(const QARecord& record) {
    nlohmann::ordered_json facts = nlohmann::ordered_json::array();
    for (const Triplet& t : record.supporting_facts) {
        facts.push_back({t.subject.name, t.relation.name, t.object.name, to_string(t.source)});
    }
    return nlohmann::ordered_json{
        {"image_id", record.image_id},
        {"question", record.question},
        {"answer", record.answer},
        {"qtype", record.qtype},
        {"order", record.order},
        {"kb_related", record.kb_related},
        {"layout", serialize(record.layout)},
        {"supporting_facts", std::move(facts)},
        {"split", to_string(record.split)},
    };
}

inline QARecord record_from_json(const nlohmann::json& j, bool grounding_enabled = true) {
    QARecord record;
    record.image_id = j.at("image_id").get<std::string>();
    record.question = j.at("question").get<std::string>();
    record.answer = j.at("answer").get<std::string>();
    record.qtype = j.at("qtype").get<int>();
    record.order = j.at("order").get<int>();
    record.kb_related = j.at("kb_related").get<bool>();
    record.layout = parse_layout(j.at("layout").get<std::string>());
    for (const auto& f : j.at("supporting_facts")) {
        if (!f.is_array() || f.size() != 4) {
            raise(ErrorKind::Ingest, "supporting fact must be [subject, relation, object, source]");
        }
        record.supporting_facts.push_back(make_triplet(f[0].get<std::string>(),
                                                       f[1].get<std::string>(),
                                                       f[2].get<std::string>(),
                                                       source_from(f[3].get<std::string>())));
    }
    record.split = split_from(j.at("split").get<std::string>());
    record.grounding = derived_grounding(record.order, record.kb_related, grounding_enabled);
    return record;
}

inline std::string dataset_line(const QARecord& record) { return to_json(record).dump(); }

inline void write_dataset(const std::vector<QARecord>& records,
                          const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorKind::Io, "cannot write dataset file: " + path.string());
    for (const QARecord& record : records) out << dataset_line(record) << '\n';
}

inline std::vector<QARecord> load_dataset(const std::filesystem::path& path,
                                          bool grounding_enabled = true) {
    std::ifstream in(path);
    if (!in) raise(ErrorKind::Io, "cannot open dataset file: " + path.string());
    std::vector<QARecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            records.push_back(record_from_json(nlohmann::json::parse(line), grounding_enabled));
        } catch (const nlohmann::json::exception& e) {
            raise(ErrorKind::Ingest, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return records;
}

// ---------------------------------------------------------------------------
// Predictions

struct Prediction {
    std::size_t record_id = 0;
    std::string answer;
    std::optional<std::vector<NameTriple>> predicted_triplets;
};

inline nlohmann::ordered_json to_json(const Prediction& p) {
    nlohmann::ordered_json j{{"record_id", p.record_id}, {"answer", p.answer}};
    if (p.predicted_triplets) {
        nlohmann::ordered_json triples = nlohmann::ordered_json::array();
        for (const NameTriple& t : *p.predicted_triplets) {
            triples.push_back({t.subject, t.relation, t.object});
        }
        j["predicted_triplets"] = std::move(triples);
    }
    return j;
}

inline void write_predictions(const std::vector<Prediction>& predictions,
                              const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorKind::Io, "cannot write predictions file: " + path.string());
    for (const Prediction& p : predictions) out << to_json(p).dump() << '\n';
}

inline std::vector<Prediction> load_predictions(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) raise(ErrorKind::Io, "cannot open predictions file: " + path.string());
    std::vector<Prediction> predictions;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            raise(ErrorKind::Ingest, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
        Prediction p;
        p.record_id = j.at("record_id").get<std::size_t>();
        p.answer = normalize_name(j.at("answer").get<std::string>());
        if (j.contains("predicted_triplets")) {
            std::vector<NameTriple> triples;
            for (const auto& t : j["predicted_triplets"]) {
                if (!t.is_array() || t.size() != 3) {
                    raise(ErrorKind::Ingest,
                          path.string() + ":" + std::to_string(line_no) +
                              ": predicted triplet must be [subject, relation, object]");
                }
                triples.push_back(NameTriple{normalize_name(t[0].get<std::string>()),
                                             normalize_name(t[1].get<std::string>()),
                                             normalize_name(t[2].get<std::string>())});
            }
            p.predicted_triplets = std::move(triples);
        }
        predictions.push_back(std::move(p));
    }
    return predictions;
}

// ---------------------------------------------------------------------------
// ExecResult record form: {answers: [...], trace: [{path, symbol, supporting}]}

inline nlohmann::ordered_json to_json(const ExecResult& result) {
    nlohmann::ordered_json steps = nlohmann::ordered_json::array();
    for (const TraceStep& step : result.trace.steps) {
        nlohmann::ordered_json supporting = nlohmann::ordered_json::array();
        for (const Triplet& t : step.supporting) {
            supporting.push_back({t.subject.name, t.relation.name, t.object.name, to_string(t.source)});
        }
        steps.push_back({{"path", step.path},
                         {"symbol", to_string(step.symbol)},
                         {"supporting", std::move(supporting)}});
    }
    return nlohmann::ordered_json{{"answers", result.answers.names()}, {"trace", std::move(steps)}};
}

} // namespace hvqr
