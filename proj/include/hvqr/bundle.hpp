#pragma once

// Graph bundle: one JSON document holding the ingested KB and scene graphs in
// canonical order, plus the ingest report. Indexes are rebuilt on load, so a
// reloaded bundle answers lookups exactly like direct ingestion.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "hvqr/error.hpp"
#include "hvqr/kb.hpp"
#include "hvqr/scene.hpp"

namespace hvqr {

struct GraphBundle {
    std::shared_ptr<const KnowledgeBase> kb;
    std::vector<SceneGraph> scenes;
    IngestReport report;
};

inline void save_bundle(const GraphBundle& bundle, const std::filesystem::path& path) {
    nlohmann::ordered_json kb_rows = nlohmann::ordered_json::array();
    for (const Triplet& t : bundle.kb->triplets()) {
        kb_rows.push_back({t.subject.name, t.relation.name, t.object.name,
                           to_string(t.source.provenance)});
    }

    std::vector<const SceneGraph*> ordered;
    for (const SceneGraph& s : bundle.scenes) ordered.push_back(&s);
    std::sort(ordered.begin(), ordered.end(),
              [](const SceneGraph* a, const SceneGraph* b) { return a->image_id < b->image_id; });

    nlohmann::ordered_json scenes = nlohmann::ordered_json::array();
    for (const SceneGraph* scene : ordered) {
        nlohmann::ordered_json objects = nlohmann::ordered_json::array();
        for (const Entry& e : scene->objects) objects.push_back(e.name);
        nlohmann::ordered_json triplets = nlohmann::ordered_json::array();
        std::vector<Triplet> sorted = scene->triplets;
        std::sort(sorted.begin(), sorted.end());
        for (const Triplet& t : sorted) {
            triplets.push_back({t.subject.name, t.relation.name, t.object.name});
        }
        scenes.push_back({{"image_id", scene->image_id},
                          {"objects", std::move(objects)},
                          {"triplets", std::move(triplets)}});
    }

    nlohmann::ordered_json doc{
        {"format", "hvqr-bundle"},
        {"version", 1},
        {"ingest_report",
         {{"images", bundle.report.images},
          {"objects_kept", bundle.report.objects_kept},
          {"objects_dropped_no_synset", bundle.report.objects_dropped_no_synset},
          {"relationships_kept", bundle.report.relationships_kept},
          {"relationships_dropped_no_synset", bundle.report.relationships_dropped_no_synset},
          {"relationships_dropped_dangling", bundle.report.relationships_dropped_dangling},
          {"duplicate_triplets_collapsed", bundle.report.duplicate_triplets_collapsed},
          {"dropped", bundle.report.dropped}}},
        {"kb", std::move(kb_rows)},
        {"scenes", std::move(scenes)},
    };

    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorKind::Io, "cannot write bundle file: " + path.string());
    out << doc.dump(1) << '\n';
}

inline GraphBundle load_bundle(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) raise(ErrorKind::Io, "cannot open bundle file: " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        raise(ErrorKind::Ingest, path.string() + ": " + e.what());
    }
    if (doc.value("format", "") != "hvqr-bundle") {
        raise(ErrorKind::Ingest, path.string() + ": not a graph bundle");
    }

    GraphBundle bundle;
    std::vector<Triplet> kb_facts;
    for (const auto& row : doc.at("kb")) {
        kb_facts.push_back(make_triplet(row.at(0).get<std::string>(), row.at(1).get<std::string>(),
                                        row.at(2).get<std::string>(),
                                        Source::kb(provenance_from(row.at(3).get<std::string>()))));
    }
    bundle.kb = std::make_shared<const KnowledgeBase>(std::move(kb_facts));

    for (const auto& s : doc.at("scenes")) {
        SceneGraph scene;
        scene.image_id = s.at("image_id").get<std::string>();
        for (const auto& name : s.at("objects")) {
            scene.objects.insert(make_entity(name.get<std::string>()));
        }
        for (const auto& row : s.at("triplets")) {
            scene.triplets.push_back(make_triplet(row.at(0).get<std::string>(),
                                                  row.at(1).get<std::string>(),
                                                  row.at(2).get<std::string>(),
                                                  Source::image(scene.image_id)));
            scene.objects.insert(scene.triplets.back().subject);
            scene.objects.insert(scene.triplets.back().object);
        }
        bundle.scenes.push_back(std::move(scene));
    }

    const auto& r = doc.at("ingest_report");
    bundle.report.images = r.value("images", 0u);
    bundle.report.objects_kept = r.value("objects_kept", 0u);
    bundle.report.objects_dropped_no_synset = r.value("objects_dropped_no_synset", 0u);
    bundle.report.relationships_kept = r.value("relationships_kept", 0u);
    bundle.report.relationships_dropped_no_synset = r.value("relationships_dropped_no_synset", 0u);
    bundle.report.relationships_dropped_dangling = r.value("relationships_dropped_dangling", 0u);
    bundle.report.duplicate_triplets_collapsed = r.value("duplicate_triplets_collapsed", 0u);
    for (const auto& line : r.value("dropped", nlohmann::json::array())) {
        bundle.report.dropped.push_back(line.get<std::string>());
    }
    return bundle;
}

} // namespace hvqr
