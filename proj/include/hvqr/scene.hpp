#pragma once

// Scene-graph ingestion. Input is one JSON record per line:
//   {"image_id": "...",
//    "objects": [{"object_id": 1, "synset": "bicycle", "name": "bike"}, ...],
//    "relationships": [{"subject_id": 1, "predicate_synset": "rides", "object_id": 2}, ...]}
// Objects and relationships without a synset are dropped (counted), as are
// relationships referencing unknown object ids. Names map to synset labels.

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "hvqr/entry.hpp"
#include "hvqr/error.hpp"
#include "hvqr/triplet.hpp"

namespace hvqr {

struct SceneGraph {
    std::string image_id;
    EntryTable objects;               // entity entries, post-synset normalization
    std::vector<Triplet> triplets;    // deduplicated, all Source::image(image_id)

    bool operator==(const SceneGraph&) const = default;
};

struct IngestReport {
    std::size_t images = 0;
    std::size_t objects_kept = 0;
    std::size_t objects_dropped_no_synset = 0;
    std::size_t relationships_kept = 0;
    std::size_t relationships_dropped_no_synset = 0;
    std::size_t relationships_dropped_dangling = 0;
    std::size_t duplicate_triplets_collapsed = 0;
    std::vector<std::string> dropped;   // one human-readable line per dropped record

    std::size_t total_dropped() const {
        return objects_dropped_no_synset + relationships_dropped_no_synset +
               relationships_dropped_dangling;
    }
};

namespace detail {

inline std::string id_to_string(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    raise(ErrorKind::Ingest, "object id must be a string or integer");
}

} // namespace detail

inline SceneGraph parse_scene_record(const nlohmann::json& record, IngestReport& report,
                                     const std::string& where) {
    if (!record.contains("image_id")) {
        raise(ErrorKind::Ingest, where + ": scene record is missing image_id");
    }
    SceneGraph scene;
    scene.image_id = record["image_id"].is_string()
                         ? record["image_id"].get<std::string>()
                         : detail::id_to_string(record["image_id"]);
    if (scene.image_id.empty()) raise(ErrorKind::Ingest, where + ": empty image_id");

    std::map<std::string, Entry> object_by_id;
    for (const auto& obj : record.value("objects", nlohmann::json::array())) {
        if (!obj.contains("synset") || !obj["synset"].is_string() ||
            normalize_name(obj["synset"].get<std::string>()).empty()) {
            ++report.objects_dropped_no_synset;
            report.dropped.push_back("image " + scene.image_id + ": object " +
                                     (obj.contains("object_id") ? detail::id_to_string(obj["object_id"])
                                                                : std::string("<no id>")) +
                                     " has no synset");
            continue;
        }
        if (!obj.contains("object_id")) {
            raise(ErrorKind::Ingest, where + ": object without object_id in image " + scene.image_id);
        }
        Entry entry = make_entity(obj["synset"].get<std::string>());
        object_by_id.insert_or_assign(detail::id_to_string(obj["object_id"]), entry);
        scene.objects.insert(entry);
        ++report.objects_kept;
    }

    std::set<Triplet> seen;
    for (const auto& rel : record.value("relationships", nlohmann::json::array())) {
        if (!rel.contains("predicate_synset") || !rel["predicate_synset"].is_string() ||
            normalize_name(rel["predicate_synset"].get<std::string>()).empty()) {
            ++report.relationships_dropped_no_synset;
            report.dropped.push_back("image " + scene.image_id + ": relationship has no predicate synset");
            continue;
        }
        if (!rel.contains("subject_id") || !rel.contains("object_id")) {
            ++report.relationships_dropped_dangling;
            report.dropped.push_back("image " + scene.image_id + ": relationship missing an endpoint id");
            continue;
        }
        auto subject = object_by_id.find(detail::id_to_string(rel["subject_id"]));
        auto object = object_by_id.find(detail::id_to_string(rel["object_id"]));
        if (subject == object_by_id.end() || object == object_by_id.end()) {
            ++report.relationships_dropped_dangling;
            report.dropped.push_back("image " + scene.image_id + ": relationship '" +
                                     rel["predicate_synset"].get<std::string>() +
                                     "' references an unknown object id");
            continue;
        }
        Triplet t{subject->second, make_relationship(rel["predicate_synset"].get<std::string>()),
                  object->second, Source::image(scene.image_id)};
        if (!seen.insert(t).second) {
            ++report.duplicate_triplets_collapsed;
            continue;
        }
        scene.triplets.push_back(std::move(t));
        ++report.relationships_kept;
    }
    return scene;
}

inline std::vector<SceneGraph> load_scene_graphs(const std::filesystem::path& path,
                                                 IngestReport& report) {
    std::ifstream in(path);
    if (!in) raise(ErrorKind::Io, "cannot open scene-graph file: " + path.string());

    std::vector<SceneGraph> scenes;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json record;
        try {
            record = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            raise(ErrorKind::Ingest,
                  path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
        scenes.push_back(
            parse_scene_record(record, report, path.string() + ":" + std::to_string(line_no)));
        ++report.images;
    }
    if (scenes.empty()) {
        raise(ErrorKind::Ingest, "scene-graph file has no records: " + path.string());
    }
    return scenes;
}

inline std::vector<SceneGraph> load_scene_graphs(const std::filesystem::path& path) {
    IngestReport report;
    return load_scene_graphs(path, report);
}

} // namespace hvqr
