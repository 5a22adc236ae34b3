#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "hvqr/bundle.hpp"
#include "hvqr/cli.hpp"
#include "hvqr/dataset.hpp"
#include "support/builders.hpp"

using namespace hvqr;
using namespace hvqr::testing;

namespace {

const std::string kCli = HVQR_CLI_PATH;
const std::string kData = HVQR_DATA_DIR;

int run(const std::string& args, const std::filesystem::path& stdout_file) {
    const std::string command = kCli + " " + args + " >" + stdout_file.string() + " 2>&1";
    const int status = std::system(command.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string file_bytes(const std::filesystem::path& path) { return slurp(path); }

} // namespace

TEST_CASE("cli pipeline over the sample corpus", "[cli]") {
    TempDir dir;
    const auto log = dir.file("log.txt");
    const auto bundle_path = dir.file("bundle.json");

    // build-graph
    REQUIRE(run("build-graph --kb " + kData + "/sample/kb.tsv --scenes " + kData +
                    "/sample/scenes.jsonl --out " + bundle_path.string(),
                log) == 0);
    CHECK(slurp(log).find("dropped: 2") != std::string::npos);

    SECTION("bundle reload round-trips to equal graphs") {
        GraphBundle direct;
        direct.kb = load_knowledge_base(kData + "/sample/kb.tsv");
        direct.scenes = load_scene_graphs(kData + "/sample/scenes.jsonl", direct.report);
        GraphBundle reloaded = load_bundle(bundle_path);
        REQUIRE(reloaded.scenes.size() == direct.scenes.size());
        CHECK(reloaded.kb->triplets() == direct.kb->triplets());
        std::map<std::string, const SceneGraph*> reloaded_by_id;
        for (const SceneGraph& s : reloaded.scenes) reloaded_by_id[s.image_id] = &s;
        for (const SceneGraph& scene : direct.scenes) {
            ImageKnowledgeGraph a = merge(scene, direct.kb);
            ImageKnowledgeGraph b = merge(*reloaded_by_id.at(scene.image_id), reloaded.kb);
            CHECK(a == b);
            TripletPattern probe{std::nullopt, "usedfor", "drink"};
            CHECK(a.lookup(probe, Scope::KBOnly) == b.lookup(probe, Scope::KBOnly));
        }
    }

    SECTION("execute single layouts") {
        const auto out = dir.file("exec.json");
        REQUIRE(run("execute --bundle " + bundle_path.string() +
                        " --image img_park --layout \"(Q_ab_I boy frisbee)\"",
                    out) == 0);
        auto result = nlohmann::json::parse(slurp(out));
        CHECK(result["answers"] == nlohmann::json::array({"throw"}));

        REQUIRE(run("execute --bundle " + bundle_path.string() +
                        " --image img_desk --layout \"(Q_ar_K (Q_rb_I on desk) UsedFor)\"",
                    out) == 0);
        result = nlohmann::json::parse(slurp(out));
        CHECK(result["answers"] == nlohmann::json::array({"drink"}));
    }

    SECTION("generate, re-execute, evaluate") {
        const auto dataset = dir.file("dataset.jsonl");
        REQUIRE(run("generate --bundle " + bundle_path.string() + " --templates " + kData +
                        "/templates.json --seed 7 --out " + dataset.string(),
                    log) == 0);
        std::vector<QARecord> records = load_dataset(dataset);
        REQUIRE_FALSE(records.empty());

        // FULL mode re-answers every stored layout
        const auto preds = dir.file("preds.jsonl");
        REQUIRE(run("execute --bundle " + bundle_path.string() + " --dataset " + dataset.string() +
                        " --mode full --out " + preds.string(),
                    log) == 0);
        CHECK(slurp(log).find("(100.00%)") != std::string::npos);

        // QUERY mode re-parses the question text first
        REQUIRE(run("execute --bundle " + bundle_path.string() + " --dataset " + dataset.string() +
                        " --mode query --templates " + kData + "/templates.json",
                    log) == 0);
        CHECK(slurp(log).find("(100.00%)") != std::string::npos);
        CHECK(slurp(log).find("parse failures 0") != std::string::npos);

        // oracle predictions score 1.0 everywhere
        const auto report_path = dir.file("report.json");
        REQUIRE(run("evaluate --dataset " + dataset.string() + " --predictions " + preds.string() +
                        " --out " + report_path.string(),
                    log) == 0);
        auto report = nlohmann::json::parse(slurp(report_path));
        CHECK(report["accuracy"] == 1.0);
        CHECK(report["explanation"]["overall"] == 1.0);

        // stats grid covers the generated data
        REQUIRE(run("stats --dataset " + dataset.string(), log) == 0);
        CHECK(slurp(log).find("order qtype") != std::string::npos);

        // baseline evaluation runs end to end
        REQUIRE(run("evaluate --dataset " + dataset.string() + " --baseline qtype-mode", log) == 0);
        CHECK(slurp(log).find("qtype-mode baseline") != std::string::npos);
    }

    SECTION("determinism: same seed byte-identical, different seed differs") {
        const auto d1 = dir.file("d1.jsonl");
        const auto d2 = dir.file("d2.jsonl");
        const auto d3 = dir.file("d3.jsonl");
        const std::string base = "generate --bundle " + bundle_path.string() + " --templates " +
                                 kData + "/templates.json ";
        REQUIRE(run(base + "--seed 5 --out " + d1.string(), log) == 0);
        REQUIRE(run(base + "--seed 5 --out " + d2.string(), log) == 0);
        REQUIRE(run(base + "--seed 6 --out " + d3.string(), log) == 0);
        CHECK(file_bytes(d1) == file_bytes(d2));
        CHECK(file_bytes(d1) != file_bytes(d3));
    }
}

TEST_CASE("cli exit codes are distinct per failure class", "[cli]") {
    TempDir dir;
    const auto log = dir.file("log.txt");

    SECTION("ingest errors exit 2") {
        const auto empty_scenes = write_file(dir.file("empty.jsonl"), "");
        CHECK(run("build-graph --kb " + kData + "/sample/kb.tssv --scenes " +
                      empty_scenes.string() + " --out " + dir.file("b.json").string(),
                  log) == 1);   // missing file is an io error -> generic
        const auto bad_kb = write_file(dir.file("bad.tsv"), "only two\tfields\n");
        CHECK(run("build-graph --kb " + bad_kb.string() + " --scenes " + empty_scenes.string() +
                      " --out " + dir.file("b.json").string(),
                  log) == 2);
        const auto good_kb = write_file(dir.file("kb.tsv"), "a\tr\tb\n");
        CHECK(run("build-graph --kb " + good_kb.string() + " --scenes " + empty_scenes.string() +
                      " --out " + dir.file("b.json").string(),
                  log) == 2);
    }

    SECTION("parse errors exit 3") {
        const auto kb = write_file(dir.file("kb.tsv"), "a\tr\tb\n");
        const auto scenes = write_file(
            dir.file("s.jsonl"),
            R"({"image_id": "i", "objects": [{"object_id": 1, "synset": "a"}], "relationships": []})"
            "\n");
        const auto bundle_path = dir.file("b.json");
        REQUIRE(run("build-graph --kb " + kb.string() + " --scenes " + scenes.string() + " --out " +
                        bundle_path.string(),
                    log) == 0);
        CHECK(run("execute --bundle " + bundle_path.string() + " --image i --layout \"(Q_ab_I a\"",
                  log) == 3);
        CHECK(run("execute --bundle " + bundle_path.string() + " --image i --layout \"(Q_xx_I a b)\"",
                  log) == 3);
    }

    SECTION("generation that admits nothing exits 4") {
        const auto kb = write_file(dir.file("kb.tsv"), "zz\tkk\tyy\n");
        // every slot of every image pattern is ambiguous: two relations per
        // (subject, object) pair, two objects per (subject, relation), two
        // subjects per (relation, object); nothing links for order 2
        std::string rels;
        for (const char* s : {"1", "4"}) {
            for (const char* r : {"2", "3"}) {
                for (const char* o : {"5", "6"}) {
                    rels += std::string(rels.empty() ? "" : ", ") +
                            R"({"subject_id": )" + s + R"(, "predicate_synset": "r)" + r +
                            R"(", "object_id": )" + o + "}";
                }
            }
        }
        const auto scenes = write_file(
            dir.file("s.jsonl"),
            R"({"image_id": "i", "objects": [{"object_id": 1, "synset": "a"}, {"object_id": 4, "synset": "d"}, {"object_id": 5, "synset": "b"}, {"object_id": 6, "synset": "c"}], "relationships": [)" +
                rels + R"(]})" + "\n");
        const auto bundle_path = dir.file("b.json");
        REQUIRE(run("build-graph --kb " + kb.string() + " --scenes " + scenes.string() + " --out " +
                        bundle_path.string(),
                    log) == 0);
        CHECK(run("generate --bundle " + bundle_path.string() + " --templates " + kData +
                      "/templates.json --out " + dir.file("d.jsonl").string(),
                  log) == 4);
    }

    SECTION("prediction ids without gold records exit 5") {
        QARecord r;
        r.image_id = "i";
        r.question = "q";
        r.answer = "a";
        const auto dataset = dir.file("gold.jsonl");
        write_dataset({r}, dataset);
        const auto preds = dir.file("p.jsonl");
        write_predictions({Prediction{5, "a", std::nullopt}}, preds);
        CHECK(run("evaluate --dataset " + dataset.string() + " --predictions " + preds.string(),
                  log) == 5);
    }
}

TEST_CASE("config file values are overridden by flags", "[cli]") {
    TempDir dir;
    const auto log = dir.file("log.txt");
    const auto kb = write_file(dir.file("kb.tsv"), "cup\tusedfor\tdrink\n");
    // several images with several chains each, so the seed visibly reorders output
    std::string scene_lines;
    for (int i = 0; i < 6; ++i) {
        const std::string n = std::to_string(i);
        scene_lines +=
            R"({"image_id": "img)" + n + R"(", "objects": [)" +
            R"({"object_id": 1, "synset": "person)" + n + R"("}, )" +
            R"({"object_id": 2, "synset": "item)" + n + R"("}, )" +
            R"({"object_id": 3, "synset": "spot)" + n + R"("}], "relationships": [)" +
            R"({"subject_id": 1, "predicate_synset": "holds", "object_id": 2}, )" +
            R"({"subject_id": 2, "predicate_synset": "on", "object_id": 3}, )" +
            R"({"subject_id": 1, "predicate_synset": "near", "object_id": 3}]})" + "\n";
    }
    const auto scenes = write_file(dir.file("s.jsonl"), scene_lines);
    const auto bundle_path = dir.file("b.json");
    REQUIRE(run("build-graph --kb " + kb.string() + " --scenes " + scenes.string() + " --out " +
                    bundle_path.string(),
                log) == 0);

    const auto config = write_file(dir.file("config.json"),
                                   nlohmann::json{{"bundle", bundle_path.string()},
                                                  {"templates", kData + "/templates.json"},
                                                  {"seed", 1}}
                                       .dump());
    const auto d1 = dir.file("d1.jsonl");
    const auto d2 = dir.file("d2.jsonl");
    const auto d3 = dir.file("d3.jsonl");
    REQUIRE(run("generate --config " + config.string() + " --out " + d1.string(), log) == 0);
    REQUIRE(run("generate --config " + config.string() + " --seed 1 --out " + d2.string(), log) == 0);
    REQUIRE(run("generate --config " + config.string() + " --seed 2 --out " + d3.string(), log) == 0);
    CHECK(slurp(d1) == slurp(d2));     // config seed == explicit same seed
    CHECK(slurp(d1) != slurp(d3));     // flag overrides config
}
