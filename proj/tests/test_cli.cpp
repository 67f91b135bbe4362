// SPDX-License-Identifier: Apache-2.0
//
// Drives the built binary as a subprocess: exit codes, output files, and
// rerun determinism are part of the documented interface.

#include "agentforge/dataset.hpp"
#include "agentforge/value.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>

using namespace agentforge;
namespace fs = std::filesystem;

namespace {

const fs::path kRepoRoot = fs::path(AGENTFORGE_REPO_ROOT);
const std::string kDemoConfig = (kRepoRoot / "configs" / "demo.json").string();

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "agentforge_cli" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int run_cli(const std::string& args, std::string* output = nullptr) {
    static int counter = 0;
    const fs::path capture =
        fs::temp_directory_path() / ("agentforge_cli_out_" + std::to_string(counter++) + ".txt");
    const std::string cmd =
        std::string(AGENTFORGE_CLI_PATH) + " " + args + " > " + capture.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    if (output) *output = read_text_file(capture.string());
    fs::remove(capture);
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("help and usage errors") {
    CHECK(run_cli("--help") == 0);
    CHECK(run_cli("gen-blueprints --help") == 0);
    CHECK(run_cli("") == 1);           // a subcommand is required
    CHECK(run_cli("bogus-cmd") == 1);  // unknown subcommand
    CHECK(run_cli("gen-blueprints") == 1);  // --config is required
}

TEST_CASE("gen-blueprints then simulate is byte-identical across runs") {
    const fs::path a = fresh_dir("runA");
    const fs::path b = fresh_dir("runB");

    REQUIRE(run_cli("gen-blueprints --config " + kDemoConfig + " --out " + a.string()) == 0);
    REQUIRE(run_cli("gen-blueprints --config " + kDemoConfig + " --out " + b.string()) == 0);
    CHECK(read_text_file((a / "blueprints.jsonl").string()) ==
          read_text_file((b / "blueprints.jsonl").string()));

    REQUIRE(run_cli("simulate --config " + kDemoConfig + " --blueprints " +
                    (a / "blueprints.jsonl").string() + " --out " + (a / "sim").string()) == 0);
    REQUIRE(run_cli("simulate --config " + kDemoConfig + " --blueprints " +
                    (b / "blueprints.jsonl").string() + " --out " + (b / "sim").string()) == 0);
    CHECK(read_text_file((a / "sim" / "trajectories.jsonl").string()) ==
          read_text_file((b / "sim" / "trajectories.jsonl").string()));

    SECTION("manifest counts match the output files") {
        const Json gen_manifest = Json::parse(read_text_file((a / "manifest.json").string()));
        CHECK(gen_manifest.at("accepted").get<std::size_t>() ==
              read_jsonl(a / "blueprints.jsonl").size());
        const Json sim_manifest =
            Json::parse(read_text_file((a / "sim" / "manifest.json").string()));
        CHECK(sim_manifest.at("kept").get<std::size_t>() ==
              read_jsonl(a / "sim" / "trajectories.jsonl").size());
    }
    SECTION("passk consumes the simulate manifest") {
        std::string out;
        CHECK(run_cli("passk --k 2 " + (a / "sim" / "manifest.json").string(), &out) == 0);
        const Json report = Json::parse(out);
        CHECK(report.at("k") == 2);
        CHECK(report.at("macro").get<double>() >= 0.0);
        CHECK(report.at("macro").get<double>() <= 1.0);
        CHECK(run_cli("passk --k 99 " + (a / "sim" / "manifest.json").string()) == 1);
    }
    SECTION("stats reads the trajectories and audits") {
        std::string out;
        CHECK(run_cli("stats --trajectories " + (a / "sim" / "trajectories.jsonl").string() +
                          " --audits " + (a / "audits").string() + " --json",
                      &out) == 0);
        const Json report = Json::parse(out);
        CHECK(report.at("trajectories").get<std::size_t>() ==
              read_jsonl(a / "sim" / "trajectories.jsonl").size());
        CHECK(report.at("blueprint_attempts") == 4);
    }
    SECTION("export-train writes one record per assistant turn") {
        const fs::path train = a / "train.jsonl";
        CHECK(run_cli("export-train --trajectories " +
                          (a / "sim" / "trajectories.jsonl").string() + " --pack " +
                          (kRepoRoot / "packs" / "retail").string() + " --out " +
                          train.string()) == 0);
        std::size_t assistant_turns = 0;
        for (const auto& line : read_jsonl(a / "sim" / "trajectories.jsonl")) {
            for (const auto& turn : line.at("turns")) {
                if (turn.at("speaker") == "assistant") ++assistant_turns;
            }
        }
        CHECK(read_jsonl(train).size() == assistant_turns);
    }
    SECTION("recombine over the generated blueprints") {
        std::string out;
        CHECK(run_cli("recombine --config " + kDemoConfig + " --blueprints " +
                          (a / "blueprints.jsonl").string() + " --out " + (a / "rec").string(),
                      &out) == 0);
        const Json manifest = Json::parse(out);
        CHECK(manifest.at("accepted").get<std::size_t>() ==
              read_jsonl(a / "rec" / "combined.jsonl").size());
    }
}

TEST_CASE("zero tasks exit cleanly with empty outputs") {
    const fs::path dir = fresh_dir("zero");
    CHECK(run_cli("gen-blueprints --config " + kDemoConfig + " --out " + dir.string() +
                  " --n 0") == 0);
    CHECK(read_jsonl(dir / "blueprints.jsonl").empty());
}

TEST_CASE("config and user errors exit with code 1") {
    SECTION("missing config file") {
        std::string out;
        CHECK(run_cli("gen-blueprints --config /no/such/config.json", &out) == 1);
        CHECK(out.find("error:") != std::string::npos);
    }
    SECTION("missing domain pack") {
        const fs::path dir = fresh_dir("badpack");
        Json doc = Json::parse(read_text_file(kDemoConfig));
        doc["pack"] = "/definitely/not/a/pack";
        write_text_file((dir / "config.json").string(), doc.dump());
        CHECK(run_cli("gen-blueprints --config " + (dir / "config.json").string()) == 1);
    }
    SECTION("invalid JSONL line is named") {
        const fs::path dir = fresh_dir("badline");
        write_text_file((dir / "blueprints.jsonl").string(), "{\"ok\": 1}\nnot json\n");
        std::string out;
        CHECK(run_cli("simulate --config " + kDemoConfig + " --blueprints " +
                          (dir / "blueprints.jsonl").string() + " --out " + (dir / "sim").string(),
                      &out) == 1);
        CHECK(out.find(":2: invalid JSONL line") != std::string::npos);
    }
    SECTION("missing trajectories file for stats") {
        CHECK(run_cli("stats --trajectories /no/such/trajectories.jsonl") == 1);
    }
}

TEST_CASE("graph-dump emits DOT") {
    std::string out;
    CHECK(run_cli("graph-dump --pack " + (kRepoRoot / "packs" / "retail").string(), &out) == 0);
    CHECK(out.find("digraph api {") != std::string::npos);
    CHECK(out.find("cancel_order") != std::string::npos);
}
