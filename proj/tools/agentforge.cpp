// SPDX-License-Identifier: Apache-2.0
//
// agentforge command line: blueprint generation, trajectory simulation,
// dataset reporting. Each subcommand is a thin flag layer over runner.hpp
// so tests can drive the same code paths in-process.

#include "agentforge/api_graph.hpp"
#include "agentforge/dataset.hpp"
#include "agentforge/domain_pack.hpp"
#include "agentforge/runner.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using agentforge::ConfigError;
using agentforge::Json;
using agentforge::RunConfig;

struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<int> workers;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config, "run config JSON file")->required();
    cmd->add_option("--seed", flags.seed, "override the master seed");
    cmd->add_option("--out", flags.out_dir, "override the output directory");
    cmd->add_option("--workers", flags.workers, "override the worker count");
}

RunConfig load_with_overrides(const CommonFlags& flags) {
    RunConfig cfg = agentforge::load_run_config(flags.config);
    if (flags.seed) cfg.seed = *flags.seed;
    if (flags.out_dir) cfg.out_dir = *flags.out_dir;
    if (flags.workers) cfg.workers = *flags.workers;
    if (cfg.workers < 1) throw ConfigError("workers must be >= 1");
    return cfg;
}

std::vector<Json> load_audit_docs(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw ConfigError("audit directory not found: " + dir.string());
    }
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    std::vector<Json> docs;
    for (const auto& file : files) {
        try {
            docs.push_back(Json::parse(agentforge::read_text_file(file.string())));
        } catch (const std::exception&) {
            docs.push_back(Json());  // counted as skipped by compute_stats
        }
    }
    return docs;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"agentforge: verified multi-turn tool-use data synthesis"};
    app.require_subcommand(1);
    std::function<void()> action;

    CommonFlags gen_flags;
    std::optional<int> gen_tasks;
    CLI::App* gen = app.add_subcommand("gen-blueprints", "run the blueprint refinement pipeline");
    add_common(gen, gen_flags);
    gen->add_option("--n,--tasks", gen_tasks, "number of tasks to attempt");
    gen->callback([&] {
        action = [&] {
            RunConfig cfg = load_with_overrides(gen_flags);
            if (gen_tasks) cfg.tasks = *gen_tasks;
            if (cfg.tasks < 0) throw ConfigError("tasks must be >= 0");
            const Json manifest = agentforge::run_gen_blueprints(cfg);
            std::cout << manifest.dump(2) << "\n";
        };
    });

    CommonFlags rec_flags;
    std::string rec_blueprints;
    std::optional<int> rec_max;
    CLI::App* rec = app.add_subcommand("recombine", "compose validated blueprints pairwise");
    add_common(rec, rec_flags);
    rec->add_option("--blueprints", rec_blueprints, "blueprints.jsonl to combine")->required();
    rec->add_option("--max", rec_max, "max combinations to attempt");
    rec->callback([&] {
        action = [&] {
            RunConfig cfg = load_with_overrides(rec_flags);
            if (rec_max) cfg.max_combinations = *rec_max;
            if (cfg.max_combinations < 0) throw ConfigError("max combinations must be >= 0");
            const Json manifest = agentforge::run_recombine(cfg, rec_blueprints);
            std::cout << manifest.dump(2) << "\n";
        };
    });

    CommonFlags sim_flags;
    std::string sim_blueprints;
    std::optional<int> sim_attempts;
    std::optional<int> sim_bon_n;
    CLI::App* sim = app.add_subcommand("simulate", "collect trajectories for each blueprint");
    add_common(sim, sim_flags);
    sim->add_option("--blueprints", sim_blueprints, "blueprints.jsonl to simulate")->required();
    sim->add_option("--attempts", sim_attempts, "override episode attempts per task");
    sim->add_option("--bon-n", sim_bon_n, "override best-of-n candidate count");
    sim->callback([&] {
        action = [&] {
            RunConfig cfg = load_with_overrides(sim_flags);
            if (sim_attempts) cfg.episode.attempts = *sim_attempts;
            if (sim_bon_n) cfg.episode.bon_n = *sim_bon_n;
            if (cfg.episode.attempts < 1) throw ConfigError("attempts must be >= 1");
            if (cfg.episode.bon_n < 1) throw ConfigError("bon-n must be >= 1");
            const Json manifest = agentforge::run_simulate(cfg, sim_blueprints);
            std::cout << manifest.dump(2) << "\n";
        };
    });

    std::string stats_trajectories;
    std::string stats_audits;
    bool stats_json = false;
    CLI::App* stats = app.add_subcommand("stats", "summarize trajectories and audit outcomes");
    stats->add_option("--trajectories", stats_trajectories, "trajectories.jsonl")->required();
    stats->add_option("--audits", stats_audits, "audit directory from gen-blueprints");
    stats->add_flag("--json", stats_json, "emit JSON instead of the table");
    stats->callback([&] {
        action = [&] {
            std::size_t skipped = 0;
            std::vector<Json> lines;
            try {
                lines = agentforge::read_jsonl_lenient(stats_trajectories, skipped);
            } catch (const std::exception& e) {
                throw ConfigError(e.what());
            }
            std::vector<Json> audits;
            if (!stats_audits.empty()) audits = load_audit_docs(stats_audits);
            agentforge::StatsSummary summary = agentforge::compute_stats(lines, audits);
            summary.skipped_records += skipped;
            if (stats_json) {
                std::cout << summary.to_json().dump(2) << "\n";
            } else {
                std::cout << summary.to_table();
            }
        };
    });

    int passk_k = 1;
    std::vector<std::string> passk_manifests;
    CLI::App* passk = app.add_subcommand("passk", "pass^k from repeated simulate manifests");
    passk->add_option("--k", passk_k, "subset size k")->required();
    passk->add_option("manifests", passk_manifests, "simulate manifest.json paths")
        ->required()
        ->expected(-1);
    passk->callback([&] {
        action = [&] {
            std::vector<std::filesystem::path> paths(passk_manifests.begin(),
                                                     passk_manifests.end());
            const agentforge::TrialMatrix matrix = agentforge::trial_matrix_from_manifests(paths);
            agentforge::PassKResult result;
            try {
                result = agentforge::pass_k(matrix, passk_k);
            } catch (const std::exception& e) {
                throw ConfigError(e.what());
            }
            std::cout << result.to_json().dump(2) << "\n";
        };
    });

    std::string train_trajectories;
    std::string train_pack;
    std::string train_out;
    CLI::App* train = app.add_subcommand("export-train", "emit per-assistant-turn training records");
    train->add_option("--trajectories", train_trajectories, "trajectories.jsonl")->required();
    train->add_option("--pack", train_pack, "domain pack directory")->required();
    train->add_option("--out", train_out, "output JSONL path")->required();
    train->callback([&] {
        action = [&] {
            std::vector<Json> lines;
            try {
                lines = agentforge::read_jsonl(train_trajectories);
            } catch (const std::exception& e) {
                throw ConfigError(e.what());
            }
            std::vector<agentforge::Trajectory> trajectories;
            for (std::size_t i = 0; i < lines.size(); ++i) {
                try {
                    trajectories.push_back(agentforge::Trajectory::from_json(lines[i]));
                } catch (const std::exception& e) {
                    throw ConfigError(train_trajectories + ":" + std::to_string(i + 1) + ": " +
                                      e.what());
                }
            }
            agentforge::DomainPack pack;
            agentforge::PromptSet prompts;
            try {
                pack = agentforge::load_domain_pack(train_pack);
                prompts = agentforge::load_prompts(std::filesystem::path(train_pack) / "prompts");
            } catch (const std::exception& e) {
                throw ConfigError("failed to load domain pack: " + std::string(e.what()));
            }
            const std::string system_prompt = agentforge::agent_system_prompt(pack, prompts);
            std::vector<Json> records;
            for (const auto& record : agentforge::export_training_view(trajectories, system_prompt)) {
                records.push_back(record.to_json());
            }
            agentforge::write_jsonl(train_out, records);
            std::cout << "wrote " << records.size() << " training records to " << train_out << "\n";
        };
    });

    std::string graph_pack;
    std::string graph_out;
    CLI::App* graph = app.add_subcommand("graph-dump", "emit the API dependency graph as DOT");
    graph->add_option("--pack", graph_pack, "domain pack directory")->required();
    graph->add_option("--out", graph_out, "output path (stdout when omitted)");
    graph->callback([&] {
        action = [&] {
            agentforge::DomainPack pack;
            try {
                pack = agentforge::load_domain_pack(graph_pack);
            } catch (const std::exception& e) {
                throw ConfigError("failed to load domain pack: " + std::string(e.what()));
            }
            const agentforge::ApiGraph api_graph = agentforge::build_graph(
                pack.registry.specs(), pack.forbidden_pairs, pack.declared_edges);
            const std::string dot = agentforge::to_dot(api_graph);
            if (graph_out.empty()) {
                std::cout << dot;
            } else {
                agentforge::write_text_file(graph_out, dot);
            }
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        action();
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
}
