// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "agentforge/blueprint.hpp"
#include "agentforge/dataset.hpp"
#include "agentforge/domain_pack.hpp"
#include "agentforge/gateway.hpp"
#include "agentforge/interplay.hpp"
#include "agentforge/sampler.hpp"
#include "agentforge/value.hpp"

namespace agentforge {

// Bad configs and bad input files are the user's problem (exit code 1);
// anything else that escapes is ours (exit code 2).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct BackendConfig {
    std::string type;  // "scripted" or "http"
    std::filesystem::path script;
    ModelConfig model;
};

struct RunConfig {
    std::filesystem::path pack_dir;
    std::filesystem::path out_dir = "out";
    std::uint64_t seed = 0;
    int tasks = 1;
    int workers = 1;
    int max_combinations = 8;

    Phase1Config phase1;
    EpisodeConfig episode;  // backend pointers stay null until a command wires them

    BackendConfig generator;
    std::vector<BackendConfig> judges;
    BackendConfig reviewer;
    BackendConfig human;
    BackendConfig agent;
    BackendConfig bon_judge;

    std::string config_hash;  // of the raw config file text, pre-interpolation
};

namespace detail {

inline std::string interpolate_env(const std::string& text) {
    std::string out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t open = text.find("${", pos);
        if (open == std::string::npos) {
            out.append(text, pos, std::string::npos);
            break;
        }
        const std::size_t close = text.find('}', open + 2);
        if (close == std::string::npos) {
            out.append(text, pos, std::string::npos);
            break;
        }
        out.append(text, pos, open - pos);
        const std::string name = text.substr(open + 2, close - open - 2);
        const char* value = std::getenv(name.c_str());
        if (value == nullptr) {
            throw ConfigError("environment variable not set: " + name);
        }
        out += value;
        pos = close + 1;
    }
    return out;
}

inline void interpolate_env_values(Json& doc) {
    if (doc.is_string()) {
        doc = interpolate_env(doc.get<std::string>());
    } else if (doc.is_object() || doc.is_array()) {
        for (auto& child : doc) interpolate_env_values(child);
    }
}

inline Range range_from_json(const Json& j, const std::string& what) {
    if (!j.is_array() || j.size() != 2) {
        throw ConfigError(what + " must be a [lo, hi] pair");
    }
    return Range{j.at(0).get<int>(), j.at(1).get<int>()};
}

inline BackendConfig backend_from_json(const Json& j, const std::filesystem::path& base,
                                       const std::string& role) {
    if (!j.is_object() || !j.contains("type")) {
        throw ConfigError("backend config for " + role + " needs a type");
    }
    BackendConfig cfg;
    cfg.type = j.at("type").get<std::string>();
    if (cfg.type == "scripted") {
        if (!j.contains("script")) {
            throw ConfigError("scripted backend for " + role + " needs a script path");
        }
        cfg.script = base / j.at("script").get<std::string>();
        if (!std::filesystem::exists(cfg.script)) {
            throw ConfigError("stub script for " + role + " not found: " + cfg.script.string());
        }
    } else if (cfg.type == "http") {
        cfg.model.endpoint = j.at("endpoint").get<std::string>();
        cfg.model.model = j.at("model").get<std::string>();
        cfg.model.max_tokens = j.value("max_tokens", cfg.model.max_tokens);
        cfg.model.timeout_ms = j.value("timeout_ms", cfg.model.timeout_ms);
        cfg.model.retry_budget = j.value("retry_budget", cfg.model.retry_budget);
        cfg.model.backoff_base_ms = j.value("backoff_base_ms", cfg.model.backoff_base_ms);
        if (std::getenv("AGENTFORGE_API_KEY") == nullptr) {
            throw ConfigError("AGENTFORGE_API_KEY must be set for http backend " + role);
        }
    } else {
        throw ConfigError("unknown backend type for " + role + ": " + cfg.type);
    }
    return cfg;
}

// Index-ordered fan-out over a bounded pool. fn(i) must confine its writes
// to slot i; results are then serialized by the caller in index order.
template <typename Fn>
inline void parallel_for(std::size_t n, int workers, Fn&& fn) {
    if (n == 0) return;
    const int pool_size = std::max(1, std::min<int>(workers, static_cast<int>(n)));
    if (pool_size == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(pool_size));
    std::vector<std::thread> pool;
    for (int w = 0; w < pool_size; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (;;) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= n) return;
                    fn(i);
                }
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

inline std::string zero_padded(int value, int width) {
    std::string digits = std::to_string(value);
    while (static_cast<int>(digits.size()) < width) digits.insert(digits.begin(), '0');
    return digits;
}

}  // namespace detail

inline RunConfig load_run_config(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) {
        throw ConfigError("config file not found: " + path.string());
    }
    const std::string raw = read_text_file(path.string());
    Json doc;
    try {
        doc = Json::parse(raw);
    } catch (const std::exception& e) {
        throw ConfigError("config is not valid JSON: " + std::string(e.what()));
    }
    detail::interpolate_env_values(doc);
    const std::filesystem::path base = path.parent_path();

    RunConfig cfg;
    cfg.config_hash = fnv1a_hex(raw);
    if (!doc.contains("pack")) throw ConfigError("config needs a pack path");
    cfg.pack_dir = base / doc.at("pack").get<std::string>();
    if (!std::filesystem::exists(cfg.pack_dir / "manifest.json")) {
        throw ConfigError("domain pack not found: " + cfg.pack_dir.string());
    }
    if (doc.contains("out_dir")) cfg.out_dir = doc.at("out_dir").get<std::string>();
    cfg.seed = doc.value("seed", cfg.seed);
    cfg.tasks = doc.value("tasks", cfg.tasks);
    cfg.workers = doc.value("workers", cfg.workers);
    cfg.max_combinations = doc.value("max_combinations", cfg.max_combinations);
    if (cfg.tasks < 0) throw ConfigError("tasks must be >= 0");
    if (cfg.workers < 1) throw ConfigError("workers must be >= 1");
    if (cfg.max_combinations < 0) throw ConfigError("max_combinations must be >= 0");

    if (doc.contains("phase1")) {
        const Json& p1 = doc.at("phase1");
        cfg.phase1.max_rounds = p1.value("max_rounds", cfg.phase1.max_rounds);
        cfg.phase1.committee_threshold =
            p1.value("committee_threshold", cfg.phase1.committee_threshold);
        cfg.phase1.generator_temperature =
            p1.value("generator_temperature", cfg.phase1.generator_temperature);
        cfg.phase1.judge_temperature = p1.value("judge_temperature", cfg.phase1.judge_temperature);
        if (p1.contains("sampler")) {
            const Json& s = p1.at("sampler");
            auto& knobs = cfg.phase1.knobs;
            if (s.contains("policies")) {
                knobs.policies = detail::range_from_json(s.at("policies"), "sampler.policies");
            }
            if (s.contains("domain_samples")) {
                knobs.domain_samples =
                    detail::range_from_json(s.at("domain_samples"), "sampler.domain_samples");
            }
            if (s.contains("examples")) {
                knobs.examples = detail::range_from_json(s.at("examples"), "sampler.examples");
            }
            if (s.contains("walk_length")) {
                knobs.walk_length =
                    detail::range_from_json(s.at("walk_length"), "sampler.walk_length");
            }
            knobs.restart_probability =
                s.value("restart_probability", knobs.restart_probability);
        }
    }
    if (cfg.phase1.max_rounds < 1) throw ConfigError("phase1.max_rounds must be >= 1");
    if (cfg.phase1.committee_threshold < 0 || cfg.phase1.committee_threshold > 4) {
        throw ConfigError("phase1.committee_threshold must be between 0 and 4");
    }

    if (doc.contains("phase2")) {
        const Json& p2 = doc.at("phase2");
        cfg.episode.max_turns = p2.value("max_turns", cfg.episode.max_turns);
        cfg.episode.attempts = p2.value("attempts", cfg.episode.attempts);
        cfg.episode.bon_n = p2.value("bon_n", cfg.episode.bon_n);
        cfg.episode.tool_call_cap = p2.value("tool_call_cap", cfg.episode.tool_call_cap);
        cfg.episode.human_temperature =
            p2.value("human_temperature", cfg.episode.human_temperature);
        cfg.episode.agent_temperature =
            p2.value("agent_temperature", cfg.episode.agent_temperature);
        cfg.episode.judge_temperature =
            p2.value("judge_temperature", cfg.episode.judge_temperature);
    }
    if (cfg.episode.max_turns < 1) throw ConfigError("phase2.max_turns must be >= 1");
    if (cfg.episode.attempts < 1) throw ConfigError("phase2.attempts must be >= 1");
    if (cfg.episode.bon_n < 1) throw ConfigError("phase2.bon_n must be >= 1");
    if (cfg.episode.tool_call_cap < 1) throw ConfigError("phase2.tool_call_cap must be >= 1");

    if (!doc.contains("backends")) throw ConfigError("config needs a backends section");
    const Json& backends = doc.at("backends");
    for (const char* role : {"generator", "judges", "reviewer", "human", "agent", "bon_judge"}) {
        if (!backends.contains(role)) {
            throw ConfigError("backends section is missing the " + std::string(role) + " role");
        }
    }
    cfg.generator = detail::backend_from_json(backends.at("generator"), base, "generator");
    const Json& judges = backends.at("judges");
    if (!judges.is_array() || judges.empty() || judges.size() % 2 == 0) {
        throw ConfigError("backends.judges must be an odd-sized array");
    }
    for (std::size_t i = 0; i < judges.size(); ++i) {
        cfg.judges.push_back(
            detail::backend_from_json(judges.at(i), base, "judges[" + std::to_string(i) + "]"));
    }
    cfg.reviewer = detail::backend_from_json(backends.at("reviewer"), base, "reviewer");
    cfg.human = detail::backend_from_json(backends.at("human"), base, "human");
    cfg.agent = detail::backend_from_json(backends.at("agent"), base, "agent");
    cfg.bon_judge = detail::backend_from_json(backends.at("bon_judge"), base, "bon_judge");
    return cfg;
}

inline std::unique_ptr<Backend> make_backend(const BackendConfig& cfg) {
    if (cfg.type == "scripted") {
        return std::make_unique<ScriptedStub>(ScriptedStub::load_script(cfg.script));
    }
    return std::make_unique<HttpBackend>(cfg.model);
}

// Everything a run needs from disk, loaded once and shared read-only
// across workers.
struct RunAssets {
    DomainPack pack;
    ApiGraph graph;
    std::vector<Persona> personas;
    std::vector<std::string> examples;
    PromptSet prompts;
};

inline RunAssets load_run_assets(const RunConfig& cfg) {
    try {
        RunAssets assets;
        assets.pack = load_domain_pack(cfg.pack_dir);
        assets.graph = build_graph(assets.pack.registry.specs(), assets.pack.forbidden_pairs,
                                   assets.pack.declared_edges);
        assets.personas = load_personas(cfg.pack_dir / "personas.json");
        assets.examples = load_examples(cfg.pack_dir / "examples.json");
        assets.prompts = load_prompts(cfg.pack_dir / "prompts");
        return assets;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError("failed to load domain pack: " + std::string(e.what()));
    }
}

namespace detail {

inline std::string task_name(int index) { return "task-" + zero_padded(index + 1, 4); }

inline void write_manifest(const std::filesystem::path& out_dir, const Json& manifest) {
    write_text_file((out_dir / "manifest.json").string(), manifest.dump(2) + "\n");
}

inline std::vector<TaskBlueprint> read_blueprints(const std::filesystem::path& path) {
    std::vector<TaskBlueprint> blueprints;
    std::vector<Json> lines;
    try {
        lines = read_jsonl(path);
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    for (std::size_t i = 0; i < lines.size(); ++i) {
        try {
            blueprints.push_back(TaskBlueprint::from_jsonl(lines[i]));
        } catch (const std::exception& e) {
            throw ConfigError(path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
        }
    }
    return blueprints;
}

}  // namespace detail

inline Json run_gen_blueprints(const RunConfig& cfg) {
    const RunAssets assets = load_run_assets(cfg);
    auto generator = make_backend(cfg.generator);
    auto reviewer = make_backend(cfg.reviewer);
    std::vector<std::unique_ptr<Backend>> judges;
    Phase1Backends backends;
    backends.generator = generator.get();
    backends.reviewer = reviewer.get();
    for (const auto& judge_cfg : cfg.judges) {
        judges.push_back(make_backend(judge_cfg));
        backends.judges.push_back(judges.back().get());
    }

    const std::size_t n = static_cast<std::size_t>(cfg.tasks);
    std::vector<RefineOutcome> outcomes(n);
    detail::parallel_for(n, cfg.workers, [&](std::size_t i) {
        outcomes[i] = refine_loop(assets.pack, assets.graph, assets.personas, assets.examples,
                                  assets.prompts, backends, cfg.phase1,
                                  mix_seed(cfg.seed, static_cast<std::uint64_t>(i)),
                                  detail::task_name(static_cast<int>(i)));
    });

    std::filesystem::create_directories(cfg.out_dir / "audits");
    std::vector<Json> blueprint_lines;
    int accepted = 0;
    int backend_failures = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::string task_id = detail::task_name(static_cast<int>(i));
        write_text_file((cfg.out_dir / "audits" / (task_id + ".json")).string(),
                        outcomes[i].audit_json(task_id).dump(2) + "\n");
        if (outcomes[i].error) ++backend_failures;
        if (!outcomes[i].accepted) continue;
        ++accepted;
        TaskBlueprint bp = *outcomes[i].blueprint;
        bp.provenance["task_id"] = task_id;
        blueprint_lines.push_back(bp.to_jsonl());
    }
    write_jsonl(cfg.out_dir / "blueprints.jsonl", blueprint_lines);

    const Json manifest{{"command", "gen-blueprints"}, {"seed", cfg.seed},
                        {"config_hash", cfg.config_hash}, {"tasks", cfg.tasks},
                        {"accepted", accepted}, {"backend_failures", backend_failures}};
    detail::write_manifest(cfg.out_dir, manifest);
    return manifest;
}

inline Json run_recombine(const RunConfig& cfg, const std::filesystem::path& blueprints_path) {
    const RunAssets assets = load_run_assets(cfg);
    auto generator = make_backend(cfg.generator);
    auto reviewer = make_backend(cfg.reviewer);
    std::vector<std::unique_ptr<Backend>> judges;
    Phase1Backends backends;
    backends.generator = generator.get();
    backends.reviewer = reviewer.get();
    for (const auto& judge_cfg : cfg.judges) {
        judges.push_back(make_backend(judge_cfg));
        backends.judges.push_back(judges.back().get());
    }

    const std::vector<TaskBlueprint> blueprints = detail::read_blueprints(blueprints_path);

    // Pairs are enumerated within persona groups, groups in first-appearance
    // order, so a rerun visits the same combinations.
    std::vector<std::string> group_order;
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < blueprints.size(); ++i) {
        const std::string& persona_id = blueprints[i].persona.id;
        if (groups.find(persona_id) == groups.end()) group_order.push_back(persona_id);
        groups[persona_id].push_back(i);
    }

    std::filesystem::create_directories(cfg.out_dir);
    std::vector<Json> combined_lines;
    Json combination_records = Json::array();
    int attempted = 0;
    int accepted = 0;
    for (const auto& persona_id : group_order) {
        const auto& members = groups[persona_id];
        for (std::size_t a = 0; a < members.size(); ++a) {
            for (std::size_t b = a + 1; b < members.size(); ++b) {
                if (attempted >= cfg.max_combinations) break;
                ++attempted;
                const std::string task_id = "comb-" + detail::zero_padded(attempted, 4);
                const RecombineOutcome outcome =
                    recombine({blueprints[members[a]], blueprints[members[b]]}, assets.pack,
                              assets.prompts, backends, cfg.phase1, task_id);
                Json record{{"task_id", task_id},
                            {"sources", Json::array({members[a] + 1, members[b] + 1})},
                            {"persona_id", persona_id},
                            {"accepted", outcome.accepted}};
                if (!outcome.accepted) record["reason"] = outcome.reason;
                combination_records.push_back(std::move(record));
                if (!outcome.accepted) continue;
                ++accepted;
                TaskBlueprint bp = *outcome.blueprint;
                bp.provenance["task_id"] = task_id;
                combined_lines.push_back(bp.to_jsonl());
            }
        }
    }
    write_jsonl(cfg.out_dir / "combined.jsonl", combined_lines);

    const Json manifest{{"command", "recombine"}, {"seed", cfg.seed},
                        {"config_hash", cfg.config_hash}, {"attempted", attempted},
                        {"accepted", accepted}, {"combinations", combination_records}};
    detail::write_manifest(cfg.out_dir, manifest);
    return manifest;
}

inline Json run_simulate(const RunConfig& cfg, const std::filesystem::path& blueprints_path) {
    const RunAssets assets = load_run_assets(cfg);
    auto human = make_backend(cfg.human);
    auto agent = make_backend(cfg.agent);
    auto bon_judge = make_backend(cfg.bon_judge);
    EpisodeConfig episode = cfg.episode;
    episode.human = human.get();
    episode.agent = agent.get();
    episode.bon_judge = bon_judge.get();

    std::map<std::string, std::string> persona_descriptions;
    for (const auto& p : assets.personas) persona_descriptions[p.id] = p.description;

    std::vector<TaskBlueprint> blueprints = detail::read_blueprints(blueprints_path);
    std::vector<std::string> task_ids(blueprints.size());
    for (std::size_t i = 0; i < blueprints.size(); ++i) {
        auto& bp = blueprints[i];
        task_ids[i] = bp.provenance.is_object() && bp.provenance.contains("task_id")
                          ? bp.provenance.at("task_id").get<std::string>()
                          : "line-" + detail::zero_padded(static_cast<int>(i) + 1, 4);
    }

    struct TaskResult {
        CollectReport report;
        std::optional<std::string> error;
    };
    std::vector<TaskResult> results(blueprints.size());
    detail::parallel_for(blueprints.size(), cfg.workers, [&](std::size_t i) {
        auto& bp = blueprints[i];
        try {
            const auto it = persona_descriptions.find(bp.persona.id);
            if (it == persona_descriptions.end()) {
                throw std::runtime_error("persona " + bp.persona.id + " is not in the pack");
            }
            bp.persona.description = it->second;
            results[i].report = collect_report(bp, assets.pack, assets.prompts, episode,
                                               task_ids[i]);
        } catch (const std::exception& e) {
            results[i].error = e.what();
        }
    });

    std::filesystem::create_directories(cfg.out_dir);
    std::vector<Json> trajectory_lines;
    Json per_task = Json::array();
    std::size_t episodes = 0;
    std::size_t successes = 0;
    std::size_t kept = 0;
    int failed_tasks = 0;
    for (std::size_t i = 0; i < blueprints.size(); ++i) {
        const TaskResult& result = results[i];
        Json entry{{"task_id", task_ids[i]}};
        if (result.error) {
            ++failed_tasks;
            entry["error"] = *result.error;
            entry["attempts"] = Json::array();
            entry["kept"] = 0;
        } else {
            Json attempts = Json::array();
            for (const auto& a : result.report.attempts) {
                episodes += 1;
                successes += a.reward == 1 ? 1 : 0;
                attempts.push_back(a.to_json());
            }
            entry["attempts"] = std::move(attempts);
            entry["kept"] = result.report.kept.size();
            kept += result.report.kept.size();
            for (const auto& traj : result.report.kept) trajectory_lines.push_back(traj.to_json());
        }
        per_task.push_back(std::move(entry));
    }
    write_jsonl(cfg.out_dir / "trajectories.jsonl", trajectory_lines);

    const Json manifest{{"command", "simulate"},       {"seed", cfg.seed},
                        {"config_hash", cfg.config_hash}, {"tasks", blueprints.size()},
                        {"episodes", episodes},        {"successes", successes},
                        {"kept", kept},                {"failed_tasks", failed_tasks},
                        {"per_task", per_task}};
    detail::write_manifest(cfg.out_dir, manifest);
    return manifest;
}

// Trial matrix for pass^k: each simulate manifest contributes its attempt
// outcomes, merged by task_id across repeated runs.
inline TrialMatrix trial_matrix_from_manifests(const std::vector<std::filesystem::path>& paths) {
    std::vector<std::string> order;
    std::map<std::string, TrialCell> cells;
    for (const auto& path : paths) {
        Json manifest;
        try {
            manifest = Json::parse(read_text_file(path.string()));
        } catch (const std::exception& e) {
            throw ConfigError("cannot read manifest " + path.string() + ": " + e.what());
        }
        if (!manifest.is_object() || manifest.value("command", "") != "simulate" ||
            !manifest.contains("per_task")) {
            throw ConfigError(path.string() + " is not a simulate manifest");
        }
        for (const auto& entry : manifest.at("per_task")) {
            const std::string task_id = entry.at("task_id").get<std::string>();
            if (cells.find(task_id) == cells.end()) {
                order.push_back(task_id);
                cells[task_id] = TrialCell{task_id, 0, 0};
            }
            TrialCell& cell = cells[task_id];
            for (const auto& attempt : entry.at("attempts")) {
                cell.n += 1;
                cell.c += attempt.at("reward").get<int>() == 1 ? 1 : 0;
            }
        }
    }
    TrialMatrix matrix;
    for (const auto& task_id : order) matrix.cells.push_back(cells[task_id]);
    return matrix;
}

inline std::string agent_system_prompt(const DomainPack& pack, const PromptSet& prompts) {
    std::vector<std::string> excerpts;
    for (const auto& p : pack.policy_texts) excerpts.push_back("[" + p.id + "] " + p.description);
    const std::map<std::string, std::string> vars{
        {"policy_excerpts", detail::join_lines(excerpts)}};
    return render_template(prompts.agent_system, vars);
}

}  // namespace agentforge
