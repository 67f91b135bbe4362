// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "agentforge/diff.hpp"
#include "agentforge/domain_pack.hpp"
#include "agentforge/gateway.hpp"
#include "agentforge/sampler.hpp"

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace agentforge {

struct TaskBlueprint {
    std::string thought;
    std::string instruction;
    std::vector<ToolCall> actions;
    std::vector<std::string> outputs;
    Persona persona;
    std::string domain;
    int round = 0;
    Json provenance = Json::object();

    // The task object shown to judges and reviewers.
    Json task_json() const {
        Json acts = Json::array();
        for (const auto& a : actions) acts.push_back(a.to_json());
        return Json{{"instruction", instruction}, {"actions", acts}, {"outputs", outputs}};
    }

    // One blueprints.jsonl line.
    Json to_jsonl() const {
        Json line = task_json();
        line["persona_id"] = persona.id;
        line["domain"] = domain;
        line["round"] = round;
        line["provenance"] = provenance;
        return line;
    }

    static TaskBlueprint from_jsonl(const Json& line) {
        TaskBlueprint bp;
        bp.instruction = line.at("instruction").get<std::string>();
        for (const auto& a : line.at("actions")) bp.actions.push_back(ToolCall::from_json(a));
        for (const auto& o : line.at("outputs")) bp.outputs.push_back(o.get<std::string>());
        bp.persona.id = line.at("persona_id").get<std::string>();
        bp.domain = line.at("domain").get<std::string>();
        bp.round = line.at("round").get<int>();
        bp.provenance = line.value("provenance", Json::object());
        return bp;
    }
};

enum class ValidationStage { format, execution, policy };

inline std::string to_string(ValidationStage stage) {
    switch (stage) {
        case ValidationStage::format: return "format";
        case ValidationStage::execution: return "execution";
        case ValidationStage::policy: return "policy";
    }
    return "format";
}

struct ValidationReport {
    ValidationStage stage = ValidationStage::format;
    bool passed = false;
    std::vector<std::string> failures;
    std::optional<DiffPatch> diff_patch;
    std::optional<Trace> trace;

    Json to_json() const {
        Json j{{"stage", to_string(stage)}, {"passed", passed}, {"failures", failures}};
        if (diff_patch) j["diff_patch"] = diff_patch->to_json();
        if (trace) j["trace"] = trace_to_json(*trace);
        return j;
    }
};

struct JudgeVerdict {
    std::string reflection;
    int correctness = 0;
    int completeness = 0;
    int satisfaction = 0;
    int creativity = 0;
    int total = 0;  // always the recomputed sum of the four bits
    std::string correction;
    bool parse_failed = false;

    Json to_json() const {
        return Json{{"reflection", reflection},   {"correctness", correctness},
                    {"completeness", completeness}, {"satisfaction", satisfaction},
                    {"creativity", creativity},     {"total", total},
                    {"correction", correction},     {"parse_failed", parse_failed}};
    }
};

struct CommitteeDecision {
    std::vector<JudgeVerdict> verdicts;
    int majority_correctness = 0;
    int majority_completeness = 0;
    int majority_satisfaction = 0;
    int majority_creativity = 0;
    int majority_total = 0;
    bool accepted = false;

    Json to_json() const {
        Json vs = Json::array();
        for (const auto& v : verdicts) vs.push_back(v.to_json());
        return Json{{"verdicts", vs},
                    {"majority_correctness", majority_correctness},
                    {"majority_completeness", majority_completeness},
                    {"majority_satisfaction", majority_satisfaction},
                    {"majority_creativity", majority_creativity},
                    {"majority_total", majority_total},
                    {"accepted", accepted}};
    }
};

struct FeedbackSummary {
    std::string thought;
    std::string summary;

    Json to_json() const { return Json{{"thought", thought}, {"summary", summary}}; }
};

// -- tag and blueprint parsing ----------------------------------------------

inline std::optional<std::string> extract_tag(const std::string& text, const std::string& tag) {
    const std::string open = "<" + tag + ">";
    const std::string close = "</" + tag + ">";
    const auto start = text.find(open);
    if (start == std::string::npos) return std::nullopt;
    const auto end = text.find(close, start + open.size());
    if (end == std::string::npos) return std::nullopt;
    return text.substr(start + open.size(), end - start - open.size());
}

// Strict parse of a generator response. Every failure message names the
// offending component so the reflection loop can feed it back.
inline TaskBlueprint parse_blueprint(const std::string& text) {
    const auto thought = extract_tag(text, "thought");
    if (!thought) throw std::runtime_error("missing <thought> tag");
    const auto answer = extract_tag(text, "answer");
    if (!answer) throw std::runtime_error("missing <answer> tag");

    // Json::parse rejects trailing commentary, which keeps <answer> strict.
    Json j = Json::parse(*answer, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw std::runtime_error("<answer> is not a strict JSON object");
    }
    if (!j.contains("instruction") || !j.at("instruction").is_string() ||
        j.at("instruction").get<std::string>().empty()) {
        throw std::runtime_error("instruction must be a non-empty string");
    }
    if (!j.contains("actions") || !j.at("actions").is_array()) {
        throw std::runtime_error("actions must be an array of tool calls");
    }
    if (!j.contains("outputs") || !j.at("outputs").is_array()) {
        throw std::runtime_error("outputs must be an array of strings");
    }

    TaskBlueprint bp;
    bp.thought = *thought;
    bp.instruction = j.at("instruction").get<std::string>();
    std::size_t index = 0;
    for (const auto& entry : j.at("actions")) {
        if (!entry.is_object() || !entry.contains("name") || !entry.at("name").is_string() ||
            !entry.contains("arguments") || !entry.at("arguments").is_object()) {
            throw std::runtime_error("actions[" + std::to_string(index) +
                                     "] must be an object with name and arguments");
        }
        bp.actions.push_back(ToolCall{entry.at("name").get<std::string>(), entry.at("arguments")});
        ++index;
    }
    index = 0;
    for (const auto& entry : j.at("outputs")) {
        if (!entry.is_string()) {
            throw std::runtime_error("outputs[" + std::to_string(index) +
                                     "] must be a string (outputs are strings)");
        }
        bp.outputs.push_back(entry.get<std::string>());
        ++index;
    }
    if (bp.actions.empty() && bp.outputs.empty()) {
        throw std::runtime_error("actions and outputs are both empty");
    }
    return bp;
}

// -- stage 1: format, execution, policy --------------------------------------

// Reports stop at the first failing stage. On a full pass the execution
// report carries the trace and the cumulative diff patch.
inline std::vector<ValidationReport> stage1_validate(const TaskBlueprint& bp, const DomainPack& pack) {
    std::vector<ValidationReport> reports;
    reports.push_back(ValidationReport{ValidationStage::format, true, {}, std::nullopt, std::nullopt});

    EntityStore store = fork(pack.seed);
    const StateSnapshot before = snapshot(store);
    Trace trace;
    ValidationReport exec;
    exec.stage = ValidationStage::execution;
    exec.passed = true;
    std::size_t index = 0;
    for (const auto& action : bp.actions) {
        const ToolResult result = execute(action, pack.registry, store);
        trace.push_back(TraceEntry{action, result});
        if (!result.is_ok()) {
            exec.passed = false;
            exec.failures.push_back("actions[" + std::to_string(index) + "] " + action.name + ": " +
                                    result.message);
            break;
        }
        ++index;
    }
    exec.trace = trace;
    if (exec.passed) {
        exec.diff_patch = diff(before, snapshot(store));
    }
    reports.push_back(exec);
    if (!exec.passed) return reports;

    ValidationReport policy;
    policy.stage = ValidationStage::policy;
    const auto violations = run_policies(pack.rules, trace, pack.seed, store);
    policy.passed = violations.empty();
    for (const auto& v : violations) {
        policy.failures.push_back("[" + v.rule_id + "] " + v.message);
    }
    reports.push_back(policy);
    return reports;
}

inline bool stage1_passed(const std::vector<ValidationReport>& reports) {
    for (const auto& r : reports) {
        if (!r.passed) return false;
    }
    return !reports.empty();
}

// Diff patch attached to the execution report of a passing stage 1.
inline const DiffPatch& stage1_diff(const std::vector<ValidationReport>& reports) {
    for (const auto& r : reports) {
        if (r.stage == ValidationStage::execution && r.diff_patch) return *r.diff_patch;
    }
    throw std::runtime_error("stage 1 reports carry no diff patch");
}

// -- stage 2: judge committee -------------------------------------------------

namespace detail {

inline std::optional<int> parse_bit(const Json& j, const char* key) {
    if (!j.contains(key) || !j.at(key).is_number_integer()) return std::nullopt;
    const int v = j.at(key).get<int>();
    if (v != 0 && v != 1) return std::nullopt;
    return v;
}

inline std::optional<JudgeVerdict> parse_verdict(const std::string& text) {
    const auto scores = extract_tag(text, "scores");
    if (!scores) return std::nullopt;
    Json j = Json::parse(*scores, nullptr, false);
    if (j.is_discarded() || !j.is_object()) return std::nullopt;
    JudgeVerdict v;
    const auto correctness = parse_bit(j, "correctness");
    const auto completeness = parse_bit(j, "completeness");
    const auto satisfaction = parse_bit(j, "satisfaction");
    const auto creativity = parse_bit(j, "creativity");
    if (!correctness || !completeness || !satisfaction || !creativity) return std::nullopt;
    v.correctness = *correctness;
    v.completeness = *completeness;
    v.satisfaction = *satisfaction;
    v.creativity = *creativity;
    v.total = v.correctness + v.completeness + v.satisfaction + v.creativity;
    v.reflection = j.value("reflection", "");
    v.correction = j.value("correction", "");
    return v;
}

}  // namespace detail

// Pure majority aggregation: a metric carries when strictly more than half
// of the verdicts score it 1. Acceptance needs majority_total >= threshold
// and the correctness majority bit set.
inline CommitteeDecision aggregate_votes(std::vector<JudgeVerdict> verdicts, int threshold) {
    CommitteeDecision decision;
    const std::size_t n = verdicts.size();
    int ones_correctness = 0;
    int ones_completeness = 0;
    int ones_satisfaction = 0;
    int ones_creativity = 0;
    for (const auto& v : verdicts) {
        ones_correctness += v.correctness;
        ones_completeness += v.completeness;
        ones_satisfaction += v.satisfaction;
        ones_creativity += v.creativity;
    }
    const auto majority = [n](int ones) { return 2 * ones > static_cast<int>(n) ? 1 : 0; };
    decision.majority_correctness = majority(ones_correctness);
    decision.majority_completeness = majority(ones_completeness);
    decision.majority_satisfaction = majority(ones_satisfaction);
    decision.majority_creativity = majority(ones_creativity);
    decision.majority_total = decision.majority_correctness + decision.majority_completeness +
                              decision.majority_satisfaction + decision.majority_creativity;
    decision.accepted = decision.majority_total >= threshold && decision.majority_correctness == 1;
    decision.verdicts = std::move(verdicts);
    return decision;
}

inline std::map<std::string, std::string> judge_prompt_variables(const TaskBlueprint& bp,
                                                                 const DiffPatch& patch,
                                                                 const DomainPack& pack) {
    std::vector<std::string> stubs;
    for (const auto& spec : pack.registry.specs()) stubs.push_back(to_python_stub(spec));
    return {{"task", bp.task_json().dump(2)},
            {"tools", detail::join_blocks(stubs)},
            {"diff_patch", patch.empty() ? std::string("(empty)") : patch.to_json().dump(2)}};
}

// Each judge is queried once and re-queried once on an unparseable verdict;
// a second failure counts as an all-zero verdict (fail-closed).
inline CommitteeDecision stage2_committee(const TaskBlueprint& bp, const DiffPatch& patch,
                                          const DomainPack& pack, const std::string& template_text,
                                          const std::vector<Backend*>& judges, int threshold,
                                          double temperature, const std::string& conversation_prefix) {
    if (judges.empty() || judges.size() % 2 == 0) {
        throw std::runtime_error("judge committee size must be odd");
    }
    const std::string prompt = render_template(template_text, judge_prompt_variables(bp, patch, pack));
    std::vector<JudgeVerdict> verdicts;
    for (std::size_t i = 0; i < judges.size(); ++i) {
        CallOptions options{temperature, conversation_prefix + "/judge" + std::to_string(i)};
        const std::vector<ChatMessage> messages{ChatMessage::text(Role::user, prompt)};
        std::optional<JudgeVerdict> verdict;
        for (int attempt = 0; attempt < 2 && !verdict; ++attempt) {
            const ChatMessage reply = complete(*judges[i], messages, {}, options);
            verdict = detail::parse_verdict(reply.content.value_or(""));
        }
        if (!verdict) {
            JudgeVerdict zero;
            zero.reflection = "verdict unparseable after retry; scored all-zero";
            zero.parse_failed = true;
            verdict = zero;
        }
        verdicts.push_back(std::move(*verdict));
    }
    return aggregate_votes(std::move(verdicts), threshold);
}

// -- stage 3: semantic review ---------------------------------------------

// Accepted decisions return nullopt without consulting the reviewer; for
// rejections the reviewer condenses the judges' feedback for the generator.
inline std::optional<FeedbackSummary> stage3_review(const TaskBlueprint& bp, const DiffPatch& patch,
                                                    const CommitteeDecision& decision,
                                                    const std::string& template_text, Backend& reviewer,
                                                    double temperature,
                                                    const std::string& conversation_prefix) {
    if (decision.accepted) return std::nullopt;

    std::vector<std::string> reviews;
    for (std::size_t i = 0; i < decision.verdicts.size(); ++i) {
        reviews.push_back("Judge " + std::to_string(i) + ": " + decision.verdicts[i].to_json().dump(2));
    }
    const std::string prompt = render_template(
        template_text,
        {{"diff_patch", patch.empty() ? std::string("(empty)") : patch.to_json().dump(2)},
         {"task", bp.task_json().dump(2)},
         {"reviews", detail::join_blocks(reviews)}});
    const ChatMessage reply =
        complete(reviewer, {ChatMessage::text(Role::user, prompt)}, {},
                 CallOptions{temperature, conversation_prefix + "/reviewer"});
    const std::string text = reply.content.value_or("");
    const auto summary = extract_tag(text, "summary");
    if (!summary || summary->empty()) {
        throw std::runtime_error("reviewer response has no <summary> tag");
    }
    FeedbackSummary fs;
    fs.thought = extract_tag(text, "thought").value_or("");
    fs.summary = *summary;
    return fs;
}

// -- the refinement loop ------------------------------------------------------

struct PromptSet {
    std::string generation;
    std::string validation;
    std::string review;
    std::string recombine;
    std::string human_system;
    std::string bon_judge;
    std::string agent_system;
};

inline PromptSet load_prompts(const std::filesystem::path& dir) {
    PromptSet p;
    p.generation = read_text_file(dir / "task_generation.txt");
    p.validation = read_text_file(dir / "alignment_validation.txt");
    p.review = read_text_file(dir / "semantic_review.txt");
    p.recombine = read_text_file(dir / "recombine.txt");
    p.human_system = read_text_file(dir / "human_system.txt");
    p.bon_judge = read_text_file(dir / "bon_judge.txt");
    p.agent_system = read_text_file(dir / "agent_system.txt");
    return p;
}

struct Phase1Backends {
    Backend* generator = nullptr;
    std::vector<Backend*> judges;
    Backend* reviewer = nullptr;
};

struct Phase1Config {
    SamplerKnobs knobs;
    int max_rounds = 3;
    int committee_threshold = 3;
    double generator_temperature = 1.0;
    double judge_temperature = 0.0;
};

struct RoundAudit {
    int round = 0;
    std::string proposal;
    std::optional<std::string> parse_error;
    std::vector<ValidationReport> reports;
    std::optional<CommitteeDecision> decision;
    std::optional<FeedbackSummary> feedback;

    Json to_json() const {
        Json j{{"round", round}, {"proposal", proposal}};
        if (parse_error) j["parse_error"] = *parse_error;
        Json rs = Json::array();
        for (const auto& r : reports) rs.push_back(r.to_json());
        j["reports"] = std::move(rs);
        if (decision) j["decision"] = decision->to_json();
        if (feedback) j["feedback"] = feedback->to_json();
        return j;
    }
};

struct RefineOutcome {
    bool accepted = false;
    std::optional<TaskBlueprint> blueprint;
    std::vector<RoundAudit> rounds;
    std::optional<std::string> error;  // backend failure that aborted the loop

    Json audit_json(const std::string& task_id) const {
        Json rs = Json::array();
        for (const auto& r : rounds) rs.push_back(r.to_json());
        Json j{{"task_id", task_id}, {"accepted", accepted}, {"rounds", rs}};
        if (blueprint) j["blueprint"] = blueprint->to_jsonl();
        if (error) j["error"] = *error;
        return j;
    }
};

namespace detail {

inline std::string improvement_block(const std::vector<std::string>& feedback_lines) {
    if (feedback_lines.empty()) return "";
    std::string block = "## Improvement plan\n";
    block += "Earlier proposals for this task failed validation. Fix the following before anything else:\n";
    for (const auto& line : feedback_lines) block += "- " + line + "\n";
    return block + "\n";
}

}  // namespace detail

// Propose, parse, validate, judge, review; on failure feed the distilled
// feedback into the next round's prompt. The sampled context is fixed for
// the whole task so feedback stays meaningful across rounds.
inline RefineOutcome refine_loop(const DomainPack& pack, const ApiGraph& graph,
                                 const std::vector<Persona>& personas,
                                 const std::vector<std::string>& examples, const PromptSet& prompts,
                                 const Phase1Backends& backends, const Phase1Config& cfg,
                                 std::uint64_t task_seed, const std::string& task_id) {
    if (cfg.max_rounds < 1) throw std::runtime_error("max_rounds must be >= 1");
    if (backends.generator == nullptr || backends.reviewer == nullptr) {
        throw std::runtime_error("phase 1 requires generator and reviewer backends");
    }

    const GenerationContext ctx =
        sample_context(pack, graph, personas, examples, mix_seed(task_seed, 0x5eed), cfg.knobs);
    const std::string base_prompt = render_prompt(ctx, pack, prompts.generation);

    RefineOutcome outcome;
    std::vector<std::string> feedback_lines;
    for (int round = 1; round <= cfg.max_rounds; ++round) {
        RoundAudit audit;
        audit.round = round;

        const std::string prompt = detail::improvement_block(feedback_lines) + base_prompt;
        ChatMessage proposal;
        try {
            proposal = complete(*backends.generator, {ChatMessage::text(Role::user, prompt)}, {},
                                CallOptions{cfg.generator_temperature, task_id + "/generator"});
        } catch (const std::exception& e) {
            outcome.error = e.what();
            outcome.rounds.push_back(std::move(audit));
            return outcome;
        }
        audit.proposal = proposal.content.value_or("");

        TaskBlueprint bp;
        try {
            bp = parse_blueprint(audit.proposal);
        } catch (const std::exception& e) {
            audit.parse_error = e.what();
            audit.reports.push_back(
                ValidationReport{ValidationStage::format, false, {e.what()}, std::nullopt, std::nullopt});
            feedback_lines.push_back(std::string("format: ") + e.what());
            outcome.rounds.push_back(std::move(audit));
            continue;
        }
        bp.persona = ctx.persona;
        bp.domain = pack.name;
        bp.round = round;
        bp.provenance = Json{{"seed", task_seed}, {"context", ctx.to_json()}};

        audit.reports = stage1_validate(bp, pack);
        if (!stage1_passed(audit.reports)) {
            for (const auto& report : audit.reports) {
                for (const auto& failure : report.failures) {
                    feedback_lines.push_back(to_string(report.stage) + ": " + failure);
                }
            }
            outcome.rounds.push_back(std::move(audit));
            continue;
        }

        const DiffPatch& patch = stage1_diff(audit.reports);
        try {
            audit.decision = stage2_committee(bp, patch, pack, prompts.validation, backends.judges,
                                              cfg.committee_threshold, cfg.judge_temperature,
                                              task_id + "/r" + std::to_string(round));
            if (audit.decision->accepted) {
                outcome.accepted = true;
                outcome.blueprint = std::move(bp);
                outcome.rounds.push_back(std::move(audit));
                return outcome;
            }
            audit.feedback = stage3_review(bp, patch, *audit.decision, prompts.review,
                                           *backends.reviewer, cfg.judge_temperature,
                                           task_id + "/r" + std::to_string(round));
        } catch (const std::exception& e) {
            outcome.error = e.what();
            outcome.rounds.push_back(std::move(audit));
            return outcome;
        }
        if (audit.feedback) feedback_lines.push_back(audit.feedback->summary);
        outcome.rounds.push_back(std::move(audit));
    }
    return outcome;
}

// -- reverse task recombination ---------------------------------------------

struct RecombineOutcome {
    bool accepted = false;
    std::optional<TaskBlueprint> blueprint;
    std::string reason;  // set when rejected
    std::optional<CommitteeDecision> decision;
};

namespace detail {

inline std::set<std::string> patch_paths(const DiffPatch& patch) {
    std::set<std::string> out;
    for (const auto& hunk : patch.hunks) out.insert(hunk.path);
    return out;
}

}  // namespace detail

// Concatenates validated blueprints for one persona, re-checks policy on
// the combined trace, synthesizes one instruction, then re-enters the
// pipeline at stage 2. Stage 1 re-runs in full only when the constituents'
// diff patches overlap; disjoint patches keep the skip sound.
inline RecombineOutcome recombine(const std::vector<TaskBlueprint>& tasks, const DomainPack& pack,
                                  const PromptSet& prompts, const Phase1Backends& backends,
                                  const Phase1Config& cfg, const std::string& task_id) {
    RecombineOutcome outcome;
    if (tasks.empty()) {
        outcome.reason = "no tasks to combine";
        return outcome;
    }
    for (const auto& task : tasks) {
        if (task.persona.id != tasks.front().persona.id) {
            outcome.reason = "persona mismatch: " + task.persona.id + " vs " + tasks.front().persona.id;
            return outcome;
        }
    }

    // Constituent patches, each replayed from the seed state.
    std::vector<std::set<std::string>> touched;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        EntityStore store = fork(pack.seed);
        const StateSnapshot before = snapshot(store);
        for (const auto& action : tasks[i].actions) {
            const ToolResult result = execute(action, pack.registry, store);
            if (!result.is_ok()) {
                outcome.reason = "constituent " + std::to_string(i) + " no longer replays: " +
                                 result.message;
                return outcome;
            }
        }
        touched.push_back(detail::patch_paths(diff(before, snapshot(store))));
    }
    bool overlap = false;
    for (std::size_t i = 0; i < touched.size() && !overlap; ++i) {
        for (std::size_t j = i + 1; j < touched.size() && !overlap; ++j) {
            for (const auto& path : touched[i]) {
                if (touched[j].count(path) != 0) {
                    overlap = true;
                    break;
                }
            }
        }
    }

    TaskBlueprint combined;
    combined.persona = tasks.front().persona;
    combined.domain = tasks.front().domain;
    combined.round = 0;
    for (const auto& task : tasks) {
        combined.actions.insert(combined.actions.end(), task.actions.begin(), task.actions.end());
        combined.outputs.insert(combined.outputs.end(), task.outputs.begin(), task.outputs.end());
    }

    // Combined replay: the trace feeds the policy re-check even when an
    // action fails (a destroyed precondition is itself evidence).
    EntityStore store = fork(pack.seed);
    const StateSnapshot before = snapshot(store);
    Trace trace;
    bool all_ok = true;
    for (const auto& action : combined.actions) {
        const ToolResult result = execute(action, pack.registry, store);
        trace.push_back(TraceEntry{action, result});
        all_ok &= result.is_ok();
    }
    const auto violations = run_policies(pack.rules, trace, pack.seed, store);
    if (!violations.empty()) {
        outcome.reason = "policy re-check failed: [" + violations.front().rule_id + "] " +
                         violations.front().message;
        return outcome;
    }
    if (overlap && !all_ok) {
        for (const auto& entry : trace) {
            if (!entry.result.is_ok()) {
                outcome.reason = "overlapping constituents fail combined execution: " +
                                 entry.call.name + ": " + entry.result.message;
                return outcome;
            }
        }
    }
    const DiffPatch patch = diff(before, snapshot(store));

    // Synthesize the combined instruction from the constituents.
    std::vector<std::string> instruction_lines;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        instruction_lines.push_back(std::to_string(i + 1) + ". " + tasks[i].instruction);
    }
    const std::string prompt = render_template(
        prompts.recombine, {{"instructions", detail::join_lines(instruction_lines)}});
    const ChatMessage reply =
        complete(*backends.generator, {ChatMessage::text(Role::user, prompt)}, {},
                 CallOptions{cfg.generator_temperature, task_id + "/recombiner"});
    const auto answer = extract_tag(reply.content.value_or(""), "answer");
    if (!answer) {
        outcome.reason = "recombiner response has no <answer> tag";
        return outcome;
    }
    Json j = Json::parse(*answer, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("instruction") ||
        !j.at("instruction").is_string()) {
        outcome.reason = "recombiner answer lacks an instruction string";
        return outcome;
    }
    combined.instruction = j.at("instruction").get<std::string>();

    Json sources = Json::array();
    for (const auto& task : tasks) sources.push_back(task.provenance.value("seed", Json()));
    combined.provenance = Json{{"kind", "recombination"}, {"source_seeds", sources}};

    outcome.decision = stage2_committee(combined, patch, pack, prompts.validation, backends.judges,
                                        cfg.committee_threshold, cfg.judge_temperature, task_id);
    if (!outcome.decision->accepted) {
        const auto feedback = stage3_review(combined, patch, *outcome.decision, prompts.review,
                                            *backends.reviewer, cfg.judge_temperature, task_id);
        outcome.reason = "committee rejected the combination: " +
                         (feedback ? feedback->summary : std::string("no feedback"));
        return outcome;
    }
    outcome.accepted = true;
    outcome.blueprint = std::move(combined);
    return outcome;
}

}  // namespace agentforge
