// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "agentforge/blueprint.hpp"

#include <algorithm>
#include <cctype>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace agentforge {

inline constexpr const char* kStopSignal = "###STOP###";

enum class Speaker { human, assistant, tool };

inline std::string to_string(Speaker s) {
    switch (s) {
        case Speaker::human: return "human";
        case Speaker::assistant: return "assistant";
        case Speaker::tool: return "tool";
    }
    return "human";
}

inline Speaker speaker_from_string(const std::string& s) {
    if (s == "human") return Speaker::human;
    if (s == "assistant") return Speaker::assistant;
    if (s == "tool") return Speaker::tool;
    throw std::runtime_error("unknown speaker: " + s);
}

// One event in an episode. Humans carry content (plus BoN scores when
// sampled), assistants carry either content or a tool_call, tool records
// carry the result of the preceding call.
struct TurnRecord {
    Speaker speaker = Speaker::human;
    std::optional<std::string> content;
    std::optional<ToolCall> tool_call;
    std::optional<ToolResult> tool_result;
    std::optional<std::vector<int>> bon_scores;

    bool is_dialogue() const {
        return (speaker == Speaker::human || speaker == Speaker::assistant) && content.has_value();
    }

    Json to_json() const {
        Json j{{"speaker", to_string(speaker)}};
        if (content) j["content"] = *content;
        if (tool_call) j["tool_call"] = tool_call->to_json();
        if (tool_result) j["tool_result"] = tool_result->to_json();
        if (bon_scores) j["bon_scores"] = *bon_scores;
        return j;
    }

    static TurnRecord from_json(const Json& j) {
        TurnRecord r;
        r.speaker = speaker_from_string(j.at("speaker").get<std::string>());
        if (j.contains("content")) r.content = j.at("content").get<std::string>();
        if (j.contains("tool_call")) r.tool_call = ToolCall::from_json(j.at("tool_call"));
        if (j.contains("tool_result")) r.tool_result = ToolResult::from_json(j.at("tool_result"));
        if (j.contains("bon_scores")) r.bon_scores = j.at("bon_scores").get<std::vector<int>>();
        return r;
    }
};

enum class StopReason { human_stop, max_turns, error };

inline std::string to_string(StopReason s) {
    switch (s) {
        case StopReason::human_stop: return "human_stop";
        case StopReason::max_turns: return "max_turns";
        case StopReason::error: return "error";
    }
    return "error";
}

inline StopReason stop_reason_from_string(const std::string& s) {
    if (s == "human_stop") return StopReason::human_stop;
    if (s == "max_turns") return StopReason::max_turns;
    if (s == "error") return StopReason::error;
    throw std::runtime_error("unknown stop reason: " + s);
}

struct Trajectory {
    std::string task_id;
    int attempt = 0;
    std::vector<TurnRecord> turns;
    StateSnapshot final_snapshot;
    int reward = 0;
    StopReason stop_reason = StopReason::error;
    std::vector<std::string> warnings;

    Json to_json() const {
        Json ts = Json::array();
        for (const auto& t : turns) ts.push_back(t.to_json());
        return Json{{"task_id", task_id},
                    {"attempt", attempt},
                    {"turns", ts},
                    {"final_snapshot", final_snapshot.canonical},
                    {"reward", reward},
                    {"stop_reason", to_string(stop_reason)},
                    {"warnings", warnings}};
    }

    static Trajectory from_json(const Json& j) {
        Trajectory t;
        t.task_id = j.at("task_id").get<std::string>();
        t.attempt = j.at("attempt").get<int>();
        for (const auto& turn : j.at("turns")) t.turns.push_back(TurnRecord::from_json(turn));
        t.final_snapshot = StateSnapshot{j.at("final_snapshot").get<std::string>()};
        t.reward = j.at("reward").get<int>();
        t.stop_reason = stop_reason_from_string(j.at("stop_reason").get<std::string>());
        t.warnings = j.value("warnings", std::vector<std::string>{});
        return t;
    }
};

struct RewardReport {
    bool state_match = false;
    std::vector<std::pair<std::string, bool>> outputs_found;
    int r = 0;

    Json to_json() const {
        Json outs = Json::array();
        for (const auto& [text, found] : outputs_found) {
            outs.push_back(Json{{"output", text}, {"found", found}});
        }
        return Json{{"state_match", state_match}, {"outputs_found", outs}, {"r", r}};
    }
};

struct EpisodeConfig {
    int max_turns = 30;
    int attempts = 3;
    int bon_n = 4;
    int tool_call_cap = 10;
    double human_temperature = 1.0;
    double agent_temperature = 0.0;
    double judge_temperature = 0.0;
    Backend* human = nullptr;
    Backend* agent = nullptr;
    Backend* bon_judge = nullptr;
};

inline bool contains_stop_signal(const std::string& text) {
    return text.find(kStopSignal) != std::string::npos;
}

namespace detail {

// The human simulator plays the "user": it sees its own messages as
// assistant turns and the agent's replies as user turns.
inline std::vector<ChatMessage> human_view(const TaskBlueprint& bp, const PromptSet& prompts,
                                           const std::vector<TurnRecord>& turns) {
    std::vector<ChatMessage> messages;
    messages.push_back(ChatMessage::text(
        Role::system, render_template(prompts.human_system, {{"persona", bp.persona.description},
                                                             {"instruction", bp.instruction}})));
    for (const auto& turn : turns) {
        if (!turn.is_dialogue()) continue;
        const Role role = turn.speaker == Speaker::human ? Role::assistant : Role::user;
        messages.push_back(ChatMessage::text(role, *turn.content));
    }
    return messages;
}

// The agent sees the genuine transcript: human messages as user turns,
// its own text and tool calls as assistant turns, results as tool turns.
inline std::vector<ChatMessage> agent_view(const DomainPack& pack, const PromptSet& prompts,
                                           const std::vector<TurnRecord>& turns) {
    std::vector<std::string> excerpts;
    for (const auto& p : pack.policy_texts) excerpts.push_back("[" + p.id + "] " + p.description);
    std::vector<ChatMessage> messages;
    messages.push_back(ChatMessage::text(
        Role::system,
        render_template(prompts.agent_system, {{"policy_excerpts", join_lines(excerpts)}})));
    int call_index = 0;
    for (const auto& turn : turns) {
        switch (turn.speaker) {
            case Speaker::human:
                messages.push_back(ChatMessage::text(Role::user, *turn.content));
                break;
            case Speaker::assistant:
                if (turn.content) {
                    messages.push_back(ChatMessage::text(Role::assistant, *turn.content));
                } else if (turn.tool_call) {
                    ChatMessage m;
                    m.role = Role::assistant;
                    m.tool_calls.push_back(
                        ChatToolCall{"call_" + std::to_string(call_index++), *turn.tool_call});
                    messages.push_back(std::move(m));
                }
                break;
            case Speaker::tool: {
                const std::string call_id = "call_" + std::to_string(call_index - 1);
                messages.push_back(
                    ChatMessage::tool_reply(call_id, turn.tool_result->to_json().dump()));
                break;
            }
        }
    }
    return messages;
}

inline std::optional<int> parse_bon_score(const std::string& text) {
    const auto tag = extract_tag(text, "score");
    if (!tag) return std::nullopt;
    std::string body = *tag;
    const auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    while (!body.empty() && is_space(body.front())) body.erase(body.begin());
    while (!body.empty() && is_space(body.back())) body.pop_back();
    if (body.empty()) return std::nullopt;
    try {
        std::size_t used = 0;
        const int value = std::stoi(body, &used);
        if (used != body.size()) return std::nullopt;
        return std::clamp(value, 0, 10);
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

}  // namespace detail

struct HumanTurnResult {
    std::string message;
    std::optional<std::vector<int>> bon_scores;  // only under bon_n > 1
};

// Samples the next human message. With bon_n > 1 the candidates are scored
// by the BoN judge against the blueprint instruction; the best candidate
// wins and ties break toward the lowest index.
inline HumanTurnResult human_turn(const TaskBlueprint& bp, const PromptSet& prompts,
                                  const std::vector<TurnRecord>& turns, const EpisodeConfig& cfg,
                                  const std::string& conversation_prefix,
                                  std::vector<std::string>& warnings) {
    for (auto it = turns.rbegin(); it != turns.rend(); ++it) {
        if (!it->is_dialogue()) continue;
        if (it->speaker != Speaker::assistant) {
            throw std::runtime_error("human turn requires the last dialogue turn to be the assistant");
        }
        break;
    }
    if (cfg.human == nullptr) throw std::runtime_error("episode requires a human backend");

    const auto messages = detail::human_view(bp, prompts, turns);
    const CallOptions human_options{cfg.human_temperature, conversation_prefix + "/human"};
    if (cfg.bon_n <= 1) {
        const ChatMessage reply = complete(*cfg.human, messages, {}, human_options);
        return HumanTurnResult{reply.content.value_or(""), std::nullopt};
    }

    if (cfg.bon_judge == nullptr) throw std::runtime_error("bon_n > 1 requires a bon_judge backend");
    const auto candidates = complete_n(*cfg.human, messages, cfg.bon_n, {}, human_options);
    std::vector<int> scores;
    int parsed_any = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const std::string candidate = candidates[i].content.value_or("");
        const std::string prompt = render_template(
            prompts.bon_judge, {{"description", bp.instruction}, {"response", candidate}});
        const CallOptions judge_options{cfg.judge_temperature, conversation_prefix + "/bon_judge"};
        std::optional<int> score;
        for (int attempt = 0; attempt < 2 && !score; ++attempt) {
            const ChatMessage verdict =
                complete(*cfg.bon_judge, {ChatMessage::text(Role::user, prompt)}, {}, judge_options);
            score = detail::parse_bon_score(verdict.content.value_or(""));
        }
        if (score) {
            ++parsed_any;
        } else {
            warnings.push_back("bon candidate " + std::to_string(i) +
                               " scored 0: unparseable judge verdict");
        }
        scores.push_back(score.value_or(0));
    }

    std::size_t best = 0;
    if (parsed_any == 0) {
        warnings.push_back("all bon judge verdicts unparseable; returning the first candidate");
    } else {
        for (std::size_t i = 1; i < scores.size(); ++i) {
            if (scores[i] > scores[best]) best = i;  // strict: ties keep the lowest index
        }
    }
    return HumanTurnResult{candidates[best].content.value_or(""), scores};
}

// Runs the agent until it produces a plain text reply, executing each tool
// call against the episode store. Returns false when the per-turn tool cap
// is exceeded (the episode ends with stop_reason error).
inline bool agent_turn(const DomainPack& pack, const PromptSet& prompts,
                       std::vector<TurnRecord>& turns, const EpisodeConfig& cfg, EntityStore& store,
                       const std::string& conversation_prefix) {
    {
        const TurnRecord* last_dialogue = nullptr;
        for (auto it = turns.rbegin(); it != turns.rend(); ++it) {
            if (it->is_dialogue()) {
                last_dialogue = &*it;
                break;
            }
        }
        if (last_dialogue == nullptr || last_dialogue->speaker != Speaker::human) {
            throw std::runtime_error("agent turn requires a pending human message");
        }
        if (contains_stop_signal(*last_dialogue->content)) {
            throw std::runtime_error("agent turn requested after the stop signal");
        }
    }
    if (cfg.agent == nullptr) throw std::runtime_error("episode requires an agent backend");

    const auto tools = pack.registry.specs();
    const CallOptions options{cfg.agent_temperature, conversation_prefix + "/agent"};
    int calls_this_turn = 0;
    while (true) {
        const ChatMessage reply = complete(*cfg.agent, detail::agent_view(pack, prompts, turns), tools, options);
        if (reply.tool_calls.empty()) {
            TurnRecord text;
            text.speaker = Speaker::assistant;
            text.content = reply.content.value_or("");
            turns.push_back(std::move(text));
            return true;
        }
        for (const auto& chat_call : reply.tool_calls) {
            ++calls_this_turn;
            if (calls_this_turn > cfg.tool_call_cap) return false;
            TurnRecord call;
            call.speaker = Speaker::assistant;
            call.tool_call = chat_call.call;
            turns.push_back(std::move(call));
            TurnRecord result;
            result.speaker = Speaker::tool;
            result.tool_result = execute(chat_call.call, pack.registry, store);
            turns.push_back(std::move(result));
        }
    }
}

// Replays the groundtruth actions on a fresh fixture store and compares
// snapshots; output strings must appear in the agent's collected prose.
inline RewardReport evaluate_reward(const Trajectory& traj, const TaskBlueprint& bp,
                                    const DomainPack& pack) {
    EntityStore replay = fork(pack.seed);
    for (const auto& action : bp.actions) {
        const ToolResult result = execute(action, pack.registry, replay);
        if (!result.is_ok()) {
            throw std::runtime_error("blueprint actions no longer replay (" + action.name +
                                     "): " + result.message);
        }
    }
    RewardReport report;
    report.state_match = traj.final_snapshot == snapshot(replay);

    std::string prose;
    for (const auto& turn : traj.turns) {
        if (turn.speaker == Speaker::assistant && turn.content) {
            prose += *turn.content;
            prose += "\n";
        }
    }
    const std::string haystack = normalize_for_match(prose);
    bool all_found = true;
    for (const auto& output : bp.outputs) {
        const bool found = haystack.find(normalize_for_match(output)) != std::string::npos;
        report.outputs_found.emplace_back(output, found);
        all_found &= found;
    }
    report.r = (report.state_match && all_found) ? 1 : 0;
    return report;
}

// One full human-agent episode on an isolated forked store.
inline Trajectory run_episode(const TaskBlueprint& bp, const DomainPack& pack,
                              const PromptSet& prompts, const EpisodeConfig& cfg,
                              const std::string& task_id, int attempt) {
    if (cfg.max_turns < 1) throw std::runtime_error("max_turns must be >= 1");
    if (cfg.bon_n < 1) throw std::runtime_error("bon_n must be >= 1");

    Trajectory traj;
    traj.task_id = task_id;
    traj.attempt = attempt;

    EntityStore store = fork(pack.seed);
    const std::string key = task_id + "/a" + std::to_string(attempt);
    int dialogue_turns = 0;
    while (true) {
        try {
            const HumanTurnResult human = human_turn(bp, prompts, traj.turns, cfg, key, traj.warnings);
            TurnRecord record;
            record.speaker = Speaker::human;
            record.content = human.message;
            record.bon_scores = human.bon_scores;
            traj.turns.push_back(std::move(record));
            ++dialogue_turns;
            if (contains_stop_signal(human.message)) {
                traj.stop_reason = StopReason::human_stop;
                break;
            }
            if (dialogue_turns >= cfg.max_turns) {
                traj.stop_reason = StopReason::max_turns;
                break;
            }
            if (!agent_turn(pack, prompts, traj.turns, cfg, store, key)) {
                traj.stop_reason = StopReason::error;
                traj.warnings.push_back("tool call cap exceeded in one assistant turn");
                break;
            }
            ++dialogue_turns;
            if (dialogue_turns >= cfg.max_turns) {
                traj.stop_reason = StopReason::max_turns;
                break;
            }
        } catch (const std::exception& e) {
            traj.stop_reason = StopReason::error;
            traj.warnings.push_back(e.what());
            break;
        }
    }
    traj.final_snapshot = snapshot(store);
    if (traj.stop_reason == StopReason::human_stop) {
        traj.reward = evaluate_reward(traj, bp, pack).r;
    }
    return traj;
}

// Behavioral identity of a trajectory: the ordered executed call sequence.
inline std::string trajectory_key(const Trajectory& traj) {
    std::string key;
    for (const auto& turn : traj.turns) {
        if (turn.speaker == Speaker::assistant && turn.tool_call) {
            key += turn.tool_call->name;
            key += '\x1f';
            key += turn.tool_call->arguments.dump();
            key += '\x1e';
        }
    }
    return key;
}

struct AttemptRecord {
    int attempt = 0;
    int reward = 0;
    StopReason stop_reason = StopReason::error;
    bool kept = false;

    Json to_json() const {
        return Json{{"attempt", attempt},
                    {"reward", reward},
                    {"stop_reason", to_string(stop_reason)},
                    {"kept", kept}};
    }
};

struct CollectReport {
    std::vector<Trajectory> kept;
    std::vector<AttemptRecord> attempts;
};

// Rejection sampling: up to cfg.attempts isolated episodes, keeping the
// unique successful ones. The attempt records feed run manifests.
inline CollectReport collect_report(const TaskBlueprint& bp, const DomainPack& pack,
                                    const PromptSet& prompts, const EpisodeConfig& cfg,
                                    const std::string& task_id) {
    if (cfg.attempts < 1) throw std::runtime_error("attempts must be >= 1");
    CollectReport report;
    std::set<std::string> seen;
    for (int attempt = 1; attempt <= cfg.attempts; ++attempt) {
        const Trajectory traj = run_episode(bp, pack, prompts, cfg, task_id, attempt);
        AttemptRecord record{attempt, traj.reward, traj.stop_reason, false};
        if (traj.reward == 1) {
            const std::string key = trajectory_key(traj);
            if (seen.count(key) == 0) {
                seen.insert(key);
                record.kept = true;
                report.kept.push_back(traj);
            }
        }
        report.attempts.push_back(record);
    }
    return report;
}

inline std::vector<Trajectory> collect(const TaskBlueprint& bp, const DomainPack& pack,
                                       const PromptSet& prompts, const EpisodeConfig& cfg,
                                       const std::string& task_id) {
    return collect_report(bp, pack, prompts, cfg, task_id).kept;
}

}  // namespace agentforge
