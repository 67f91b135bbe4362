// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "agentforge/interplay.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace agentforge {

// -- JSONL ------------------------------------------------------------------

inline std::vector<Json> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<Json> out;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.empty()) continue;
        Json j = Json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw std::runtime_error(path.string() + ":" + std::to_string(number) +
                                     ": invalid JSONL line");
        }
        out.push_back(std::move(j));
    }
    return out;
}

// Tolerant variant for statistics: malformed lines are counted, not fatal.
inline std::vector<Json> read_jsonl_lenient(const std::filesystem::path& path,
                                            std::size_t& skipped) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<Json> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        Json j = Json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            ++skipped;
            continue;
        }
        out.push_back(std::move(j));
    }
    return out;
}

inline void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& lines) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (const auto& line : lines) out << line.dump() << "\n";
}

// -- statistics ---------------------------------------------------------------

struct StatsSummary {
    std::size_t blueprint_attempts = 0;
    std::size_t blueprints_accepted = 0;
    std::optional<double> task_success_rate;
    std::size_t trajectories = 0;
    std::size_t successes = 0;
    std::optional<double> trajectory_success_rate;
    std::optional<int> min_turns;
    std::optional<int> max_turns;
    std::optional<double> mean_turns;
    std::optional<double> mean_tool_calls;
    std::optional<double> mean_user_turns;
    std::map<int, std::size_t> turn_histogram;  // unit-width buckets
    std::size_t skipped_records = 0;

    Json to_json() const {
        const auto opt = [](const auto& v) { return v ? Json(*v) : Json(); };
        Json hist = Json::object();
        for (const auto& [turns, count] : turn_histogram) hist[std::to_string(turns)] = count;
        return Json{{"blueprint_attempts", blueprint_attempts},
                    {"blueprints_accepted", blueprints_accepted},
                    {"task_success_rate", opt(task_success_rate)},
                    {"trajectories", trajectories},
                    {"successes", successes},
                    {"trajectory_success_rate", opt(trajectory_success_rate)},
                    {"min_turns", opt(min_turns)},
                    {"max_turns", opt(max_turns)},
                    {"mean_turns", opt(mean_turns)},
                    {"mean_tool_calls", opt(mean_tool_calls)},
                    {"mean_user_turns", opt(mean_user_turns)},
                    {"turn_histogram", hist},
                    {"skipped_records", skipped_records}};
    }

    std::string to_table() const {
        const auto num = [](std::optional<double> v) -> std::string {
            if (!v) return "n/a";
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.4f", *v);
            return buf;
        };
        const auto count = [](std::optional<int> v) -> std::string {
            return v ? std::to_string(*v) : "n/a";
        };
        std::vector<std::pair<std::string, std::string>> rows{
            {"blueprint attempts", std::to_string(blueprint_attempts)},
            {"blueprints accepted", std::to_string(blueprints_accepted)},
            {"task success rate", num(task_success_rate)},
            {"trajectories", std::to_string(trajectories)},
            {"successes", std::to_string(successes)},
            {"trajectory success rate", num(trajectory_success_rate)},
            {"min turns", count(min_turns)},
            {"mean turns", num(mean_turns)},
            {"max turns", count(max_turns)},
            {"mean tool calls", num(mean_tool_calls)},
            {"mean user turns", num(mean_user_turns)},
            {"skipped records", std::to_string(skipped_records)},
        };
        std::string hist;
        for (const auto& [turns, n] : turn_histogram) {
            if (!hist.empty()) hist += " ";
            hist += std::to_string(turns) + ":" + std::to_string(n);
        }
        rows.emplace_back("turn histogram", hist.empty() ? "n/a" : hist);

        std::size_t width = 0;
        for (const auto& [k, v] : rows) width = std::max(width, k.size());
        std::string table;
        for (const auto& [k, v] : rows) {
            table += k + std::string(width - k.size() + 2, ' ') + v + "\n";
        }
        return table;
    }
};

// A "turn" is one dialogue message; tool calls are counted separately.
inline StatsSummary compute_stats(const std::vector<Json>& trajectory_lines,
                                  const std::vector<Json>& audit_docs) {
    StatsSummary s;
    for (const auto& doc : audit_docs) {
        if (!doc.is_object() || !doc.contains("accepted") || !doc.at("accepted").is_boolean()) {
            ++s.skipped_records;
            continue;
        }
        ++s.blueprint_attempts;
        s.blueprints_accepted += doc.at("accepted").get<bool>() ? 1 : 0;
    }
    if (s.blueprint_attempts > 0) {
        s.task_success_rate =
            static_cast<double>(s.blueprints_accepted) / static_cast<double>(s.blueprint_attempts);
    }

    std::size_t total_turns = 0;
    std::size_t total_tool_calls = 0;
    std::size_t total_user_turns = 0;
    for (const auto& line : trajectory_lines) {
        Trajectory traj;
        try {
            traj = Trajectory::from_json(line);
        } catch (const std::exception&) {
            ++s.skipped_records;
            continue;
        }
        ++s.trajectories;
        s.successes += traj.reward == 1 ? 1 : 0;
        int turns = 0;
        int tool_calls = 0;
        int user_turns = 0;
        for (const auto& turn : traj.turns) {
            if (turn.is_dialogue()) ++turns;
            if (turn.speaker == Speaker::human) ++user_turns;
            if (turn.speaker == Speaker::assistant && turn.tool_call) ++tool_calls;
        }
        total_turns += turns;
        total_tool_calls += tool_calls;
        total_user_turns += user_turns;
        ++s.turn_histogram[turns];
        s.min_turns = s.min_turns ? std::min(*s.min_turns, turns) : turns;
        s.max_turns = s.max_turns ? std::max(*s.max_turns, turns) : turns;
    }
    if (s.trajectories > 0) {
        const auto n = static_cast<double>(s.trajectories);
        s.trajectory_success_rate = static_cast<double>(s.successes) / n;
        s.mean_turns = static_cast<double>(total_turns) / n;
        s.mean_tool_calls = static_cast<double>(total_tool_calls) / n;
        s.mean_user_turns = static_cast<double>(total_user_turns) / n;
    }
    return s;
}

// -- pass^k --------------------------------------------------------------------

namespace detail {

// C(n, k) in exact 64-bit arithmetic; desk-scale trial counts stay tiny.
inline unsigned long long binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    if (k > n - k) k = n - k;
    unsigned long long result = 1;
    for (int i = 1; i <= k; ++i) {
        const unsigned __int128 next =
            static_cast<unsigned __int128>(result) * static_cast<unsigned long long>(n - k + i) /
            static_cast<unsigned long long>(i);
        if (next > static_cast<unsigned __int128>(~0ULL)) {
            throw std::runtime_error("pass^k: trial count too large for exact arithmetic");
        }
        result = static_cast<unsigned long long>(next);
    }
    return result;
}

}  // namespace detail

struct TrialCell {
    std::string task_id;
    int n = 0;
    int c = 0;
};

struct TrialMatrix {
    std::vector<TrialCell> cells;

    // pass^k comparisons need the same trial count everywhere.
    void validate() const {
        if (cells.empty()) throw std::runtime_error("trial matrix is empty");
        for (const auto& cell : cells) {
            if (cell.n < 1 || cell.c < 0 || cell.c > cell.n) {
                throw std::runtime_error("trial cell for " + cell.task_id +
                                         " violates 0 <= c <= n");
            }
            if (cell.n != cells.front().n) {
                throw std::runtime_error("trial matrix requires a uniform trial count n");
            }
        }
    }
};

struct PassKResult {
    int k = 0;
    int n = 0;
    std::map<std::string, double> per_task;
    double macro = 0.0;

    Json to_json() const {
        Json tasks = Json::object();
        for (const auto& [id, value] : per_task) tasks[id] = value;
        return Json{{"k", k}, {"n", n}, {"per_task", tasks}, {"macro", macro}};
    }
};

// pass^k per task is C(c,k)/C(n,k): the probability that k trials drawn
// without replacement from the n recorded ones all succeeded. Uniform n
// makes the macro average a single exact fraction.
inline PassKResult pass_k(const TrialMatrix& matrix, int k) {
    matrix.validate();
    const int n = matrix.cells.front().n;
    if (k < 1 || k > n) {
        throw std::runtime_error("k must satisfy 1 <= k <= n (n=" + std::to_string(n) + ")");
    }
    PassKResult result;
    result.k = k;
    result.n = n;
    const unsigned long long denom = detail::binomial(n, k);
    unsigned __int128 numerator_sum = 0;
    for (const auto& cell : matrix.cells) {
        const unsigned long long numer = detail::binomial(cell.c, k);
        numerator_sum += numer;
        result.per_task[cell.task_id] = static_cast<double>(numer) / static_cast<double>(denom);
    }
    result.macro = static_cast<double>(numerator_sum) /
                   (static_cast<double>(denom) * static_cast<double>(matrix.cells.size()));
    return result;
}

// -- training view ---------------------------------------------------------

struct TrainingRecord {
    std::string task_id;
    int attempt = 0;
    int index = 0;  // ordinal of the target among the trajectory's assistant messages
    std::vector<Json> context;
    Json target;

    Json to_json() const {
        return Json{{"task_id", task_id},
                    {"attempt", attempt},
                    {"index", index},
                    {"context", context},
                    {"target", target}};
    }
};

namespace detail {

inline Json training_message(const TurnRecord& turn, bool masked) {
    Json j;
    switch (turn.speaker) {
        case Speaker::human:
            j["role"] = "user";
            j["content"] = turn.content.value_or("");
            break;
        case Speaker::assistant:
            j["role"] = "assistant";
            if (turn.tool_call) {
                j["tool_call"] = turn.tool_call->to_json();
            } else {
                j["content"] = turn.content.value_or("");
            }
            break;
        case Speaker::tool:
            j["role"] = "tool";
            j["content"] = turn.tool_result ? turn.tool_result->to_json().dump() : "";
            break;
    }
    j["masked"] = masked;
    return j;
}

}  // namespace detail

// One record per assistant message: everything before it is masked context,
// the assistant message itself is the unmasked prediction target.
inline std::vector<TrainingRecord> export_training_view(const std::vector<Trajectory>& trajectories,
                                                        const std::string& system_prompt) {
    std::vector<TrainingRecord> records;
    for (const auto& traj : trajectories) {
        std::vector<Json> context;
        context.push_back(Json{{"role", "system"}, {"content", system_prompt}, {"masked", true}});
        int index = 0;
        for (const auto& turn : traj.turns) {
            if (turn.speaker == Speaker::assistant) {
                TrainingRecord record;
                record.task_id = traj.task_id;
                record.attempt = traj.attempt;
                record.index = index++;
                record.context = context;
                record.target = detail::training_message(turn, false);
                records.push_back(std::move(record));
            }
            context.push_back(detail::training_message(turn, true));
        }
    }
    return records;
}

}  // namespace agentforge
