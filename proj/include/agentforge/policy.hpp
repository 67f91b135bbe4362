// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "agentforge/tools.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace agentforge {

// One executed call and what came back, in execution order.
struct TraceEntry {
    ToolCall call;
    ToolResult result;

    Json to_json() const { return Json{{"call", call.to_json()}, {"result", result.to_json()}}; }

    static TraceEntry from_json(const Json& j) {
        return TraceEntry{ToolCall::from_json(j.at("call")), ToolResult::from_json(j.at("result"))};
    }
};

using Trace = std::vector<TraceEntry>;

inline Json trace_to_json(const Trace& trace) {
    Json arr = Json::array();
    for (const auto& entry : trace) arr.push_back(entry.to_json());
    return arr;
}

inline Trace trace_from_json(const Json& j) {
    Trace trace;
    for (const auto& entry : j) trace.push_back(TraceEntry::from_json(entry));
    return trace;
}

// Pure predicate over an execution trace and the surrounding store states.
// Returns a violation message, or nullopt when the rule is satisfied.
using PolicyCheck = std::function<std::optional<std::string>(
    const Trace& trace, const EntityStore& before, const EntityStore& after)>;

// Executable encoding of one prose domain policy. The prose itself is
// carried in the domain pack manifest for prompt assembly.
struct PolicyRule {
    std::string id;
    std::string description;
    PolicyCheck check;
};

struct PolicyViolation {
    std::string rule_id;
    std::string message;

    Json to_json() const { return Json{{"rule_id", rule_id}, {"message", message}}; }
};

// Evaluates every rule; a rule that itself fails to evaluate is reported
// as a violation tagged rule-error rather than silently passing.
inline std::vector<PolicyViolation> run_policies(const std::vector<PolicyRule>& rules,
                                                 const Trace& trace,
                                                 const EntityStore& before,
                                                 const EntityStore& after) {
    std::vector<PolicyViolation> violations;
    for (const auto& rule : rules) {
        try {
            if (auto message = rule.check(trace, before, after)) {
                violations.push_back(PolicyViolation{rule.id, *message});
            }
        } catch (const std::exception& e) {
            violations.push_back(PolicyViolation{rule.id, std::string("rule-error: ") + e.what()});
        }
    }
    return violations;
}

}  // namespace agentforge
