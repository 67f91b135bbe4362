// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "agentforge/tools.hpp"
#include "agentforge/value.hpp"

#include <algorithm>
#include <cctype>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace agentforge {

enum class EdgeReason { output_feeds_input, declared };

inline std::string to_string(EdgeReason reason) {
    return reason == EdgeReason::declared ? "declared" : "output-feeds-input";
}

struct Edge {
    std::string from;
    std::string to;
    EdgeReason reason;

    auto operator<=>(const Edge&) const = default;
};

// Directed tool dependency graph. Nodes are all registered tools; edges say
// the target's arguments can be fed from the source's output. Immutable
// once built.
struct ApiGraph {
    std::set<std::string> nodes;
    std::set<std::string> write_nodes;
    std::set<Edge> edges;

    bool has_edge(const std::string& from, const std::string& to) const {
        return edges.count(Edge{from, to, EdgeReason::output_feeds_input}) != 0 ||
               edges.count(Edge{from, to, EdgeReason::declared}) != 0;
    }

    // Sorted; write targets only, the alphabet random walks move over.
    std::vector<std::string> write_successors(const std::string& from) const {
        std::set<std::string> out;
        for (const auto& edge : edges) {
            if (edge.from == from && write_nodes.count(edge.to) != 0) out.insert(edge.to);
        }
        return {out.begin(), out.end()};
    }
};

struct WalkConfig {
    int length = 1;
    std::uint64_t seed = 0;
    double restart_probability = 0.15;
};

namespace detail {

inline std::string ascii_lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

}  // namespace detail

inline ApiGraph build_graph(const std::vector<ToolSpec>& specs,
                            const std::vector<std::pair<std::string, std::string>>& forbidden_pairs,
                            const std::vector<std::pair<std::string, std::string>>& declared_edges) {
    ApiGraph graph;
    for (const auto& spec : specs) {
        if (!graph.nodes.insert(spec.name).second) {
            throw std::runtime_error("duplicate tool name in graph build: " + spec.name);
        }
        if (spec.kind == ToolKind::write) graph.write_nodes.insert(spec.name);
    }

    std::set<std::pair<std::string, std::string>> forbidden;
    for (const auto& pair : forbidden_pairs) forbidden.insert(pair);
    const auto allowed = [&](const std::string& from, const std::string& to) {
        return forbidden.count({from, to}) == 0;
    };

    for (const auto& source : specs) {
        std::set<std::string> outputs;
        for (const auto& field : source.output_fields) outputs.insert(detail::ascii_lower(field));
        for (const auto& target : specs) {
            if (!allowed(source.name, target.name)) continue;
            for (const auto& param : target.params) {
                if (outputs.count(detail::ascii_lower(param.name)) != 0) {
                    graph.edges.insert(Edge{source.name, target.name, EdgeReason::output_feeds_input});
                    break;
                }
            }
        }
    }

    for (const auto& [from, to] : declared_edges) {
        if (graph.nodes.count(from) == 0 || graph.nodes.count(to) == 0) {
            throw std::runtime_error("declared edge references unknown tool: " + from + " -> " + to);
        }
        if (!allowed(from, to)) continue;
        graph.edges.insert(Edge{from, to, EdgeReason::declared});
    }
    return graph;
}

// One emitted step; restarted marks a uniform jump rather than an edge
// traversal (the first step is always a jump).
struct WalkStep {
    std::string tool;
    bool restarted = false;
};

inline std::vector<WalkStep> random_walk_traced(const ApiGraph& graph, const WalkConfig& cfg) {
    if (cfg.length < 1) {
        throw std::runtime_error("walk length must be >= 1");
    }
    if (cfg.restart_probability < 0.0 || cfg.restart_probability > 1.0) {
        throw std::runtime_error("restart_probability must lie in [0, 1]");
    }
    if (graph.write_nodes.empty()) {
        throw std::runtime_error("graph has no write nodes, walk length unsatisfiable");
    }

    const std::vector<std::string> writes(graph.write_nodes.begin(), graph.write_nodes.end());
    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<std::size_t> pick_write(0, writes.size() - 1);
    std::uniform_real_distribution<double> coin(0.0, 1.0);

    std::vector<WalkStep> steps;
    steps.push_back(WalkStep{writes[pick_write(rng)], true});
    while (static_cast<int>(steps.size()) < cfg.length) {
        const bool want_restart = coin(rng) < cfg.restart_probability;
        const auto successors = graph.write_successors(steps.back().tool);
        if (want_restart || successors.empty()) {
            steps.push_back(WalkStep{writes[pick_write(rng)], true});
            continue;
        }
        std::uniform_int_distribution<std::size_t> pick_succ(0, successors.size() - 1);
        steps.push_back(WalkStep{successors[pick_succ(rng)], false});
    }
    return steps;
}

inline std::vector<std::string> random_walk(const ApiGraph& graph, const WalkConfig& cfg) {
    std::vector<std::string> names;
    for (auto& step : random_walk_traced(graph, cfg)) names.push_back(std::move(step.tool));
    return names;
}

// DOT rendering for offline inspection; deterministic line order.
inline std::string to_dot(const ApiGraph& graph) {
    std::string out = "digraph api {\n";
    for (const auto& node : graph.nodes) {
        out += "  \"" + node + "\"";
        if (graph.write_nodes.count(node) != 0) out += " [shape=box]";
        out += ";\n";
    }
    for (const auto& edge : graph.edges) {
        out += "  \"" + edge.from + "\" -> \"" + edge.to + "\" [label=\"" + to_string(edge.reason) +
               "\"];\n";
    }
    out += "}\n";
    return out;
}

}  // namespace agentforge
