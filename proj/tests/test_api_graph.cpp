// SPDX-License-Identifier: Apache-2.0
#include "agentforge/api_graph.hpp"
#include "agentforge/domain_pack.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <set>

using namespace agentforge;

namespace {

ToolSpec make_spec(const std::string& name, ToolKind kind, std::vector<std::string> param_names,
                   std::vector<std::string> outputs) {
    ToolSpec spec;
    spec.name = name;
    spec.kind = kind;
    for (const auto& p : param_names) spec.params.push_back(ToolParam{p, "string", true, ""});
    spec.output_fields = std::move(outputs);
    return spec;
}

const ApiGraph& retail_graph() {
    static DomainPack pack = load_domain_pack(std::string(AGENTFORGE_REPO_ROOT) + "/packs/retail");
    static ApiGraph graph = build_graph(pack.registry.specs(), pack.forbidden_pairs, pack.declared_edges);
    return graph;
}

}  // namespace

TEST_CASE("one write tool with no name matches gives one node, no edges") {
    const ApiGraph graph = build_graph({make_spec("solo", ToolKind::write, {"x"}, {"y"})}, {}, {});
    CHECK(graph.nodes == std::set<std::string>{"solo"});
    CHECK(graph.write_nodes == std::set<std::string>{"solo"});
    CHECK(graph.edges.empty());
}

TEST_CASE("output field matching is exact and case-insensitive") {
    const auto a = make_spec("a", ToolKind::read, {}, {"Order_ID"});
    const auto b = make_spec("b", ToolKind::write, {"order_id"}, {});
    const auto c = make_spec("c", ToolKind::write, {"order_ids"}, {});
    const ApiGraph graph = build_graph({a, b, c}, {}, {});
    CHECK(graph.has_edge("a", "b"));
    CHECK_FALSE(graph.has_edge("a", "c"));
}

TEST_CASE("the bundled pack graph matches the hand-enumerated edge set") {
    const ApiGraph& graph = retail_graph();
    REQUIRE(graph.nodes.size() == 10);
    REQUIRE(graph.write_nodes.size() == 5);

    // Oracle: name matches enumerated by hand from the tool documentation.
    const std::map<std::string, std::set<std::string>> expected = {
        {"get_user",
         {"get_user", "list_user_orders", "update_user_email", "find_user_by_email",
          "update_order_address"}},
        {"get_order",
         {"get_order", "cancel_order", "return_order", "exchange_item", "update_order_address",
          "get_user", "list_user_orders", "update_user_email", "get_product"}},
        {"get_product", {"get_product"}},
        {"list_user_orders", {"get_user", "list_user_orders", "update_user_email", "get_order"}},
        {"find_user_by_email", {"get_user", "list_user_orders", "update_user_email"}},
        {"cancel_order", {"get_order", "cancel_order", "exchange_item", "update_order_address"}},
        {"return_order", {"get_order", "return_order", "exchange_item", "update_order_address"}},
        {"exchange_item",
         {"get_order", "cancel_order", "return_order", "exchange_item", "update_order_address",
          "get_product"}},
        {"update_order_address",
         {"get_order", "cancel_order", "return_order", "exchange_item", "update_order_address"}},
        {"update_user_email",
         {"get_user", "list_user_orders", "update_user_email", "find_user_by_email"}},
    };
    std::map<std::string, std::set<std::string>> actual;
    for (const auto& edge : graph.edges) actual[edge.from].insert(edge.to);
    CHECK(actual == expected);

    CHECK(graph.has_edge("get_order", "exchange_item"));
    CHECK(graph.has_edge("list_user_orders", "get_order"));
    CHECK(graph.edges.count(Edge{"list_user_orders", "get_order", EdgeReason::declared}) == 1);
}

TEST_CASE("forbidden pairs never get edges, inferred or declared") {
    const ApiGraph& graph = retail_graph();
    CHECK_FALSE(graph.has_edge("cancel_order", "return_order"));
    CHECK_FALSE(graph.has_edge("return_order", "cancel_order"));

    const auto a = make_spec("a", ToolKind::write, {"k"}, {"k"});
    const auto b = make_spec("b", ToolKind::write, {"k"}, {"k"});
    const ApiGraph small = build_graph({a, b}, {{"a", "b"}}, {{"a", "b"}});
    CHECK_FALSE(small.has_edge("a", "b"));
    CHECK(small.has_edge("b", "a"));
}

TEST_CASE("declared edges referencing unknown tools are rejected") {
    const auto a = make_spec("a", ToolKind::write, {}, {});
    CHECK_THROWS_AS(build_graph({a}, {}, {{"a", "ghost"}}), std::runtime_error);
}

TEST_CASE("walk on a single write node repeats it") {
    const ApiGraph graph = build_graph({make_spec("solo", ToolKind::write, {}, {})}, {}, {});
    const auto walk = random_walk(graph, WalkConfig{3, 7, 0.0});
    CHECK(walk == std::vector<std::string>{"solo", "solo", "solo"});
}

TEST_CASE("length-2 walks on a line graph stay within the brute-force valid set") {
    // a -> b -> c and nothing else.
    const auto a = make_spec("a", ToolKind::write, {}, {"bkey"});
    const auto b = make_spec("b", ToolKind::write, {"bkey"}, {"ckey"});
    const auto c = make_spec("c", ToolKind::write, {"ckey"}, {});
    const ApiGraph graph = build_graph({a, b, c}, {}, {});
    REQUIRE(graph.has_edge("a", "b"));
    REQUIRE(graph.has_edge("b", "c"));
    REQUIRE(graph.edges.size() == 2);

    // Brute force: [x, y] is valid when x->y is an edge, or x is a dead end
    // and y is any write node (forced restart).
    std::set<std::vector<std::string>> valid;
    for (const std::string x : {"a", "b", "c"}) {
        const auto succ = graph.write_successors(x);
        if (succ.empty()) {
            for (const std::string y : {"a", "b", "c"}) valid.insert({x, y});
        } else {
            for (const auto& y : succ) valid.insert({x, y});
        }
    }

    std::set<std::vector<std::string>> seen;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto walk = random_walk(graph, WalkConfig{2, seed, 0.0});
        REQUIRE(valid.count(walk) == 1);
        seen.insert(walk);
    }
    CHECK(seen.size() >= 3);
}

TEST_CASE("walks are deterministic in the seed") {
    const ApiGraph& graph = retail_graph();
    const WalkConfig cfg{5, 42, 0.15};
    CHECK(random_walk(graph, cfg) == random_walk(graph, cfg));
    CHECK(random_walk(graph, cfg) != random_walk(graph, WalkConfig{5, 43, 0.15}));
}

TEST_CASE("edge-soundness: non-restart steps follow edges, forbidden pairs never adjacent") {
    const ApiGraph& graph = retail_graph();
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto steps = random_walk_traced(graph, WalkConfig{6, seed, 0.15});
        REQUIRE(steps.size() == 6);
        CHECK(steps[0].restarted);
        for (std::size_t i = 1; i < steps.size(); ++i) {
            CHECK(graph.write_nodes.count(steps[i].tool) == 1);
            if (!steps[i].restarted) {
                CHECK(graph.has_edge(steps[i - 1].tool, steps[i].tool));
                const bool cancel_return =
                    (steps[i - 1].tool == "cancel_order" && steps[i].tool == "return_order") ||
                    (steps[i - 1].tool == "return_order" && steps[i].tool == "cancel_order");
                CHECK_FALSE(cancel_return);
            }
        }
    }
}

TEST_CASE("walks only ever emit write tools") {
    const ApiGraph& graph = retail_graph();
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        for (const auto& tool : random_walk(graph, WalkConfig{4, seed, 0.3})) {
            CHECK(graph.write_nodes.count(tool) == 1);
        }
    }
}

TEST_CASE("walk configuration is validated") {
    const ApiGraph& graph = retail_graph();
    CHECK_THROWS_AS(random_walk(graph, WalkConfig{0, 1, 0.1}), std::runtime_error);
    CHECK_THROWS_AS(random_walk(graph, WalkConfig{1, 1, -0.1}), std::runtime_error);
    CHECK_THROWS_AS(random_walk(graph, WalkConfig{1, 1, 1.5}), std::runtime_error);

    const ApiGraph readonly = build_graph({make_spec("r", ToolKind::read, {}, {})}, {}, {});
    CHECK_THROWS_WITH(random_walk(readonly, WalkConfig{1, 1, 0.1}),
                      "graph has no write nodes, walk length unsatisfiable");
}

TEST_CASE("dot dump lists every node and edge deterministically") {
    const ApiGraph& graph = retail_graph();
    const std::string dot = to_dot(graph);
    CHECK(dot == to_dot(graph));
    CHECK(dot.rfind("digraph api {", 0) == 0);
    CHECK(dot.find("\"cancel_order\" [shape=box];") != std::string::npos);
    CHECK(dot.find("\"get_user\";") != std::string::npos);
    CHECK(dot.find("\"list_user_orders\" -> \"get_order\" [label=\"declared\"];") != std::string::npos);
    CHECK(dot.find("\"get_order\" -> \"exchange_item\" [label=\"output-feeds-input\"];") !=
          std::string::npos);
}
