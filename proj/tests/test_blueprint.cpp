// SPDX-License-Identifier: Apache-2.0
#include "agentforge/blueprint.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <set>

using namespace agentforge;

namespace {

const std::string kPackDir = std::string(AGENTFORGE_REPO_ROOT) + "/packs/retail";

DomainPack& pack() {
    static DomainPack p = load_domain_pack(kPackDir);
    return p;
}

std::string wrap(const std::string& thought, const std::string& answer) {
    return "<thought>" + thought + "</thought>\n<answer>" + answer + "</answer>";
}

std::string good_response() {
    Json answer{
        {"instruction", "Cancel my desk lamp order o_2 and confirm the refund."},
        {"actions", Json::array({Json{{"name", "cancel_order"}, {"arguments", Json{{"order_id", "o_2"}}}}})},
        {"outputs", Json::array({"34.25"})}};
    return wrap("The lamp order is pending, so it can be cancelled.", answer.dump());
}

std::string score_reply(int correctness, int completeness, int satisfaction, int creativity,
                        const std::string& reflection = "fine") {
    Json scores{{"reflection", reflection},   {"correctness", correctness},
                {"completeness", completeness}, {"satisfaction", satisfaction},
                {"creativity", creativity},
                {"total", correctness + completeness + satisfaction + creativity},
                {"correction", ""}};
    return "<scores>" + scores.dump() + "</scores>";
}

TaskBlueprint lamp_blueprint() {
    TaskBlueprint bp = parse_blueprint(good_response());
    bp.persona = Persona{"persona_01", "Avery Chen, a gold member who plans ahead."};
    bp.domain = "retail";
    bp.round = 1;
    return bp;
}

}  // namespace

TEST_CASE("parse_blueprint accepts a strict proposal") {
    const TaskBlueprint bp = parse_blueprint(good_response());
    CHECK(bp.thought == "The lamp order is pending, so it can be cancelled.");
    CHECK(bp.instruction == "Cancel my desk lamp order o_2 and confirm the refund.");
    REQUIRE(bp.actions.size() == 1);
    CHECK(bp.actions[0] == ToolCall{"cancel_order", Json{{"order_id", "o_2"}}});
    CHECK(bp.outputs == std::vector<std::string>{"34.25"});
}

TEST_CASE("parse_blueprint errors name the offending component") {
    const Json ok_actions =
        Json::array({Json{{"name", "cancel_order"}, {"arguments", Json{{"order_id", "o_2"}}}}});

    CHECK_THROWS_WITH(parse_blueprint("<answer>{}</answer>"), "missing <thought> tag");
    CHECK_THROWS_WITH(parse_blueprint("<thought>x</thought> no answer"), "missing <answer> tag");
    CHECK_THROWS_WITH(parse_blueprint(wrap("x", "{not json")), "<answer> is not a strict JSON object");
    CHECK_THROWS_WITH(parse_blueprint(wrap("x", "sure! {\"instruction\": \"hi\"}")),
                      "<answer> is not a strict JSON object");
    CHECK_THROWS_WITH(parse_blueprint(wrap("x", "[1, 2]")), "<answer> is not a strict JSON object");

    Json j{{"instruction", ""}, {"actions", ok_actions}, {"outputs", Json::array({"a"})}};
    CHECK_THROWS_WITH(parse_blueprint(wrap("x", j.dump())), "instruction must be a non-empty string");

    j["instruction"] = "do it";
    j["actions"] = "cancel_order";
    CHECK_THROWS_WITH(parse_blueprint(wrap("x", j.dump())), "actions must be an array of tool calls");

    j["actions"] = Json::array({Json{{"name", "cancel_order"}}});
    CHECK_THROWS_WITH(parse_blueprint(wrap("x", j.dump())),
                      "actions[0] must be an object with name and arguments");

    j["actions"] = Json::array({Json{{"name", "cancel_order"}, {"arguments", "o_2"}}});
    CHECK_THROWS_WITH(parse_blueprint(wrap("x", j.dump())),
                      "actions[0] must be an object with name and arguments");

    j["actions"] = ok_actions;
    j["outputs"] = Json{{"k", "v"}};
    CHECK_THROWS_WITH(parse_blueprint(wrap("x", j.dump())), "outputs must be an array of strings");

    // A bare number literal in outputs is the canonical mistake.
    j["outputs"] = Json::array({34.25});
    CHECK_THROWS_WITH(parse_blueprint(wrap("x", j.dump())),
                      "outputs[0] must be a string (outputs are strings)");

    j["outputs"] = Json::array();
    j["actions"] = Json::array();
    CHECK_THROWS_WITH(parse_blueprint(wrap("x", j.dump())), "actions and outputs are both empty");
}

TEST_CASE("actions may be empty when outputs carry the answer") {
    Json j{{"instruction", "What is my membership tier?"},
           {"actions", Json::array()},
           {"outputs", Json::array({"gold"})}};
    const TaskBlueprint bp = parse_blueprint(wrap("pure lookup", j.dump()));
    CHECK(bp.actions.empty());
    CHECK(bp.outputs.size() == 1);
}

TEST_CASE("blueprint jsonl lines round trip") {
    TaskBlueprint bp = lamp_blueprint();
    bp.provenance = Json{{"seed", 7}};
    const Json line = bp.to_jsonl();
    CHECK(line.at("persona_id") == "persona_01");
    CHECK(line.at("domain") == "retail");
    CHECK(line.at("round") == 1);

    const TaskBlueprint back = TaskBlueprint::from_jsonl(line);
    CHECK(back.instruction == bp.instruction);
    CHECK(back.actions == bp.actions);
    CHECK(back.outputs == bp.outputs);
    CHECK(back.persona.id == "persona_01");
    CHECK(back.round == 1);
    CHECK(back.provenance == bp.provenance);
}

TEST_CASE("stage 1 passes a clean cancel and carries trace plus diff") {
    const auto reports = stage1_validate(lamp_blueprint(), pack());
    REQUIRE(reports.size() == 3);
    CHECK(reports[0].stage == ValidationStage::format);
    CHECK(reports[0].passed);
    CHECK(reports[1].stage == ValidationStage::execution);
    CHECK(reports[1].passed);
    REQUIRE(reports[1].trace.has_value());
    CHECK(reports[1].trace->size() == 1);
    REQUIRE(reports[1].diff_patch.has_value());
    CHECK(reports[2].stage == ValidationStage::policy);
    CHECK(reports[2].passed);
    CHECK(stage1_passed(reports));

    std::set<std::string> paths;
    for (const auto& hunk : stage1_diff(reports).hunks) paths.insert(hunk.path);
    CHECK(paths == std::set<std::string>{"orders/o_2/status", "orders/o_2/refund_amount"});
}

TEST_CASE("stage 1 with no actions passes with an empty diff") {
    TaskBlueprint bp;
    bp.instruction = "What tier am I?";
    bp.outputs = {"gold"};
    const auto reports = stage1_validate(bp, pack());
    CHECK(stage1_passed(reports));
    CHECK(stage1_diff(reports).empty());
}

TEST_CASE("stage 1 short-circuits on execution failure") {
    TaskBlueprint bp = lamp_blueprint();
    bp.actions = {ToolCall{"get_order", Json{{"order_id", "o_2"}}},
                  ToolCall{"return_order", Json{{"order_id", "o_2"}}}};
    const auto reports = stage1_validate(bp, pack());
    REQUIRE(reports.size() == 2);  // policy never runs
    CHECK_FALSE(reports[1].passed);
    REQUIRE(reports[1].failures.size() == 1);
    CHECK(reports[1].failures[0] ==
          "actions[1] return_order: order o_2 is not delivered, cannot return");
    CHECK_FALSE(reports[1].diff_patch.has_value());
    REQUIRE(reports[1].trace.has_value());
    CHECK(reports[1].trace->size() == 2);  // the failing call stays on the trace
    CHECK_FALSE(stage1_passed(reports));
    CHECK_THROWS_AS(stage1_diff(reports), std::runtime_error);
}

TEST_CASE("stage 1 flags unknown tools at execution") {
    TaskBlueprint bp = lamp_blueprint();
    bp.actions = {ToolCall{"warp_reality", Json::object()}};
    const auto reports = stage1_validate(bp, pack());
    REQUIRE(reports.size() == 2);
    CHECK_FALSE(reports[1].passed);
    CHECK(reports[1].failures[0].find("unknown tool: warp_reality") != std::string::npos);
}

TEST_CASE("stage 1 surfaces policy violations after a clean run") {
    TaskBlueprint bp = lamp_blueprint();
    bp.instruction = "Cancel both big orders.";
    bp.actions = {ToolCall{"cancel_order", Json{{"order_id", "o_5"}}},
                  ToolCall{"cancel_order", Json{{"order_id", "o_1"}}}};
    const auto reports = stage1_validate(bp, pack());
    REQUIRE(reports.size() == 3);
    CHECK(reports[1].passed);
    CHECK_FALSE(reports[2].passed);
    REQUIRE(reports[2].failures.size() == 1);
    CHECK(reports[2].failures[0].rfind("[refund_limit]", 0) == 0);
    CHECK_FALSE(stage1_passed(reports));
}

namespace {

// Independent committee oracle: per-metric tallies with an explicit loop.
bool oracle_accepts(const std::array<std::array<int, 4>, 3>& bits, int threshold) {
    int majority_bits[4];
    for (int metric = 0; metric < 4; ++metric) {
        int ones = 0;
        for (int judge = 0; judge < 3; ++judge) ones += bits[judge][metric];
        majority_bits[metric] = ones >= 2 ? 1 : 0;
    }
    const int total = majority_bits[0] + majority_bits[1] + majority_bits[2] + majority_bits[3];
    return total >= threshold && majority_bits[0] == 1;
}

std::vector<JudgeVerdict> verdicts_from(const std::array<std::array<int, 4>, 3>& bits) {
    std::vector<JudgeVerdict> vs;
    for (const auto& b : bits) {
        JudgeVerdict v;
        v.correctness = b[0];
        v.completeness = b[1];
        v.satisfaction = b[2];
        v.creativity = b[3];
        v.total = b[0] + b[1] + b[2] + b[3];
        vs.push_back(v);
    }
    return vs;
}

}  // namespace

TEST_CASE("committee aggregation matches a brute-force oracle on all 4096 vote patterns") {
    for (int mask = 0; mask < (1 << 12); ++mask) {
        std::array<std::array<int, 4>, 3> bits{};
        for (int judge = 0; judge < 3; ++judge) {
            for (int metric = 0; metric < 4; ++metric) {
                bits[judge][metric] = (mask >> (judge * 4 + metric)) & 1;
            }
        }
        const CommitteeDecision decision = aggregate_votes(verdicts_from(bits), 3);
        REQUIRE(decision.accepted == oracle_accepts(bits, 3));
        const bool strict = oracle_accepts(bits, 4);
        REQUIRE(aggregate_votes(verdicts_from(bits), 4).accepted == strict);
    }
}

TEST_CASE("unanimous committees are stable under any single bit flip") {
    int checked = 0;
    for (int mask = 0; mask < (1 << 4); ++mask) {
        std::array<std::array<int, 4>, 3> bits{};
        for (int judge = 0; judge < 3; ++judge) {
            for (int metric = 0; metric < 4; ++metric) bits[judge][metric] = (mask >> metric) & 1;
        }
        const bool base = aggregate_votes(verdicts_from(bits), 3).accepted;
        for (int judge = 0; judge < 3; ++judge) {
            for (int metric = 0; metric < 4; ++metric) {
                auto flipped = bits;
                flipped[judge][metric] ^= 1;
                CHECK(aggregate_votes(verdicts_from(flipped), 3).accepted == base);
                ++checked;
            }
        }
    }
    CHECK(checked == 16 * 12);
}

TEST_CASE("a passing total without a correctness majority is rejected") {
    std::array<std::array<int, 4>, 3> bits{{{0, 1, 1, 1}, {0, 1, 1, 1}, {1, 1, 1, 1}}};
    const CommitteeDecision decision = aggregate_votes(verdicts_from(bits), 3);
    CHECK(decision.majority_total == 3);
    CHECK(decision.majority_correctness == 0);
    CHECK_FALSE(decision.accepted);
}

TEST_CASE("scripted committee accepts a clean blueprint") {
    const TaskBlueprint bp = lamp_blueprint();
    const auto reports = stage1_validate(bp, pack());
    const DiffPatch& patch = stage1_diff(reports);
    const PromptSet prompts = load_prompts(kPackDir + "/prompts");

    // Matching on the instruction text proves the judges saw the task.
    ScriptedStub j0({{"Cancel my desk lamp", ChatMessage::text(Role::assistant, score_reply(1, 1, 1, 1))}});
    ScriptedStub j1({{"orders/o_2/status", ChatMessage::text(Role::assistant, score_reply(1, 1, 1, 0))}});
    ScriptedStub j2({{"cancel_order", ChatMessage::text(Role::assistant, score_reply(1, 1, 1, 0))}});
    const CommitteeDecision decision =
        stage2_committee(bp, patch, pack(), prompts.validation, {&j0, &j1, &j2}, 3, 0.0, "t1");
    CHECK(decision.accepted);
    CHECK(decision.majority_total == 3);
    CHECK(decision.majority_creativity == 0);
    CHECK(decision.majority_satisfaction == 1);
    REQUIRE(decision.verdicts.size() == 3);
    CHECK(decision.verdicts[0].total == 4);
}

TEST_CASE("an unparseable verdict is re-queried once before failing closed") {
    const TaskBlueprint bp = lamp_blueprint();
    const auto reports = stage1_validate(bp, pack());
    const DiffPatch& patch = stage1_diff(reports);
    const PromptSet prompts = load_prompts(kPackDir + "/prompts");

    SECTION("retry recovers") {
        ScriptedStub flaky({{"", ChatMessage::text(Role::assistant, "hmm let me think")},
                            {"", ChatMessage::text(Role::assistant, score_reply(1, 1, 1, 1))}});
        ScriptedStub ok1({{"", ChatMessage::text(Role::assistant, score_reply(1, 1, 1, 1))}});
        ScriptedStub ok2({{"", ChatMessage::text(Role::assistant, score_reply(1, 1, 1, 1))}});
        const CommitteeDecision decision =
            stage2_committee(bp, patch, pack(), prompts.validation, {&flaky, &ok1, &ok2}, 3, 0.0, "t2");
        CHECK(decision.accepted);
        CHECK_FALSE(decision.verdicts[0].parse_failed);
        CHECK(decision.verdicts[0].total == 4);
    }

    SECTION("two failures score all-zero") {
        ScriptedStub broken({{"", ChatMessage::text(Role::assistant, "<scores>{\"correctness\": 2}</scores>")}});
        ScriptedStub ok1({{"", ChatMessage::text(Role::assistant, score_reply(1, 1, 1, 1))}});
        ScriptedStub ok2({{"", ChatMessage::text(Role::assistant, score_reply(1, 1, 1, 1))}});
        const CommitteeDecision decision =
            stage2_committee(bp, patch, pack(), prompts.validation, {&broken, &ok1, &ok2}, 3, 0.0, "t3");
        CHECK(decision.verdicts[0].parse_failed);
        CHECK(decision.verdicts[0].total == 0);
        CHECK(decision.accepted);  // the other two carry every metric
    }

    SECTION("verdict totals are recomputed from the bits") {
        Json scores{{"reflection", "r"}, {"correctness", 1}, {"completeness", 1},
                    {"satisfaction", 0}, {"creativity", 0},  {"total", 9},
                    {"correction", ""}};
        ScriptedStub liar({{"", ChatMessage::text(Role::assistant, "<scores>" + scores.dump() + "</scores>")}});
        ScriptedStub ok1({{"", ChatMessage::text(Role::assistant, score_reply(1, 1, 1, 1))}});
        ScriptedStub ok2({{"", ChatMessage::text(Role::assistant, score_reply(1, 1, 1, 1))}});
        const CommitteeDecision decision =
            stage2_committee(bp, patch, pack(), prompts.validation, {&liar, &ok1, &ok2}, 3, 0.0, "t4");
        CHECK(decision.verdicts[0].total == 2);
    }
}

TEST_CASE("committee size must be odd") {
    const TaskBlueprint bp = lamp_blueprint();
    const PromptSet prompts = load_prompts(kPackDir + "/prompts");
    ScriptedStub s({{"", ChatMessage::text(Role::assistant, score_reply(1, 1, 1, 1))}});
    CHECK_THROWS_WITH(
        stage2_committee(bp, DiffPatch{}, pack(), prompts.validation, {&s, &s}, 3, 0.0, "t"),
        "judge committee size must be odd");
    CHECK_THROWS_AS(stage2_committee(bp, DiffPatch{}, pack(), prompts.validation, {}, 3, 0.0, "t"),
                    std::runtime_error);
}

TEST_CASE("accepted decisions skip the reviewer entirely") {
    const TaskBlueprint bp = lamp_blueprint();
    const PromptSet prompts = load_prompts(kPackDir + "/prompts");
    int calls = 0;
    HttpBackend reviewer(ModelConfig{}, [&calls](const std::string&) {
        ++calls;
        return std::pair<int, std::string>{500, "boom"};
    });
    CommitteeDecision accepted;
    accepted.accepted = true;
    const auto feedback =
        stage3_review(bp, DiffPatch{}, accepted, prompts.review, reviewer, 0.0, "t5");
    CHECK_FALSE(feedback.has_value());
    CHECK(calls == 0);
}

TEST_CASE("rejections produce a parsed feedback summary") {
    const TaskBlueprint bp = lamp_blueprint();
    const auto reports = stage1_validate(bp, pack());
    const DiffPatch& patch = stage1_diff(reports);
    const PromptSet prompts = load_prompts(kPackDir + "/prompts");

    std::array<std::array<int, 4>, 3> bits{{{0, 0, 1, 1}, {0, 1, 0, 1}, {1, 0, 0, 0}}};
    CommitteeDecision rejected = aggregate_votes(verdicts_from(bits), 3);
    rejected.verdicts[0].reflection = "the refund amount is never surfaced";
    REQUIRE_FALSE(rejected.accepted);

    // Matching on a judge reflection proves the reviewer saw the verdicts.
    ScriptedStub reviewer({{"never surfaced",
                            ChatMessage::text(Role::assistant,
                                              "<thought>weighing the three reviews</thought>\n"
                                              "<summary>State the refund amount in the outputs.</summary>")}});
    const auto feedback = stage3_review(bp, patch, rejected, prompts.review, reviewer, 0.0, "t6");
    REQUIRE(feedback.has_value());
    CHECK(feedback->thought == "weighing the three reviews");
    CHECK(feedback->summary == "State the refund amount in the outputs.");

    ScriptedStub no_summary({{"", ChatMessage::text(Role::assistant, "<thought>shrug</thought>")}});
    CHECK_THROWS_WITH(stage3_review(bp, patch, rejected, prompts.review, no_summary, 0.0, "t7"),
                      "reviewer response has no <summary> tag");
}
