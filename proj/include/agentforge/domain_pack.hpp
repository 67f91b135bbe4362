// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "agentforge/entity_store.hpp"
#include "agentforge/policy.hpp"
#include "agentforge/retail.hpp"
#include "agentforge/tools.hpp"
#include "agentforge/value.hpp"

#include <filesystem>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace agentforge {

// Prose form of a policy rule, carried for prompt assembly. The executable
// predicate with the same id lives in DomainPack::rules.
struct PolicyText {
    std::string id;
    std::string description;
};

struct DomainPack {
    std::string name;
    std::filesystem::path dir;
    PackSchema schema;
    EntityStore seed;
    ToolRegistry registry;
    std::vector<PolicyRule> rules;
    std::vector<PolicyText> policy_texts;
    std::vector<std::pair<std::string, std::string>> forbidden_pairs;
    std::vector<std::pair<std::string, std::string>> declared_edges;
};

namespace detail {

inline std::vector<std::pair<std::string, std::string>> name_pairs(const Json& value,
                                                                   const std::string& field) {
    std::vector<std::pair<std::string, std::string>> pairs;
    if (value.is_null()) return pairs;
    if (!value.is_array()) {
        throw std::runtime_error("manifest field " + field + " must be an array of [from, to] pairs");
    }
    for (const auto& entry : value) {
        if (!entry.is_array() || entry.size() != 2 || !entry[0].is_string() || !entry[1].is_string()) {
            throw std::runtime_error("manifest field " + field + " must be an array of [from, to] pairs");
        }
        pairs.emplace_back(entry[0].get<std::string>(), entry[1].get<std::string>());
    }
    return pairs;
}

// Tool implementations and executable policies are code, not data; each
// bundled pack name maps to its registration routine here.
inline void register_pack_behavior(DomainPack& pack) {
    if (pack.name == "retail") {
        retail::register_tools(pack.registry);
        pack.rules = retail::policies();
        return;
    }
    throw std::runtime_error("no tool implementations registered for pack: " + pack.name);
}

}  // namespace detail

inline DomainPack load_domain_pack(const std::filesystem::path& dir) {
    const Json manifest = Json::parse(read_text_file(dir / "manifest.json"));
    const Json schema_json = Json::parse(read_text_file(dir / "schema.json"));
    const Json seed_json = Json::parse(read_text_file(dir / "seed.json"));

    DomainPack pack;
    pack.dir = dir;
    pack.name = manifest.at("name").get<std::string>();
    pack.schema = schema_from_json(schema_json);
    pack.seed = EntityStore::from_json(seed_json);
    pack.forbidden_pairs = detail::name_pairs(manifest.value("forbidden_pairs", Json()), "forbidden_pairs");
    pack.declared_edges = detail::name_pairs(manifest.value("declared_edges", Json()), "declared_edges");

    const auto problems = validate_store(pack.seed, pack.schema);
    if (!problems.empty()) {
        std::string msg = "seed store violates schema:";
        for (const auto& problem : problems) msg += "\n  " + problem;
        throw std::runtime_error(msg);
    }

    detail::register_pack_behavior(pack);

    std::set<std::string> rule_ids;
    for (const auto& rule : pack.rules) rule_ids.insert(rule.id);
    std::set<std::string> text_ids;
    for (const auto& entry : manifest.at("policies")) {
        PolicyText text{entry.at("id").get<std::string>(), entry.at("description").get<std::string>()};
        if (text.description.empty()) {
            throw std::runtime_error("policy " + text.id + " has an empty description");
        }
        if (!text_ids.insert(text.id).second) {
            throw std::runtime_error("duplicate policy id in manifest: " + text.id);
        }
        pack.policy_texts.push_back(std::move(text));
    }
    if (text_ids != rule_ids) {
        throw std::runtime_error("manifest policies do not match registered rules for pack " + pack.name);
    }

    for (const auto& [from, to] : pack.forbidden_pairs) {
        if (!pack.registry.has(from) || !pack.registry.has(to)) {
            throw std::runtime_error("forbidden pair names unknown tool: " + from + ", " + to);
        }
    }
    return pack;
}

inline const PolicyText& policy_text(const DomainPack& pack, const std::string& id) {
    for (const auto& text : pack.policy_texts) {
        if (text.id == id) return text;
    }
    throw std::runtime_error("unknown policy id: " + id);
}

}  // namespace agentforge
