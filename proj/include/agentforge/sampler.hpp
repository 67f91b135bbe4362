// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "agentforge/api_graph.hpp"
#include "agentforge/domain_pack.hpp"
#include "agentforge/value.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace agentforge {

struct Persona {
    std::string id;
    std::string description;
};

inline std::vector<Persona> load_personas(const std::filesystem::path& path) {
    std::vector<Persona> personas;
    for (const auto& entry : Json::parse(read_text_file(path))) {
        Persona p{entry.at("id").get<std::string>(), entry.at("description").get<std::string>()};
        if (p.description.empty()) {
            throw std::runtime_error("persona " + p.id + " has an empty description");
        }
        personas.push_back(std::move(p));
    }
    return personas;
}

// Few-shot blueprints are stored structured and rendered to text once here.
inline std::vector<std::string> load_examples(const std::filesystem::path& path) {
    std::vector<std::string> examples;
    for (const auto& entry : Json::parse(read_text_file(path))) {
        examples.push_back(entry.dump(2));
    }
    return examples;
}

// One sampled document plus the metadata map its pack attached.
struct DomainSample {
    std::string collection;
    std::string id;
    Json document;
    Json metadata;

    Json to_json() const {
        return Json{{"collection", collection}, {"id", id}, {"document", document}, {"metadata", metadata}};
    }
};

struct GenerationContext {
    std::vector<std::string> write_apis;
    std::vector<std::string> read_apis_available;
    std::vector<std::string> policy_excerpts;
    std::vector<DomainSample> domain_samples;
    Persona persona;
    std::vector<std::string> examples;
    std::uint64_t seed = 0;

    Json to_json() const {
        Json samples = Json::array();
        for (const auto& s : domain_samples) samples.push_back(s.to_json());
        return Json{{"write_apis", write_apis},
                    {"read_apis_available", read_apis_available},
                    {"policy_excerpts", policy_excerpts},
                    {"domain_samples", samples},
                    {"persona", Json{{"id", persona.id}, {"description", persona.description}}},
                    {"examples", examples},
                    {"seed", seed}};
    }
};

// Inclusive integer range a sampler count is drawn from.
struct Range {
    int lo = 1;
    int hi = 1;
};

struct SamplerKnobs {
    Range policies{1, 3};
    Range domain_samples{2, 5};
    Range examples{1, 2};
    Range walk_length{1, 3};
    double restart_probability = 0.15;
};

namespace detail {

inline int draw_count(std::mt19937_64& rng, const Range& range, const std::string& what) {
    if (range.lo < 0 || range.lo > range.hi) {
        throw std::runtime_error("invalid range for " + what);
    }
    return std::uniform_int_distribution<int>(range.lo, range.hi)(rng);
}

// First k of a shuffled index vector: a distinct uniform subset.
inline std::vector<std::size_t> pick_indices(std::mt19937_64& rng, std::size_t pool, std::size_t k) {
    std::vector<std::size_t> indices(pool);
    for (std::size_t i = 0; i < pool; ++i) indices[i] = i;
    std::shuffle(indices.begin(), indices.end(), rng);
    indices.resize(std::min(pool, k));
    return indices;
}

}  // namespace detail

// Draw order is fixed: walk, persona, policies, domain samples, examples.
// Everything is a pure function of (pack, graph, pools, seed, knobs).
inline GenerationContext sample_context(const DomainPack& pack, const ApiGraph& graph,
                                        const std::vector<Persona>& personas,
                                        const std::vector<std::string>& examples, std::uint64_t seed,
                                        const SamplerKnobs& knobs) {
    if (personas.empty()) throw std::runtime_error("persona pool is empty");
    if (examples.empty()) throw std::runtime_error("example pool is empty");

    std::mt19937_64 rng(seed);
    GenerationContext ctx;
    ctx.seed = seed;

    const int walk_length = detail::draw_count(rng, knobs.walk_length, "walk_length");
    ctx.write_apis = random_walk(
        graph, WalkConfig{walk_length, mix_seed(seed, 0x77a1), knobs.restart_probability});
    ctx.read_apis_available = pack.registry.names(ToolKind::read);

    ctx.persona = personas[std::uniform_int_distribution<std::size_t>(0, personas.size() - 1)(rng)];

    const auto policy_count = static_cast<std::size_t>(detail::draw_count(rng, knobs.policies, "policies"));
    for (const auto idx : detail::pick_indices(rng, pack.policy_texts.size(), policy_count)) {
        const auto& text = pack.policy_texts[idx];
        ctx.policy_excerpts.push_back("[" + text.id + "] " + text.description);
    }

    std::vector<std::pair<std::string, std::string>> entities;
    for (const auto& [collection, docs] : pack.seed.collections()) {
        for (const auto& [id, doc] : docs) {
            (void)doc;
            entities.emplace_back(collection, id);
        }
    }
    const auto sample_count =
        static_cast<std::size_t>(detail::draw_count(rng, knobs.domain_samples, "domain_samples"));
    for (const auto idx : detail::pick_indices(rng, entities.size(), sample_count)) {
        const auto& [collection, id] = entities[idx];
        ctx.domain_samples.push_back(DomainSample{
            collection, id, pack.seed.entity(collection, id), Json{{"collection", collection}, {"id", id}}});
    }

    const auto example_count =
        static_cast<std::size_t>(detail::draw_count(rng, knobs.examples, "examples"));
    for (const auto idx : detail::pick_indices(rng, examples.size(), example_count)) {
        ctx.examples.push_back(examples[idx]);
    }
    return ctx;
}

// Substitutes ${name} placeholders in one pass; text produced by a
// substitution is never re-scanned. Unbound placeholders are errors.
inline std::string render_template(const std::string& tmpl,
                                   const std::map<std::string, std::string>& vars) {
    std::string out;
    out.reserve(tmpl.size());
    std::size_t pos = 0;
    while (pos < tmpl.size()) {
        const std::size_t open = tmpl.find("${", pos);
        if (open == std::string::npos) {
            out.append(tmpl, pos, std::string::npos);
            break;
        }
        const std::size_t close = tmpl.find('}', open + 2);
        if (close == std::string::npos) {
            throw std::runtime_error("unterminated placeholder in template");
        }
        out.append(tmpl, pos, open - pos);
        const std::string name = tmpl.substr(open + 2, close - open - 2);
        const auto it = vars.find(name);
        if (it == vars.end()) {
            throw std::runtime_error("unbound placeholder: ${" + name + "}");
        }
        out += it->second;
        pos = close + 1;
    }
    return out;
}

namespace detail {

inline std::string join_lines(const std::vector<std::string>& lines) {
    if (lines.empty()) return "(none)";
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i) out += "\n";
        out += lines[i];
    }
    return out;
}

inline std::string join_blocks(const std::vector<std::string>& blocks) {
    if (blocks.empty()) return "(none)";
    std::string out;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        if (i) out += "\n\n";
        out += blocks[i];
    }
    return out;
}

}  // namespace detail

// Variables the generation template may reference. Tool stubs cover the
// walk's write tools (deduplicated, walk order) plus every read tool.
inline std::map<std::string, std::string> prompt_variables(const GenerationContext& ctx,
                                                           const DomainPack& pack) {
    std::vector<std::string> user_blocks;
    std::vector<std::string> order_blocks;
    for (const auto& sample : ctx.domain_samples) {
        std::string block = "// " + sample.collection + "/" + sample.id + "\n" + sample.document.dump(2);
        if (sample.collection == "users") {
            user_blocks.push_back(std::move(block));
        } else {
            order_blocks.push_back(std::move(block));
        }
    }

    std::vector<std::string> stubs;
    std::vector<std::string> seen;
    for (const auto& name : ctx.write_apis) {
        if (std::find(seen.begin(), seen.end(), name) == seen.end()) {
            seen.push_back(name);
            stubs.push_back(to_python_stub(pack.registry.spec(name)));
        }
    }
    for (const auto& name : ctx.read_apis_available) {
        stubs.push_back(to_python_stub(pack.registry.spec(name)));
    }

    return {
        {"persona", ctx.persona.description},
        {"policy_excerpts", detail::join_lines(ctx.policy_excerpts)},
        {"user_data", detail::join_blocks(user_blocks)},
        {"order_data", detail::join_blocks(order_blocks)},
        {"tools", detail::join_blocks(stubs)},
        {"examples", detail::join_blocks(ctx.examples)},
    };
}

inline std::string render_prompt(const GenerationContext& ctx, const DomainPack& pack,
                                 const std::string& template_text) {
    return render_template(template_text, prompt_variables(ctx, pack));
}

}  // namespace agentforge
