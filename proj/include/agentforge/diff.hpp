// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "agentforge/entity_store.hpp"

#include <optional>
#include <string>
#include <vector>

namespace agentforge {

// One changed field path. `before` absent means the path was added,
// `after` absent means it was removed, both present means replaced.
struct DiffHunk {
    std::string path;  // slash-separated, e.g. "orders/o_1/status"
    std::optional<Json> before;
    std::optional<Json> after;

    Json to_json() const {
        Json out = Json::object();
        out["path"] = path;
        if (before) out["before"] = *before;
        if (after) out["after"] = *after;
        return out;
    }

    static DiffHunk from_json(const Json& j) {
        DiffHunk hunk;
        hunk.path = j.at("path").get<std::string>();
        if (j.contains("before")) hunk.before = j.at("before");
        if (j.contains("after")) hunk.after = j.at("after");
        return hunk;
    }
};

// Structured record of the cumulative state change between two snapshots.
// Empty iff the snapshots are equal; applying the hunks to the before
// store reproduces the after store exactly.
struct DiffPatch {
    std::vector<DiffHunk> hunks;

    bool empty() const { return hunks.empty(); }

    Json to_json() const {
        Json arr = Json::array();
        for (const auto& hunk : hunks) arr.push_back(hunk.to_json());
        return arr;
    }

    static DiffPatch from_json(const Json& j) {
        DiffPatch patch;
        for (const auto& h : j) patch.hunks.push_back(DiffHunk::from_json(h));
        return patch;
    }
};

namespace detail {

inline std::string join_path(const std::string& base, const std::string& key) {
    if (key.find('/') != std::string::npos) {
        throw std::runtime_error("document key contains '/': " + key);
    }
    return base.empty() ? key : base + "/" + key;
}

// Leaf equality is dump-text equality, which keeps "patch empty" exactly
// aligned with snapshot-text equality (an int 0 and a float 0.0 differ).
inline void collect_hunks(const Json& before, const Json& after, const std::string& path,
                          std::vector<DiffHunk>& hunks) {
    if (before.dump() == after.dump()) return;
    if (before.is_object() && after.is_object()) {
        for (const auto& [key, value] : before.items()) {
            const std::string sub = join_path(path, key);
            if (after.contains(key)) {
                collect_hunks(value, after.at(key), sub, hunks);
            } else {
                hunks.push_back(DiffHunk{sub, value, std::nullopt});
            }
        }
        for (const auto& [key, value] : after.items()) {
            if (!before.contains(key)) {
                hunks.push_back(DiffHunk{join_path(path, key), std::nullopt, value});
            }
        }
        return;
    }
    if (before.is_array() && after.is_array() && before.size() == after.size()) {
        for (std::size_t i = 0; i < before.size(); ++i) {
            collect_hunks(before.at(i), after.at(i), join_path(path, std::to_string(i)), hunks);
        }
        return;
    }
    // Leaves, mismatched container kinds, or arrays of different lengths
    // are replaced wholesale at this path.
    hunks.push_back(DiffHunk{path, before, after});
}

inline std::vector<std::string> split_path(const std::string& path) {
    std::vector<std::string> parts;
    std::string current;
    for (char c : path) {
        if (c == '/') {
            parts.push_back(current);
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    parts.push_back(current);
    return parts;
}

inline void apply_hunk(Json& root, const DiffHunk& hunk) {
    const std::vector<std::string> parts = split_path(hunk.path);
    Json* node = &root;
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        const std::string& part = parts[i];
        if (node->is_array()) {
            node = &node->at(std::stoul(part));
        } else {
            if (!node->contains(part)) {
                (*node)[part] = Json::object();
            }
            node = &(*node)[part];
        }
    }
    const std::string& leaf = parts.back();
    if (!hunk.after) {
        if (node->is_array()) {
            node->erase(std::stoul(leaf));
        } else {
            node->erase(leaf);
        }
        return;
    }
    if (node->is_array()) {
        node->at(std::stoul(leaf)) = *hunk.after;
    } else {
        (*node)[leaf] = *hunk.after;
    }
}

}  // namespace detail

inline DiffPatch diff(const StateSnapshot& before, const StateSnapshot& after) {
    Json before_doc = Json::parse(before.canonical, nullptr, false);
    Json after_doc = Json::parse(after.canonical, nullptr, false);
    if (before_doc.is_discarded() || after_doc.is_discarded()) {
        throw std::runtime_error("malformed snapshot text");
    }
    DiffPatch patch;
    detail::collect_hunks(before_doc, after_doc, "", patch.hunks);
    return patch;
}

inline StateSnapshot apply_patch(const StateSnapshot& before, const DiffPatch& patch) {
    Json doc = Json::parse(before.canonical, nullptr, false);
    if (doc.is_discarded()) {
        throw std::runtime_error("malformed snapshot text");
    }
    for (const auto& hunk : patch.hunks) {
        detail::apply_hunk(doc, hunk);
    }
    return StateSnapshot{doc.dump()};
}

}  // namespace agentforge
