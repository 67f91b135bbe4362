// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "agentforge/value.hpp"

#include <map>
#include <string>
#include <vector>

namespace agentforge {

// Canonical serialization of a store. Keys sorted lexicographically,
// integers unpadded, decimals in shortest round-trip form; two snapshots
// compare equal iff the stores are structurally equal.
struct StateSnapshot {
    std::string canonical;

    bool operator==(const StateSnapshot& other) const = default;
};

// In-memory entity database: collection name -> entity id -> document.
// A store instance is confined to one episode at a time; copies are deep
// and fully independent.
class EntityStore {
public:
    using Collection = std::map<std::string, Json>;

    EntityStore() = default;

    // store_json: {"users": {"u_1": {...}}, ...}
    static EntityStore from_json(const Json& store_json) {
        if (!store_json.is_object()) {
            throw std::runtime_error("store document must be a JSON object");
        }
        EntityStore store;
        for (const auto& [name, entities] : store_json.items()) {
            if (!entities.is_object()) {
                throw std::runtime_error("collection '" + name + "' must be an object of documents");
            }
            Collection collection;
            for (const auto& [id, doc] : entities.items()) {
                collection.emplace(id, doc);
            }
            store.collections_.emplace(name, std::move(collection));
        }
        return store;
    }

    Json to_json() const {
        Json out = Json::object();
        for (const auto& [name, collection] : collections_) {
            Json entities = Json::object();
            for (const auto& [id, doc] : collection) {
                entities[id] = doc;
            }
            out[name] = std::move(entities);
        }
        return out;
    }

    bool has_collection(const std::string& name) const { return collections_.count(name) != 0; }

    const Collection& collection(const std::string& name) const {
        auto it = collections_.find(name);
        if (it == collections_.end()) {
            throw std::runtime_error("unknown collection: " + name);
        }
        return it->second;
    }

    bool has_entity(const std::string& collection_name, const std::string& id) const {
        auto it = collections_.find(collection_name);
        return it != collections_.end() && it->second.count(id) != 0;
    }

    const Json& entity(const std::string& collection_name, const std::string& id) const {
        const Collection& c = collection(collection_name);
        auto it = c.find(id);
        if (it == c.end()) {
            throw std::runtime_error("unknown entity: " + collection_name + "/" + id);
        }
        return it->second;
    }

    Json& entity_mut(const std::string& collection_name, const std::string& id) {
        auto cit = collections_.find(collection_name);
        if (cit == collections_.end()) {
            throw std::runtime_error("unknown collection: " + collection_name);
        }
        auto it = cit->second.find(id);
        if (it == cit->second.end()) {
            throw std::runtime_error("unknown entity: " + collection_name + "/" + id);
        }
        return it->second;
    }

    void put_entity(const std::string& collection_name, const std::string& id, Json doc) {
        collections_[collection_name][id] = std::move(doc);
    }

    const std::map<std::string, Collection>& collections() const { return collections_; }

private:
    std::map<std::string, Collection> collections_;
};

// Deterministic: std::map ordering fixes key order, nlohmann::json dumps
// integers unpadded and floats in shortest round-trip form.
inline StateSnapshot snapshot(const EntityStore& store) {
    return StateSnapshot{store.to_json().dump()};
}

// Deep, independent copy for per-episode isolation.
inline EntityStore fork(const EntityStore& store) {
    return store;
}

inline EntityStore store_from_snapshot(const StateSnapshot& snap) {
    Json parsed = Json::parse(snap.canonical, nullptr, false);
    if (parsed.is_discarded()) {
        throw std::runtime_error("malformed snapshot text");
    }
    return EntityStore::from_json(parsed);
}

// --- Schema -----------------------------------------------------------

// Minimal per-collection document schema: field name -> {type, required}.
// Types: string, number, boolean, list, map.
struct FieldSchema {
    std::string type;
    bool required = false;
};

struct CollectionSchema {
    std::map<std::string, FieldSchema> fields;
};

using PackSchema = std::map<std::string, CollectionSchema>;

inline PackSchema schema_from_json(const Json& schema_json) {
    PackSchema schema;
    for (const auto& [collection, spec] : schema_json.items()) {
        CollectionSchema cs;
        for (const auto& [field, fspec] : spec.at("fields").items()) {
            cs.fields[field] = FieldSchema{fspec.at("type").get<std::string>(),
                                           fspec.value("required", false)};
        }
        schema[collection] = std::move(cs);
    }
    return schema;
}

inline bool value_matches_type(const Json& value, const std::string& type) {
    if (type == "string") return value.is_string();
    if (type == "number") return value.is_number();
    if (type == "boolean") return value.is_boolean();
    if (type == "list") return value.is_array();
    if (type == "map") return value.is_object();
    return false;
}

// Returns one problem string per violation; empty means the store validates.
inline std::vector<std::string> validate_store(const EntityStore& store, const PackSchema& schema) {
    std::vector<std::string> problems;
    for (const auto& [collection, entities] : store.collections()) {
        auto sit = schema.find(collection);
        if (sit == schema.end()) {
            problems.push_back("collection '" + collection + "' has no schema");
            continue;
        }
        const CollectionSchema& cs = sit->second;
        for (const auto& [id, doc] : entities) {
            const std::string where = collection + "/" + id;
            if (!doc.is_object()) {
                problems.push_back(where + ": document is not a map");
                continue;
            }
            for (const auto& [field, fspec] : cs.fields) {
                if (!doc.contains(field)) {
                    if (fspec.required) {
                        problems.push_back(where + ": missing required field '" + field + "'");
                    }
                    continue;
                }
                if (!value_matches_type(doc.at(field), fspec.type)) {
                    problems.push_back(where + ": field '" + field + "' is not a " + fspec.type);
                }
            }
            for (const auto& [field, value] : doc.items()) {
                (void)value;
                if (cs.fields.count(field) == 0) {
                    problems.push_back(where + ": undeclared field '" + field + "'");
                }
            }
        }
    }
    return problems;
}

}  // namespace agentforge
