// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "agentforge/entity_store.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace agentforge {

enum class ToolKind { read, write };

inline std::string to_string(ToolKind kind) {
    return kind == ToolKind::read ? "read" : "write";
}

struct ToolParam {
    std::string name;
    std::string type;  // string, number, boolean, list, map
    bool required = true;
    std::string description;
};

// Declared surface of one tool. `output_fields` documents the payload
// field names; dependency inference in the API graph matches them
// against parameter names of other tools.
struct ToolSpec {
    std::string name;
    ToolKind kind = ToolKind::read;
    std::vector<ToolParam> params;
    std::string returns;
    std::vector<std::string> output_fields;
    std::string doc;
};

// Structured tool invocation; round-trips losslessly through canonical JSON.
struct ToolCall {
    std::string name;
    Json arguments = Json::object();

    Json to_json() const { return Json{{"name", name}, {"arguments", arguments}}; }

    static ToolCall from_json(const Json& j) {
        ToolCall call;
        call.name = j.at("name").get<std::string>();
        call.arguments = j.value("arguments", Json::object());
        if (!call.arguments.is_object()) {
            throw std::runtime_error("tool call arguments must be a JSON object");
        }
        return call;
    }

    bool operator==(const ToolCall& other) const {
        return name == other.name && arguments == other.arguments;
    }
};

// Exactly one of payload/message is populated.
struct ToolResult {
    enum class Status { ok, error };

    Status status = Status::ok;
    Json payload;
    std::string message;

    bool is_ok() const { return status == Status::ok; }

    static ToolResult success(Json payload) {
        ToolResult r;
        r.status = Status::ok;
        r.payload = std::move(payload);
        return r;
    }

    static ToolResult failure(std::string message) {
        ToolResult r;
        r.status = Status::error;
        r.message = std::move(message);
        return r;
    }

    Json to_json() const {
        Json out = Json::object();
        out["status"] = is_ok() ? "ok" : "error";
        if (is_ok()) {
            out["payload"] = payload;
        } else {
            out["message"] = message;
        }
        return out;
    }

    static ToolResult from_json(const Json& j) {
        ToolResult r;
        if (j.at("status").get<std::string>() == "ok") {
            r.status = Status::ok;
            r.payload = j.value("payload", Json());
        } else {
            r.status = Status::error;
            r.message = j.value("message", "");
        }
        return r;
    }
};

using ToolFn = std::function<ToolResult(const Json& args, EntityStore& store)>;

class ToolRegistry {
public:
    void register_tool(ToolSpec spec, ToolFn fn) {
        if (tools_.count(spec.name) != 0) {
            throw std::runtime_error("duplicate tool: " + spec.name);
        }
        std::map<std::string, int> seen;
        for (const auto& p : spec.params) {
            if (++seen[p.name] > 1) {
                throw std::runtime_error("duplicate parameter '" + p.name + "' on tool " + spec.name);
            }
        }
        const std::string name = spec.name;
        tools_.emplace(name, Entry{std::move(spec), std::move(fn)});
    }

    bool has(const std::string& name) const { return tools_.count(name) != 0; }

    const ToolSpec& spec(const std::string& name) const {
        auto it = tools_.find(name);
        if (it == tools_.end()) {
            throw std::runtime_error("unknown tool: " + name);
        }
        return it->second.spec;
    }

    // Sorted by name.
    std::vector<ToolSpec> specs() const {
        std::vector<ToolSpec> out;
        out.reserve(tools_.size());
        for (const auto& [name, entry] : tools_) {
            (void)name;
            out.push_back(entry.spec);
        }
        return out;
    }

    std::vector<std::string> names(std::optional<ToolKind> kind = std::nullopt) const {
        std::vector<std::string> out;
        for (const auto& [name, entry] : tools_) {
            if (!kind || entry.spec.kind == *kind) out.push_back(name);
        }
        return out;
    }

    const ToolFn& fn(const std::string& name) const {
        auto it = tools_.find(name);
        if (it == tools_.end()) {
            throw std::runtime_error("unknown tool: " + name);
        }
        return it->second.fn;
    }

private:
    struct Entry {
        ToolSpec spec;
        ToolFn fn;
    };
    std::map<std::string, Entry> tools_;
};

namespace detail {

inline std::optional<std::string> check_arguments(const ToolSpec& spec, const Json& args) {
    for (const auto& param : spec.params) {
        if (!args.contains(param.name)) {
            if (param.required) {
                return "missing required argument '" + param.name + "' for tool " + spec.name;
            }
            continue;
        }
        if (!value_matches_type(args.at(param.name), param.type)) {
            return "type mismatch for argument '" + param.name + "' of tool " + spec.name +
                   ": expected " + param.type;
        }
    }
    for (const auto& [key, value] : args.items()) {
        (void)value;
        bool known = false;
        for (const auto& param : spec.params) {
            if (param.name == key) {
                known = true;
                break;
            }
        }
        if (!known) {
            return "unexpected argument '" + key + "' for tool " + spec.name;
        }
    }
    return std::nullopt;
}

}  // namespace detail

// Executes a call against the store. Errors never propagate past this
// boundary: unknown tools, bad arguments, tool-level domain errors and
// thrown exceptions all come back as status=error. Writes are atomic --
// the tool runs on a scratch copy that is committed only on success.
inline ToolResult execute(const ToolCall& call, const ToolRegistry& registry, EntityStore& store) {
    if (!registry.has(call.name)) {
        return ToolResult::failure("unknown tool: " + call.name);
    }
    if (!call.arguments.is_object()) {
        return ToolResult::failure("arguments for tool " + call.name + " must be a JSON object");
    }
    const ToolSpec& spec = registry.spec(call.name);
    if (auto problem = detail::check_arguments(spec, call.arguments)) {
        return ToolResult::failure(*problem);
    }
    try {
        if (spec.kind == ToolKind::read) {
            return registry.fn(call.name)(call.arguments, store);
        }
        EntityStore scratch = fork(store);
        ToolResult result = registry.fn(call.name)(call.arguments, scratch);
        if (result.is_ok()) {
            store = std::move(scratch);
        }
        return result;
    } catch (const std::exception& e) {
        return ToolResult::failure(std::string("tool ") + call.name + " failed: " + e.what());
    }
}

// Python-style stub used when rendering tool lists into prompts.
inline std::string to_python_stub(const ToolSpec& spec) {
    std::string out = "def " + spec.name + "(";
    for (std::size_t i = 0; i < spec.params.size(); ++i) {
        if (i) out += ", ";
        out += spec.params[i].name + ": " + spec.params[i].type;
        if (!spec.params[i].required) out += " = None";
    }
    out += ") -> " + (spec.returns.empty() ? std::string("result") : spec.returns) + "\n";
    out += "    \"\"\"[" + to_string(spec.kind) + "] " + spec.doc;
    if (!spec.params.empty()) {
        out += "\n";
        for (const auto& param : spec.params) {
            out += "    " + param.name + " (" + param.type + (param.required ? ", required" : ", optional") +
                   "): " + param.description + "\n";
        }
        out += "    \"\"\"";
    } else {
        out += "\"\"\"";
    }
    return out;
}

}  // namespace agentforge
