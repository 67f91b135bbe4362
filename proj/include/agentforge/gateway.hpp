// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "agentforge/tools.hpp"
#include "agentforge/value.hpp"

#include <chrono>
#include <cstdlib>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace agentforge {

enum class Role { system, user, assistant, tool };

inline std::string to_string(Role role) {
    switch (role) {
        case Role::system: return "system";
        case Role::user: return "user";
        case Role::assistant: return "assistant";
        case Role::tool: return "tool";
    }
    return "user";
}

inline Role role_from_string(const std::string& text) {
    if (text == "system") return Role::system;
    if (text == "user") return Role::user;
    if (text == "assistant") return Role::assistant;
    if (text == "tool") return Role::tool;
    throw std::runtime_error("unknown chat role: " + text);
}

// A tool call plus the wire id the backend assigned to it.
struct ChatToolCall {
    std::string id;
    ToolCall call;
};

struct ChatMessage {
    Role role = Role::user;
    std::optional<std::string> content;
    std::vector<ChatToolCall> tool_calls;
    std::optional<std::string> tool_call_id;

    static ChatMessage text(Role role, std::string body) {
        ChatMessage m;
        m.role = role;
        m.content = std::move(body);
        return m;
    }

    static ChatMessage tool_reply(std::string call_id, std::string body) {
        ChatMessage m;
        m.role = Role::tool;
        m.content = std::move(body);
        m.tool_call_id = std::move(call_id);
        return m;
    }

    // De-facto chat-completions wire shape; tool call arguments travel as a
    // JSON-encoded string.
    Json to_json() const {
        Json j{{"role", to_string(role)}};
        j["content"] = content ? Json(*content) : Json(nullptr);
        if (!tool_calls.empty()) {
            Json calls = Json::array();
            for (const auto& tc : tool_calls) {
                calls.push_back(Json{{"id", tc.id},
                                     {"type", "function"},
                                     {"function", Json{{"name", tc.call.name},
                                                       {"arguments", tc.call.arguments.dump()}}}});
            }
            j["tool_calls"] = std::move(calls);
        }
        if (tool_call_id) j["tool_call_id"] = *tool_call_id;
        return j;
    }

    static ChatMessage from_json(const Json& j) {
        ChatMessage m;
        m.role = role_from_string(j.at("role").get<std::string>());
        if (j.contains("content") && j.at("content").is_string()) {
            m.content = j.at("content").get<std::string>();
        }
        if (j.contains("tool_calls")) {
            for (const auto& entry : j.at("tool_calls")) {
                const Json& fn = entry.at("function");
                Json arguments = Json::parse(fn.at("arguments").get<std::string>(), nullptr, false);
                if (arguments.is_discarded() || !arguments.is_object()) {
                    throw std::runtime_error("tool call arguments are not a JSON object");
                }
                m.tool_calls.push_back(ChatToolCall{
                    entry.value("id", ""), ToolCall{fn.at("name").get<std::string>(), arguments}});
            }
        }
        if (j.contains("tool_call_id") && j.at("tool_call_id").is_string()) {
            m.tool_call_id = j.at("tool_call_id").get<std::string>();
        }
        return m;
    }
};

struct ModelConfig {
    std::string endpoint;
    std::string model;
    double temperature = 1.0;
    int max_tokens = 2048;
    int timeout_ms = 30000;
    int retry_budget = 2;
    int backoff_base_ms = 250;
};

struct CallOptions {
    std::optional<double> temperature;
    std::string conversation_key;
};

struct CallReport {
    int retries_used = 0;
};

class Backend {
public:
    virtual ~Backend() = default;
    virtual ChatMessage complete_impl(const std::vector<ChatMessage>& messages,
                                      const std::vector<ToolSpec>& tools, const CallOptions& options,
                                      CallReport& report) = 0;
};

// Single completion with gateway-level validation. The returned assistant
// message may only call tools that were provided on this request.
inline ChatMessage complete(Backend& backend, const std::vector<ChatMessage>& messages,
                            const std::vector<ToolSpec>& tools = {}, const CallOptions& options = {},
                            CallReport* report = nullptr) {
    if (messages.empty()) {
        throw std::runtime_error("complete requires a non-empty message list");
    }
    CallReport local;
    CallReport& r = report ? *report : local;
    ChatMessage reply = backend.complete_impl(messages, tools, options, r);
    if (reply.role != Role::assistant) {
        throw std::runtime_error("backend returned a non-assistant message");
    }
    if (!reply.content && reply.tool_calls.empty()) {
        throw std::runtime_error("assistant message has neither content nor tool calls");
    }
    for (const auto& tc : reply.tool_calls) {
        bool known = false;
        for (const auto& spec : tools) known |= spec.name == tc.call.name;
        if (!known) {
            throw std::runtime_error("tool call references unknown tool: " + tc.call.name);
        }
    }
    return reply;
}

inline std::vector<ChatMessage> complete_n(Backend& backend, const std::vector<ChatMessage>& messages,
                                           int n, const std::vector<ToolSpec>& tools = {},
                                           const CallOptions& options = {}, CallReport* report = nullptr) {
    if (n < 1) throw std::runtime_error("complete_n requires n >= 1");
    std::vector<ChatMessage> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out.push_back(complete(backend, messages, tools, options, report));
    return out;
}

// -- deterministic scripted stub ------------------------------------------

struct StubEntry {
    std::string match;  // substring of the last non-assistant message; "" matches anything
    ChatMessage reply;
};

// Replays canned assistant messages. Matching scans cyclically from a
// per-conversation cursor, so repeated identical prompts walk through the
// script in order while distinct conversations stay isolated.
class ScriptedStub : public Backend {
public:
    explicit ScriptedStub(std::vector<StubEntry> script) : script_(std::move(script)) {
        if (script_.empty()) throw std::runtime_error("stub script is empty");
    }

    static std::vector<StubEntry> load_script(const std::filesystem::path& path) {
        std::vector<StubEntry> script;
        for (const auto& entry : Json::parse(read_text_file(path))) {
            StubEntry e;
            e.match = entry.value("match", "");
            const Json& reply = entry.at("reply");
            e.reply.role = Role::assistant;
            if (reply.contains("content") && reply.at("content").is_string()) {
                e.reply.content = reply.at("content").get<std::string>();
            }
            if (reply.contains("tool_calls")) {
                std::size_t i = 0;
                for (const auto& tc : reply.at("tool_calls")) {
                    e.reply.tool_calls.push_back(
                        ChatToolCall{tc.value("id", "call_" + std::to_string(i)),
                                     ToolCall{tc.at("name").get<std::string>(), tc.at("arguments")}});
                    ++i;
                }
            }
            script.push_back(std::move(e));
        }
        return script;
    }

    static ScriptedStub from_file(const std::filesystem::path& path) {
        return ScriptedStub(load_script(path));
    }

    ChatMessage complete_impl(const std::vector<ChatMessage>& messages, const std::vector<ToolSpec>&,
                              const CallOptions& options, CallReport&) override {
        std::string target;
        for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
            if (it->role != Role::assistant && it->content) {
                target = *it->content;
                break;
            }
        }
        std::lock_guard<std::mutex> lock(mu_);
        std::size_t& cursor = cursors_[options.conversation_key];
        for (std::size_t probe = 0; probe < script_.size(); ++probe) {
            const std::size_t idx = (cursor + probe) % script_.size();
            if (script_[idx].match.empty() || target.find(script_[idx].match) != std::string::npos) {
                cursor = idx + 1;
                return script_[idx].reply;
            }
        }
        throw std::runtime_error("stub script has no entry matching: " + target.substr(0, 120));
    }

private:
    std::vector<StubEntry> script_;
    std::map<std::string, std::size_t> cursors_;
    std::mutex mu_;
};

// -- live HTTP backend ------------------------------------------------------

namespace detail {

inline std::string json_schema_type(const std::string& semantic) {
    if (semantic == "number") return "number";
    if (semantic == "boolean") return "boolean";
    if (semantic == "list") return "array";
    if (semantic == "map") return "object";
    return "string";
}

inline Json tool_to_wire(const ToolSpec& spec) {
    Json properties = Json::object();
    Json required = Json::array();
    for (const auto& param : spec.params) {
        properties[param.name] =
            Json{{"type", json_schema_type(param.type)}, {"description", param.description}};
        if (param.required) required.push_back(param.name);
    }
    return Json{{"type", "function"},
                {"function", Json{{"name", spec.name},
                                  {"description", spec.doc},
                                  {"parameters", Json{{"type", "object"},
                                                      {"properties", properties},
                                                      {"required", required}}}}}};
}

}  // namespace detail

inline Json build_completion_request(const ModelConfig& cfg, const std::vector<ChatMessage>& messages,
                                     const std::vector<ToolSpec>& tools, const CallOptions& options) {
    Json body{{"model", cfg.model},
              {"temperature", options.temperature ? *options.temperature : cfg.temperature},
              {"max_tokens", cfg.max_tokens}};
    Json msgs = Json::array();
    for (const auto& m : messages) msgs.push_back(m.to_json());
    body["messages"] = std::move(msgs);
    if (!tools.empty()) {
        Json wire = Json::array();
        for (const auto& spec : tools) wire.push_back(detail::tool_to_wire(spec));
        body["tools"] = std::move(wire);
    }
    return body;
}

inline ChatMessage parse_completion(const std::string& body) {
    Json j = Json::parse(body, nullptr, false);
    if (j.is_discarded()) throw std::runtime_error("backend payload is not JSON");
    if (!j.contains("choices") || !j.at("choices").is_array() || j.at("choices").empty()) {
        throw std::runtime_error("backend payload has no choices");
    }
    return ChatMessage::from_json(j.at("choices")[0].at("message"));
}

// Speaks the chat-completions wire protocol. The transport is injectable so
// fault handling is testable offline; the default posts over HTTP with a
// bearer token from AGENTFORGE_API_KEY.
class HttpBackend : public Backend {
public:
    // Returns (status code, response body); status 0 means transport failure.
    using Transport = std::function<std::pair<int, std::string>(const std::string& body)>;

    explicit HttpBackend(ModelConfig cfg, Transport transport = {})
        : cfg_(std::move(cfg)), transport_(std::move(transport)) {
        if (cfg_.retry_budget < 0) throw std::runtime_error("retry budget must be >= 0");
        if (cfg_.timeout_ms <= 0) throw std::runtime_error("timeout must be positive");
    }

    ChatMessage complete_impl(const std::vector<ChatMessage>& messages, const std::vector<ToolSpec>& tools,
                              const CallOptions& options, CallReport& report) override {
        const std::string request = build_completion_request(cfg_, messages, tools, options).dump();
        std::string last_error = "no attempt made";
        for (int attempt = 0; attempt <= cfg_.retry_budget; ++attempt) {
            if (attempt > 0) {
                ++report.retries_used;
                if (cfg_.backoff_base_ms > 0) {
                    std::this_thread::sleep_for(
                        std::chrono::milliseconds(cfg_.backoff_base_ms * (1 << (attempt - 1))));
                }
            }
            try {
                const auto [status, body] = send(request);
                if (status != 200) {
                    last_error = "http status " + std::to_string(status);
                    continue;
                }
                return parse_completion(body);
            } catch (const std::exception& e) {
                last_error = e.what();
            }
        }
        throw std::runtime_error("backend failed after " + std::to_string(cfg_.retry_budget) +
                                 " retries: " + last_error);
    }

private:
    std::pair<int, std::string> send(const std::string& request);

    ModelConfig cfg_;
    Transport transport_;
};

}  // namespace agentforge

#include <httplib.h>

namespace agentforge {

inline std::pair<int, std::string> HttpBackend::send(const std::string& request) {
    if (transport_) return transport_(request);
    const auto scheme = cfg_.endpoint.find("://");
    if (scheme == std::string::npos) {
        throw std::runtime_error("endpoint must include a scheme: " + cfg_.endpoint);
    }
    const auto split = cfg_.endpoint.find('/', scheme + 3);
    const std::string base = split == std::string::npos ? cfg_.endpoint : cfg_.endpoint.substr(0, split);
    const std::string path = split == std::string::npos ? "/" : cfg_.endpoint.substr(split);
    httplib::Client client(base);
    client.set_read_timeout(cfg_.timeout_ms / 1000, (cfg_.timeout_ms % 1000) * 1000);
    httplib::Headers headers;
    if (const char* key = std::getenv("AGENTFORGE_API_KEY")) {
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    auto res = client.Post(path, headers, request, "application/json");
    if (!res) return {0, "transport error"};
    return {res->status, res->body};
}

}  // namespace agentforge
