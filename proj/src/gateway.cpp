#include "rulestream/gateway.hpp"

#include <fstream>

#include "rulestream/errors.hpp"
#include "rulestream/text.hpp"

namespace rulestream {

using nlohmann::json;

std::string_view to_string(Role role) {
    switch (role) {
        case Role::system: return "system";
        case Role::user: return "user";
        case Role::assistant: return "assistant";
    }
    return "user";
}

std::optional<Role> role_from_string(std::string_view s) {
    if (s == "system") return Role::system;
    if (s == "user") return Role::user;
    if (s == "assistant") return Role::assistant;
    return std::nullopt;
}

json request_body(const CompletionRequest& request) {
    json messages = json::array();
    for (const ChatMessage& m : request.messages) {
        messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
    }
    return json{{"model", request.model_name},
                {"messages", messages},
                {"temperature", request.temperature}};
}

std::string message_digest(const std::vector<ChatMessage>& messages) {
    std::uint64_t hash = fnv1a64("chat");
    for (const ChatMessage& m : messages) {
        hash = fnv1a64(to_string(m.role), hash);
        hash = fnv1a64("\x1f", hash);
        hash = fnv1a64(normalize_ws(m.content), hash);
        hash = fnv1a64("\x1e", hash);
    }
    return to_hex(hash);
}

void ScriptedBackend::add(const std::vector<ChatMessage>& messages, std::string response) {
    script_[message_digest(messages)] = std::move(response);
}

void ScriptedBackend::add_digest(std::string digest, std::string response) {
    script_[std::move(digest)] = std::move(response);
}

std::string ScriptedBackend::complete(const CompletionRequest& request) {
    const std::string digest = message_digest(request.messages);
    auto it = script_.find(digest);
    if (it != script_.end()) return it->second;
    if (strict_) {
        std::string tail;
        if (!request.messages.empty()) {
            tail = normalize_ws(request.messages.back().content).substr(0, 120);
        }
        throw UnscriptedRequestError("no scripted response for digest " + digest +
                                     " (last turn: \"" + tail + "\")");
    }
    return default_response_;
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::load_file(const std::filesystem::path& path,
                                                            bool strict) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open script " + path.string());
    auto backend = std::make_shared<ScriptedBackend>(strict);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("response")) {
            throw LoadError("script line " + std::to_string(line_no) +
                            ": expected an object with a response field");
        }
        if (j.contains("digest")) {
            backend->add_digest(j.at("digest").get<std::string>(),
                                j.at("response").get<std::string>());
            continue;
        }
        if (!j.contains("messages")) {
            throw LoadError("script line " + std::to_string(line_no) +
                            ": needs either digest or messages");
        }
        std::vector<ChatMessage> messages;
        for (const auto& m : j.at("messages")) {
            auto role = role_from_string(m.value("role", ""));
            if (!role) {
                throw LoadError("script line " + std::to_string(line_no) + ": unknown role");
            }
            messages.push_back({*role, m.value("content", "")});
        }
        backend->add(messages, j.at("response").get<std::string>());
    }
    return backend;
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_transcript(
    const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open transcript " + path.string());
    auto backend = std::make_shared<ScriptedBackend>(/*strict=*/true);
    std::string line;
    int line_no = 0;
    std::string pending_digest;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw LoadError("transcript line " + std::to_string(line_no) + ": malformed record");
        }
        const std::string type = j.value("type", "");
        if (type == "request") {
            pending_digest = j.value("digest", "");
        } else if (type == "response") {
            const std::string digest = j.value("digest", pending_digest);
            if (digest.empty()) {
                throw LoadError("transcript line " + std::to_string(line_no) +
                                ": response without digest");
            }
            backend->add_digest(digest, j.value("content", ""));
        }
    }
    return backend;
}

Gateway::Gateway(std::shared_ptr<ChatBackend> backend, GatewayConfig config)
    : backend_(std::move(backend)), config_(std::move(config)) {
    if (!backend_) throw ConfigError("gateway requires a backend");
}

void Gateway::open_transcript(const std::filesystem::path& path) {
    auto out = std::make_unique<std::ofstream>(path);
    if (!*out) throw LoadError("cannot open transcript " + path.string() + " for writing");
    transcript_ = std::move(out);
}

void Gateway::close_transcript() { transcript_.reset(); }

std::string Gateway::complete(const CompletionRequest& request) {
    if (request.messages.empty()) throw ConfigError("completion request has no messages");
    const std::string digest = message_digest(request.messages);
    if (transcript_) {
        json record = {{"type", "request"},
                       {"digest", digest},
                       {"body", request_body(request)}};
        *transcript_ << record.dump() << '\n';
        transcript_->flush();  // request durable before the response is awaited
    }
    const std::string content = backend_->complete(request);
    if (transcript_) {
        json record = {{"type", "response"}, {"digest", digest}, {"content", content}};
        *transcript_ << record.dump() << '\n';
        transcript_->flush();
    }
    return content;
}

std::string Gateway::complete(const std::vector<ChatMessage>& messages) {
    CompletionRequest request;
    request.messages = messages;
    request.temperature = config_.temperature;
    request.model_name = config_.model_name;
    request.max_retries = config_.max_retries;
    return complete(request);
}

std::vector<std::string> Gateway::run_dialogue(const std::vector<std::string>& turns,
                                               const std::vector<ChatMessage>& seed_messages) {
    if (turns.empty()) throw ConfigError("run_dialogue needs at least one turn");
    std::vector<ChatMessage> history = seed_messages;
    std::vector<std::string> replies;
    replies.reserve(turns.size());
    for (const std::string& turn : turns) {
        history.push_back({Role::user, turn});
        std::string reply = complete(history);
        history.push_back({Role::assistant, reply});
        replies.push_back(std::move(reply));
    }
    return replies;
}

} // namespace rulestream
