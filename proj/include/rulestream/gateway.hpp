#pragma once
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace rulestream {

enum class Role { system, user, assistant };

std::string_view to_string(Role role);
std::optional<Role> role_from_string(std::string_view s);

struct ChatMessage {
    Role role = Role::user;
    std::string content;
};

struct CompletionRequest {
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
    std::string model_name = "gpt-3.5-turbo";
    int max_retries = 3;
};

// Wire body sent to a chat endpoint: exactly {model, messages, temperature}.
nlohmann::json request_body(const CompletionRequest& request);

// Canonical digest of a message list: role/content pairs with whitespace
// normalized, so formatting-only template changes keep scripts valid.
std::string message_digest(const std::vector<ChatMessage>& messages);

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual std::string name() const = 0;
    virtual std::string complete(const CompletionRequest& request) = 0;
};

// Deterministic test backend: digest of the message list -> canned reply.
// In strict mode an unmapped request throws UnscriptedRequestError.
class ScriptedBackend : public ChatBackend {
public:
    explicit ScriptedBackend(bool strict = true) : strict_(strict) {}

    void add(const std::vector<ChatMessage>& messages, std::string response);
    void add_digest(std::string digest, std::string response);
    // Fallback reply for non-strict mode (default empty string).
    void set_default_response(std::string response) { default_response_ = std::move(response); }

    std::string name() const override { return "scripted"; }
    std::string complete(const CompletionRequest& request) override;

    std::size_t size() const { return script_.size(); }

    // JSONL with either {"digest","response"} or {"messages":[{role,content}...],"response"}.
    static std::shared_ptr<ScriptedBackend> load_file(const std::filesystem::path& path,
                                                      bool strict = true);
    // Request/response pairs from a transcript log; used for offline replay.
    static std::shared_ptr<ScriptedBackend> from_transcript(const std::filesystem::path& path);

private:
    std::map<std::string, std::string> script_;
    std::string default_response_;
    bool strict_;
};

struct GatewayConfig {
    std::string model_name = "gpt-3.5-turbo";
    double temperature = 0.0;
    int max_retries = 3;
};

// Single entry point for completions: stamps request defaults, records every
// request to the transcript before awaiting the response, then records the
// response. Backends are shareable; each dialogue owns its history.
class Gateway {
public:
    explicit Gateway(std::shared_ptr<ChatBackend> backend, GatewayConfig config = {});

    void open_transcript(const std::filesystem::path& path);
    void close_transcript();

    std::string complete(const CompletionRequest& request);
    std::string complete(const std::vector<ChatMessage>& messages);

    // Send user turns sequentially on top of seed_messages, keeping history.
    // Aborts remaining turns on the first error.
    std::vector<std::string> run_dialogue(const std::vector<std::string>& turns,
                                          const std::vector<ChatMessage>& seed_messages);

    const GatewayConfig& config() const { return config_; }
    ChatBackend& backend() { return *backend_; }

private:
    std::shared_ptr<ChatBackend> backend_;
    GatewayConfig config_;
    std::unique_ptr<std::ofstream> transcript_;
};

} // namespace rulestream
