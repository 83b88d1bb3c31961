#pragma once
#include <chrono>
#include <functional>
#include <string>

#include "rulestream/gateway.hpp"

namespace rulestream {

struct HttpBackendConfig {
    // Origin plus optional path prefix, e.g. "https://api.example.com/v1".
    std::string base_url;
    std::string api_key_env = "OPENAI_API_KEY";
    int timeout_seconds = 60;
    int backoff_base_ms = 1000;
    double backoff_factor = 2.0;
    bool jitter = false;
};

// Chat backend speaking the OpenAI-compatible wire protocol:
// POST {base_url}/chat/completions with body {model, messages, temperature},
// answer read from choices[0].message.content. Retries transport errors,
// 429 and 5xx with exponential backoff up to request.max_retries.
class HttpBackend : public ChatBackend {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    explicit HttpBackend(HttpBackendConfig config);

    std::string name() const override { return "http"; }
    std::string complete(const CompletionRequest& request) override;

    // Test hook: replace the real sleep between retries.
    void set_sleeper(Sleeper sleeper) { sleeper_ = std::move(sleeper); }

    const HttpBackendConfig& config() const { return config_; }

private:
    HttpBackendConfig config_;
    std::string origin_;
    std::string path_prefix_;
    Sleeper sleeper_;
};

} // namespace rulestream
