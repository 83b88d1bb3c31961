#include "rulestream/http_backend.hpp"

#include <cstdlib>
#include <random>
#include <thread>

#include "httplib.h"

#include "rulestream/errors.hpp"

namespace rulestream {

using nlohmann::json;

namespace {

// Split "scheme://host:port/prefix" into origin and path prefix.
std::pair<std::string, std::string> split_base_url(const std::string& base_url) {
    const auto scheme_end = base_url.find("://");
    const std::size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    const auto path_start = base_url.find('/', host_start);
    if (path_start == std::string::npos) return {base_url, ""};
    std::string prefix = base_url.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {base_url.substr(0, path_start), prefix};
}

bool retryable_status(int status) {
    return status == 429 || (status >= 500 && status < 600);
}

} // namespace

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
    if (config_.base_url.empty()) throw ConfigError("http backend needs a base_url");
    std::tie(origin_, path_prefix_) = split_base_url(config_.base_url);
    sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::string HttpBackend::complete(const CompletionRequest& request) {
    const std::string body = request_body(request).dump();
    const std::string path = path_prefix_ + "/chat/completions";

    httplib::Headers headers;
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    std::mt19937 jitter_rng(std::random_device{}());
    std::string last_error;
    for (int attempt = 0; attempt <= request.max_retries; ++attempt) {
        if (attempt > 0) {
            double delay = config_.backoff_base_ms;
            for (int i = 1; i < attempt; ++i) delay *= config_.backoff_factor;
            if (config_.jitter) {
                std::uniform_real_distribution<double> dist(0.5, 1.5);
                delay *= dist(jitter_rng);
            }
            sleeper_(std::chrono::milliseconds(static_cast<long long>(delay)));
        }

        httplib::Client client(origin_);
        client.set_connection_timeout(config_.timeout_seconds);
        client.set_read_timeout(config_.timeout_seconds);
        auto result = client.Post(path, headers, body, "application/json");

        if (!result) {
            last_error = "transport error: " + httplib::to_string(result.error());
            continue;
        }
        if (retryable_status(result->status)) {
            last_error = "status " + std::to_string(result->status);
            continue;
        }
        if (result->status != 200) {
            throw GatewayError("chat endpoint returned status " + std::to_string(result->status) +
                               ": " + result->body.substr(0, 200));
        }
        json parsed = json::parse(result->body, nullptr, false);
        if (parsed.is_discarded() || !parsed.contains("choices") || parsed["choices"].empty() ||
            !parsed["choices"][0].contains("message")) {
            throw GatewayError("malformed completion response: " + result->body.substr(0, 200));
        }
        return parsed["choices"][0]["message"].value("content", "");
    }
    throw GatewayError("gateway unavailable after " + std::to_string(request.max_retries + 1) +
                       " attempts (" + last_error + ")");
}

} // namespace rulestream
