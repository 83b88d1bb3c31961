#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rulestream/errors.hpp"
#include "rulestream/gateway.hpp"

using namespace rulestream;
namespace fs = std::filesystem;

namespace {

std::vector<ChatMessage> hello_messages() {
    return {{Role::system, "You are a careful assistant."}, {Role::user, "Hello there"}};
}

fs::path temp_file(const std::string& name) {
    return fs::temp_directory_path() / ("rulestream_test_" + name);
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("scripted backend is a digest map") {
    ScriptedBackend backend(/*strict=*/true);
    backend.add(hello_messages(), "Answer 1");

    CompletionRequest request;
    request.messages = hello_messages();
    CHECK(backend.complete(request) == "Answer 1");

    request.messages.push_back({Role::user, "something new"});
    CHECK_THROWS_AS(backend.complete(request), UnscriptedRequestError);
}

TEST_CASE("digest ignores whitespace-only differences") {
    std::vector<ChatMessage> a = {{Role::user, "Hello   world"}};
    std::vector<ChatMessage> b = {{Role::user, " Hello world\n"}};
    std::vector<ChatMessage> c = {{Role::user, "Hello worlds"}};
    CHECK(message_digest(a) == message_digest(b));
    CHECK(message_digest(a) != message_digest(c));
    // role is part of the digest
    std::vector<ChatMessage> d = {{Role::assistant, "Hello world"}};
    CHECK(message_digest(a) != message_digest(d));
}

TEST_CASE("non-strict scripted backend falls back to the default reply") {
    ScriptedBackend backend(/*strict=*/false);
    backend.set_default_response("fallback");
    CompletionRequest request;
    request.messages = hello_messages();
    CHECK(backend.complete(request) == "fallback");
}

TEST_CASE("wire body matches the golden schema document") {
    CompletionRequest request;
    request.messages = hello_messages();
    const nlohmann::json body = request_body(request);

    std::ifstream golden_in(fs::path(RS_TEST_DIR) / "golden" / "chat_request.json");
    REQUIRE(golden_in.good());
    const nlohmann::json golden = nlohmann::json::parse(golden_in);
    CHECK(body.dump() == golden.dump());  // canonicalized key order
}

TEST_CASE("run_dialogue keeps full history and aborts on the first error") {
    auto backend = std::make_shared<ScriptedBackend>(/*strict=*/true);
    Gateway gateway(backend);

    std::vector<ChatMessage> seed = {{Role::user, "question"}, {Role::assistant, "wrong"}};
    std::vector<ChatMessage> history = seed;
    history.push_back({Role::user, "turn one"});
    backend->add(history, "reply one");
    history.push_back({Role::assistant, "reply one"});
    history.push_back({Role::user, "turn two"});
    backend->add(history, "reply two");

    const auto replies = gateway.run_dialogue({"turn one", "turn two"}, seed);
    REQUIRE(replies.size() == 2);
    CHECK(replies[0] == "reply one");
    CHECK(replies[1] == "reply two");

    SUBCASE("a missing mapping aborts the remaining turns") {
        CHECK_THROWS_AS(gateway.run_dialogue({"turn one", "unmapped"}, seed),
                        UnscriptedRequestError);
    }
    SUBCASE("empty seed with a single turn") {
        backend->add({{Role::user, "solo"}}, "solo reply");
        const auto solo = gateway.run_dialogue({"solo"}, {});
        REQUIRE(solo.size() == 1);
        CHECK(solo[0] == "solo reply");
    }
}

TEST_CASE("transcripts record the request before the response and replay offline") {
    const fs::path path = temp_file("transcript.jsonl");
    {
        auto backend = std::make_shared<ScriptedBackend>(/*strict=*/true);
        backend->add(hello_messages(), "recorded reply");
        Gateway gateway(backend);
        gateway.open_transcript(path);
        CHECK(gateway.complete(hello_messages()) == "recorded reply");

        // an unmapped request still leaves its request line behind
        CHECK_THROWS_AS(gateway.complete({{Role::user, "never mapped"}}), UnscriptedRequestError);
        gateway.close_transcript();
    }

    const std::string text = slurp(path);
    const auto first_request = text.find("\"type\":\"request\"");
    const auto first_response = text.find("\"type\":\"response\"");
    REQUIRE(first_request != std::string::npos);
    REQUIRE(first_response != std::string::npos);
    CHECK(first_request < first_response);
    // two requests were recorded, one response
    CHECK(text.find("\"type\":\"request\"", first_request + 1) != std::string::npos);

    auto replay = ScriptedBackend::from_transcript(path);
    Gateway replay_gateway(replay);
    CHECK(replay_gateway.complete(hello_messages()) == "recorded reply");
    CHECK_THROWS_AS(replay_gateway.complete({{Role::user, "never mapped"}}),
                    UnscriptedRequestError);
    fs::remove(path);
}

TEST_CASE("scripted backends load from JSONL files") {
    const fs::path path = temp_file("script.jsonl");
    {
        std::ofstream out(path);
        out << R"({"messages":[{"role":"user","content":"ping"}],"response":"pong"})" << "\n";
        out << R"({"digest":")" << message_digest({{Role::user, "direct"}})
            << R"(","response":"by digest"})" << "\n";
    }
    auto backend = ScriptedBackend::load_file(path);
    CHECK(backend->size() == 2);
    Gateway gateway(backend);
    CHECK(gateway.complete({{Role::user, "ping"}}) == "pong");
    CHECK(gateway.complete({{Role::user, "direct"}}) == "by digest");
    fs::remove(path);

    const fs::path bad = temp_file("script_bad.jsonl");
    {
        std::ofstream out(bad);
        out << R"({"no_response":true})" << "\n";
    }
    CHECK_THROWS_AS(ScriptedBackend::load_file(bad), LoadError);
    fs::remove(bad);
}

TEST_CASE("gateway stamps its defaults onto message-only completions") {
    struct Capture : ChatBackend {
        std::string name() const override { return "capture"; }
        std::string complete(const CompletionRequest& request) override {
            last = request;
            return "ok";
        }
        CompletionRequest last;
    };
    auto backend = std::make_shared<Capture>();
    GatewayConfig config;
    config.model_name = "test-model";
    config.temperature = 0.0;
    config.max_retries = 5;
    Gateway gateway(backend, config);
    gateway.complete({{Role::user, "hi"}});
    CHECK(backend->last.model_name == "test-model");
    CHECK(backend->last.temperature == 0.0);
    CHECK(backend->last.max_retries == 5);
    CHECK_THROWS_AS(gateway.complete(std::vector<ChatMessage>{}), ConfigError);
}
