#include "rulestream/oracle_world.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_set>

#include "rulestream/errors.hpp"
#include "rulestream/retrieval.hpp"
#include "rulestream/text.hpp"

namespace rulestream {

using nlohmann::json;

namespace {

std::unordered_set<std::string> token_set(std::string_view text) {
    std::unordered_set<std::string> out;
    for (auto& t : tokenize(text)) out.insert(std::move(t));
    return out;
}

bool covers(const std::unordered_set<std::string>& tokens, const std::vector<std::string>& trigger) {
    return std::all_of(trigger.begin(), trigger.end(),
                       [&](const std::string& t) { return tokens.count(t) > 0; });
}

// Split a user body into quoted prompt rules and the remaining input text.
struct PromptParts {
    std::vector<std::string> rules;
    std::string input;
};

PromptParts split_prompt(const std::string& body) {
    PromptParts parts;
    const auto lines = split_lines(body);
    std::size_t i = 0;
    if (!lines.empty() && trim(lines[0]) == "Given the following rules:") {
        i = 1;
        while (i < lines.size()) {
            const std::string line = trim(lines[i]);
            if (line.size() >= 2 && line.front() == '"' && line.back() == '"') {
                parts.rules.push_back(line.substr(1, line.size() - 2));
                ++i;
            } else {
                break;
            }
        }
    }
    for (; i < lines.size(); ++i) {
        parts.input += lines[i];
        parts.input += '\n';
    }
    return parts;
}

const ChatMessage* last_user_message(const CompletionRequest& request) {
    for (auto it = request.messages.rbegin(); it != request.messages.rend(); ++it) {
        if (it->role == Role::user) return &*it;
    }
    return nullptr;
}

const ChatMessage* first_user_message(const CompletionRequest& request) {
    for (const ChatMessage& m : request.messages) {
        if (m.role == Role::user) return &m;
    }
    return nullptr;
}

} // namespace

void validate_world(const WorldConfig& world) {
    if (world.rules.empty()) throw ConfigError("oracle world has no rules");
    if (world.fallback_label.empty()) throw ConfigError("oracle world needs a fallback_label");
    for (const WorldRule& rule : world.rules) {
        if (rule.trigger.empty()) throw ConfigError("oracle rule has an empty trigger set");
        if (rule.label.empty()) throw ConfigError("oracle rule has an empty label");
        if (rule.label == world.fallback_label) {
            throw ConfigError("fallback_label \"" + world.fallback_label +
                              "\" collides with a rule label");
        }
        if (!is_if_then_shaped(rule.text)) {
            throw ConfigError("oracle rule text is not if/then shaped: \"" + rule.text + "\"");
        }
        if (!covers(token_set(rule.text), rule.trigger)) {
            throw ConfigError("oracle rule text does not mention its own trigger tokens: \"" +
                              rule.text + "\"");
        }
    }
}

WorldConfig world_from_json(const json& j) {
    WorldConfig world;
    world.fallback_label = j.value("fallback_label", "");
    for (const auto& r : j.value("rules", json::array())) {
        WorldRule rule;
        rule.trigger = r.value("trigger", std::vector<std::string>{});
        rule.label = r.value("label", "");
        rule.text = r.value("text", "");
        world.rules.push_back(std::move(rule));
    }
    validate_world(world);
    return world;
}

WorldConfig load_world_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open world file " + path.string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw LoadError("world file " + path.string() + " is not valid JSON");
    return world_from_json(j);
}

TaskSpec oracle_task_spec(const WorldConfig& world) {
    TaskSpec spec;
    spec.task_id = "oracle";
    spec.kind = TaskKind::single_label;
    spec.description =
        "Help me perform a classification task. I will give you an input and you should answer "
        "with exactly one label.";
    spec.fields = {{"text", "Input"}};
    for (const WorldRule& rule : world.rules) {
        if (std::find(spec.label_space.begin(), spec.label_space.end(), rule.label) ==
            spec.label_space.end()) {
            spec.label_space.push_back(rule.label);
        }
    }
    spec.label_space.push_back(world.fallback_label);
    spec.answer_cue = "Answer:";
    spec.summarize_preamble =
        "I am doing a classification task. Given an input, I need to choose the correct label.";
    spec.label_mode = LabelMode::label_string;
    return spec;
}

OracleWorldBackend::OracleWorldBackend(WorldConfig world) : world_(std::move(world)) {
    validate_world(world_);
}

std::string OracleWorldBackend::complete(const CompletionRequest& request) {
    const ChatMessage* last = last_user_message(request);
    if (!last) throw GatewayError("oracle backend needs a user message");
    const std::string& content = last->content;

    if (ifind(content, "these two rules are identical") != std::string_view::npos) {
        const auto lines = split_lines(content);
        std::vector<std::string> texts;
        for (const std::string& line : lines) {
            const std::string t = trim(line);
            if (t.rfind("1.", 0) == 0 || t.rfind("2.", 0) == 0) {
                texts.push_back(normalize_ws(t.substr(2)));
            }
        }
        if (texts.size() == 2 && texts[0] == texts[1]) return "Identical.";
        return "Not identical.";
    }
    if (ifind(content, "these two rules are contradictory") != std::string_view::npos) {
        return "Not contradictory.";
    }
    if (ifind(content, "rewrite these reasons into rules") != std::string_view::npos) {
        const ChatMessage* first = first_user_message(request);
        const auto parts = split_prompt(first ? first->content : "");
        return emit_covering_rule(parts.input);
    }
    if (ifind(content, "summarize the rules") != std::string_view::npos) {
        return emit_summarized_rule(content);
    }
    if (ifind(content, "correct answer is") != std::string_view::npos &&
        ifind(content, "reasons") == std::string_view::npos) {
        return "Understood.";
    }
    if (ifind(content, "give me the reasons") != std::string_view::npos) {
        return "1. The input carries the tokens that decide the label.";
    }
    if (normalize_ws(content) == "Be precise and concise.") {
        return "The label follows from the input tokens.";
    }
    return answer_request(content);
}

std::string OracleWorldBackend::answer_request(const std::string& user_body) const {
    const auto parts = split_prompt(user_body);
    const auto input_tokens = token_set(parts.input);

    const WorldRule* applicable = nullptr;
    for (const WorldRule& rule : world_.rules) {
        if (covers(input_tokens, rule.trigger)) {
            applicable = &rule;
            break;
        }
    }
    if (!applicable) return world_.fallback_label;

    for (const std::string& prompt_rule : parts.rules) {
        if (covers(token_set(prompt_rule), applicable->trigger)) {
            return applicable->label;
        }
    }
    return world_.fallback_label;
}

std::string OracleWorldBackend::emit_covering_rule(const std::string& input_section) const {
    const auto tokens = token_set(input_section);
    for (const WorldRule& rule : world_.rules) {
        if (covers(tokens, rule.trigger)) {
            return "Rule 1: " + rule.text;
        }
    }
    return "No rules apply.";
}

std::string OracleWorldBackend::emit_summarized_rule(const std::string& prompt) const {
    const auto tokens = token_set(prompt);
    const std::string lowered = to_lower(prompt);
    const WorldRule* best = nullptr;
    std::size_t best_pos = 0;
    for (const WorldRule& rule : world_.rules) {
        if (!covers(tokens, rule.trigger)) continue;
        const std::size_t pos = lowered.rfind(to_lower(rule.trigger.front()));
        if (!best || pos > best_pos) {
            best = &rule;
            best_pos = pos;
        }
    }
    if (!best) return "No rules apply.";
    return "Rule 1: " + best->text;
}

} // namespace rulestream
