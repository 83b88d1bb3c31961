#pragma once
#include <filesystem>
#include <string>
#include <vector>

#include "rulestream/gateway.hpp"
#include "rulestream/prompting.hpp"

namespace rulestream {

// One ground-truth rule of a closed world: a sample is covered by a prompt
// rule whose token set includes every trigger token.
struct WorldRule {
    std::vector<std::string> trigger;
    std::string label;
    std::string text;  // the verbatim if/then rule the backend emits
};

struct WorldConfig {
    std::vector<WorldRule> rules;
    std::string fallback_label;  // the fixed wrong answer for uncovered inputs
};

void validate_world(const WorldConfig& world);
WorldConfig load_world_file(const std::filesystem::path& path);
WorldConfig world_from_json(const nlohmann::json& j);

// Single-label task over a "text" field whose label space is the world's
// rule labels plus the fallback label.
TaskSpec oracle_task_spec(const WorldConfig& world);

// Deterministic backend whose behavior is fully determined by the world:
//  - answer requests: the applicable world rule's label iff some quoted
//    prompt rule covers the sample's trigger tokens, else fallback_label;
//  - generating dialogues: emits the covering ground-truth rule verbatim;
//  - summarizing prompts: emits the rule covering the last mistake block;
//  - rule checks: "Identical." iff normalized texts match, otherwise
//    "Not identical." / "Not contradictory.".
// Pure function of the request; shareable across threads.
class OracleWorldBackend : public ChatBackend {
public:
    explicit OracleWorldBackend(WorldConfig world);

    std::string name() const override { return "oracle"; }
    std::string complete(const CompletionRequest& request) override;

    const WorldConfig& world() const { return world_; }

private:
    std::string answer_request(const std::string& user_body) const;
    std::string emit_covering_rule(const std::string& input_section) const;
    std::string emit_summarized_rule(const std::string& prompt) const;

    WorldConfig world_;
};

} // namespace rulestream
