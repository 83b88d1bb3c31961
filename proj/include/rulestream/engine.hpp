#pragma once
#include <string>
#include <vector>

#include "rulestream/gateway.hpp"
#include "rulestream/prompting.hpp"
#include "rulestream/store.hpp"

namespace rulestream {

struct EngineConfig {
    int k_rules = 3;
    int capacity = 100;
    int m_mistakes = 3;
    int n_check_neighbors = 3;
    int max_rules_per_generation = 8;
    bool few_shot = false;
    int few_shot_n = 4;
    bool rule_updates_enabled = true;
};

nlohmann::json engine_config_json(const EngineConfig& config);
EngineConfig engine_config_from_json(const nlohmann::json& j);

struct AnswerResult {
    ParsedAnswer parsed;
    std::vector<int> rules_used;
    std::string raw;
};

struct RemovedRule {
    int id = 0;
    RemovalReason reason = RemovalReason::evicted;
};

struct StepOutcome {
    std::string sample_id;
    ParsedAnswer answered;
    bool correct = false;
    std::vector<int> rules_used;
    std::vector<int> rules_admitted;
    std::vector<RemovedRule> rules_removed;
    bool stored_in_phi = false;
};

enum class BaselineKind { none, zero_shot, zero_shot_cot, few_shot };

std::string_view to_string(BaselineKind kind);
std::optional<BaselineKind> baseline_from_string(std::string_view s);

struct AdmitOutcome {
    int admitted_id = 0;
    std::vector<RemovedRule> removed;  // superseded neighbors plus evictions
};

struct PreloadIssue {
    std::size_t index = 0;
    std::string message;
};

// One engine processes its stream strictly sequentially; distinct engines
// with distinct collections may run concurrently against a shared gateway.
class Engine {
public:
    Engine(TaskSpec spec, EngineConfig config, Gateway& gateway);

    // Retrieve top-k rules, complete once, parse, and mark used rules at the
    // upcoming step. Gateway errors propagate without consuming the step.
    AnswerResult answer(const Sample& sample);

    // Rule-free completion for the frozen comparator. No state is touched.
    ParsedAnswer baseline_answer(const Sample& sample, BaselineKind kind);

    // True iff the model answers gold with exactly this one rule in the prompt.
    bool validate_rule(const Sample& sample, const std::string& gold_label,
                       const std::string& rule_text);

    // Four-turn dialogue seeded with the question prompt and the wrong answer;
    // parses the final reply, capped at max_rules_per_generation.
    std::vector<std::string> generate_from_single(const Sample& sample,
                                                  const std::string& gold_label,
                                                  const std::string& wrong_answer);

    // Retrieve similar old mistakes and summarize rules from them; empty when
    // no other mistakes are retrievable.
    std::vector<std::string> summarize_from_mistakes(const Sample& sample,
                                                     const std::string& gold_label);

    // Check the new rule against its nearest neighbors, drop neighbors judged
    // identical or contradictory (keep-new), then admit. All gateway calls
    // happen before any mutation, so a failure commits nothing.
    AdmitOutcome maintain_and_admit(Rule rule);

    // The full per-sample pipeline. Atomic: a gateway failure leaves the
    // collections, clock and history unchanged.
    StepOutcome process_sample(const Sample& sample, const std::string& gold_label);

    // Admit shape-valid texts with origin=preloaded at step 0; invalid ones
    // are reported and skipped, valid ones still load.
    std::vector<PreloadIssue> preload(const std::vector<std::string>& rule_texts);

    const TaskSpec& task() const { return spec_; }
    const EngineConfig& config() const { return config_; }
    void set_rule_updates(bool enabled) { config_.rule_updates_enabled = enabled; }

    RuleCollection& rules() { return theta_; }
    const RuleCollection& rules() const { return theta_; }
    void set_rules(RuleCollection rules) { theta_ = std::move(rules); }
    MistakeCollection& mistakes() { return phi_; }
    const MistakeCollection& mistakes() const { return phi_; }

    int step() const { return step_; }
    const std::vector<FewShotExample>& history() const { return history_; }
    void push_history(Sample sample, std::string gold_label);

private:
    AnswerResult answer_at(const Sample& sample, int step);
    std::vector<FewShotExample> few_shot_examples(const Sample& sample) const;
    RenderedPrompt render_for(const Sample& sample, const std::vector<Rule>& retrieved) const;
    std::vector<std::string> drop_known_texts(const std::vector<std::string>& texts) const;
    void admit_effective(const std::vector<std::string>& texts, RuleOrigin origin,
                         const Sample& sample, int step, StepOutcome& out);

    TaskSpec spec_;
    EngineConfig config_;
    Gateway* gateway_;
    RuleCollection theta_;
    MistakeCollection phi_;
    std::vector<FewShotExample> history_;
    int step_ = 0;
};

} // namespace rulestream
