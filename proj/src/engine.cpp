#include "rulestream/engine.hpp"

#include <algorithm>

#include "rulestream/errors.hpp"
#include "rulestream/retrieval.hpp"
#include "rulestream/text.hpp"

namespace rulestream {

using nlohmann::json;

json engine_config_json(const EngineConfig& config) {
    return json{{"k_rules", config.k_rules},
                {"capacity", config.capacity},
                {"m_mistakes", config.m_mistakes},
                {"n_check_neighbors", config.n_check_neighbors},
                {"max_rules_per_generation", config.max_rules_per_generation},
                {"few_shot", config.few_shot},
                {"few_shot_n", config.few_shot_n},
                {"rule_updates_enabled", config.rule_updates_enabled}};
}

EngineConfig engine_config_from_json(const json& j) {
    EngineConfig config;
    config.k_rules = j.value("k_rules", config.k_rules);
    config.capacity = j.value("capacity", config.capacity);
    config.m_mistakes = j.value("m_mistakes", config.m_mistakes);
    config.n_check_neighbors = j.value("n_check_neighbors", config.n_check_neighbors);
    config.max_rules_per_generation =
        j.value("max_rules_per_generation", config.max_rules_per_generation);
    config.few_shot = j.value("few_shot", config.few_shot);
    config.few_shot_n = j.value("few_shot_n", config.few_shot_n);
    config.rule_updates_enabled = j.value("rule_updates_enabled", config.rule_updates_enabled);
    for (int count : {config.k_rules, config.capacity, config.m_mistakes,
                      config.n_check_neighbors, config.max_rules_per_generation}) {
        if (count < 1) throw ConfigError("engine counts must be positive");
    }
    return config;
}

std::string_view to_string(BaselineKind kind) {
    switch (kind) {
        case BaselineKind::none: return "none";
        case BaselineKind::zero_shot: return "zero_shot";
        case BaselineKind::zero_shot_cot: return "zero_shot_cot";
        case BaselineKind::few_shot: return "few_shot";
    }
    return "none";
}

std::optional<BaselineKind> baseline_from_string(std::string_view s) {
    if (s == "none") return BaselineKind::none;
    if (s == "zero_shot") return BaselineKind::zero_shot;
    if (s == "zero_shot_cot") return BaselineKind::zero_shot_cot;
    if (s == "few_shot") return BaselineKind::few_shot;
    return std::nullopt;
}

Engine::Engine(TaskSpec spec, EngineConfig config, Gateway& gateway)
    : spec_(std::move(spec)),
      config_(config),
      gateway_(&gateway),
      theta_(config.capacity) {}

void Engine::push_history(Sample sample, std::string gold_label) {
    history_.push_back({std::move(sample), std::move(gold_label)});
}

std::vector<FewShotExample> Engine::few_shot_examples(const Sample& sample) const {
    if (history_.empty() || config_.few_shot_n <= 0) return {};
    Corpus corpus;
    for (const FewShotExample& ex : history_) {
        corpus.add(ex.sample.id, input_text(ex.sample));
    }
    // Zero scores kept: the prompt always carries a fixed number of examples.
    std::vector<FewShotExample> out;
    for (const ScoredDoc& doc : corpus.top_k(input_text(sample),
                                             static_cast<std::size_t>(config_.few_shot_n))) {
        out.push_back(history_[doc.index]);
    }
    return out;
}

RenderedPrompt Engine::render_for(const Sample& sample, const std::vector<Rule>& retrieved) const {
    if (config_.few_shot) {
        return render_few_shot(spec_, sample, few_shot_examples(sample), retrieved);
    }
    return render_rule_based(spec_, sample, retrieved);
}

AnswerResult Engine::answer_at(const Sample& sample, int step) {
    const auto retrieved =
        retrieve_rules(theta_, input_text(sample), static_cast<std::size_t>(config_.k_rules));
    const RenderedPrompt prompt = render_for(sample, retrieved);
    const std::string raw = gateway_->complete(prompt.messages());

    std::vector<int> used;
    used.reserve(retrieved.size());
    for (const Rule& r : retrieved) used.push_back(r.id);
    if (config_.rule_updates_enabled && !used.empty()) {
        theta_.touch(used, step);
    }
    return {parse_answer(spec_, sample, raw), std::move(used), raw};
}

AnswerResult Engine::answer(const Sample& sample) { return answer_at(sample, step_ + 1); }

ParsedAnswer Engine::baseline_answer(const Sample& sample, BaselineKind kind) {
    RenderedPrompt prompt;
    switch (kind) {
        case BaselineKind::none:
            return {};
        case BaselineKind::zero_shot:
            prompt = render_basic(spec_, sample);
            break;
        case BaselineKind::zero_shot_cot:
            prompt = render_basic(spec_, sample);
            prompt.body = "Let's think step by step.\n\n" + prompt.body;
            break;
        case BaselineKind::few_shot:
            prompt = render_few_shot(spec_, sample, few_shot_examples(sample), {});
            break;
    }
    const std::string raw = gateway_->complete(prompt.messages());
    return parse_answer(spec_, sample, raw);
}

bool Engine::validate_rule(const Sample& sample, const std::string& gold_label,
                           const std::string& rule_text) {
    Rule candidate;
    candidate.text = rule_text;
    // The candidate stands alone so its own effect is what gets measured.
    const RenderedPrompt prompt = render_rule_based(spec_, sample, {candidate});
    const std::string raw = gateway_->complete(prompt.messages());
    const ParsedAnswer parsed = parse_answer(spec_, sample, raw);
    return parsed.method != ParseMethod::unparsed && parsed.label == gold_label;
}

std::vector<std::string> Engine::generate_from_single(const Sample& sample,
                                                      const std::string& gold_label,
                                                      const std::string& wrong_answer) {
    std::vector<ChatMessage> seed = render_basic(spec_, sample).messages();
    seed.push_back({Role::assistant, wrong_answer});
    const auto turns = build_generating_dialogue(spec_, sample, gold_label);
    const auto replies = gateway_->run_dialogue(turns, seed);
    auto rules = parse_rules(replies.back());
    if (rules.size() > static_cast<std::size_t>(config_.max_rules_per_generation)) {
        rules.resize(static_cast<std::size_t>(config_.max_rules_per_generation));
    }
    return rules;
}

std::vector<std::string> Engine::summarize_from_mistakes(const Sample& sample,
                                                         const std::string& gold_label) {
    const auto similar = retrieve_mistakes(phi_, input_text(sample),
                                           static_cast<std::size_t>(config_.m_mistakes), sample.id);
    if (similar.empty()) return {};
    const std::string prompt = build_summarizing_prompt(spec_, similar, sample, gold_label);
    const std::string raw = gateway_->complete({{Role::user, prompt}});
    auto rules = parse_rules(raw);
    if (rules.size() > static_cast<std::size_t>(config_.max_rules_per_generation)) {
        rules.resize(static_cast<std::size_t>(config_.max_rules_per_generation));
    }
    return rules;
}

AdmitOutcome Engine::maintain_and_admit(Rule rule) {
    const auto neighbors = retrieve_rules(theta_, rule.text,
                                          static_cast<std::size_t>(config_.n_check_neighbors));
    // All completions first; mutations only after every verdict is in.
    std::vector<RemovedRule> flagged;
    for (const Rule& neighbor : neighbors) {
        const std::string identical_reply = gateway_->complete(
            {{Role::user, build_checking_prompt(rule, neighbor, CheckMode::identical)}});
        if (parse_check_verdict(identical_reply, CheckMode::identical) == CheckVerdict::identical) {
            flagged.push_back({neighbor.id, RemovalReason::superseded_identical});
            continue;
        }
        const std::string contra_reply = gateway_->complete(
            {{Role::user, build_checking_prompt(rule, neighbor, CheckMode::contradictory)}});
        if (parse_check_verdict(contra_reply, CheckMode::contradictory) ==
            CheckVerdict::contradictory) {
            flagged.push_back({neighbor.id, RemovalReason::superseded_contradictory});
        }
    }

    AdmitOutcome outcome;
    for (const RemovedRule& f : flagged) {
        theta_.remove({f.id}, f.reason);
        outcome.removed.push_back(f);
    }
    const std::string text = rule.text;
    for (const Rule& evicted : theta_.admit(std::move(rule))) {
        outcome.removed.push_back({evicted.id, RemovalReason::evicted});
    }
    outcome.admitted_id = theta_.find_text(text)->id;
    return outcome;
}

std::vector<std::string> Engine::drop_known_texts(const std::vector<std::string>& texts) const {
    std::vector<std::string> fresh;
    std::vector<std::string> seen;
    for (const std::string& text : texts) {
        const std::string norm = normalize_ws(text);
        if (theta_.find_text(text)) continue;  // exact duplicate, no gateway call spent
        if (std::find(seen.begin(), seen.end(), norm) != seen.end()) continue;
        seen.push_back(norm);
        fresh.push_back(text);
    }
    return fresh;
}

void Engine::admit_effective(const std::vector<std::string>& texts, RuleOrigin origin,
                             const Sample& sample, int step, StepOutcome& out) {
    for (const std::string& text : texts) {
        Rule rule;
        rule.text = text;
        rule.origin = origin;
        rule.created_step = step;
        rule.last_used_step = step;
        rule.origin_sample_ids = {sample.id};
        AdmitOutcome admitted = maintain_and_admit(std::move(rule));
        out.rules_admitted.push_back(admitted.admitted_id);
        out.rules_removed.insert(out.rules_removed.end(), admitted.removed.begin(),
                                 admitted.removed.end());
    }
}

StepOutcome Engine::process_sample(const Sample& sample, const std::string& gold_label) {
    const int step = step_ + 1;
    RuleCollection theta_backup = theta_;
    MistakeCollection phi_backup = phi_;
    try {
        StepOutcome out;
        out.sample_id = sample.id;

        AnswerResult ans = answer_at(sample, step);
        out.answered = ans.parsed;
        out.rules_used = ans.rules_used;
        out.correct =
            ans.parsed.method != ParseMethod::unparsed && ans.parsed.label == gold_label;

        if (!out.correct && config_.rule_updates_enabled) {
            const auto candidates =
                drop_known_texts(generate_from_single(sample, gold_label, ans.raw));
            std::vector<std::string> effective;
            for (const std::string& text : candidates) {
                if (validate_rule(sample, gold_label, text)) effective.push_back(text);
            }
            if (!effective.empty()) {
                admit_effective(effective, RuleOrigin::single_mistake, sample, step, out);
            } else {
                phi_.record(sample, ans.raw, step);
                out.stored_in_phi = true;
                const auto summarized =
                    drop_known_texts(summarize_from_mistakes(sample, gold_label));
                std::vector<std::string> kept;
                for (const std::string& text : summarized) {
                    if (validate_rule(sample, gold_label, text)) kept.push_back(text);
                }
                admit_effective(kept, RuleOrigin::summarized, sample, step, out);
            }
        }

        step_ = step;
        history_.push_back({sample, gold_label});
        return out;
    } catch (...) {
        theta_ = std::move(theta_backup);
        phi_ = std::move(phi_backup);
        throw;
    }
}

std::vector<PreloadIssue> Engine::preload(const std::vector<std::string>& rule_texts) {
    std::vector<PreloadIssue> issues;
    for (std::size_t i = 0; i < rule_texts.size(); ++i) {
        Rule rule;
        rule.text = rule_texts[i];
        rule.origin = RuleOrigin::preloaded;
        rule.created_step = 0;
        rule.last_used_step = 0;
        try {
            theta_.admit(std::move(rule));
        } catch (const Error& e) {
            issues.push_back({i, e.what()});
        }
    }
    return issues;
}

} // namespace rulestream
