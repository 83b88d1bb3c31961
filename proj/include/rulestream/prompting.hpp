#pragma once
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rulestream/gateway.hpp"
#include "rulestream/store.hpp"

namespace rulestream {

enum class TaskKind { multi_choice, single_label };

// How a dataset record's label field maps to a canonical label:
// an integer index into label_space, or the label string itself.
enum class LabelMode { label_index, label_string };

struct FieldSpec {
    std::string name;   // placeholder / record key
    std::string label;  // display label in the prompt, e.g. "Context"
};

// Per-dataset prompt templates, label space, and parsing rules.
struct TaskSpec {
    std::string task_id;
    TaskKind kind = TaskKind::single_label;
    std::string description;               // task description prompt
    std::vector<FieldSpec> fields;         // rendering order
    std::vector<std::string> label_space;  // canonical labels
    std::vector<std::string> choice_fields;  // multi_choice: answer-text field per label
    std::string answer_cue = "Answer:";
    std::string summarize_preamble;        // task line for the summarizing prompt
    std::string positive_label;            // counterfactual target (single_label)
    LabelMode label_mode = LabelMode::label_index;
    int few_shot_n = 4;
};

// Built-in specs: bbq-age, bbq-disability, bbq-nationality, bbq-physical,
// bbq-religion, bbq-ses, bbq-sexual, tweet-offensive, tweet-irony, agnews,
// dbpedia. Oracle-world specs are built from a world file.
const std::vector<TaskSpec>& builtin_task_specs();
const TaskSpec* find_builtin_task(std::string_view task_id);
TaskSpec load_task_spec(const nlohmann::json& j);
std::vector<TaskSpec> load_task_specs_file(const std::filesystem::path& path);
nlohmann::json task_spec_json(const TaskSpec& spec);

struct FewShotExample {
    Sample sample;
    std::string gold_label;
};

// A rendered prompt in three parts so the chat split (system = description,
// user = the rest) and the flat text stay consistent.
struct RenderedPrompt {
    std::string rules_block;  // empty when no rules injected
    std::string description;
    std::string body;  // worked examples + fields + answer cue

    // Rules first, then the base prompt (description + body).
    std::string flat() const;
    std::vector<ChatMessage> messages() const;
};

RenderedPrompt render_basic(const TaskSpec& spec, const Sample& sample);
RenderedPrompt render_rule_based(const TaskSpec& spec, const Sample& sample,
                                 const std::vector<Rule>& rules);
RenderedPrompt render_few_shot(const TaskSpec& spec, const Sample& sample,
                               const std::vector<FewShotExample>& examples,
                               const std::vector<Rule>& rules);

enum class ParseMethod { exact, index_digit, answer_text_match, label_substring, unparsed };

std::string_view to_string(ParseMethod method);

struct ParsedAnswer {
    std::string label;  // canonical label, empty when unparsed
    std::string raw;
    ParseMethod method = ParseMethod::unparsed;
};

// Total: every response maps to a ParsedAnswer. Cascade: exact label,
// leading "Answer k"/digit (multi-choice), longest answer-text substring
// (multi-choice), earliest label substring, else unparsed.
ParsedAnswer parse_answer(const TaskSpec& spec, const Sample& sample, const std::string& response);

// Extract if/then rule lines, stripping "Rule k:" / list prefixes,
// order-preserving, byte-identical duplicates dropped.
std::vector<std::string> parse_rules(const std::string& response);

enum class CheckMode { identical, contradictory };
enum class CheckVerdict { identical, not_identical, contradictory, not_contradictory };

bool verdict_flags_removal(CheckVerdict verdict);

// Negation ("not identical") takes precedence at the same spot; the first
// occurrence wins; unrecognized text is the conservative negative.
CheckVerdict parse_check_verdict(const std::string& response, CheckMode mode);

// The four user turns of the rule-generating dialogue; the caller seeds the
// dialogue with the original question prompt and the model's wrong answer.
std::vector<std::string> build_generating_dialogue(const TaskSpec& spec, const Sample& sample,
                                                   const std::string& gold_label);

// Single-turn prompt: summarizing instruction, retrieved mistakes rendered
// with their correct answers, then the current mistake with its answer.
std::string build_summarizing_prompt(const TaskSpec& spec,
                                     const std::vector<MistakeEntry>& mistakes,
                                     const Sample& current, const std::string& gold_label);

std::string build_checking_prompt(const Rule& rule_a, const Rule& rule_b, CheckMode mode);

} // namespace rulestream
