#include "rulestream/prompting.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "rulestream/errors.hpp"
#include "rulestream/text.hpp"

namespace rulestream {

using nlohmann::json;

namespace {

std::string field_lines(const TaskSpec& spec, const Sample& sample) {
    std::string out;
    for (const FieldSpec& fs : spec.fields) {
        const std::string* value = sample.field(fs.name);
        if (!value) {
            throw TemplateError("sample \"" + sample.id + "\" is missing field \"" + fs.name +
                                "\" required by task " + spec.task_id);
        }
        out += fs.label + ": \"" + *value + "\"\n";
    }
    return out;
}

std::string question_block(const TaskSpec& spec, const Sample& sample) {
    return field_lines(spec, sample) + spec.answer_cue;
}

std::string answered_block(const TaskSpec& spec, const Sample& sample, const std::string& gold) {
    return field_lines(spec, sample) + spec.answer_cue + " " + gold;
}

std::string rules_block_for(const std::vector<Rule>& rules) {
    std::string out = "Given the following rules:";
    for (const Rule& r : rules) {
        out += "\n\"" + r.text + "\"";
    }
    return out;
}

void append_part(std::string& out, const std::string& part) {
    if (part.empty()) return;
    if (!out.empty()) out += "\n\n";
    out += part;
}

// Strips list decorations ("Rule 3:", "2.", "-", "*") from a candidate line.
std::string strip_rule_prefix(std::string line) {
    std::string t = trim(line);
    while (!t.empty() && (t.front() == '-' || t.front() == '*')) {
        t = trim(t.substr(1));
    }
    if (starts_with_word(t, "rule")) {
        std::size_t i = 4;
        while (i < t.size() && t[i] == ' ') ++i;
        std::size_t j = i;
        while (j < t.size() && std::isdigit(static_cast<unsigned char>(t[j]))) ++j;
        if (j > i && j < t.size() && (t[j] == ':' || t[j] == '.' || t[j] == ')')) {
            return trim(t.substr(j + 1));
        }
    }
    std::size_t j = 0;
    while (j < t.size() && std::isdigit(static_cast<unsigned char>(t[j]))) ++j;
    if (j > 0 && j < t.size() && (t[j] == ':' || t[j] == '.' || t[j] == ')')) {
        return trim(t.substr(j + 1));
    }
    return t;
}

std::string strip_answer_decorations(const std::string& response) {
    std::string t = trim(response);
    while (t.size() >= 2 && ((t.front() == '"' && t.back() == '"') ||
                             (t.front() == '\'' && t.back() == '\''))) {
        t = trim(t.substr(1, t.size() - 2));
    }
    while (!t.empty() && (t.back() == '.' || t.back() == '!')) {
        t = trim(t.substr(0, t.size() - 1));
    }
    return t;
}

std::optional<int> leading_choice_index(const std::string& response, std::size_t n_choices) {
    const std::string t = trim(response);
    std::size_t i = 0;
    if (starts_with_word(t, "answer")) {
        i = 6;
        while (i < t.size() && (t[i] == ' ' || t[i] == ':' || t[i] == '#')) ++i;
    }
    std::size_t j = i;
    int k = 0;
    while (j < t.size() && std::isdigit(static_cast<unsigned char>(t[j]))) {
        k = k * 10 + (t[j] - '0');
        ++j;
    }
    if (j == i) return std::nullopt;  // no digits
    if (j < t.size() && std::isalnum(static_cast<unsigned char>(t[j]))) return std::nullopt;
    if (k < 1 || static_cast<std::size_t>(k) > n_choices) return std::nullopt;
    return k;
}

} // namespace

std::string RenderedPrompt::flat() const {
    std::string out;
    append_part(out, rules_block);
    append_part(out, description);
    append_part(out, body);
    return out;
}

std::vector<ChatMessage> RenderedPrompt::messages() const {
    std::string user;
    append_part(user, rules_block);
    append_part(user, body);
    std::vector<ChatMessage> out;
    if (!description.empty()) out.push_back({Role::system, description});
    out.push_back({Role::user, user});
    return out;
}

RenderedPrompt render_basic(const TaskSpec& spec, const Sample& sample) {
    return {"", spec.description, question_block(spec, sample)};
}

RenderedPrompt render_rule_based(const TaskSpec& spec, const Sample& sample,
                                 const std::vector<Rule>& rules) {
    if (rules.empty()) return render_basic(spec, sample);
    return {rules_block_for(rules), spec.description, question_block(spec, sample)};
}

RenderedPrompt render_few_shot(const TaskSpec& spec, const Sample& sample,
                               const std::vector<FewShotExample>& examples,
                               const std::vector<Rule>& rules) {
    std::string body;
    for (const FewShotExample& ex : examples) {
        append_part(body, answered_block(spec, ex.sample, ex.gold_label));
    }
    append_part(body, question_block(spec, sample));
    return {rules.empty() ? std::string{} : rules_block_for(rules), spec.description, body};
}

std::string_view to_string(ParseMethod method) {
    switch (method) {
        case ParseMethod::exact: return "exact";
        case ParseMethod::index_digit: return "index_digit";
        case ParseMethod::answer_text_match: return "answer_text_match";
        case ParseMethod::label_substring: return "label_substring";
        case ParseMethod::unparsed: return "unparsed";
    }
    return "unparsed";
}

ParsedAnswer parse_answer(const TaskSpec& spec, const Sample& sample, const std::string& response) {
    ParsedAnswer out;
    out.raw = response;
    out.method = ParseMethod::unparsed;

    const std::string cleaned = to_lower(normalize_ws(strip_answer_decorations(response)));
    for (const std::string& label : spec.label_space) {
        if (cleaned == to_lower(normalize_ws(label))) {
            out.label = label;
            out.method = ParseMethod::exact;
            return out;
        }
    }

    if (spec.kind == TaskKind::multi_choice) {
        if (auto k = leading_choice_index(response, spec.label_space.size())) {
            out.label = spec.label_space[static_cast<std::size_t>(*k - 1)];
            out.method = ParseMethod::index_digit;
            return out;
        }
        // Earliest occurrence wins (models lead with the answer); length only
        // breaks ties between nested texts starting at the same spot.
        std::size_t best_pos = std::string_view::npos;
        std::size_t best_len = 0;
        std::size_t best_idx = 0;
        bool found = false;
        const std::size_t n = std::min(spec.choice_fields.size(), spec.label_space.size());
        for (std::size_t i = 0; i < n; ++i) {
            const std::string* text = sample.field(spec.choice_fields[i]);
            if (!text || text->empty()) continue;
            const std::size_t pos = ifind(response, *text);
            if (pos == std::string_view::npos) continue;
            if (!found || pos < best_pos || (pos == best_pos && text->size() > best_len)) {
                best_pos = pos;
                best_len = text->size();
                best_idx = i;
                found = true;
            }
        }
        if (found) {
            out.label = spec.label_space[best_idx];
            out.method = ParseMethod::answer_text_match;
            return out;
        }
    }

    std::size_t best_pos = std::string_view::npos;
    std::size_t best_len = 0;
    const std::string* best_label = nullptr;
    for (const std::string& label : spec.label_space) {
        const std::size_t pos = ifind(response, label);
        if (pos == std::string_view::npos) continue;
        if (pos < best_pos || (pos == best_pos && label.size() > best_len)) {
            best_pos = pos;
            best_len = label.size();
            best_label = &label;
        }
    }
    if (best_label) {
        out.label = *best_label;
        out.method = ParseMethod::label_substring;
    }
    return out;
}

std::vector<std::string> parse_rules(const std::string& response) {
    std::vector<std::string> out;
    for (const std::string& line : split_lines(response)) {
        const std::string body = strip_rule_prefix(line);
        if (body.empty() || !is_if_then_shaped(body)) continue;
        if (std::find(out.begin(), out.end(), body) != out.end()) continue;
        out.push_back(body);
    }
    return out;
}

bool verdict_flags_removal(CheckVerdict verdict) {
    return verdict == CheckVerdict::identical || verdict == CheckVerdict::contradictory;
}

CheckVerdict parse_check_verdict(const std::string& response, CheckMode mode) {
    const std::string_view word = mode == CheckMode::identical ? "identical" : "contradictory";
    const CheckVerdict positive =
        mode == CheckMode::identical ? CheckVerdict::identical : CheckVerdict::contradictory;
    const CheckVerdict negative =
        mode == CheckMode::identical ? CheckVerdict::not_identical : CheckVerdict::not_contradictory;

    const std::size_t pos = ifind(response, word);
    if (pos == std::string_view::npos) return negative;

    // Is the first occurrence negated? Look back over spaces/hyphens for "not".
    std::size_t i = pos;
    while (i > 0 && (response[i - 1] == ' ' || response[i - 1] == '-')) --i;
    if (i >= 3) {
        const std::string_view prev(response.data() + i - 3, 3);
        const bool boundary = i == 3 || !std::isalnum(static_cast<unsigned char>(response[i - 4]));
        if (boundary && ifind(prev, "not") == 0) return negative;
    }
    return positive;
}

std::vector<std::string> build_generating_dialogue(const TaskSpec& /*spec*/, const Sample& /*sample*/,
                                                   const std::string& gold_label) {
    return {
        "This correct answer is " + gold_label + ".",
        "Please give me the reasons for " + gold_label + " as the correct answer. List by points.",
        "Be precise and concise.",
        "Please rewrite these reasons into rules for making judgments, using the format of "
        "\"if..., then...\". Give it in sections. Each is an independent rule. Directly give the "
        "content of the rule. Do not answer anything else.",
    };
}

std::string build_summarizing_prompt(const TaskSpec& spec,
                                     const std::vector<MistakeEntry>& mistakes,
                                     const Sample& current, const std::string& gold_label) {
    std::string out = spec.summarize_preamble;
    if (!out.empty() && out.back() != ' ') out += " ";
    out +=
        "Here I will give you several examples. Please help me summarize the rules to choose the "
        "answer, using the format of \"if..., then...\". Be precise and concise. Give it in "
        "sections. Each is an independent rule. Directly give the content of the rule. Do not "
        "answer anything else.";
    for (const MistakeEntry& entry : mistakes) {
        out += "\n\n" + answered_block(spec, entry.sample, entry.sample.gold_label);
    }
    out += "\n\n" + answered_block(spec, current, gold_label);
    return out;
}

std::string build_checking_prompt(const Rule& rule_a, const Rule& rule_b, CheckMode mode) {
    const std::string word = mode == CheckMode::identical ? "identical" : "contradictory";
    std::string out = "I will give you two rules. Please help me classify whether the contents of "
                      "these two rules are " +
                      word +
                      ". You are only allowed to give me the answer, selecting from \"" + word +
                      "\" and \"not " + word + "\".";
    out += "\n1. " + rule_a.text;
    out += "\n2. " + rule_b.text;
    return out;
}

namespace {

TaskSpec make_bbq_task(std::string task_id) {
    TaskSpec spec;
    spec.task_id = std::move(task_id);
    spec.kind = TaskKind::multi_choice;
    spec.description =
        "Help me perform a multiple-choice question-answering task. Given the context, I will "
        "give you a question and three possible answers to choose from. You need to find the "
        "best answer.";
    spec.fields = {{"context", "Context"},
                   {"question", "Question"},
                   {"answer1", "Answer 1"},
                   {"answer2", "Answer 2"},
                   {"answer3", "Answer 3"}};
    spec.label_space = {"Answer 1", "Answer 2", "Answer 3"};
    spec.choice_fields = {"answer1", "answer2", "answer3"};
    spec.answer_cue = "Correct Answer:";
    spec.summarize_preamble =
        "I am doing a multiple-choice question-answering task. Given the context and question, I "
        "need to choose the best answer from three possible answers.";
    spec.label_mode = LabelMode::label_index;
    return spec;
}

TaskSpec make_tweet_task(std::string task_id, const std::string& quality,
                         const std::string& positive, const std::string& negative) {
    TaskSpec spec;
    spec.task_id = std::move(task_id);
    spec.kind = TaskKind::single_label;
    spec.description =
        "Help me perform a classification task. I will give you a review and you should help me "
        "by figuring out whether this review is semantically " + quality +
        ". You are only allowed to give me the answer, selecting from \"" + positive +
        "\" and \"" + negative + "\".";
    spec.fields = {{"text", "Review"}};
    spec.label_space = {negative, positive};
    spec.answer_cue = "Sentiment:";
    spec.summarize_preamble =
        "I am doing a classification task. Given a review, I need to figure out whether it is "
        "semantically " + quality + ".";
    spec.positive_label = positive;
    spec.label_mode = LabelMode::label_index;
    return spec;
}

std::vector<TaskSpec> make_builtin_specs() {
    std::vector<TaskSpec> specs;
    for (const char* domain : {"age", "disability", "nationality", "physical", "religion",
                               "ses", "sexual"}) {
        specs.push_back(make_bbq_task(std::string("bbq-") + domain));
    }
    specs.push_back(make_tweet_task("tweet-offensive", "offensive", "offensive", "not offensive"));
    specs.push_back(make_tweet_task("tweet-irony", "ironic", "irony", "not irony"));

    TaskSpec agnews;
    agnews.task_id = "agnews";
    agnews.kind = TaskKind::single_label;
    agnews.description =
        "Please help me perform a news classification task. I will give you a news title and the "
        "corresponding description. You should classify the news into the categories of "
        "\"World\", \"Sports\", \"Business\", and \"Technology\". You are only allowed to give me "
        "a word, selecting from these four categories.";
    agnews.fields = {{"title", "News"}, {"description", "Description"}};
    agnews.label_space = {"World", "Sports", "Business", "Technology"};
    agnews.answer_cue = "Category:";
    agnews.summarize_preamble =
        "I am doing a news classification task. Given a news title and the corresponding "
        "description, I need to classify the news into one of four categories.";
    specs.push_back(std::move(agnews));

    TaskSpec dbpedia;
    dbpedia.task_id = "dbpedia";
    dbpedia.kind = TaskKind::single_label;
    dbpedia.description =
        "Help me perform a text classification task. I will give you a pair of title and content. "
        "Classify the text into one of the following 14 categories of \"Company\", \"Educational "
        "Institution\", \"Artist\", \"Athlete\", \"Office Holder\", \"Mean Of Transportation\", "
        "\"Building\", \"Natural Place\", \"Village\", \"Animal\", \"Plant\", \"Album\", "
        "\"Film\", \"Written Work\". You are only allowed to answer one category from these 14 "
        "categories.";
    dbpedia.fields = {{"title", "Title"}, {"content", "Content"}};
    dbpedia.label_space = {"Company", "Educational Institution", "Artist", "Athlete",
                           "Office Holder", "Mean Of Transportation", "Building", "Natural Place",
                           "Village", "Animal", "Plant", "Album", "Film", "Written Work"};
    dbpedia.answer_cue = "Category:";
    dbpedia.summarize_preamble =
        "I am doing a text classification task. Given a pair of title and content, I need to "
        "classify the text into one of 14 categories.";
    specs.push_back(std::move(dbpedia));
    return specs;
}

} // namespace

const std::vector<TaskSpec>& builtin_task_specs() {
    static const std::vector<TaskSpec> specs = make_builtin_specs();
    return specs;
}

const TaskSpec* find_builtin_task(std::string_view task_id) {
    for (const TaskSpec& spec : builtin_task_specs()) {
        if (spec.task_id == task_id) return &spec;
    }
    return nullptr;
}

TaskSpec load_task_spec(const json& j) {
    TaskSpec spec;
    spec.task_id = j.at("task_id").get<std::string>();
    const std::string kind = j.value("kind", "single_label");
    if (kind == "multi_choice") {
        spec.kind = TaskKind::multi_choice;
    } else if (kind == "single_label") {
        spec.kind = TaskKind::single_label;
    } else {
        throw LoadError("task " + spec.task_id + ": unknown kind \"" + kind + "\"");
    }
    spec.description = j.value("description", "");
    for (const auto& f : j.value("fields", json::array())) {
        spec.fields.push_back({f.at("name").get<std::string>(), f.at("label").get<std::string>()});
    }
    spec.label_space = j.value("label_space", std::vector<std::string>{});
    spec.choice_fields = j.value("choice_fields", std::vector<std::string>{});
    spec.answer_cue = j.value("answer_cue", "Answer:");
    spec.summarize_preamble = j.value("summarize_preamble", "");
    spec.positive_label = j.value("positive_label", "");
    const std::string mode = j.value("label_mode", "label_index");
    if (mode == "label_index") {
        spec.label_mode = LabelMode::label_index;
    } else if (mode == "label_string") {
        spec.label_mode = LabelMode::label_string;
    } else {
        throw LoadError("task " + spec.task_id + ": unknown label_mode \"" + mode + "\"");
    }
    spec.few_shot_n = j.value("few_shot_n", 4);
    if (spec.label_space.empty()) throw LoadError("task " + spec.task_id + ": empty label_space");
    if (spec.fields.empty()) throw LoadError("task " + spec.task_id + ": no fields");
    return spec;
}

nlohmann::json task_spec_json(const TaskSpec& spec) {
    json fields = json::array();
    for (const FieldSpec& f : spec.fields) {
        fields.push_back({{"name", f.name}, {"label", f.label}});
    }
    return json{{"task_id", spec.task_id},
                {"kind", spec.kind == TaskKind::multi_choice ? "multi_choice" : "single_label"},
                {"description", spec.description},
                {"fields", fields},
                {"label_space", spec.label_space},
                {"choice_fields", spec.choice_fields},
                {"answer_cue", spec.answer_cue},
                {"summarize_preamble", spec.summarize_preamble},
                {"positive_label", spec.positive_label},
                {"label_mode",
                 spec.label_mode == LabelMode::label_index ? "label_index" : "label_string"},
                {"few_shot_n", spec.few_shot_n}};
}

std::vector<TaskSpec> load_task_specs_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open task spec file " + path.string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw LoadError("task spec file " + path.string() + " is not valid JSON");
    std::vector<TaskSpec> specs;
    const json& list = j.is_array() ? j : j.at("tasks");
    for (const auto& item : list) {
        specs.push_back(load_task_spec(item));
    }
    return specs;
}

} // namespace rulestream
