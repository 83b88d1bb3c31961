#include "rulestream/store.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <sstream>

#include "json.hpp"

#include "rulestream/errors.hpp"
#include "rulestream/text.hpp"

namespace rulestream {

using nlohmann::json;

const std::string* Sample::field(std::string_view name) const {
    for (const auto& [key, value] : fields) {
        if (key == name) return &value;
    }
    return nullptr;
}

std::string input_text(const Sample& sample) {
    std::string out;
    for (const auto& [key, value] : sample.fields) {
        if (!out.empty()) out.push_back('\n');
        out += value;
    }
    return out;
}

std::string_view to_string(RuleOrigin origin) {
    switch (origin) {
        case RuleOrigin::single_mistake: return "single_mistake";
        case RuleOrigin::summarized: return "summarized";
        case RuleOrigin::preloaded: return "preloaded";
    }
    return "single_mistake";
}

std::optional<RuleOrigin> rule_origin_from_string(std::string_view s) {
    if (s == "single_mistake") return RuleOrigin::single_mistake;
    if (s == "summarized") return RuleOrigin::summarized;
    if (s == "preloaded") return RuleOrigin::preloaded;
    return std::nullopt;
}

std::string_view to_string(RemovalReason reason) {
    switch (reason) {
        case RemovalReason::superseded_identical: return "superseded-identical";
        case RemovalReason::superseded_contradictory: return "superseded-contradictory";
        case RemovalReason::evicted: return "evicted";
    }
    return "evicted";
}

RuleCollection::RuleCollection(int capacity) : capacity_(capacity) {
    if (capacity <= 0) throw ConfigError("rule collection capacity must be positive");
}

std::vector<Rule> RuleCollection::admit(Rule rule) {
    if (rule.text.empty() || !is_if_then_shaped(rule.text)) {
        throw ShapeError("rule text is not if/then shaped: \"" + rule.text + "\"");
    }
    if (const Rule* existing = find_text(rule.text)) {
        throw DuplicateRuleError("rule text already present as id " + std::to_string(existing->id),
                                 existing->id);
    }
    rule.id = next_id_++;
    if (rule.last_used_step < rule.created_step) rule.last_used_step = rule.created_step;
    rules_.push_back(std::move(rule));

    std::vector<Rule> evicted;
    while (static_cast<int>(rules_.size()) > capacity_) {
        auto victim = std::min_element(
            rules_.begin(), rules_.end(), [](const Rule& a, const Rule& b) {
                return std::tie(a.last_used_step, a.created_step, a.id) <
                       std::tie(b.last_used_step, b.created_step, b.id);
            });
        audit_.push_back({rules_.back().created_step, victim->id, RemovalReason::evicted});
        evicted.push_back(*victim);
        rules_.erase(victim);
    }
    return evicted;
}

void RuleCollection::touch(const std::vector<int>& rule_ids, int step) {
    if (step < clock_) {
        throw std::invalid_argument("touch step " + std::to_string(step) +
                                    " precedes collection clock " + std::to_string(clock_));
    }
    std::vector<Rule*> targets;
    targets.reserve(rule_ids.size());
    for (int id : rule_ids) {
        auto it = std::find_if(rules_.begin(), rules_.end(),
                               [id](const Rule& r) { return r.id == id; });
        if (it == rules_.end()) {
            throw NotFoundError("no rule with id " + std::to_string(id));
        }
        targets.push_back(&*it);
    }
    for (Rule* r : targets) {
        r->last_used_step = step;
        r->use_count += 1;
    }
    clock_ = step;
}

void RuleCollection::remove(const std::vector<int>& rule_ids, RemovalReason reason) {
    for (int id : rule_ids) {
        if (!find(id)) throw NotFoundError("no rule with id " + std::to_string(id));
    }
    for (int id : rule_ids) {
        audit_.push_back({clock_, id, reason});
        rules_.erase(std::find_if(rules_.begin(), rules_.end(),
                                  [id](const Rule& r) { return r.id == id; }));
    }
}

const Rule* RuleCollection::find(int id) const {
    for (const Rule& r : rules_) {
        if (r.id == id) return &r;
    }
    return nullptr;
}

const Rule* RuleCollection::find_text(std::string_view text) const {
    const std::string norm = normalize_ws(text);
    for (const Rule& r : rules_) {
        if (normalize_ws(r.text) == norm) return &r;
    }
    return nullptr;
}

void RuleCollection::save(std::ostream& out) const {
    json header = {{"schema_version", 1},
                   {"kind", "rule_collection"},
                   {"capacity", capacity_},
                   {"clock", clock_},
                   {"next_id", next_id_}};
    out << header.dump() << '\n';
    for (const Rule& r : rules_) {
        json line = {{"id", r.id},
                     {"text", r.text},
                     {"created_step", r.created_step},
                     {"last_used_step", r.last_used_step},
                     {"use_count", r.use_count},
                     {"origin", to_string(r.origin)},
                     {"origin_sample_ids", r.origin_sample_ids}};
        out << line.dump() << '\n';
    }
}

void RuleCollection::save_file(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw LoadError("cannot open " + path.string() + " for writing");
    save(out);
}

RuleCollection RuleCollection::load(std::istream& in) {
    std::string line;
    int line_no = 0;
    auto fail = [&](const std::string& why) -> LoadError {
        return LoadError("rule collection line " + std::to_string(line_no) + ": " + why);
    };

    if (!std::getline(in, line)) throw LoadError("rule collection file is empty");
    ++line_no;
    json header = json::parse(line, nullptr, false);
    if (header.is_discarded() || !header.is_object() ||
        header.value("kind", "") != "rule_collection") {
        throw fail("expected a rule_collection header record");
    }
    if (header.value("schema_version", 0) != 1) throw fail("unsupported schema_version");

    RuleCollection collection(header.value("capacity", 100));
    collection.clock_ = header.value("clock", 0);

    int max_id = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw fail("malformed record");
        Rule r;
        try {
            r.id = j.at("id").get<int>();
            r.text = j.at("text").get<std::string>();
            r.created_step = j.at("created_step").get<int>();
            r.last_used_step = j.at("last_used_step").get<int>();
            r.use_count = j.at("use_count").get<int>();
            r.origin_sample_ids = j.value("origin_sample_ids", std::vector<std::string>{});
            auto origin = rule_origin_from_string(j.at("origin").get<std::string>());
            if (!origin) throw fail("unknown origin");
            r.origin = *origin;
        } catch (const json::exception& e) {
            throw fail(std::string("missing or mistyped field: ") + e.what());
        }
        if (r.id <= max_id) throw fail("ids must be strictly ascending");
        if (!is_if_then_shaped(r.text)) throw fail("rule text is not if/then shaped");
        if (r.last_used_step < r.created_step) throw fail("last_used_step precedes created_step");
        if (r.use_count < 0) throw fail("negative use_count");
        if (collection.find_text(r.text)) throw fail("duplicate normalized rule text");
        if (collection.size() >= collection.capacity_) throw fail("more rules than capacity");
        max_id = r.id;
        collection.rules_.push_back(std::move(r));
    }
    collection.next_id_ = std::max(header.value("next_id", max_id + 1), max_id + 1);
    return collection;
}

RuleCollection RuleCollection::load_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open " + path.string());
    return load(in);
}

void MistakeCollection::record(Sample sample, std::string model_answer, int step) {
    if (!entries_.empty() && step < entries_.back().step) {
        throw std::invalid_argument("mistake step " + std::to_string(step) +
                                    " precedes last stored step " +
                                    std::to_string(entries_.back().step));
    }
    MistakeEntry entry;
    entry.input_text = input_text(sample);
    entry.sample = std::move(sample);
    entry.model_answer = std::move(model_answer);
    entry.step = step;
    entries_.push_back(std::move(entry));
}

} // namespace rulestream
