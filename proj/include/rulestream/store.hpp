#pragma once
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace rulestream {

// One stream element: named text segments plus the revealed gold label.
// Field order is the task's rendering order (loaders build it that way).
struct Sample {
    std::string id;
    std::vector<std::pair<std::string, std::string>> fields;
    std::string gold_label;
    std::string task_id;

    const std::string* field(std::string_view name) const;
};

// Concatenated field values; the retrieval query / document text for a sample.
std::string input_text(const Sample& sample);

enum class RuleOrigin { single_mistake, summarized, preloaded };

std::string_view to_string(RuleOrigin origin);
std::optional<RuleOrigin> rule_origin_from_string(std::string_view s);

enum class RemovalReason { superseded_identical, superseded_contradictory, evicted };

std::string_view to_string(RemovalReason reason);

// An "if ..., then ..." statement with lifecycle bookkeeping.
struct Rule {
    int id = 0;
    std::string text;
    int created_step = 0;
    int last_used_step = 0;
    int use_count = 0;
    RuleOrigin origin = RuleOrigin::single_mistake;
    std::vector<std::string> origin_sample_ids;
};

struct RuleAuditEvent {
    int step = 0;
    int rule_id = 0;
    RemovalReason reason = RemovalReason::evicted;
};

// Bounded, least-recently-used rule store. "Used" means selected into the
// retrieved set for an input; touch() is that bookkeeping moment.
// Single writer; value semantics, copy freely across threads after mutation.
class RuleCollection {
public:
    explicit RuleCollection(int capacity = 100);

    // Validates shape and uniqueness, assigns the next id, evicts down to
    // capacity. Eviction order: minimal (last_used_step, created_step, id).
    // Returns the evicted rules for audit logging.
    std::vector<Rule> admit(Rule rule);

    // Mark rules as used at `step` and advance the clock. All ids must exist.
    void touch(const std::vector<int>& rule_ids, int step);

    // Remove rules, recording `reason` in the audit log. All ids must exist.
    void remove(const std::vector<int>& rule_ids, RemovalReason reason);

    const Rule* find(int id) const;
    const Rule* find_text(std::string_view text) const;  // normalized compare

    const std::vector<Rule>& rules() const { return rules_; }
    const std::vector<RuleAuditEvent>& audit() const { return audit_; }
    int capacity() const { return capacity_; }
    int clock() const { return clock_; }
    int size() const { return static_cast<int>(rules_.size()); }
    bool empty() const { return rules_.empty(); }

    void save(std::ostream& out) const;
    void save_file(const std::filesystem::path& path) const;
    static RuleCollection load(std::istream& in);
    static RuleCollection load_file(const std::filesystem::path& path);

private:
    std::vector<Rule> rules_;  // ascending id
    std::vector<RuleAuditEvent> audit_;
    int capacity_;
    int clock_ = 0;
    int next_id_ = 1;
};

// Append-only store of failed mistakes. `input_text` is the retrieval
// document (rendered sample fields); the gold label lives in `sample`.
struct MistakeEntry {
    Sample sample;
    std::string model_answer;
    int step = 0;
    std::string input_text;
};

class MistakeCollection {
public:
    void record(Sample sample, std::string model_answer, int step);

    const std::vector<MistakeEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

private:
    std::vector<MistakeEntry> entries_;
};

} // namespace rulestream
