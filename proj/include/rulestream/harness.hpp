#pragma once
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rulestream/dataset.hpp"
#include "rulestream/engine.hpp"
#include "rulestream/gateway.hpp"

namespace rulestream {

enum class RunMode { stream, train_test, cross_domain, counterfactual };

std::string_view to_string(RunMode mode);
std::optional<RunMode> run_mode_from_string(std::string_view s);

struct RunConfig {
    std::string task_id;
    RunMode mode = RunMode::stream;
    EngineConfig engine;
    GatewayConfig gateway;
    std::optional<std::uint32_t> shuffle_seed;
    std::optional<std::size_t> sample_limit;
    double split_ratio = 0.8;         // train_test
    BaselineKind baseline = BaselineKind::zero_shot;
    std::string marker = "#";         // counterfactual
    std::string rules_in;             // cross_domain source / preload snapshot
    std::string dataset_path;         // recorded for replay
    std::string backend;              // recorded for the manifest
};

nlohmann::json run_config_json(const RunConfig& config);
RunConfig run_config_from_json(const nlohmann::json& j);

struct StepRecord {
    int step = 0;
    std::string sample_id;
    ParsedAnswer answered;
    bool correct = false;
    std::optional<bool> baseline_correct;
    std::vector<int> rules_used;
    std::vector<int> rules_admitted;
    std::vector<RemovedRule> rules_removed;
    bool stored_in_phi = false;
    int cum_mistakes = 0;
    std::optional<int> baseline_cum_mistakes;
    double running_accuracy = 0.0;
    std::optional<double> mistake_ratio;  // absent while the baseline has no mistakes
    bool modified = false;                // counterfactual mask
    std::string slice;                    // "", "train" or "test"
};

nlohmann::json step_record_json(const StepRecord& record);

struct MetricsBlock {
    double accuracy = 0.0;
    int mistakes = 0;
    std::optional<int> baseline_mistakes;
    std::optional<double> final_mistake_ratio;
    std::vector<double> prefix_accuracy;
    std::vector<int> cum_mistakes;
    std::vector<std::optional<double>> ratio_series;
    std::optional<double> acc_m;  // accuracy over masked (modified) samples
};

// Prefix accuracies, cumulative mistake counts and the mistake-ratio series.
// baseline_correct may be empty (no comparator); otherwise sizes must match.
MetricsBlock compute_metrics(const std::vector<bool>& ours_correct,
                             const std::vector<bool>& baseline_correct,
                             const std::vector<bool>* modified_mask = nullptr);

struct EvalReport {
    std::vector<StepRecord> steps;
    MetricsBlock metrics;
    std::optional<double> train_accuracy;
    std::optional<double> test_accuracy;
    std::optional<int> modified_count;
    std::map<int, int> rule_use_counts;  // summed over steps' rules_used

    nlohmann::json summary_json(const RunConfig& config) const;
};

// Streams one JSONL line per step so a crash keeps everything up to the
// failed step on disk.
class StepWriter {
public:
    explicit StepWriter(const std::filesystem::path& path);
    void write_header(const RunConfig& config);
    void write(const StepRecord& record);

private:
    std::ofstream out_;
};

struct RunResult {
    EvalReport report;
    RuleCollection rules;
};

// Accepts either a rule-collection snapshot or a plain-text file with one
// if/then rule per line (preloaded at step 0 with the given capacity).
RuleCollection load_rules_any(const std::filesystem::path& path, int capacity);

RunResult run_stream(const RunConfig& config, const TaskSpec& spec, std::vector<Sample> samples,
                     Gateway& gateway, StepWriter* writer = nullptr);

// Seeded shuffle, split, rule updates on for the train slice and frozen for
// the test slice; test accuracy reported separately.
RunResult run_train_test(const RunConfig& config, const TaskSpec& spec,
                         std::vector<Sample> samples, Gateway& gateway,
                         StepWriter* writer = nullptr);

// Evaluate with a frozen rule collection taken from another task's run.
RunResult run_cross_domain(const RunConfig& config, const TaskSpec& spec, RuleCollection source,
                           std::vector<Sample> samples, Gateway& gateway,
                           StepWriter* writer = nullptr);

// Relabel by marker, then stream; the report carries the modification count
// and the accuracy over modified instances.
RunResult run_counterfactual(const RunConfig& config, const TaskSpec& spec,
                             std::vector<Sample> samples, Gateway& gateway,
                             StepWriter* writer = nullptr);

// Artifact writing and offline replay ------------------------------------

struct RunPaths {
    std::filesystem::path dir;
    std::filesystem::path manifest() const { return dir / "manifest.json"; }
    std::filesystem::path report() const { return dir / "report.jsonl"; }
    std::filesystem::path summary() const { return dir / "summary.json"; }
    std::filesystem::path rules() const { return dir / "rules.jsonl"; }
    std::filesystem::path transcript() const { return dir / "transcript.jsonl"; }
};

void write_manifest(const RunPaths& paths, const RunConfig& config, const TaskSpec& spec,
                    std::size_t steps_completed);
void write_summary(const RunPaths& paths, const RunConfig& config, const EvalReport& report);

// Execute the mode selected by the config, writing all artifacts under
// paths.dir. The gateway should already log to paths.transcript().
RunResult execute_run(const RunConfig& config, const TaskSpec& spec, std::vector<Sample> samples,
                      Gateway& gateway, const RunPaths& paths);

// Re-run a recorded run entirely offline: the transcript becomes a strict
// scripted backend, so the rebuilt report must match byte for byte.
RunResult replay_run(const std::filesystem::path& run_dir, const RunPaths& out_paths);

} // namespace rulestream
