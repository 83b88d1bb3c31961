#include "rulestream/harness.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>

#include "rulestream/errors.hpp"

namespace rulestream {

using nlohmann::json;

std::string_view to_string(RunMode mode) {
    switch (mode) {
        case RunMode::stream: return "stream";
        case RunMode::train_test: return "train_test";
        case RunMode::cross_domain: return "cross_domain";
        case RunMode::counterfactual: return "counterfactual";
    }
    return "stream";
}

std::optional<RunMode> run_mode_from_string(std::string_view s) {
    if (s == "stream") return RunMode::stream;
    if (s == "train_test") return RunMode::train_test;
    if (s == "cross_domain") return RunMode::cross_domain;
    if (s == "counterfactual") return RunMode::counterfactual;
    return std::nullopt;
}

json run_config_json(const RunConfig& config) {
    json j{{"schema_version", 1},
           {"task", config.task_id},
           {"mode", to_string(config.mode)},
           {"engine", engine_config_json(config.engine)},
           {"gateway",
            {{"model", config.gateway.model_name},
             {"temperature", config.gateway.temperature},
             {"max_retries", config.gateway.max_retries}}},
           {"split_ratio", config.split_ratio},
           {"baseline", to_string(config.baseline)},
           {"marker", config.marker},
           {"rules_in", config.rules_in},
           {"dataset", config.dataset_path},
           {"backend", config.backend}};
    j["seed"] = config.shuffle_seed ? json(*config.shuffle_seed) : json(nullptr);
    j["limit"] = config.sample_limit ? json(*config.sample_limit) : json(nullptr);
    return j;
}

RunConfig run_config_from_json(const json& j) {
    RunConfig config;
    config.task_id = j.value("task", "");
    const auto mode = run_mode_from_string(j.value("mode", "stream"));
    if (!mode) throw ConfigError("unknown run mode " + j.value("mode", ""));
    config.mode = *mode;
    if (j.contains("engine")) config.engine = engine_config_from_json(j.at("engine"));
    if (j.contains("gateway")) {
        const json& g = j.at("gateway");
        config.gateway.model_name = g.value("model", config.gateway.model_name);
        config.gateway.temperature = g.value("temperature", config.gateway.temperature);
        config.gateway.max_retries = g.value("max_retries", config.gateway.max_retries);
    }
    if (j.contains("seed") && !j.at("seed").is_null()) {
        config.shuffle_seed = j.at("seed").get<std::uint32_t>();
    }
    if (j.contains("limit") && !j.at("limit").is_null()) {
        config.sample_limit = j.at("limit").get<std::size_t>();
    }
    config.split_ratio = j.value("split_ratio", config.split_ratio);
    const auto baseline = baseline_from_string(j.value("baseline", "zero_shot"));
    if (!baseline) throw ConfigError("unknown baseline " + j.value("baseline", ""));
    config.baseline = *baseline;
    config.marker = j.value("marker", config.marker);
    config.rules_in = j.value("rules_in", "");
    config.dataset_path = j.value("dataset", "");
    config.backend = j.value("backend", "");
    return config;
}

json step_record_json(const StepRecord& record) {
    json removed = json::array();
    for (const RemovedRule& r : record.rules_removed) {
        removed.push_back({{"id", r.id}, {"reason", to_string(r.reason)}});
    }
    json j{{"step", record.step},
           {"sample_id", record.sample_id},
           {"label", record.answered.label},
           {"method", to_string(record.answered.method)},
           {"raw", record.answered.raw},
           {"correct", record.correct},
           {"rules_used", record.rules_used},
           {"rules_admitted", record.rules_admitted},
           {"rules_removed", removed},
           {"stored_in_phi", record.stored_in_phi},
           {"cum_mistakes", record.cum_mistakes},
           {"running_accuracy", record.running_accuracy}};
    if (record.baseline_correct) j["baseline_correct"] = *record.baseline_correct;
    if (record.baseline_cum_mistakes) j["baseline_cum_mistakes"] = *record.baseline_cum_mistakes;
    if (record.mistake_ratio) j["mistake_ratio"] = *record.mistake_ratio;
    if (record.modified) j["modified"] = true;
    if (!record.slice.empty()) j["slice"] = record.slice;
    return j;
}

MetricsBlock compute_metrics(const std::vector<bool>& ours_correct,
                             const std::vector<bool>& baseline_correct,
                             const std::vector<bool>* modified_mask) {
    if (!baseline_correct.empty() && baseline_correct.size() != ours_correct.size()) {
        throw ConfigError("metrics need outcome vectors of equal length");
    }
    if (modified_mask && modified_mask->size() != ours_correct.size()) {
        throw ConfigError("modification mask length mismatch");
    }

    MetricsBlock metrics;
    const std::size_t n = ours_correct.size();
    metrics.prefix_accuracy.reserve(n);
    metrics.cum_mistakes.reserve(n);
    metrics.ratio_series.reserve(n);

    int ours_mistakes = 0;
    int base_mistakes = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!ours_correct[i]) ++ours_mistakes;
        metrics.cum_mistakes.push_back(ours_mistakes);
        metrics.prefix_accuracy.push_back(
            static_cast<double>(i + 1 - static_cast<std::size_t>(ours_mistakes)) /
            static_cast<double>(i + 1));
        if (!baseline_correct.empty()) {
            if (!baseline_correct[i]) ++base_mistakes;
            if (base_mistakes > 0) {
                metrics.ratio_series.push_back(static_cast<double>(ours_mistakes) /
                                               static_cast<double>(base_mistakes));
            } else {
                metrics.ratio_series.push_back(std::nullopt);
            }
        } else {
            metrics.ratio_series.push_back(std::nullopt);
        }
    }

    metrics.mistakes = ours_mistakes;
    metrics.accuracy = n == 0 ? 0.0 : metrics.prefix_accuracy.back();
    if (!baseline_correct.empty()) {
        metrics.baseline_mistakes = base_mistakes;
        if (base_mistakes > 0) {
            metrics.final_mistake_ratio =
                static_cast<double>(ours_mistakes) / static_cast<double>(base_mistakes);
        }
    }
    if (modified_mask) {
        std::size_t masked = 0;
        std::size_t masked_correct = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!(*modified_mask)[i]) continue;
            ++masked;
            if (ours_correct[i]) ++masked_correct;
        }
        if (masked > 0) {
            metrics.acc_m = static_cast<double>(masked_correct) / static_cast<double>(masked);
        }
    }
    return metrics;
}

json EvalReport::summary_json(const RunConfig& config) const {
    json j{{"schema_version", 1},
           {"kind", "run_summary"},
           {"task", config.task_id},
           {"mode", to_string(config.mode)},
           {"steps", steps.size()},
           {"accuracy", metrics.accuracy},
           {"mistakes", metrics.mistakes}};
    j["baseline_mistakes"] =
        metrics.baseline_mistakes ? json(*metrics.baseline_mistakes) : json(nullptr);
    j["final_mistake_ratio"] =
        metrics.final_mistake_ratio ? json(*metrics.final_mistake_ratio) : json(nullptr);
    j["acc_m"] = metrics.acc_m ? json(*metrics.acc_m) : json(nullptr);
    j["modified_count"] = modified_count ? json(*modified_count) : json(nullptr);
    j["train_accuracy"] = train_accuracy ? json(*train_accuracy) : json(nullptr);
    j["test_accuracy"] = test_accuracy ? json(*test_accuracy) : json(nullptr);

    json uses = json::object();
    for (const auto& [id, count] : rule_use_counts) {
        uses[std::to_string(id)] = count;
    }
    j["rule_use_counts"] = uses;

    int admitted = 0;
    int removed = 0;
    int evicted = 0;
    for (const StepRecord& s : steps) {
        admitted += static_cast<int>(s.rules_admitted.size());
        for (const RemovedRule& r : s.rules_removed) {
            if (r.reason == RemovalReason::evicted) {
                ++evicted;
            } else {
                ++removed;
            }
        }
    }
    j["rules_admitted"] = admitted;
    j["rules_superseded"] = removed;
    j["rules_evicted"] = evicted;
    return j;
}

StepWriter::StepWriter(const std::filesystem::path& path) : out_(path) {
    if (!out_) throw LoadError("cannot open report " + path.string() + " for writing");
}

void StepWriter::write_header(const RunConfig& config) {
    json header{{"schema_version", 1},
                {"kind", "eval_report"},
                {"run_config", run_config_json(config)}};
    out_ << header.dump() << '\n';
    out_.flush();
}

void StepWriter::write(const StepRecord& record) {
    out_ << step_record_json(record).dump() << '\n';
    out_.flush();
}

RuleCollection load_rules_any(const std::filesystem::path& path, int capacity) {
    std::ifstream probe(path);
    if (!probe) throw LoadError("cannot open rule file " + path.string());
    std::string first_line;
    std::getline(probe, first_line);
    const auto header = nlohmann::json::parse(first_line, nullptr, false);
    if (header.is_object() && header.value("kind", "") == "rule_collection") {
        return RuleCollection::load_file(path);
    }

    RuleCollection rules(capacity);
    probe.clear();
    probe.seekg(0);
    std::string line;
    int line_no = 0;
    while (std::getline(probe, line)) {
        ++line_no;
        const std::string text = [&] {
            std::size_t begin = 0, end = line.size();
            while (begin < end && (line[begin] == ' ' || line[begin] == '\t')) ++begin;
            while (end > begin && (line[end - 1] == ' ' || line[end - 1] == '\r')) --end;
            return line.substr(begin, end - begin);
        }();
        if (text.empty()) continue;
        Rule rule;
        rule.text = text;
        rule.origin = RuleOrigin::preloaded;
        try {
            rules.admit(std::move(rule));
        } catch (const Error& e) {
            std::cerr << "warning: " << path.string() << " line " << line_no
                      << " not preloaded: " << e.what() << "\n";
        }
    }
    return rules;
}

namespace {

struct StreamTally {
    std::vector<bool> ours_correct;
    std::vector<bool> baseline_correct;
};

// The shared per-sample loop: interleaved frozen-baseline completion, then
// the engine step, then bookkeeping.
void run_samples(const RunConfig& config, Engine& engine, const std::vector<Sample>& samples,
                 const std::vector<bool>* modified_mask, std::optional<std::size_t> test_start,
                 StepWriter* writer, EvalReport& report, StreamTally& tally) {
    int cum_mistakes = 0;
    int baseline_cum = 0;
    int correct_count = 0;

    for (std::size_t i = 0; i < samples.size(); ++i) {
        const Sample& sample = samples[i];
        if (test_start && i == *test_start) engine.set_rule_updates(false);

        StepRecord record;
        record.step = static_cast<int>(i + 1);
        record.sample_id = sample.id;
        if (modified_mask) record.modified = (*modified_mask)[i];
        if (test_start) record.slice = i < *test_start ? "train" : "test";

        if (config.baseline != BaselineKind::none) {
            const ParsedAnswer baseline = engine.baseline_answer(sample, config.baseline);
            const bool ok =
                baseline.method != ParseMethod::unparsed && baseline.label == sample.gold_label;
            record.baseline_correct = ok;
            tally.baseline_correct.push_back(ok);
        }

        const StepOutcome outcome = engine.process_sample(sample, sample.gold_label);
        record.answered = outcome.answered;
        record.correct = outcome.correct;
        record.rules_used = outcome.rules_used;
        record.rules_admitted = outcome.rules_admitted;
        record.rules_removed = outcome.rules_removed;
        record.stored_in_phi = outcome.stored_in_phi;

        tally.ours_correct.push_back(outcome.correct);
        if (outcome.correct) ++correct_count;
        else ++cum_mistakes;
        record.cum_mistakes = cum_mistakes;
        record.running_accuracy =
            static_cast<double>(correct_count) / static_cast<double>(i + 1);
        if (record.baseline_correct) {
            if (!*record.baseline_correct) ++baseline_cum;
            record.baseline_cum_mistakes = baseline_cum;
            if (baseline_cum > 0) {
                record.mistake_ratio =
                    static_cast<double>(cum_mistakes) / static_cast<double>(baseline_cum);
            }
        }

        for (int id : record.rules_used) ++report.rule_use_counts[id];
        if (writer) writer->write(record);
        report.steps.push_back(std::move(record));
    }
}

std::vector<Sample> prepare_samples(const RunConfig& config, std::vector<Sample> samples) {
    if (config.shuffle_seed) shuffle_samples(samples, *config.shuffle_seed);
    if (config.sample_limit && samples.size() > *config.sample_limit) {
        samples.resize(*config.sample_limit);
    }
    return samples;
}

double slice_accuracy(const std::vector<bool>& correct, std::size_t begin, std::size_t end) {
    if (end <= begin) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = begin; i < end; ++i) {
        if (correct[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(end - begin);
}

} // namespace

RunResult run_stream(const RunConfig& config, const TaskSpec& spec, std::vector<Sample> samples,
                     Gateway& gateway, StepWriter* writer) {
    samples = prepare_samples(config, samples);
    Engine engine(spec, config.engine, gateway);
    if (!config.rules_in.empty() && config.mode == RunMode::stream) {
        engine.set_rules(load_rules_any(config.rules_in, config.engine.capacity));
    }
    if (writer) writer->write_header(config);

    EvalReport report;
    StreamTally tally;
    run_samples(config, engine, samples, nullptr, std::nullopt, writer, report, tally);
    report.metrics = compute_metrics(tally.ours_correct, tally.baseline_correct);
    return {std::move(report), engine.rules()};
}

RunResult run_train_test(const RunConfig& config, const TaskSpec& spec,
                         std::vector<Sample> samples, Gateway& gateway, StepWriter* writer) {
    if (config.split_ratio <= 0.0 || config.split_ratio >= 1.0) {
        throw ConfigError("train/test split ratio must lie in (0, 1)");
    }
    shuffle_samples(samples, config.shuffle_seed.value_or(0));
    if (config.sample_limit && samples.size() > *config.sample_limit) {
        samples.resize(*config.sample_limit);
    }
    const auto split =
        static_cast<std::size_t>(config.split_ratio * static_cast<double>(samples.size()));
    if (split == 0 || split >= samples.size()) {
        throw ConfigError("split ratio " + std::to_string(config.split_ratio) +
                          " leaves an empty train or test slice for " +
                          std::to_string(samples.size()) + " samples");
    }

    Engine engine(spec, config.engine, gateway);
    if (writer) writer->write_header(config);

    EvalReport report;
    StreamTally tally;
    run_samples(config, engine, samples, nullptr, split, writer, report, tally);
    report.metrics = compute_metrics(tally.ours_correct, tally.baseline_correct);
    report.train_accuracy = slice_accuracy(tally.ours_correct, 0, split);
    report.test_accuracy = slice_accuracy(tally.ours_correct, split, samples.size());
    return {std::move(report), engine.rules()};
}

RunResult run_cross_domain(const RunConfig& config, const TaskSpec& spec, RuleCollection source,
                           std::vector<Sample> samples, Gateway& gateway, StepWriter* writer) {
    samples = prepare_samples(config, samples);
    EngineConfig engine_config = config.engine;
    engine_config.rule_updates_enabled = false;
    Engine engine(spec, engine_config, gateway);
    engine.set_rules(std::move(source));
    if (writer) writer->write_header(config);

    EvalReport report;
    StreamTally tally;
    run_samples(config, engine, samples, nullptr, std::nullopt, writer, report, tally);
    report.metrics = compute_metrics(tally.ours_correct, tally.baseline_correct);
    return {std::move(report), engine.rules()};
}

RunResult run_counterfactual(const RunConfig& config, const TaskSpec& spec,
                             std::vector<Sample> samples, Gateway& gateway, StepWriter* writer) {
    samples = prepare_samples(config, samples);
    CounterfactualResult transformed = make_counterfactual(std::move(samples), spec, config.marker);

    Engine engine(spec, config.engine, gateway);
    if (!config.rules_in.empty()) {
        engine.set_rules(load_rules_any(config.rules_in, config.engine.capacity));
    }
    if (writer) writer->write_header(config);

    EvalReport report;
    StreamTally tally;
    run_samples(config, engine, transformed.samples, &transformed.modified_mask, std::nullopt,
                writer, report, tally);
    report.metrics =
        compute_metrics(tally.ours_correct, tally.baseline_correct, &transformed.modified_mask);
    report.modified_count = transformed.modified_count;
    return {std::move(report), engine.rules()};
}

void write_manifest(const RunPaths& paths, const RunConfig& config, const TaskSpec& spec,
                    std::size_t steps_completed) {
    json manifest{{"schema_version", 1},
                  {"kind", "run_manifest"},
                  {"run_config", run_config_json(config)},
                  {"task_spec", task_spec_json(spec)},
                  {"steps_completed", steps_completed},
                  {"artifacts",
                   {{"report", "report.jsonl"},
                    {"summary", "summary.json"},
                    {"rules", "rules.jsonl"},
                    {"transcript", "transcript.jsonl"}}}};
    std::ofstream out(paths.manifest());
    if (!out) throw LoadError("cannot write " + paths.manifest().string());
    out << manifest.dump(2) << '\n';
}

void write_summary(const RunPaths& paths, const RunConfig& config, const EvalReport& report) {
    std::ofstream out(paths.summary());
    if (!out) throw LoadError("cannot write " + paths.summary().string());
    out << report.summary_json(config).dump(2) << '\n';
}

RunResult execute_run(const RunConfig& config, const TaskSpec& spec, std::vector<Sample> samples,
                      Gateway& gateway, const RunPaths& paths) {
    std::filesystem::create_directories(paths.dir);
    StepWriter writer(paths.report());

    RunResult result = [&] {
        switch (config.mode) {
            case RunMode::stream:
                return run_stream(config, spec, std::move(samples), gateway, &writer);
            case RunMode::train_test:
                return run_train_test(config, spec, std::move(samples), gateway, &writer);
            case RunMode::cross_domain: {
                if (config.rules_in.empty()) {
                    throw ConfigError("cross_domain needs a source rule collection (rules_in)");
                }
                return run_cross_domain(config, spec, load_rules_any(config.rules_in, config.engine.capacity),
                                        std::move(samples), gateway, &writer);
            }
            case RunMode::counterfactual:
                return run_counterfactual(config, spec, std::move(samples), gateway, &writer);
        }
        throw ConfigError("unhandled run mode");
    }();

    result.rules.save_file(paths.rules());
    write_summary(paths, config, result.report);
    write_manifest(paths, config, spec, result.report.steps.size());
    return result;
}

RunResult replay_run(const std::filesystem::path& run_dir, const RunPaths& out_paths) {
    RunPaths in_paths{run_dir};
    std::ifstream manifest_in(in_paths.manifest());
    if (!manifest_in) throw LoadError("cannot open " + in_paths.manifest().string());
    json manifest = json::parse(manifest_in, nullptr, false);
    if (manifest.is_discarded() || manifest.value("kind", "") != "run_manifest") {
        throw LoadError(in_paths.manifest().string() + " is not a run manifest");
    }

    const RunConfig config = run_config_from_json(manifest.at("run_config"));
    const TaskSpec spec = load_task_spec(manifest.at("task_spec"));
    std::vector<Sample> samples = load_dataset(config.dataset_path, spec);

    auto backend = ScriptedBackend::from_transcript(in_paths.transcript());
    Gateway gateway(backend, config.gateway);
    std::filesystem::create_directories(out_paths.dir);
    gateway.open_transcript(out_paths.transcript());
    return execute_run(config, spec, std::move(samples), gateway, out_paths);
}

} // namespace rulestream
