// Command-line surface: stream runs, train/test splits, cross-domain
// transfer, counterfactual relabeling, rule inspection and offline replay.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"

#include "rulestream/errors.hpp"
#include "rulestream/harness.hpp"
#include "rulestream/http_backend.hpp"
#include "rulestream/oracle_world.hpp"

namespace {

using namespace rulestream;
using nlohmann::json;

struct CliOptions {
    std::string config_path;
    std::string dataset;
    std::string task;
    std::string backend = "http";
    std::string out;
    std::string rules_in;
    std::string rules_out;
    std::string run_dir;   // replay-transcript input
    std::string marker = "#";
    std::optional<std::uint32_t> seed;
    std::optional<std::size_t> limit;
    double split = 0.8;
    bool few_shot = false;
    std::string baseline = "zero_shot";
    bool dump_config = false;
};

json load_config_file(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config file " + path + " is not valid JSON");
    return j;
}

TaskSpec resolve_task(const CliOptions& opts, const json& config,
                      const std::optional<WorldConfig>& world) {
    if (opts.task == "oracle" && world) return oracle_task_spec(*world);
    if (config.contains("tasks")) {
        for (const TaskSpec& spec : load_task_specs_file(config.at("tasks").get<std::string>())) {
            if (spec.task_id == opts.task) return spec;
        }
    }
    if (const TaskSpec* spec = find_builtin_task(opts.task)) return *spec;
    throw ConfigError("unknown task \"" + opts.task + "\"");
}

std::shared_ptr<ChatBackend> make_backend(const CliOptions& opts, const json& config,
                                          std::optional<WorldConfig>& world_out) {
    if (opts.backend == "http") {
        HttpBackendConfig http;
        if (config.contains("http")) {
            const json& h = config.at("http");
            http.base_url = h.value("base_url", http.base_url);
            http.api_key_env = h.value("api_key_env", http.api_key_env);
            http.timeout_seconds = h.value("timeout_seconds", http.timeout_seconds);
            http.backoff_base_ms = h.value("backoff_base_ms", http.backoff_base_ms);
            http.backoff_factor = h.value("backoff_factor", http.backoff_factor);
            http.jitter = h.value("jitter", http.jitter);
        }
        if (http.base_url.empty()) http.base_url = "https://api.openai.com/v1";
        return std::make_shared<HttpBackend>(http);
    }
    if (opts.backend.rfind("scripted:", 0) == 0) {
        return ScriptedBackend::load_file(opts.backend.substr(9));
    }
    if (opts.backend.rfind("oracle:", 0) == 0) {
        world_out = load_world_file(opts.backend.substr(7));
        return std::make_shared<OracleWorldBackend>(*world_out);
    }
    throw ConfigError("unknown backend \"" + opts.backend +
                      "\" (expected http, scripted:<path> or oracle:<path>)");
}

RunConfig build_run_config(const CliOptions& opts, const json& config, RunMode mode) {
    RunConfig run;
    run.task_id = opts.task;
    run.mode = mode;
    if (config.contains("engine")) run.engine = engine_config_from_json(config.at("engine"));
    if (config.contains("gateway")) {
        const json& g = config.at("gateway");
        run.gateway.model_name = g.value("model", run.gateway.model_name);
        run.gateway.temperature = g.value("temperature", run.gateway.temperature);
        run.gateway.max_retries = g.value("max_retries", run.gateway.max_retries);
    }
    if (opts.few_shot) run.engine.few_shot = true;
    run.shuffle_seed = opts.seed;
    run.sample_limit = opts.limit;
    run.split_ratio = opts.split;
    const auto baseline = baseline_from_string(opts.baseline);
    if (!baseline) throw ConfigError("unknown baseline \"" + opts.baseline + "\"");
    run.baseline = *baseline;
    run.marker = opts.marker;
    run.rules_in = opts.rules_in;
    run.dataset_path = opts.dataset;
    run.backend = opts.backend;
    return run;
}

int run_mode_command(const CliOptions& opts, RunMode mode) {
    const json config = load_config_file(opts.config_path);
    const RunConfig run = build_run_config(opts, config, mode);

    if (opts.dump_config) {
        std::cout << run_config_json(run).dump(2) << "\n";
        return 0;
    }
    if (opts.out.empty()) throw ConfigError("--out is required");
    if (opts.dataset.empty()) throw ConfigError("--dataset is required");

    std::optional<WorldConfig> world;
    auto backend = make_backend(opts, config, world);
    const TaskSpec spec = resolve_task(opts, config, world);
    std::vector<Sample> samples = load_dataset(opts.dataset, spec);

    RunPaths paths{opts.out};
    std::filesystem::create_directories(paths.dir);
    Gateway gateway(backend, run.gateway);
    gateway.open_transcript(paths.transcript());

    try {
        const RunResult result = execute_run(run, spec, std::move(samples), gateway, paths);
        if (!opts.rules_out.empty()) result.rules.save_file(opts.rules_out);
        const auto& m = result.report.metrics;
        std::cout << "steps: " << result.report.steps.size() << "  accuracy: " << m.accuracy
                  << "  mistakes: " << m.mistakes;
        if (m.final_mistake_ratio) std::cout << "  mistake_ratio: " << *m.final_mistake_ratio;
        if (result.report.modified_count) {
            std::cout << "  modified: " << *result.report.modified_count;
        }
        if (result.report.test_accuracy) {
            std::cout << "  test_accuracy: " << *result.report.test_accuracy;
        }
        std::cout << "\n";
        return 0;
    } catch (const Error& e) {
        // Partial artifacts (report lines, transcript) are already on disk.
        std::cerr << "run failed: " << e.what() << "\n";
        std::ofstream out(paths.summary());
        if (out) {
            out << json{{"schema_version", 1}, {"kind", "run_summary"}, {"error", e.what()}}.dump(2)
                << "\n";
        }
        return 1;
    }
}

int inspect_rules_command(const std::string& rules_in) {
    const RuleCollection rules = RuleCollection::load_file(rules_in);
    std::cout << "capacity " << rules.capacity() << ", clock " << rules.clock() << ", "
              << rules.size() << " rules\n";
    for (const Rule& r : rules.rules()) {
        std::cout << r.id << "\tuses=" << r.use_count << "\tlast=" << r.last_used_step
                  << "\tcreated=" << r.created_step << "\t" << to_string(r.origin) << "\t"
                  << r.text << "\n";
    }
    return 0;
}

int replay_command(const std::string& run_dir, const std::string& out_dir) {
    RunPaths out_paths{out_dir};
    const RunResult result = replay_run(run_dir, out_paths);
    std::cout << "replayed " << result.report.steps.size() << " steps into " << out_dir << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Online rule accumulation for frozen chat models"};
    app.require_subcommand(1);

    CliOptions opts;
    auto add_common = [&](CLI::App* cmd, bool needs_dataset) {
        cmd->add_option("--config", opts.config_path, "JSON config file");
        cmd->add_option("--dataset", opts.dataset, "dataset JSONL path")->required(needs_dataset);
        cmd->add_option("--task", opts.task, "task id")->required(needs_dataset);
        cmd->add_option("--backend", opts.backend, "http | scripted:<path> | oracle:<path>");
        cmd->add_option("--seed", opts.seed, "shuffle seed");
        cmd->add_option("--out", opts.out, "output directory");
        cmd->add_option("--rules-in", opts.rules_in, "rule collection to preload");
        cmd->add_option("--rules-out", opts.rules_out, "extra path for the final rule snapshot");
        cmd->add_flag("--few-shot", opts.few_shot, "retrieve past inputs as worked examples");
        cmd->add_option("--limit", opts.limit, "use at most N samples");
        cmd->add_option("--baseline", opts.baseline, "none | zero_shot | zero_shot_cot | few_shot");
        cmd->add_flag("--dump-config", opts.dump_config, "print the effective config and exit");
    };

    CLI::App* run = app.add_subcommand("run", "stream over a dataset, learning from mistakes");
    add_common(run, true);

    CLI::App* train_test = app.add_subcommand("train-test", "seeded split; rules frozen on test");
    add_common(train_test, true);
    train_test->add_option("--split", opts.split, "train fraction (default 0.8)");

    CLI::App* cross = app.add_subcommand("cross-domain", "evaluate with a transferred collection");
    add_common(cross, true);

    CLI::App* counterfactual =
        app.add_subcommand("counterfactual", "relabel marker-bearing samples, then stream");
    add_common(counterfactual, true);
    counterfactual->add_option("--marker", opts.marker, "marker substring (default #)");

    CLI::App* inspect = app.add_subcommand("inspect-rules", "print a rule collection snapshot");
    inspect->add_option("--rules-in", opts.rules_in, "rule collection path")->required();

    CLI::App* replay =
        app.add_subcommand("replay-transcript", "re-run a recorded run offline from its transcript");
    replay->add_option("--run", opts.run_dir, "directory of the recorded run")->required();
    replay->add_option("--out", opts.out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (run->parsed()) return run_mode_command(opts, RunMode::stream);
        if (train_test->parsed()) return run_mode_command(opts, RunMode::train_test);
        if (cross->parsed()) {
            if (opts.rules_in.empty()) throw ConfigError("cross-domain requires --rules-in");
            return run_mode_command(opts, RunMode::cross_domain);
        }
        if (counterfactual->parsed()) return run_mode_command(opts, RunMode::counterfactual);
        if (inspect->parsed()) return inspect_rules_command(opts.rules_in);
        if (replay->parsed()) return replay_command(opts.run_dir, opts.out);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
