#include "rulestream/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <random>

#include "json.hpp"

#include "rulestream/errors.hpp"
#include "rulestream/text.hpp"

namespace rulestream {

using nlohmann::json;

std::vector<Sample> load_dataset(const std::filesystem::path& path, const TaskSpec& spec) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open dataset " + path.string());

    std::vector<Sample> samples;
    std::string line;
    int line_no = 0;
    auto fail = [&](const std::string& why) -> LoadError {
        return LoadError("dataset " + path.string() + ", record at line " +
                         std::to_string(line_no) + ": " + why);
    };

    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw fail("not a JSON object");
        if (j.contains("schema_version") && !j.contains("label")) continue;  // header line

        Sample sample;
        sample.task_id = spec.task_id;
        sample.id = j.value("id", spec.task_id + "#" + std::to_string(samples.size()));

        for (const FieldSpec& fs : spec.fields) {
            if (!j.contains(fs.name) || !j.at(fs.name).is_string()) {
                throw fail("missing or non-string field \"" + fs.name + "\"");
            }
            std::string value = j.at(fs.name).get<std::string>();
            if (value.empty()) throw fail("empty field \"" + fs.name + "\"");
            sample.fields.emplace_back(fs.name, std::move(value));
        }

        if (!j.contains("label")) throw fail("missing label");
        if (spec.label_mode == LabelMode::label_index) {
            if (!j.at("label").is_number_integer()) throw fail("label must be an integer index");
            const auto index = j.at("label").get<long long>();
            if (index < 0 || index >= static_cast<long long>(spec.label_space.size())) {
                throw fail("label index " + std::to_string(index) + " outside the label space of " +
                           std::to_string(spec.label_space.size()));
            }
            sample.gold_label = spec.label_space[static_cast<std::size_t>(index)];
        } else {
            if (!j.at("label").is_string()) throw fail("label must be a string");
            sample.gold_label = j.at("label").get<std::string>();
            if (std::find(spec.label_space.begin(), spec.label_space.end(), sample.gold_label) ==
                spec.label_space.end()) {
                throw fail("label \"" + sample.gold_label + "\" not in the task's label space");
            }
        }
        samples.push_back(std::move(sample));
    }

    if (samples.empty()) {
        std::cerr << "warning: dataset " << path.string() << " contains no records\n";
    }
    return samples;
}

CounterfactualResult make_counterfactual(std::vector<Sample> samples, const TaskSpec& spec,
                                         const std::string& marker) {
    if (spec.kind != TaskKind::single_label) {
        throw ConfigError("counterfactual relabeling needs a single-label task");
    }
    if (spec.positive_label.empty()) {
        throw ConfigError("task " + spec.task_id + " has no positive label configured");
    }
    CounterfactualResult result;
    result.modified_mask.assign(samples.size(), false);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        bool has_marker = false;
        for (const auto& [name, value] : samples[i].fields) {
            if (value.find(marker) != std::string::npos) {
                has_marker = true;
                break;
            }
        }
        if (has_marker && samples[i].gold_label != spec.positive_label) {
            samples[i].gold_label = spec.positive_label;
            result.modified_mask[i] = true;
            ++result.modified_count;
        }
    }
    result.samples = std::move(samples);
    return result;
}

void shuffle_samples(std::vector<Sample>& samples, std::uint32_t seed) {
    std::mt19937 rng(seed);
    // Hand-rolled Fisher-Yates: distribution implementations differ across
    // standard libraries, and replay needs a pinned sequence.
    for (std::size_t i = samples.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(samples[i - 1], samples[j]);
    }
}

} // namespace rulestream
