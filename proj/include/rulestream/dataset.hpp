#pragma once
#include <filesystem>
#include <string>
#include <vector>

#include "rulestream/prompting.hpp"
#include "rulestream/store.hpp"

namespace rulestream {

// Line-delimited JSON records mapped into Samples by the task's field list
// and label mode. A leading {"schema_version": ...} header line is allowed.
// Fails fast naming the first offending record; an empty file warns and
// returns no samples.
std::vector<Sample> load_dataset(const std::filesystem::path& path, const TaskSpec& spec);

struct CounterfactualResult {
    std::vector<Sample> samples;
    int modified_count = 0;           // labels actually changed
    std::vector<bool> modified_mask;  // per-sample: label was changed
};

// Relabel every sample containing `marker` in any field to the task's
// positive label. Idempotent; already-positive samples do not count.
CounterfactualResult make_counterfactual(std::vector<Sample> samples, const TaskSpec& spec,
                                         const std::string& marker = "#");

// Seeded Fisher-Yates, stable across platforms for replay tests.
void shuffle_samples(std::vector<Sample>& samples, std::uint32_t seed);

} // namespace rulestream
