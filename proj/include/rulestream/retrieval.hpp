#pragma once
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "rulestream/store.hpp"

namespace rulestream {

// Lowercase tokens split on non-alphanumeric boundaries (ASCII), empties dropped.
std::vector<std::string> tokenize(std::string_view text);

struct ScoredDoc {
    std::string doc_id;
    std::size_t index = 0;  // insertion order
    double score = 0.0;
};

// Okapi BM25 over an inverted index, k1 = 1.5, b = 0.75,
// idf = ln((N - df + 0.5) / (df + 0.5) + 1). Repeated query terms count once.
// Stateless after construction; safe for concurrent top_k calls.
class Corpus {
public:
    static constexpr double k1 = 1.5;
    static constexpr double b = 0.75;

    void add(std::string doc_id, std::string_view text);

    // Descending score, ties by ascending insertion order; min(k, N) entries.
    // Zero-score documents still fill up to k; callers may filter.
    std::vector<ScoredDoc> top_k(std::string_view query, std::size_t k) const;

    std::size_t size() const { return docs_.size(); }
    double avgdl() const;
    std::size_t doc_length(std::size_t index) const { return docs_[index].length; }
    std::size_t df(std::string_view term) const;

private:
    struct DocEntry {
        std::string id;
        std::size_t length = 0;
    };
    struct Posting {
        std::uint32_t doc = 0;
        std::uint32_t tf = 0;
    };
    std::vector<DocEntry> docs_;
    std::unordered_map<std::string, std::vector<Posting>> postings_;
    std::size_t total_tokens_ = 0;
};

// Top-k rules for a query, zero-score rules dropped (an input with no lexical
// overlap gets no rules). Index rebuilt per call; collections stay small.
std::vector<Rule> retrieve_rules(const RuleCollection& rules, std::string_view query, std::size_t k);

// Similar old mistakes; entries whose sample id equals `exclude_sample_id`
// are skipped so the just-recorded current mistake never retrieves itself.
std::vector<MistakeEntry> retrieve_mistakes(const MistakeCollection& mistakes,
                                            std::string_view query, std::size_t m,
                                            std::string_view exclude_sample_id = {});

} // namespace rulestream
