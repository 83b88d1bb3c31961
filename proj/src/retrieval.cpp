#include "rulestream/retrieval.hpp"

#include <algorithm>
#include <cmath>

namespace rulestream {

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char c : text) {
        const bool alnum = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
        if (alnum) {
            current.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : c);
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

void Corpus::add(std::string doc_id, std::string_view text) {
    const auto tokens = tokenize(text);
    const auto index = static_cast<std::uint32_t>(docs_.size());
    docs_.push_back({std::move(doc_id), tokens.size()});
    total_tokens_ += tokens.size();

    std::unordered_map<std::string, std::uint32_t> counts;
    for (const auto& t : tokens) ++counts[t];
    for (auto& [term, tf] : counts) {
        postings_[term].push_back({index, tf});
    }
}

double Corpus::avgdl() const {
    return docs_.empty() ? 0.0 : static_cast<double>(total_tokens_) / static_cast<double>(docs_.size());
}

std::size_t Corpus::df(std::string_view term) const {
    auto it = postings_.find(std::string(term));
    return it == postings_.end() ? 0 : it->second.size();
}

std::vector<ScoredDoc> Corpus::top_k(std::string_view query, std::size_t k) const {
    const std::size_t n = docs_.size();
    std::vector<double> scores(n, 0.0);
    if (n > 0) {
        const double avg = avgdl();
        std::vector<std::string> terms = tokenize(query);
        std::sort(terms.begin(), terms.end());
        terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
        for (const auto& term : terms) {
            auto it = postings_.find(term);
            if (it == postings_.end()) continue;
            const double df_t = static_cast<double>(it->second.size());
            const double idf = std::log((static_cast<double>(n) - df_t + 0.5) / (df_t + 0.5) + 1.0);
            for (const Posting& p : it->second) {
                const double tf = static_cast<double>(p.tf);
                const double len = static_cast<double>(docs_[p.doc].length);
                const double denom = tf + k1 * (1.0 - b + b * len / avg);
                scores[p.doc] += idf * tf * (k1 + 1.0) / denom;
            }
        }
    }

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b_) { return scores[a] > scores[b_]; });

    std::vector<ScoredDoc> out;
    out.reserve(std::min(k, n));
    for (std::size_t i = 0; i < n && out.size() < k; ++i) {
        out.push_back({docs_[order[i]].id, order[i], scores[order[i]]});
    }
    return out;
}

std::vector<Rule> retrieve_rules(const RuleCollection& rules, std::string_view query, std::size_t k) {
    Corpus corpus;
    for (const Rule& r : rules.rules()) {
        corpus.add(std::to_string(r.id), r.text);
    }
    std::vector<Rule> out;
    for (const ScoredDoc& doc : corpus.top_k(query, k)) {
        if (doc.score <= 0.0) continue;
        out.push_back(rules.rules()[doc.index]);
    }
    return out;
}

std::vector<MistakeEntry> retrieve_mistakes(const MistakeCollection& mistakes,
                                            std::string_view query, std::size_t m,
                                            std::string_view exclude_sample_id) {
    Corpus corpus;
    std::vector<std::size_t> mapping;
    const auto& entries = mistakes.entries();
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (!exclude_sample_id.empty() && entries[i].sample.id == exclude_sample_id) continue;
        corpus.add(entries[i].sample.id, entries[i].input_text);
        mapping.push_back(i);
    }
    std::vector<MistakeEntry> out;
    for (const ScoredDoc& doc : corpus.top_k(query, m)) {
        if (doc.score <= 0.0) continue;
        out.push_back(entries[mapping[doc.index]]);
    }
    return out;
}

} // namespace rulestream
