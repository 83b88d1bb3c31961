// Shared test helpers: independent reference models kept deliberately
// separate from the library implementations they check.
#pragma once
#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "rulestream/store.hpp"

namespace rstest {

// Plain-list LRU model, rescanned on every operation.
struct RefLru {
    struct Entry {
        int id = 0;
        std::string text;
        int created = 0;
        int last_used = 0;
    };

    explicit RefLru(int cap) : capacity(cap) {}

    std::vector<int> admit(const std::string& text, int step) {
        entries.push_back({next_id++, text, step, step});
        std::vector<int> evicted;
        while (static_cast<int>(entries.size()) > capacity) {
            std::size_t victim = 0;
            for (std::size_t i = 1; i < entries.size(); ++i) {
                const auto& a = entries[i];
                const auto& b = entries[victim];
                if (std::tie(a.last_used, a.created, a.id) <
                    std::tie(b.last_used, b.created, b.id)) {
                    victim = i;
                }
            }
            evicted.push_back(entries[victim].id);
            entries.erase(entries.begin() + static_cast<std::ptrdiff_t>(victim));
        }
        return evicted;
    }

    void touch(const std::vector<int>& ids, int step) {
        for (int id : ids) {
            for (auto& e : entries) {
                if (e.id == id) e.last_used = step;
            }
        }
        clock = step;
    }

    void remove(int id) {
        entries.erase(std::remove_if(entries.begin(), entries.end(),
                                     [&](const Entry& e) { return e.id == id; }),
                      entries.end());
    }

    std::vector<Entry> entries;
    int capacity;
    int clock = 0;
    int next_id = 1;
};

// Character-scan reference tokenizer, built on the locale functions instead
// of explicit range checks.
inline std::vector<std::string> ref_tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : text) {
        if (c < 128 && std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

// Brute-force BM25: per (query, doc) evaluation of the formula straight from
// token scans, no index.
inline double brute_bm25(const std::vector<std::string>& query_tokens,
                         const std::vector<std::vector<std::string>>& docs, std::size_t doc) {
    const double k1 = 1.5;
    const double b = 0.75;
    const double n = static_cast<double>(docs.size());
    double total_len = 0;
    for (const auto& d : docs) total_len += static_cast<double>(d.size());
    const double avgdl = n > 0 ? total_len / n : 0.0;

    std::vector<std::string> unique = query_tokens;
    std::sort(unique.begin(), unique.end());
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());

    double score = 0.0;
    for (const auto& term : unique) {
        double df = 0;
        for (const auto& d : docs) {
            if (std::find(d.begin(), d.end(), term) != d.end()) df += 1;
        }
        double tf = 0;
        for (const auto& t : docs[doc]) {
            if (t == term) tf += 1;
        }
        if (tf == 0) continue;
        const double idf = std::log((n - df + 0.5) / (df + 0.5) + 1.0);
        const double len = static_cast<double>(docs[doc].size());
        score += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * len / avgdl));
    }
    return score;
}

// Expected ranking: descending brute-force score, stable on insertion order.
inline std::vector<std::size_t> brute_ranking(const std::vector<std::string>& query_tokens,
                                              const std::vector<std::vector<std::string>>& docs) {
    std::vector<std::size_t> order(docs.size());
    for (std::size_t i = 0; i < docs.size(); ++i) order[i] = i;
    std::vector<double> scores(docs.size());
    for (std::size_t i = 0; i < docs.size(); ++i) scores[i] = brute_bm25(query_tokens, docs, i);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return order;
}

inline std::string random_words(std::mt19937& rng, const std::vector<std::string>& vocab,
                                std::size_t count) {
    std::string out;
    std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
    for (std::size_t i = 0; i < count; ++i) {
        if (!out.empty()) out += ' ';
        out += vocab[pick(rng)];
    }
    return out;
}

inline std::vector<std::string> make_vocab(std::size_t size) {
    std::vector<std::string> vocab;
    for (std::size_t i = 0; i < size; ++i) {
        vocab.push_back("w" + std::to_string(i));
    }
    return vocab;
}

inline rulestream::Sample make_sample(std::string id, std::string text, std::string gold,
                                      std::string task_id = "oracle") {
    rulestream::Sample s;
    s.id = std::move(id);
    s.fields = {{"text", std::move(text)}};
    s.gold_label = std::move(gold);
    s.task_id = std::move(task_id);
    return s;
}

} // namespace rstest
