#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "prmt4td/tokenizer.hpp"

namespace prmt4td {

/// Sparse vector: (term index, weight) pairs sorted by index, plus its L2 norm.
class FeatureVector {
public:
    using Entry = std::pair<std::uint32_t, double>;

    FeatureVector() = default;

    /// Entries may be unsorted and may repeat an index (weights are summed).
    explicit FeatureVector(std::vector<Entry> entries) : entries_(std::move(entries)) {
        std::sort(entries_.begin(), entries_.end(),
                  [](const Entry& a, const Entry& b) { return a.first < b.first; });
        std::vector<Entry> merged;
        merged.reserve(entries_.size());
        for (const auto& e : entries_) {
            if (!merged.empty() && merged.back().first == e.first) {
                merged.back().second += e.second;
            } else {
                merged.push_back(e);
            }
        }
        std::erase_if(merged, [](const Entry& e) { return e.second == 0.0; });
        entries_ = std::move(merged);
        double sq = 0.0;
        for (const auto& [_, w] : entries_) sq += w * w;
        norm_ = std::sqrt(sq);
    }

    /// Dense vector view (index = position), e.g. from an external embedding.
    static FeatureVector from_dense(const std::vector<double>& values) {
        std::vector<Entry> entries;
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (values[i] != 0.0) entries.emplace_back(static_cast<std::uint32_t>(i), values[i]);
        }
        return FeatureVector(std::move(entries));
    }

    const std::vector<Entry>& entries() const noexcept { return entries_; }
    double norm() const noexcept { return norm_; }
    bool empty() const noexcept { return entries_.empty(); }

    double dot(const FeatureVector& other) const noexcept {
        double sum = 0.0;
        auto a = entries_.begin();
        auto b = other.entries_.begin();
        while (a != entries_.end() && b != other.entries_.end()) {
            if (a->first < b->first) {
                ++a;
            } else if (b->first < a->first) {
                ++b;
            } else {
                sum += a->second * b->second;
                ++a;
                ++b;
            }
        }
        return sum;
    }

private:
    std::vector<Entry> entries_;
    double norm_ = 0.0;
};

/// Term dictionary with document frequencies, fit on a training corpus.
/// Term indices follow lexicographic term order so they are stable across runs.
class Vocabulary {
public:
    Vocabulary() = default;

    static Vocabulary fit(const std::vector<TokenSequence>& documents) {
        std::map<std::string, std::uint32_t> df;
        for (const auto& doc : documents) {
            std::vector<std::string> unique = doc.tokens;
            std::sort(unique.begin(), unique.end());
            unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
            for (auto& term : unique) ++df[term];
        }
        Vocabulary vocab;
        vocab.num_documents_ = documents.size();
        for (auto& [term, count] : df) {
            vocab.add_term(term, count);
        }
        return vocab;
    }

    /// Rebuilds a vocabulary from stored (term, df) pairs in index order.
    static Vocabulary from_terms(std::vector<std::pair<std::string, std::uint32_t>> terms,
                                 std::size_t num_documents) {
        Vocabulary vocab;
        vocab.num_documents_ = num_documents;
        for (auto& [term, count] : terms) vocab.add_term(std::move(term), count);
        return vocab;
    }

    std::size_t size() const noexcept { return terms_.size(); }
    std::size_t num_documents() const noexcept { return num_documents_; }
    const std::vector<std::string>& terms() const noexcept { return terms_; }
    const std::vector<std::uint32_t>& document_frequencies() const noexcept { return df_; }

    std::optional<std::uint32_t> index_of(const std::string& term) const {
        const auto it = index_.find(term);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    /// Smoothed idf: ln((1 + N) / (1 + df)) + 1.
    double idf(std::uint32_t index) const {
        const double n = static_cast<double>(num_documents_);
        return std::log((1.0 + n) / (1.0 + static_cast<double>(df_[index]))) + 1.0;
    }

    /// Raw-count tf times idf, L2-normalized. Out-of-vocabulary terms are dropped.
    FeatureVector transform(const TokenSequence& doc) const {
        std::unordered_map<std::uint32_t, double> counts;
        for (const auto& token : doc.tokens) {
            if (auto idx = index_of(token)) counts[*idx] += 1.0;
        }
        std::vector<FeatureVector::Entry> entries;
        entries.reserve(counts.size());
        double sq = 0.0;
        for (const auto& [idx, tf] : counts) {
            const double w = tf * idf(idx);
            entries.emplace_back(idx, w);
            sq += w * w;
        }
        const double norm = std::sqrt(sq);
        if (norm > 0.0) {
            for (auto& e : entries) e.second /= norm;
        }
        return FeatureVector(std::move(entries));
    }

private:
    void add_term(std::string term, std::uint32_t df) {
        index_.emplace(term, static_cast<std::uint32_t>(terms_.size()));
        terms_.push_back(std::move(term));
        df_.push_back(df);
    }

    std::vector<std::string> terms_;
    std::vector<std::uint32_t> df_;
    std::unordered_map<std::string, std::uint32_t> index_;
    std::size_t num_documents_ = 0;
};

}  // namespace prmt4td
