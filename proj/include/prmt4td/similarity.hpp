#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <iterator>
#include <ranges>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prmt4td/corpus.hpp"
#include "prmt4td/error.hpp"
#include "prmt4td/features.hpp"
#include "prmt4td/java_parser.hpp"
#include "prmt4td/tokenizer.hpp"

namespace prmt4td {

using TokenSet = std::set<std::string>;

inline TokenSet token_set(const TokenSequence& seq) {
    return TokenSet(seq.tokens.begin(), seq.tokens.end());
}

/// Cosine of two feature vectors, clamped to [0, 1]; 0 if either is zero.
inline double semantic_similarity(const FeatureVector& a, const FeatureVector& b) {
    if (a.norm() == 0.0 || b.norm() == 0.0) return 0.0;
    return std::clamp(a.dot(b) / (a.norm() * b.norm()), 0.0, 1.0);
}

/// Jaccard index |A ∩ B| / |A ∪ B|; two empty sets count as identical.
inline double lexical_similarity(const TokenSet& a, const TokenSet& b) {
    if (a.empty() && b.empty()) return 1.0;
    std::size_t common = 0;
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
        if (*ia < *ib) {
            ++ia;
        } else if (*ib < *ia) {
            ++ib;
        } else {
            ++common;
            ++ia;
            ++ib;
        }
    }
    const std::size_t uni = a.size() + b.size() - common;
    return static_cast<double>(common) / static_cast<double>(uni);
}

/// Unit-cost edit distance (insert, delete, substitute) between two
/// sequences, O(|a|·|b|) time and O(min) memory.
template <std::ranges::random_access_range A, std::ranges::random_access_range B>
std::size_t levenshtein(const A& a, const B& b) {
    const auto n = static_cast<std::size_t>(std::ranges::size(a));
    const auto m = static_cast<std::size_t>(std::ranges::size(b));
    if (n < m) return levenshtein(b, a);
    std::vector<std::size_t> prev(m + 1);
    std::vector<std::size_t> curr(m + 1);
    for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
    auto ai = std::ranges::begin(a);
    for (std::size_t i = 1; i <= n; ++i, ++ai) {
        curr[0] = i;
        auto bj = std::ranges::begin(b);
        for (std::size_t j = 1; j <= m; ++j, ++bj) {
            const std::size_t substitute = prev[j - 1] + (*ai == *bj ? 0 : 1);
            curr[j] = std::min({prev[j] + 1, curr[j - 1] + 1, substitute});
        }
        std::swap(prev, curr);
    }
    return prev[m];
}

/// 1 - Lev(a, b) / max(|a|, |b|); two empty sequences count as identical.
inline double syntactic_similarity(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    const std::size_t longest = std::max(a.size(), b.size());
    if (longest == 0) return 1.0;
    return 1.0 - static_cast<double>(levenshtein(a, b)) / static_cast<double>(longest);
}

inline double syntactic_similarity(const AstSequence& a, const AstSequence& b) {
    return syntactic_similarity(a.node_kinds, b.node_kinds);
}

/// Convex weights for the semantic, lexical and syntactic similarity terms.
class SimilarityWeights {
public:
    SimilarityWeights() = default;

    SimilarityWeights(double semantic, double lexical, double syntactic)
        : semantic_(semantic), lexical_(lexical), syntactic_(syntactic) {
        if (!(semantic >= 0.0 && lexical >= 0.0 && syntactic >= 0.0) ||
            std::abs(semantic + lexical + syntactic - 1.0) > 1e-9) {
            throw UsageError("similarity weights must be non-negative and sum to 1");
        }
    }

    static SimilarityWeights equal() { return {}; }

    double semantic() const noexcept { return semantic_; }
    double lexical() const noexcept { return lexical_; }
    double syntactic() const noexcept { return syntactic_; }

private:
    double semantic_ = 1.0 / 3.0;
    double lexical_ = 1.0 / 3.0;
    double syntactic_ = 1.0 / 3.0;
};

struct SimilarityBreakdown {
    double semantic = 0.0;
    double lexical = 0.0;
    double syntactic = 0.0;
    double combined = 0.0;
};

inline double combined_score(const SimilarityWeights& w, double semantic, double lexical, double syntactic) {
    return w.semantic() * semantic + w.lexical() * lexical + w.syntactic() * syntactic;
}

/// Maps source text to a semantic embedding. The default is the small model's
/// tf-idf vector; an external embedding service can be plugged in instead.
using Embedder = std::function<FeatureVector(std::string_view)>;

/// Precomputed views of one snippet used by all three kernels.
struct CodeProfile {
    FeatureVector embedding;
    TokenSet tokens;
    AstSequence ast;
};

inline CodeProfile profile_code(std::string_view code, const Embedder& embed, std::string source_id = {}) {
    return CodeProfile{embed(code), token_set(tokenize(code)), parse_ast_sequence(code, std::move(source_id))};
}

inline SimilarityBreakdown compare(const CodeProfile& a, const CodeProfile& b, const SimilarityWeights& w) {
    SimilarityBreakdown out;
    out.semantic = semantic_similarity(a.embedding, b.embedding);
    out.lexical = lexical_similarity(a.tokens, b.tokens);
    out.syntactic = syntactic_similarity(a.ast, b.ast);
    out.combined = combined_score(w, out.semantic, out.lexical, out.syntactic);
    return out;
}

struct RankedCandidate {
    const LabeledExample* example = nullptr;
    SimilarityBreakdown similarity;
};

/// Demonstration pool with cached profiles. Holds its own copy of the
/// examples so returned pointers stay valid for the pool's lifetime.
class CandidatePool {
public:
    CandidatePool(std::vector<LabeledExample> examples, Embedder embed)
        : examples_(std::move(examples)), embed_(std::move(embed)) {
        profiles_.reserve(examples_.size());
        for (const auto& ex : examples_) profiles_.push_back(profile_code(ex.code, embed_, ex.id));
    }

    const std::vector<LabeledExample>& examples() const noexcept { return examples_; }
    std::size_t size() const noexcept { return examples_.size(); }
    bool empty() const noexcept { return examples_.empty(); }

    CodeProfile profile(std::string_view code) const { return profile_code(code, embed_); }

    /// Descending combined score, ties by ascending example id. `keep`
    /// filters candidates (e.g. one label partition).
    std::vector<RankedCandidate> rank(const CodeProfile& query, const SimilarityWeights& w,
                                      const std::function<bool(const LabeledExample&)>& keep = {}) const {
        std::vector<RankedCandidate> ranked;
        for (std::size_t i = 0; i < examples_.size(); ++i) {
            if (keep && !keep(examples_[i])) continue;
            ranked.push_back(RankedCandidate{&examples_[i], compare(query, profiles_[i], w)});
        }
        std::sort(ranked.begin(), ranked.end(), [](const RankedCandidate& a, const RankedCandidate& b) {
            if (a.similarity.combined != b.similarity.combined) {
                return a.similarity.combined > b.similarity.combined;
            }
            return a.example->id < b.example->id;
        });
        return ranked;
    }

private:
    std::vector<LabeledExample> examples_;
    Embedder embed_;
    std::vector<CodeProfile> profiles_;
};

/// Ranks every pool example against `query`; throws on an empty pool.
inline std::vector<std::pair<LabeledExample, SimilarityBreakdown>> rank_candidates(
    std::string_view query, std::span<const LabeledExample> pool, const SimilarityWeights& weights,
    const Embedder& embed) {
    if (pool.empty()) throw UsageError("candidate pool is empty");
    const CandidatePool index(std::vector<LabeledExample>(pool.begin(), pool.end()), embed);
    std::vector<std::pair<LabeledExample, SimilarityBreakdown>> out;
    for (const auto& r : index.rank(index.profile(query), weights)) {
        out.emplace_back(*r.example, r.similarity);
    }
    return out;
}

}  // namespace prmt4td
