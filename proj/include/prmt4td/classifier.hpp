#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "prmt4td/corpus.hpp"
#include "prmt4td/error.hpp"
#include "prmt4td/features.hpp"
#include "prmt4td/labels.hpp"
#include "prmt4td/random.hpp"
#include "prmt4td/tokenizer.hpp"

namespace prmt4td {

using LabelScores = std::array<double, kLabelCount>;

/// Small-model output for one snippet.
struct Prediction {
    LabelScores scores{};  ///< softmax probabilities in label order
    TacticLabel label = TacticLabel::audit;
    double confidence = 0.0;  ///< scores[label]

    double score(TacticLabel l) const noexcept { return scores[index_of(l)]; }
};

/// Numerically stable softmax of per-label linear scores. The argmax tie-break
/// picks the earliest label in canonical order.
inline Prediction prediction_from_logits(std::span<const double, kLabelCount> logits) {
    Prediction p;
    const double max_logit = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    for (std::size_t l = 0; l < kLabelCount; ++l) {
        p.scores[l] = std::exp(logits[l] - max_logit);
        total += p.scores[l];
    }
    for (auto& s : p.scores) s /= total;

    std::size_t best = 0;
    for (std::size_t l = 1; l < kLabelCount; ++l) {
        if (logits[l] > logits[best]) best = l;
    }
    p.label = kAllLabels[best];
    p.confidence = p.scores[best];
    return p;
}

struct TrainingConfig {
    std::size_t epochs = 300;
    double learning_rate = 1.0;
    double l2 = 1e-4;            ///< weight decay on coefficients (not biases)
    std::size_t batch_size = 0;  ///< 0 means full batch
    std::uint64_t seed = 42;
};

/// Dense multinomial logistic-regression parameters: one coefficient row and
/// one bias per label.
struct LinearParams {
    std::size_t dims = 0;
    std::vector<double> weights;  ///< kLabelCount x dims, row-major
    std::vector<double> bias;     ///< kLabelCount

    LinearParams() = default;
    explicit LinearParams(std::size_t d) : dims(d), weights(kLabelCount * d, 0.0), bias(kLabelCount, 0.0) {}

    std::span<const double> row(std::size_t label) const {
        return std::span<const double>(weights).subspan(label * dims, dims);
    }

    std::array<double, kLabelCount> logits(const FeatureVector& x) const {
        std::array<double, kLabelCount> z{};
        for (std::size_t l = 0; l < kLabelCount; ++l) {
            double s = bias[l];
            const double* w = weights.data() + l * dims;
            for (const auto& [idx, v] : x.entries()) {
                if (idx < dims) s += w[idx] * v;
            }
            z[l] = s;
        }
        return z;
    }

    bool operator==(const LinearParams&) const = default;
};

struct LossAndGradient {
    double loss = 0.0;
    LinearParams gradient;
};

/// Mean multinomial cross-entropy plus (l2 / 2) * ||W||^2 over the given
/// examples, and its analytic gradient.
inline LossAndGradient cross_entropy(const LinearParams& params, std::span<const FeatureVector> xs,
                                     std::span<const std::size_t> ys, double l2) {
    LossAndGradient out{0.0, LinearParams(params.dims)};
    const double inv_n = xs.empty() ? 0.0 : 1.0 / static_cast<double>(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const auto z = params.logits(xs[i]);
        const double max_z = *std::max_element(z.begin(), z.end());
        double total = 0.0;
        std::array<double, kLabelCount> p{};
        for (std::size_t l = 0; l < kLabelCount; ++l) {
            p[l] = std::exp(z[l] - max_z);
            total += p[l];
        }
        out.loss += (std::log(total) + max_z - z[ys[i]]) * inv_n;
        for (std::size_t l = 0; l < kLabelCount; ++l) {
            const double residual = (p[l] / total - (l == ys[i] ? 1.0 : 0.0)) * inv_n;
            out.gradient.bias[l] += residual;
            double* g = out.gradient.weights.data() + l * params.dims;
            for (const auto& [idx, v] : xs[i].entries()) {
                if (idx < params.dims) g[idx] += residual * v;
            }
        }
    }
    double sq = 0.0;
    for (std::size_t k = 0; k < params.weights.size(); ++k) {
        sq += params.weights[k] * params.weights[k];
        out.gradient.weights[k] += l2 * params.weights[k];
    }
    out.loss += 0.5 * l2 * sq;
    return out;
}

/// The trained "small model": tf-idf vocabulary plus linear weights.
/// Immutable after training; predict() is safe to call concurrently.
class SmallModel {
public:
    SmallModel() = default;
    SmallModel(Vocabulary vocabulary, LinearParams params)
        : vocabulary_(std::move(vocabulary)), params_(std::move(params)) {
        if (params_.dims != vocabulary_.size() || params_.weights.size() != kLabelCount * params_.dims ||
            params_.bias.size() != kLabelCount) {
            throw DataError("model parameters do not match vocabulary size");
        }
    }

    const Vocabulary& vocabulary() const noexcept { return vocabulary_; }
    const LinearParams& params() const noexcept { return params_; }
    static constexpr const std::array<TacticLabel, kLabelCount>& label_order() noexcept { return kAllLabels; }

    FeatureVector features(std::string_view code) const { return vocabulary_.transform(tokenize(code)); }

    Prediction predict_features(const FeatureVector& x) const {
        const auto z = params_.logits(x);
        return prediction_from_logits(z);
    }

    Prediction predict(std::string_view code) const { return predict_features(features(code)); }

private:
    Vocabulary vocabulary_;
    LinearParams params_;
};

/// Fits the vocabulary and weights by mini-batch gradient descent on the
/// regularized cross-entropy. Deterministic for a fixed config.seed.
inline SmallModel train(std::span<const LabeledExample> train_set, const TrainingConfig& config = {}) {
    if (train_set.empty()) throw UsageError("training set is empty");
    std::array<bool, kLabelCount> present{};
    for (const auto& ex : train_set) present[index_of(ex.label)] = true;
    if (std::count(present.begin(), present.end(), true) < 2) {
        throw UsageError("training set must cover at least two distinct labels");
    }
    if (config.epochs == 0 || !(config.learning_rate > 0.0) || config.l2 < 0.0) {
        throw UsageError("invalid training hyperparameters");
    }

    std::vector<TokenSequence> docs;
    docs.reserve(train_set.size());
    for (const auto& ex : train_set) docs.push_back(tokenize(ex.code));
    Vocabulary vocab = Vocabulary::fit(docs);
    if (vocab.size() == 0) throw UsageError("training set produced an empty vocabulary");

    std::vector<FeatureVector> xs;
    std::vector<std::size_t> ys;
    xs.reserve(docs.size());
    for (std::size_t i = 0; i < docs.size(); ++i) {
        xs.push_back(vocab.transform(docs[i]));
        ys.push_back(index_of(train_set[i].label));
    }

    LinearParams params(vocab.size());
    const std::size_t n = xs.size();
    const std::size_t batch = config.batch_size == 0 ? n : std::min(config.batch_size, n);
    std::mt19937_64 rng(derive_seed(config.seed, "train"));
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    std::vector<FeatureVector> batch_x;
    std::vector<std::size_t> batch_y;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        if (batch < n) portable_shuffle(order, rng);
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t end = std::min(start + batch, n);
            batch_x.clear();
            batch_y.clear();
            for (std::size_t k = start; k < end; ++k) {
                batch_x.push_back(xs[order[k]]);
                batch_y.push_back(ys[order[k]]);
            }
            const auto step = cross_entropy(params, batch_x, batch_y, config.l2);
            for (std::size_t k = 0; k < params.weights.size(); ++k) {
                params.weights[k] -= config.learning_rate * step.gradient.weights[k];
            }
            for (std::size_t l = 0; l < kLabelCount; ++l) {
                params.bias[l] -= config.learning_rate * step.gradient.bias[l];
            }
        }
    }
    return SmallModel(std::move(vocab), std::move(params));
}

}  // namespace prmt4td
