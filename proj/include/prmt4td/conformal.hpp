#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "prmt4td/classifier.hpp"
#include "prmt4td/corpus.hpp"
#include "prmt4td/error.hpp"
#include "prmt4td/labels.hpp"

namespace prmt4td {

inline constexpr std::string_view kScoreKind = "one-minus-probability";
inline constexpr double kDefaultAlpha = 0.05;

/// Nonconformity of `candidate` under `prediction`: 1 - p(candidate).
inline double nonconformity(const Prediction& prediction, TacticLabel candidate) noexcept {
    return 1.0 - prediction.score(candidate);
}

/// Split-conformal calibration result.
struct Calibrator {
    double alpha = kDefaultAlpha;
    double threshold = 1.0;
    std::size_t calib_size = 0;
    std::string score_kind{kScoreKind};
};

/// 1-based rank ceil((m + 1)(1 - alpha)) of the calibration score used as
/// threshold; values above m mean the threshold is vacuous (1.0).
inline std::size_t conformal_rank(std::size_t m, double alpha) {
    const double raw = static_cast<double>(m + 1) * (1.0 - alpha);
    // Guard against 20 * 0.95 = 19.000000000000004 style representation error.
    return static_cast<std::size_t>(std::ceil(raw - 1e-9));
}

/// Calibrates from precomputed true-label nonconformity scores.
inline Calibrator calibrate_scores(std::vector<double> scores, double alpha) {
    if (scores.empty()) throw UsageError("calibration set is empty");
    if (!(alpha > 0.0 && alpha < 1.0)) throw UsageError("alpha must lie in (0, 1)");
    std::sort(scores.begin(), scores.end());
    Calibrator cal;
    cal.alpha = alpha;
    cal.calib_size = scores.size();
    const std::size_t rank = conformal_rank(scores.size(), alpha);
    cal.threshold = rank > scores.size() ? 1.0 : std::clamp(scores[rank - 1], 0.0, 1.0);
    return cal;
}

inline Calibrator calibrate(const SmallModel& model, std::span<const LabeledExample> calib_set, double alpha) {
    if (calib_set.empty()) throw UsageError("calibration set is empty");
    std::vector<double> scores;
    scores.reserve(calib_set.size());
    for (const auto& ex : calib_set) {
        scores.push_back(nonconformity(model.predict(ex.code), ex.label));
    }
    return calibrate_scores(std::move(scores), alpha);
}

/// Conformal label set for one input, ordered by ascending nonconformity
/// (ties in canonical label order).
struct PredictionSet {
    std::vector<TacticLabel> labels;
    std::vector<double> nonconformity;  ///< parallel to labels
    double alpha = kDefaultAlpha;
    double threshold = 1.0;
    bool fallback_used = false;  ///< empty set replaced by the argmax singleton

    bool contains(TacticLabel label) const {
        return std::find(labels.begin(), labels.end(), label) != labels.end();
    }
    std::size_t size() const noexcept { return labels.size(); }
    bool empty() const noexcept { return labels.empty(); }
};

/// Every label whose nonconformity is within the threshold, without the
/// empty-set fallback.
inline PredictionSet predict_set_raw(const Calibrator& cal, const Prediction& prediction) {
    PredictionSet set;
    set.alpha = cal.alpha;
    set.threshold = cal.threshold;
    std::vector<std::pair<double, TacticLabel>> members;
    for (auto label : kAllLabels) {
        const double score = nonconformity(prediction, label);
        if (score <= cal.threshold) members.emplace_back(score, label);
    }
    std::stable_sort(members.begin(), members.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [score, label] : members) {
        set.labels.push_back(label);
        set.nonconformity.push_back(score);
    }
    return set;
}

/// predict_set_raw with an empty result replaced by {argmax label}.
inline PredictionSet predict_set(const Calibrator& cal, const Prediction& prediction) {
    PredictionSet set = predict_set_raw(cal, prediction);
    if (set.empty()) {
        set.labels.push_back(prediction.label);
        set.nonconformity.push_back(nonconformity(prediction, prediction.label));
        set.fallback_used = true;
    }
    return set;
}

}  // namespace prmt4td
