#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "prmt4td/classifier.hpp"
#include "prmt4td/corpus.hpp"
#include "prmt4td/error.hpp"
#include "prmt4td/labels.hpp"
#include "prmt4td/llm_client.hpp"
#include "prmt4td/pipeline.hpp"
#include "prmt4td/promptkit.hpp"

namespace prmt4td {

// ---- confusion counts --------------------------------------------------------

struct LabelConfusion {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;

    bool operator==(const LabelConfusion&) const = default;
};

/// One-vs-rest counts for every label.
struct ConfusionCounts {
    std::array<LabelConfusion, kLabelCount> per_label{};
    std::size_t total = 0;     ///< examples evaluated
    std::size_t unparsed = 0;  ///< results without a label (scored or dropped)

    const LabelConfusion& operator[](TacticLabel l) const noexcept { return per_label[index_of(l)]; }
    bool operator==(const ConfusionCounts&) const = default;
};

struct ScoreOptions {
    /// Skip unparsed results instead of scoring them as misses.
    bool drop_unparsed = false;
};

/// Scores results against ground truth. An unparsed result is a false
/// negative for its true label and never a false positive.
inline ConfusionCounts score(std::span<const DetectionResult> results, std::span<const LabeledExample> truth,
                             const ScoreOptions& options = {}) {
    std::unordered_map<std::string, TacticLabel> truth_by_id;
    for (const auto& ex : truth) truth_by_id.emplace(ex.id, ex.label);
    std::unordered_set<std::string> seen;
    ConfusionCounts counts;
    for (const auto& r : results) {
        const auto it = truth_by_id.find(r.input_id);
        if (it == truth_by_id.end()) throw DataError("result id '" + r.input_id + "' is not in the ground truth");
        if (!seen.insert(r.input_id).second) throw DataError("duplicate result for id '" + r.input_id + "'");
        if (!r.parsed_label) {
            ++counts.unparsed;
            if (options.drop_unparsed) continue;
        }
        ++counts.total;
        for (auto label : kAllLabels) {
            const bool actual = it->second == label;
            const bool predicted = r.parsed_label && *r.parsed_label == label;
            auto& c = counts.per_label[index_of(label)];
            if (actual && predicted) {
                ++c.tp;
            } else if (predicted) {
                ++c.fp;
            } else if (actual) {
                ++c.fn;
            } else {
                ++c.tn;
            }
        }
    }
    return counts;
}

/// The small model's own argmax answers, shaped as detection results so the
/// same scorer applies.
inline std::vector<DetectionResult> small_model_results(const SmallModel& model,
                                                        std::span<const LabeledExample> inputs) {
    std::vector<DetectionResult> out;
    out.reserve(inputs.size());
    for (const auto& ex : inputs) {
        DetectionResult r;
        r.input_id = ex.id;
        r.parsed_label = model.predict(ex.code).label;
        out.push_back(std::move(r));
    }
    return out;
}

// ---- precision / recall / F1 ------------------------------------------------

inline double safe_ratio(double num, double den) noexcept { return den == 0.0 ? 0.0 : num / den; }

/// Harmonic mean of precision and recall; 0 when both are 0.
inline double f1_score(double precision, double recall) noexcept {
    return safe_ratio(2.0 * precision * recall, precision + recall);
}

inline constexpr std::string_view kAverageRow = "avg";

struct MetricsRow {
    std::string label;  ///< label name or "avg"
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct MetricsOptions {
    /// Include 'unrelated' in the macro average (excluded by default).
    bool average_includes_unrelated = false;
};

/// One row per label plus the macro-average row (last). The average is the
/// unweighted mean of the per-label precision, recall and F1 values.
inline std::vector<MetricsRow> metrics(const ConfusionCounts& counts, const MetricsOptions& options = {}) {
    std::vector<MetricsRow> rows;
    MetricsRow avg{std::string(kAverageRow)};
    std::size_t averaged = 0;
    for (auto label : kAllLabels) {
        const auto& c = counts[label];
        MetricsRow row{std::string(to_string(label))};
        row.precision = safe_ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fp));
        row.recall = safe_ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fn));
        row.f1 = f1_score(row.precision, row.recall);
        if (is_tactic(label) || options.average_includes_unrelated) {
            avg.precision += row.precision;
            avg.recall += row.recall;
            avg.f1 += row.f1;
            ++averaged;
        }
        rows.push_back(std::move(row));
    }
    avg.precision /= static_cast<double>(averaged);
    avg.recall /= static_cast<double>(averaged);
    avg.f1 /= static_cast<double>(averaged);
    rows.push_back(std::move(avg));
    return rows;
}

inline double macro_f1(const ConfusionCounts& counts, const MetricsOptions& options = {}) {
    return metrics(counts, options).back().f1;
}

inline nlohmann::json to_json(const MetricsRow& row) {
    return {{"label", row.label}, {"precision", row.precision}, {"recall", row.recall}, {"f1", row.f1}};
}

inline nlohmann::json to_json(const ConfusionCounts& counts) {
    nlohmann::json per_label = nlohmann::json::object();
    for (auto label : kAllLabels) {
        const auto& c = counts[label];
        per_label[std::string(to_string(label))] = {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}};
    }
    return {{"per_label", per_label}, {"total", counts.total}, {"unparsed", counts.unparsed}};
}

inline std::string format_2dp(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << v;
    return os.str();
}

inline std::string row_title(const std::string& label) {
    if (label == kAverageRow) return "Avg";
    const auto parsed = try_parse_label(label);
    return parsed ? std::string(display_name(*parsed)) : label;
}

/// Aligned text table: one row per label plus Avg; values to 2 decimals.
inline std::string format_metrics_table(const std::vector<MetricsRow>& rows) {
    std::ostringstream os;
    os << std::left << std::setw(14) << "Tactic" << std::right << std::setw(6) << "Pre" << std::setw(6) << "Rec"
       << std::setw(6) << "F1" << '\n';
    for (const auto& row : rows) {
        os << std::left << std::setw(14) << row_title(row.label) << std::right << std::setw(6)
           << format_2dp(row.precision) << std::setw(6) << format_2dp(row.recall) << std::setw(6)
           << format_2dp(row.f1) << '\n';
    }
    return os.str();
}

// ---- chi-square -------------------------------------------------------------

namespace detail {

/// Regularized lower incomplete gamma P(a, x) by its power series (x < a + 1).
inline double gamma_p_series(double a, double x) {
    double term = 1.0 / a;
    double sum = term;
    for (int n = 1; n < 10000; ++n) {
        term *= x / (a + n);
        sum += term;
        if (std::abs(term) < std::abs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

/// Regularized upper incomplete gamma Q(a, x) by its continued fraction
/// (modified Lentz), for x >= a + 1.
inline double gamma_q_continued_fraction(double a, double x) {
    constexpr double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 10000; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-16) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace detail

/// Q(a, x) = Γ(a, x) / Γ(a).
inline double regularized_gamma_q(double a, double x) {
    if (!(a > 0.0) || x < 0.0) throw UsageError("regularized_gamma_q requires a > 0 and x >= 0");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - detail::gamma_p_series(a, x);
    return detail::gamma_q_continued_fraction(a, x);
}

/// Upper tail probability of the chi-square distribution.
inline double chi_square_survival(double statistic, std::size_t df) {
    if (df == 0) throw UsageError("chi-square needs at least one degree of freedom");
    return regularized_gamma_q(static_cast<double>(df) / 2.0, std::max(statistic, 0.0) / 2.0);
}

struct ChiSquareResult {
    double statistic = 0.0;
    std::size_t df = 0;
    double p_value = 1.0;
};

/// Pearson test of independence. Columns whose total is zero are dropped
/// before computing degrees of freedom.
inline ChiSquareResult chi_square(const std::vector<std::vector<double>>& table) {
    if (table.size() < 2) throw DataError("chi-square needs at least two rows");
    const std::size_t cols = table.front().size();
    for (const auto& row : table) {
        if (row.size() != cols) throw DataError("chi-square table rows differ in length");
        for (double v : row) {
            if (!(v >= 0.0)) throw DataError("chi-square counts must be non-negative");
        }
    }
    std::vector<std::size_t> kept;
    for (std::size_t c = 0; c < cols; ++c) {
        double total = 0.0;
        for (const auto& row : table) total += row[c];
        if (total > 0.0) kept.push_back(c);
    }
    std::vector<double> row_totals(table.size(), 0.0);
    std::vector<double> col_totals(kept.size(), 0.0);
    double grand = 0.0;
    for (std::size_t r = 0; r < table.size(); ++r) {
        for (std::size_t k = 0; k < kept.size(); ++k) {
            row_totals[r] += table[r][kept[k]];
            col_totals[k] += table[r][kept[k]];
        }
        grand += row_totals[r];
    }
    if (kept.size() < 2 || std::any_of(row_totals.begin(), row_totals.end(), [](double t) { return t <= 0.0; })) {
        throw DataError("degenerate contingency table: need two non-empty rows and two non-empty columns");
    }
    ChiSquareResult out;
    for (std::size_t r = 0; r < table.size(); ++r) {
        for (std::size_t k = 0; k < kept.size(); ++k) {
            const double expected = row_totals[r] * col_totals[k] / grand;
            const double diff = table[r][kept[k]] - expected;
            out.statistic += diff * diff / expected;
        }
    }
    out.df = (table.size() - 1) * (kept.size() - 1);
    out.p_value = chi_square_survival(out.statistic, out.df);
    return out;
}

// ---- clarity ratings ----------------------------------------------------------

enum class Clarity { clear, neutral, unclear };

inline constexpr std::array<Clarity, 3> kAllClarity{Clarity::clear, Clarity::neutral, Clarity::unclear};

constexpr std::string_view to_string(Clarity c) noexcept {
    switch (c) {
        case Clarity::clear: return "Clear";
        case Clarity::neutral: return "Neutral";
        case Clarity::unclear: return "Unclear";
    }
    return "?";
}

inline std::optional<Clarity> try_parse_clarity(std::string_view text) {
    const std::string lowered = detail::ascii_lower(detail::trim(text));
    for (auto c : kAllClarity) {
        if (lowered == detail::ascii_lower(to_string(c))) return c;
    }
    return std::nullopt;
}

struct ClarityRating {
    std::string result_id;
    std::string rater_id;
    Clarity rating = Clarity::neutral;
};

/// Line-delimited JSON {result_id, rater_id, rating}; at most one rating per
/// (result, rater) pair.
inline std::vector<ClarityRating> parse_clarity_ratings(std::istream& in) {
    std::vector<ClarityRating> out;
    std::set<std::pair<std::string, std::string>> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto where = "ratings line " + std::to_string(line_no) + ": ";
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(where + "invalid JSON (" + e.what() + ")");
        }
        ClarityRating r;
        try {
            r.result_id = j.at("result_id").get<std::string>();
            r.rater_id = j.at("rater_id").get<std::string>();
            const auto rating = try_parse_clarity(j.at("rating").get<std::string>());
            if (!rating) throw DataError(where + "rating must be Clear, Neutral or Unclear");
            r.rating = *rating;
        } catch (const nlohmann::json::exception& e) {
            throw DataError(where + e.what());
        }
        if (!seen.emplace(r.result_id, r.rater_id).second) {
            throw DataError(where + "duplicate rating for result '" + r.result_id + "' by rater '" + r.rater_id + "'");
        }
        out.push_back(std::move(r));
    }
    return out;
}

/// Rows are the two raters, columns Clear / Neutral / Unclear, counted over
/// the results both raters judged.
using RatingTable = std::array<std::array<std::size_t, 3>, 2>;

inline RatingTable overlap_contingency(std::span<const ClarityRating> ratings, const std::string& rater_a,
                                       const std::string& rater_b) {
    std::map<std::string, Clarity> a;
    std::map<std::string, Clarity> b;
    for (const auto& r : ratings) {
        if (r.rater_id == rater_a) a[r.result_id] = r.rating;
        if (r.rater_id == rater_b) b[r.result_id] = r.rating;
    }
    RatingTable table{};
    for (const auto& [id, rating] : a) {
        const auto other = b.find(id);
        if (other == b.end()) continue;
        ++table[0][static_cast<std::size_t>(rating)];
        ++table[1][static_cast<std::size_t>(other->second)];
    }
    return table;
}

inline ChiSquareResult chi_square(const RatingTable& table) {
    std::vector<std::vector<double>> t;
    for (const auto& row : table) t.emplace_back(row.begin(), row.end());
    return chi_square(t);
}

// ---- ablation -----------------------------------------------------------------

struct VariantOutcome {
    PromptVariant variant = PromptVariant::full;
    std::vector<DetectionResult> results;
    ConfusionCounts counts;
    std::vector<MetricsRow> rows;
};

struct AblationReport {
    std::vector<VariantOutcome> variants;  ///< in kAblationVariants order
    std::size_t test_size = 0;
    bool drop_unparsed = false;
};

/// Runs every ablation variant, one after another, over the same inputs.
inline AblationReport run_ablation(const Detector& detector, std::span<const LabeledExample> test_set,
                                   CompletionBackend& backend, const PipelineSettings& base,
                                   const ScoreOptions& score_options = {},
                                   const MetricsOptions& metrics_options = {}) {
    if (test_set.empty()) throw UsageError("ablation needs a non-empty test set");
    AblationReport report;
    report.test_size = test_set.size();
    report.drop_unparsed = score_options.drop_unparsed;
    for (auto variant : kAblationVariants) {
        PipelineSettings settings = base;
        settings.variant = variant;
        VariantOutcome outcome;
        outcome.variant = variant;
        outcome.results = detector.detect(test_set, backend, settings);
        outcome.counts = score(outcome.results, test_set, score_options);
        outcome.rows = metrics(outcome.counts, metrics_options);
        report.variants.push_back(std::move(outcome));
    }
    return report;
}

/// Tactic rows by variant column groups (Pre / Rec / F1 each).
inline std::string format_ablation_table(const AblationReport& report) {
    constexpr int label_width = 14;
    constexpr int cell = 7;
    std::ostringstream os;
    os << std::left << std::setw(label_width) << "";
    for (const auto& v : report.variants) {
        os << " | " << std::left << std::setw(3 * cell) << ablation_heading(v.variant);
    }
    os << '\n' << std::left << std::setw(label_width) << "Tactic";
    for (std::size_t i = 0; i < report.variants.size(); ++i) {
        os << " | " << std::right << std::setw(cell) << "Pre" << std::setw(cell) << "Rec" << std::setw(cell) << "F1";
    }
    os << '\n';
    if (report.variants.empty()) return os.str();
    for (std::size_t r = 0; r < report.variants.front().rows.size(); ++r) {
        os << std::left << std::setw(label_width) << row_title(report.variants.front().rows[r].label);
        for (const auto& v : report.variants) {
            const auto& row = v.rows[r];
            os << " | " << std::right << std::setw(cell) << format_2dp(row.precision) << std::setw(cell)
               << format_2dp(row.recall) << std::setw(cell) << format_2dp(row.f1);
        }
        os << '\n';
    }
    return os.str();
}

inline nlohmann::json to_json(const AblationReport& report) {
    nlohmann::json variants = nlohmann::json::array();
    for (const auto& v : report.variants) {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& row : v.rows) rows.push_back(to_json(row));
        variants.push_back({{"variant", std::string(to_string(v.variant))},
                            {"heading", std::string(ablation_heading(v.variant))},
                            {"counts", to_json(v.counts)},
                            {"metrics", rows}});
    }
    return {{"test_size", report.test_size}, {"unparsed_scoring", report.drop_unparsed ? "dropped" : "miss"}, {"variants", variants}};
}

}  // namespace prmt4td
