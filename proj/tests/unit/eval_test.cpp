#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "prmt4td/eval.hpp"

using namespace prmt4td;

namespace {

LabeledExample truth(std::string id, TacticLabel l) {
    LabeledExample ex;
    ex.id = std::move(id);
    ex.code = "class X {}";
    ex.label = l;
    return ex;
}

DetectionResult result(std::string id, std::optional<TacticLabel> l) {
    DetectionResult r;
    r.input_id = std::move(id);
    r.parsed_label = l;
    return r;
}

struct Fixture {
    std::vector<LabeledExample> truth;
    std::vector<DetectionResult> results;

    void add(TacticLabel actual, std::optional<TacticLabel> predicted) {
        const auto id = "e" + std::to_string(truth.size());
        truth.push_back(::truth(id, actual));
        results.push_back(result(id, predicted));
    }
};

// Independent chi-square statistic: expected = row * col / total.
double chi_square_oracle(const std::vector<std::vector<double>>& t) {
    std::vector<double> rows(t.size(), 0.0), cols(t[0].size(), 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        for (std::size_t j = 0; j < t[i].size(); ++j) {
            rows[i] += t[i][j];
            cols[j] += t[i][j];
            total += t[i][j];
        }
    }
    double stat = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        for (std::size_t j = 0; j < t[i].size(); ++j) {
            if (cols[j] == 0.0) continue;
            const double e = rows[i] * cols[j] / total;
            stat += (t[i][j] - e) * (t[i][j] - e) / e;
        }
    }
    return stat;
}

}  // namespace

TEST(Score, PerfectRun) {
    Fixture f;
    for (int k = 0; k < 3; ++k) {
        for (auto l : kAllLabels) f.add(l, l);
    }
    const auto counts = score(f.results, f.truth);
    EXPECT_EQ(counts.total, 18u);
    for (const auto& row : metrics(counts)) {
        EXPECT_DOUBLE_EQ(row.precision, 1.0) << row.label;
        EXPECT_DOUBLE_EQ(row.recall, 1.0) << row.label;
        EXPECT_DOUBLE_EQ(row.f1, 1.0) << row.label;
    }
}

TEST(Score, EightTwoTwo) {
    Fixture f;
    for (int i = 0; i < 8; ++i) f.add(TacticLabel::audit, TacticLabel::audit);
    for (int i = 0; i < 2; ++i) f.add(TacticLabel::audit, TacticLabel::pooling);
    for (int i = 0; i < 2; ++i) f.add(TacticLabel::pooling, TacticLabel::audit);
    const auto counts = score(f.results, f.truth);
    EXPECT_EQ(counts[TacticLabel::audit], (LabelConfusion{8, 2, 2, 0}));
    EXPECT_EQ(counts[TacticLabel::pooling], (LabelConfusion{0, 2, 2, 8}));
    EXPECT_EQ(counts[TacticLabel::heartbeat], (LabelConfusion{0, 0, 0, 12}));
    const auto rows = metrics(counts);
    EXPECT_DOUBLE_EQ(rows[index_of(TacticLabel::audit)].precision, 0.8);
    EXPECT_DOUBLE_EQ(rows[index_of(TacticLabel::audit)].recall, 0.8);
    EXPECT_NEAR(rows[index_of(TacticLabel::audit)].f1, 0.8, 1e-15);
    EXPECT_DOUBLE_EQ(rows[index_of(TacticLabel::pooling)].f1, 0.0);
    EXPECT_EQ(rows.back().label, kAverageRow);
    EXPECT_NEAR(rows.back().f1, 0.8 / 5.0, 1e-15);
}

TEST(Score, UnparsedIsAMissNotAFalsePositive) {
    Fixture f;
    for (auto l : kAllLabels) f.add(l, std::nullopt);
    const auto counts = score(f.results, f.truth);
    EXPECT_EQ(counts.unparsed, kLabelCount);
    EXPECT_EQ(counts.total, kLabelCount);
    for (auto l : kAllLabels) {
        EXPECT_EQ(counts[l].tp, 0u);
        EXPECT_EQ(counts[l].fp, 0u);
        EXPECT_EQ(counts[l].fn, 1u);
    }
    for (const auto& row : metrics(counts)) EXPECT_EQ(row.f1, 0.0);
}

TEST(Score, DropUnparsedMode) {
    Fixture f;
    f.add(TacticLabel::audit, TacticLabel::audit);
    f.add(TacticLabel::audit, std::nullopt);
    const auto kept = score(f.results, f.truth);
    const auto dropped = score(f.results, f.truth, {.drop_unparsed = true});
    EXPECT_EQ(kept[TacticLabel::audit].fn, 1u);
    EXPECT_EQ(dropped[TacticLabel::audit].fn, 0u);
    EXPECT_EQ(dropped.total, 1u);
    EXPECT_EQ(dropped.unparsed, 1u);
}

TEST(Score, RejectsUnknownAndDuplicateIds) {
    Fixture f;
    f.add(TacticLabel::audit, TacticLabel::audit);
    auto unknown = f.results;
    unknown.push_back(result("nope", TacticLabel::audit));
    EXPECT_THROW(score(unknown, f.truth), DataError);
    auto dup = f.results;
    dup.push_back(dup[0]);
    EXPECT_THROW(score(dup, f.truth), DataError);
}

TEST(F1, KnownValues) {
    EXPECT_NEAR(f1_score(1.00, 0.92), 0.9583, 1e-4);
    EXPECT_NEAR(f1_score(1.00, 0.70), 0.8235, 1e-4);
    EXPECT_EQ(f1_score(0.0, 0.0), 0.0);
    EXPECT_EQ(f1_score(0.0, 1.0), 0.0);
    EXPECT_EQ(safe_ratio(3.0, 0.0), 0.0);
}

TEST(F1, LiesBetweenPrecisionAndRecall) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 10000; ++i) {
        const double p = u(rng), r = u(rng);
        const double f = f1_score(p, r);
        EXPECT_GE(f, std::min(p, r) - 1e-12);
        EXPECT_LE(f, std::max(p, r) + 1e-12);
    }
}

TEST(Metrics, PermutationInvariant) {
    std::mt19937_64 rng(9);
    Fixture f;
    for (int i = 0; i < 120; ++i) {
        const auto actual = kAllLabels[rng() % kLabelCount];
        const auto roll = rng() % 10;
        f.add(actual, roll < 6 ? std::optional(actual)
                               : roll < 9 ? std::optional(kAllLabels[rng() % kLabelCount]) : std::nullopt);
    }
    const auto base = score(f.results, f.truth);
    for (int trial = 0; trial < 10; ++trial) {
        auto shuffled = f.results;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        EXPECT_EQ(score(shuffled, f.truth), base);
    }
}

TEST(Metrics, AverageOptionallyIncludesUnrelated) {
    Fixture f;
    f.add(TacticLabel::audit, TacticLabel::audit);
    f.add(TacticLabel::unrelated, TacticLabel::audit);
    const auto counts = score(f.results, f.truth);
    const double audit_f1 = f1_score(0.5, 1.0);
    EXPECT_NEAR(macro_f1(counts), audit_f1 / 5.0, 1e-15);
    EXPECT_NEAR(macro_f1(counts, {.average_includes_unrelated = true}), audit_f1 / 6.0, 1e-15);
}

TEST(MetricsTable, TwoDecimalsAndDisplayNames) {
    Fixture f;
    f.add(TacticLabel::audit, TacticLabel::audit);
    const auto text = format_metrics_table(metrics(score(f.results, f.truth)));
    EXPECT_NE(text.find("1.00"), std::string::npos);
    EXPECT_NE(text.find("Avg"), std::string::npos);
    EXPECT_EQ(format_2dp(0.815), "0.81");
    EXPECT_EQ(format_2dp(0.8251), "0.83");
}

TEST(ChiSquare, KnownTables) {
    const auto same = chi_square(std::vector<std::vector<double>>{{5, 3, 2}, {5, 3, 2}});
    EXPECT_DOUBLE_EQ(same.statistic, 0.0);
    EXPECT_NEAR(same.p_value, 1.0, 1e-12);
    EXPECT_EQ(same.df, 2u);

    const auto split = chi_square(std::vector<std::vector<double>>{{10, 0, 0}, {0, 10, 0}});
    EXPECT_NEAR(split.statistic, 20.0, 1e-12);
    EXPECT_EQ(split.df, 1u);
    EXPECT_NEAR(split.p_value, std::erfc(std::sqrt(10.0)), 1e-9);

    const std::vector<std::vector<double>> t{{10, 20, 30}, {20, 20, 20}};
    const auto r = chi_square(t);
    EXPECT_NEAR(r.statistic, chi_square_oracle(t), 1e-12);
    EXPECT_EQ(r.df, 2u);
    EXPECT_NEAR(r.p_value, std::exp(-r.statistic / 2.0), 1e-12);
}

TEST(ChiSquare, SurvivalMatchesClosedForms) {
    for (double x : {0.01, 0.5, 1.0, 3.84, 7.0, 15.0, 40.0}) {
        EXPECT_NEAR(chi_square_survival(x, 1), std::erfc(std::sqrt(x / 2.0)), 1e-12) << x;
        EXPECT_NEAR(chi_square_survival(x, 2), std::exp(-x / 2.0), 1e-12) << x;
        EXPECT_NEAR(chi_square_survival(x, 4), std::exp(-x / 2.0) * (1.0 + x / 2.0), 1e-12) << x;
    }
    EXPECT_DOUBLE_EQ(chi_square_survival(0.0, 3), 1.0);
}

TEST(ChiSquare, InvariantUnderRowAndColumnSwaps) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::vector<double>> t(2, std::vector<double>(3));
        for (auto& row : t) {
            for (auto& v : row) v = 1.0 + static_cast<double>(rng() % 20);
        }
        const auto base = chi_square(t);
        EXPECT_NEAR(base.statistic, chi_square_oracle(t), 1e-10);
        auto rows = t;
        std::swap(rows[0], rows[1]);
        EXPECT_NEAR(chi_square(rows).statistic, base.statistic, 1e-10);
        auto cols = t;
        for (auto& row : cols) std::swap(row[0], row[2]);
        EXPECT_NEAR(chi_square(cols).statistic, base.statistic, 1e-10);
        EXPECT_GE(base.p_value, 0.0);
        EXPECT_LE(base.p_value, 1.0);
    }
}

TEST(ChiSquare, DegenerateTablesAreRejected) {
    EXPECT_THROW(chi_square(std::vector<std::vector<double>>{{5, 0, 0}, {3, 0, 0}}), DataError);
    EXPECT_THROW(chi_square(std::vector<std::vector<double>>{{0, 0, 0}, {3, 4, 0}}), DataError);
}

TEST(Clarity, ParsingAndContingency) {
    std::istringstream in(R"({"result_id":"r1","rater_id":"a","rating":"Clear"}
{"result_id":"r1","rater_id":"b","rating":"neutral"}

{"result_id":"r2","rater_id":"a","rating":"Unclear"}
{"result_id":"r2","rater_id":"b","rating":"Clear"}
{"result_id":"r3","rater_id":"a","rating":"Clear"}
)");
    const auto ratings = parse_clarity_ratings(in);
    ASSERT_EQ(ratings.size(), 5u);
    EXPECT_EQ(ratings[1].rating, Clarity::neutral);
    const auto table = overlap_contingency(ratings, "a", "b");
    EXPECT_EQ(table[0], (std::array<std::size_t, 3>{1, 0, 1}));
    EXPECT_EQ(table[1], (std::array<std::size_t, 3>{1, 1, 0}));
}

TEST(Clarity, ErrorsNameTheLine) {
    std::istringstream dup(R"({"result_id":"r1","rater_id":"a","rating":"Clear"}
{"result_id":"r1","rater_id":"a","rating":"Unclear"})");
    EXPECT_THROW(parse_clarity_ratings(dup), DataError);
    std::istringstream bad(R"({"result_id":"r1","rater_id":"a","rating":"Great"})");
    try {
        parse_clarity_ratings(bad);
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("line 1"), std::string::npos);
    }
    std::istringstream broken("{");
    EXPECT_THROW(parse_clarity_ratings(broken), DataError);
}
