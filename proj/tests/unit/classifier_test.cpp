#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "prmt4td/classifier.hpp"
#include "prmt4td/synthetic.hpp"

using namespace prmt4td;

namespace {

std::vector<LabeledExample> toy_corpus() {
    const std::vector<std::pair<TacticLabel, std::string>> markers{
        {TacticLabel::audit, "auditTrail"},
        {TacticLabel::heartbeat, "heartbeatTimer"},
        {TacticLabel::pooling, "connectionPool"},
    };
    const std::vector<std::string> filler{"value", "count", "data", "state", "result"};
    std::vector<LabeledExample> out;
    for (const auto& [label, marker] : markers) {
        for (std::size_t i = 0; i < 10; ++i) {
            const std::string code = "void run() { " + marker + ".update(" + filler[i % filler.size()] + "); " +
                                     filler[(i + 2) % filler.size()] + " = " + marker + "; }";
            out.push_back({marker + std::to_string(i), code, label});
        }
    }
    return out;
}

FeatureVector random_features(std::mt19937_64& rng, std::size_t dims) {
    std::vector<FeatureVector::Entry> entries;
    for (std::uint32_t d = 0; d < dims; ++d) {
        if (rng() % 2) entries.emplace_back(d, unit_uniform(rng) * 2.0 - 1.0);
    }
    return FeatureVector(std::move(entries));
}

}  // namespace

TEST(Softmax, SumsToOneAndPicksMax) {
    const std::array<double, kLabelCount> z{1.0, 3.0, -2.0, 0.5, 3.0 - 1e-12, 0.0};
    const auto p = prediction_from_logits(z);
    double total = 0.0;
    for (double s : p.scores) {
        EXPECT_GE(s, 0.0);
        EXPECT_LE(s, 1.0);
        total += s;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
    EXPECT_EQ(p.label, TacticLabel::authenticate);
    EXPECT_DOUBLE_EQ(p.confidence, *std::max_element(p.scores.begin(), p.scores.end()));
}

TEST(Softmax, TieGoesToFirstLabel) {
    const std::array<double, kLabelCount> z{0.0, 2.0, 1.0, 2.0, 2.0, 0.0};
    EXPECT_EQ(prediction_from_logits(z).label, TacticLabel::authenticate);
    const std::array<double, kLabelCount> flat{};
    EXPECT_EQ(prediction_from_logits(flat).label, TacticLabel::audit);
}

TEST(Softmax, StableForHugeLogits) {
    const std::array<double, kLabelCount> z{1e308, -1e308, 0.0, 700.0, -700.0, 1e5};
    const auto p = prediction_from_logits(z);
    for (double s : p.scores) EXPECT_TRUE(std::isfinite(s));
    EXPECT_EQ(p.label, TacticLabel::audit);
}

// Property: shifting all logits by a constant changes neither label nor scores.
TEST(SoftmaxProperty, ShiftInvariance) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 200; ++trial) {
        std::array<double, kLabelCount> z{};
        for (auto& v : z) v = unit_uniform(rng) * 20.0 - 10.0;
        auto shifted = z;
        const double c = unit_uniform(rng) * 100.0 - 50.0;
        for (auto& v : shifted) v += c;
        const auto a = prediction_from_logits(z);
        const auto b = prediction_from_logits(shifted);
        EXPECT_EQ(a.label, b.label);
        for (std::size_t l = 0; l < kLabelCount; ++l) EXPECT_NEAR(a.scores[l], b.scores[l], 1e-12);
    }
}

// Analytic gradient vs. central finite differences on random small instances.
TEST(CrossEntropy, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(99);
    for (int instance = 0; instance < 20; ++instance) {
        const std::size_t dims = 2 + rng() % 4;
        const std::size_t n = 2 + rng() % 5;
        std::vector<FeatureVector> xs;
        std::vector<std::size_t> ys;
        for (std::size_t i = 0; i < n; ++i) {
            xs.push_back(random_features(rng, dims));
            ys.push_back(rng() % kLabelCount);
        }
        LinearParams params(dims);
        for (auto& w : params.weights) w = unit_uniform(rng) - 0.5;
        for (auto& b : params.bias) b = unit_uniform(rng) - 0.5;
        const double l2 = 0.1 * unit_uniform(rng);
        const auto analytic = cross_entropy(params, xs, ys, l2);
        const double h = 1e-5;
        auto check = [&](std::vector<double>& values, const std::vector<double>& grads) {
            for (std::size_t k = 0; k < values.size(); ++k) {
                const double saved = values[k];
                values[k] = saved + h;
                const double up = cross_entropy(params, xs, ys, l2).loss;
                values[k] = saved - h;
                const double down = cross_entropy(params, xs, ys, l2).loss;
                values[k] = saved;
                const double numeric = (up - down) / (2.0 * h);
                const double scale = std::max({std::abs(numeric), std::abs(grads[k]), 1e-3});
                EXPECT_LE(std::abs(numeric - grads[k]) / scale, 1e-5);
            }
        };
        check(params.weights, analytic.gradient.weights);
        check(params.bias, analytic.gradient.bias);
    }
}

TEST(Train, ToyCorpusHeldOutSnippet) {
    const auto corpus = toy_corpus();
    const SmallModel model = train(corpus);
    const auto p = model.predict("void check() { heartbeatTimer.reset(); }");
    EXPECT_EQ(p.label, TacticLabel::heartbeat);
    EXPECT_GT(p.confidence, 0.5);
    for (const auto& ex : corpus) EXPECT_EQ(model.predict(ex.code).label, ex.label) << ex.id;
}

TEST(Train, DeterministicForSeed) {
    const auto corpus = generate_synthetic({8, 0.1, 4});
    TrainingConfig config;
    config.batch_size = 7;
    config.epochs = 30;
    const SmallModel a = train(corpus, config);
    const SmallModel b = train(corpus, config);
    EXPECT_EQ(a.params(), b.params());
    config.seed = 43;
    EXPECT_NE(train(corpus, config).params(), a.params());
}

TEST(Train, Preconditions) {
    EXPECT_THROW(train({}), UsageError);
    std::vector<LabeledExample> one_label{{"a", "int x;", TacticLabel::audit}, {"b", "int y;", TacticLabel::audit}};
    EXPECT_THROW(train(one_label), UsageError);
    TrainingConfig bad;
    bad.epochs = 0;
    EXPECT_THROW(train(toy_corpus(), bad), UsageError);
}

TEST(Predict, OutOfVocabularyGivesValidDistribution) {
    const SmallModel model = train(toy_corpus());
    const auto p = model.predict("zzz qqq");
    double total = 0.0;
    for (double s : p.scores) total += s;
    EXPECT_NEAR(total, 1.0, 1e-9);
    const auto empty = model.predict("");
    EXPECT_NEAR(empty.confidence, *std::max_element(empty.scores.begin(), empty.scores.end()), 0.0);
}

TEST(Features, TfIdfMatchesHandComputation) {
    // Docs: {a a b}, {b c}. N = 2; df(a)=1, df(b)=2, df(c)=1.
    const Vocabulary vocab = Vocabulary::fit({TokenSequence{{"a", "a", "b"}}, TokenSequence{{"b", "c"}}});
    ASSERT_EQ(vocab.terms(), (std::vector<std::string>{"a", "b", "c"}));
    const double idf_a = std::log(3.0 / 2.0) + 1.0;
    const double idf_b = 1.0;
    EXPECT_DOUBLE_EQ(vocab.idf(0), idf_a);
    EXPECT_DOUBLE_EQ(vocab.idf(1), idf_b);
    const auto x = vocab.transform(TokenSequence{{"a", "a", "b", "zzz"}});
    const double wa = 2.0 * idf_a;
    const double wb = 1.0 * idf_b;
    const double norm = std::sqrt(wa * wa + wb * wb);
    ASSERT_EQ(x.entries().size(), 2u);
    EXPECT_NEAR(x.entries()[0].second, wa / norm, 1e-15);
    EXPECT_NEAR(x.entries()[1].second, wb / norm, 1e-15);
    EXPECT_NEAR(x.norm(), 1.0, 1e-15);
}
