#include <gtest/gtest.h>

#include "prmt4td/eval.hpp"
#include "prmt4td/pipeline.hpp"
#include "prmt4td/synthetic.hpp"

using namespace prmt4td;

namespace {

struct World {
    std::vector<LabeledExample> train_set, calib_set, test_set;
    std::shared_ptr<const SmallModel> model;
    std::unique_ptr<Detector> detector;
};

const World& world() {
    static const World w = [] {
        World w;
        const Corpus corpus = split_corpus(Corpus(generate_synthetic({20, 0.1, 7})), 0.6, 0.2, 42);
        w.train_set = corpus.in_split(Split::train);
        w.calib_set = corpus.in_split(Split::calibration);
        w.test_set = corpus.in_split(Split::test);
        TrainingConfig tc;
        tc.epochs = 150;
        w.model = std::make_shared<SmallModel>(train(w.train_set, tc));
        w.detector = std::make_unique<Detector>(w.model, calibrate(*w.model, w.calib_set, 0.05), w.train_set);
        return w;
    }();
    return w;
}

class FailingBackend : public CompletionBackend {
public:
    std::string complete(const CompletionRequest&) override { throw AuthenticationError("HTTP 401"); }
};

}  // namespace

TEST(Pipeline, EchoBackendReproducesSmallModelScores) {
    const auto& w = world();
    EchoBackend echo;
    const auto results = w.detector->detect(w.test_set, echo, {});
    ASSERT_EQ(results.size(), w.test_set.size());
    for (std::size_t i = 0; i < results.size(); ++i) {
        EXPECT_EQ(results[i].input_id, w.test_set[i].id);
        EXPECT_EQ(results[i].parsed_label, w.model->predict(w.test_set[i].code).label);
    }
    const auto pipeline = score(results, w.test_set);
    const auto baseline = score(small_model_results(*w.model, w.test_set), w.test_set);
    EXPECT_EQ(pipeline, baseline);
    EXPECT_EQ(macro_f1(pipeline), macro_f1(baseline));
}

TEST(Pipeline, FailureNamesExampleAndStage) {
    const auto& w = world();
    FailingBackend failing;
    try {
        w.detector->detect(w.test_set, failing, {});
        FAIL() << "expected StageError";
    } catch (const StageError& e) {
        EXPECT_EQ(e.example_id(), w.test_set.front().id);
        EXPECT_EQ(e.stage(), "complete");
        EXPECT_EQ(e.code(), ExitCode::backend);
        EXPECT_EQ(classify(e), ExitCode::backend);
    }
}

TEST(Pipeline, RunStageWrapsAndClassifies) {
    try {
        run_stage("x7", "predict", []() -> int { throw CorruptFileError("truncated"); });
        FAIL();
    } catch (const StageError& e) {
        EXPECT_EQ(e.code(), ExitCode::data);
        const std::string what = e.what();
        EXPECT_NE(what.find("x7"), std::string::npos);
        EXPECT_NE(what.find("predict"), std::string::npos);
        EXPECT_NE(what.find("truncated"), std::string::npos);
    }
    EXPECT_EQ(classify(UsageError("u")), ExitCode::usage);
}

TEST(Pipeline, RandomDemosAreSeeded) {
    const auto& w = world();
    PipelineSettings s;
    s.variant = PromptVariant::random_demos;
    const auto& input = w.test_set.front();
    const auto a = w.detector->prepare(input, s);
    const auto b = w.detector->prepare(input, s);
    EXPECT_EQ(a.bundle.rendered, b.bundle.rendered);
    EXPECT_EQ(a.request_hash, b.request_hash);
    bool any_differs = false;
    for (std::uint64_t seed = 1; seed < 6 && !any_differs; ++seed) {
        s.seed = seed;
        any_differs = w.detector->prepare(input, s).bundle.rendered != a.bundle.rendered;
    }
    EXPECT_TRUE(any_differs);
}

TEST(Pipeline, VariantsShapeThePrompt) {
    const auto& w = world();
    const auto& input = w.test_set.front();
    PipelineSettings s;
    for (auto v : kAllVariants) {
        s.variant = v;
        const auto p = w.detector->prepare(input, s);
        const auto& text = p.bundle.rendered;
        EXPECT_NE(text.find(input.code), std::string::npos) << to_string(v);
        const bool demos = text.find(sentinel::kDemonstrations) != std::string::npos;
        EXPECT_EQ(demos, v != PromptVariant::no_demos && v != PromptVariant::p_bas && v != PromptVariant::p_abas)
            << to_string(v);
        const bool hint = text.find(sentinel::kModelPrediction) != std::string::npos;
        EXPECT_EQ(hint, v == PromptVariant::full || v == PromptVariant::no_cot || v == PromptVariant::no_demos ||
                            v == PromptVariant::random_demos)
            << to_string(v);
        EXPECT_EQ(p.request_hash, request_hash(p.request));
    }
}

TEST(Pipeline, AblationCoversFiveVariantsOnOneTestSet) {
    const auto& w = world();
    EchoBackend echo;
    const auto report = run_ablation(*w.detector, w.test_set, echo, {});
    ASSERT_EQ(report.variants.size(), 5u);
    for (std::size_t i = 0; i < 5; ++i) {
        EXPECT_EQ(report.variants[i].variant, kAblationVariants[i]);
        ASSERT_EQ(report.variants[i].results.size(), w.test_set.size());
        for (std::size_t k = 0; k < w.test_set.size(); ++k) {
            EXPECT_EQ(report.variants[i].results[k].input_id, w.test_set[k].id);
        }
    }
    const auto json = to_json(report);
    EXPECT_EQ(json.at("variants").size(), 5u);
    EXPECT_NE(format_ablation_table(report).find("Avg"), std::string::npos);
    EXPECT_THROW(run_ablation(*w.detector, {}, echo, {}), UsageError);
}
