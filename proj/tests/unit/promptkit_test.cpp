#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "prmt4td/promptkit.hpp"
#include "prmt4td/synthetic.hpp"
#include "../support/prompt_fixture.hpp"

using namespace prmt4td;
namespace fs = std::filesystem;

namespace {

using namespace prmt4td::fixture;

std::string golden_path(PromptVariant v) { return fixture::golden_path(PRMT4TD_TEST_DATA, v); }

bool contains(const std::string& text, std::string_view needle) { return text.find(needle) != std::string::npos; }

}  // namespace

// Set PRMT4TD_UPDATE_GOLDEN=1 to regenerate the fixtures after an intended change.
TEST(PromptGolden, EveryVariantMatchesFixture) {
    const bool update = std::getenv("PRMT4TD_UPDATE_GOLDEN") != nullptr;
    for (auto v : kAllVariants) {
        const std::string rendered = render(v).rendered;
        if (update) std::ofstream(golden_path(v), std::ios::binary) << rendered;
        std::ifstream in(golden_path(v), std::ios::binary);
        ASSERT_TRUE(in) << "missing fixture " << golden_path(v);
        const std::string expected{std::istreambuf_iterator<char>(in), {}};
        EXPECT_EQ(rendered, expected) << to_string(v);
    }
}

TEST(PromptGolden, BasicPromptStartsWithFixedWording) {
    EXPECT_EQ(render(PromptVariant::p_bas).rendered.rfind("Please analyze the input code snippet", 0), 0u);
    EXPECT_TRUE(contains(render(PromptVariant::p_abas).rendered, "Step3: Please give your reasoning."));
    EXPECT_TRUE(contains(render(PromptVariant::p_bas).rendered, "acquire()"));
}

TEST(PromptAblation, EachVariantLacksExactlyItsSection) {
    const auto full = render(PromptVariant::full).rendered;
    for (auto s : {sentinel::kDemonstrations, sentinel::kReasoning, sentinel::kInput, sentinel::kOutputFormat,
                   sentinel::kModelPrediction, sentinel::kFinalLabel}) {
        EXPECT_TRUE(contains(full, s)) << s;
    }

    const auto no_sm = render(PromptVariant::no_small_model).rendered;
    EXPECT_FALSE(contains(no_sm, sentinel::kModelPrediction));
    EXPECT_FALSE(contains(no_sm, sentinel::kConfidence));
    EXPECT_TRUE(contains(no_sm, sentinel::kDemonstrations));
    EXPECT_TRUE(contains(no_sm, sentinel::kReasoning));

    const auto no_cot = render(PromptVariant::no_cot).rendered;
    EXPECT_FALSE(contains(no_cot, sentinel::kReasoning));
    EXPECT_FALSE(contains(no_cot, "Step 4"));
    EXPECT_TRUE(contains(no_cot, sentinel::kDemonstrations));
    EXPECT_TRUE(contains(no_cot, sentinel::kModelPrediction));

    const auto no_demos = render(PromptVariant::no_demos).rendered;
    EXPECT_FALSE(contains(no_demos, sentinel::kDemonstrations));
    EXPECT_FALSE(contains(no_demos, "Demonstration 1"));
    EXPECT_TRUE(contains(no_demos, sentinel::kReasoning));
    EXPECT_TRUE(contains(no_demos, sentinel::kModelPrediction));

    for (auto v : kAllVariants) {
        if (v == PromptVariant::p_bas || v == PromptVariant::p_abas) continue;
        EXPECT_TRUE(contains(render(v).rendered, sentinel::kFinalLabel)) << to_string(v);
    }
}

TEST(PromptAssembly, RejectsPartsThatContradictTheVariant) {
    PromptParts with_demos;
    with_demos.input_code = "x";
    with_demos.demonstrations = guided_demos();
    with_demos.cot = build_cot(kSet);
    with_demos.input_prediction = fixed_prediction(TacticLabel::audit, 0.5);
    EXPECT_THROW(assemble_prompt(with_demos, PromptVariant::no_demos), UsageError);
    EXPECT_THROW(assemble_prompt(with_demos, PromptVariant::no_cot), UsageError);
    EXPECT_THROW(assemble_prompt(with_demos, PromptVariant::no_small_model), UsageError);
    EXPECT_THROW(assemble_prompt(with_demos, PromptVariant::p_bas), UsageError);
    PromptParts no_prediction = with_demos;
    no_prediction.input_prediction.reset();
    EXPECT_THROW(assemble_prompt(no_prediction, PromptVariant::full), UsageError);
}

TEST(Cot, StepsListTheSetAndPointOutsideIt) {
    const auto cot = build_cot(kSet);
    EXPECT_EQ(cot.prediction_set_render, "'pooling', 'scheduler'");
    EXPECT_TRUE(contains(cot.steps[2], "{'pooling', 'scheduler'}"));
    EXPECT_TRUE(contains(cot.steps[3], "check if the label belongs to a category outside of the prediction set"));
    EXPECT_THROW(build_cot(std::span<const TacticLabel>{}), UsageError);
}

TEST(Demonstrations, OnePerSetLabelInSetOrder) {
    const auto data = generate_synthetic({12, 0.0, 3});
    TrainingConfig tc;
    tc.epochs = 60;
    const SmallModel model = train(data, tc);
    const CandidatePool pool(data, [&](std::string_view c) { return model.features(c); });
    PredictionSet pset;
    pset.labels = {TacticLabel::heartbeat, TacticLabel::audit};
    pset.nonconformity = {0.1, 0.2};
    const auto sel = select_demonstrations(data[2].code, pool, pset, model, SimilarityWeights{});
    ASSERT_EQ(sel.demonstrations.size(), 2u);
    EXPECT_EQ(sel.demonstrations[0].true_label, TacticLabel::heartbeat);
    EXPECT_EQ(sel.demonstrations[1].true_label, TacticLabel::audit);
    for (const auto& d : sel.demonstrations) ASSERT_TRUE(d.small_model_prediction.has_value());
    // The query itself is in the pool, so it must be its own best match.
    EXPECT_EQ(sel.demonstrations[0].example_id, data[2].id);

    const auto k2 = select_demonstrations(data[2].code, pool, pset, model, SimilarityWeights{}, 2);
    EXPECT_EQ(k2.demonstrations.size(), 4u);
}

TEST(Demonstrations, MissingLabelIsAWarning) {
    const auto data = generate_synthetic({4, 0.0, 3});
    std::vector<LabeledExample> no_pooling;
    for (const auto& ex : data) {
        if (ex.label != TacticLabel::pooling) no_pooling.push_back(ex);
    }
    const SmallModel model = train(data);
    const CandidatePool pool(no_pooling, [&](std::string_view c) { return model.features(c); });
    PredictionSet pset;
    pset.labels = {TacticLabel::pooling, TacticLabel::audit};
    const auto sel = select_demonstrations(data[0].code, pool, pset, model, SimilarityWeights{});
    EXPECT_EQ(sel.demonstrations.size(), 1u);
    EXPECT_EQ(sel.warnings.size(), 1u);
}

TEST(Demonstrations, UnguidedAndRandomSelections) {
    const auto data = generate_synthetic({6, 0.0, 5});
    const SmallModel model = train(data);
    const CandidatePool pool(data, [&](std::string_view c) { return model.features(c); });
    const auto query = pool.profile(data[0].code);

    const auto unguided = select_demonstrations_unguided(query, pool, SimilarityWeights{});
    ASSERT_EQ(unguided.demonstrations.size(), kLabelCount);
    std::set<TacticLabel> labels;
    for (const auto& d : unguided.demonstrations) {
        EXPECT_FALSE(d.small_model_prediction.has_value());
        labels.insert(d.true_label);
    }
    EXPECT_EQ(labels.size(), kLabelCount);
    for (std::size_t i = 1; i < unguided.demonstrations.size(); ++i) {
        EXPECT_GE(unguided.demonstrations[i - 1].similarity.combined, unguided.demonstrations[i].similarity.combined);
    }

    std::mt19937_64 r1(4), r2(4);
    const auto a = select_random_demonstrations(query, pool, 3, model, SimilarityWeights{}, r1);
    const auto b = select_random_demonstrations(query, pool, 3, model, SimilarityWeights{}, r2);
    ASSERT_EQ(a.demonstrations.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(a.demonstrations[i].example_id, b.demonstrations[i].example_id);
}
