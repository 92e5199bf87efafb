#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prmt4td/classifier.hpp"
#include "prmt4td/conformal.hpp"
#include "prmt4td/corpus.hpp"
#include "prmt4td/error.hpp"
#include "prmt4td/labels.hpp"
#include "prmt4td/random.hpp"
#include "prmt4td/similarity.hpp"

namespace prmt4td {

enum class PromptVariant {
    full,
    no_small_model,
    no_cot,
    no_demos,
    random_demos,
    p_bas,
    p_abas,
};

inline constexpr std::array<PromptVariant, 7> kAllVariants{
    PromptVariant::full,         PromptVariant::no_small_model, PromptVariant::no_cot, PromptVariant::no_demos,
    PromptVariant::random_demos, PromptVariant::p_bas,          PromptVariant::p_abas,
};

/// The five variants of the ablation study, in report column order.
inline constexpr std::array<PromptVariant, 5> kAblationVariants{
    PromptVariant::no_small_model, PromptVariant::no_cot, PromptVariant::no_demos,
    PromptVariant::random_demos,   PromptVariant::full,
};

constexpr std::string_view to_string(PromptVariant v) noexcept {
    switch (v) {
    case PromptVariant::full: return "full";
    case PromptVariant::no_small_model: return "no_small_model";
    case PromptVariant::no_cot: return "no_cot";
    case PromptVariant::no_demos: return "no_demos";
    case PromptVariant::random_demos: return "random_demos";
    case PromptVariant::p_bas: return "p_bas";
    case PromptVariant::p_abas: return "p_abas";
    }
    return "full";
}

/// Column headings used in ablation reports.
constexpr std::string_view ablation_heading(PromptVariant v) noexcept {
    switch (v) {
    case PromptVariant::no_small_model: return "w/o Small Model";
    case PromptVariant::no_cot: return "w/o CoT";
    case PromptVariant::no_demos: return "w/o Demonstration";
    case PromptVariant::random_demos: return "Random Demonstration";
    case PromptVariant::full: return "Full";
    case PromptVariant::p_bas: return "P_Bas";
    case PromptVariant::p_abas: return "P_ABas";
    }
    return "";
}

inline std::optional<PromptVariant> try_parse_variant(std::string_view text) {
    for (auto v : kAllVariants) {
        if (to_string(v) == text) return v;
    }
    return std::nullopt;
}

/// Section markers. Ablation tests check their absence.
namespace sentinel {
inline constexpr std::string_view kDemonstrations = "### Demonstrations";
inline constexpr std::string_view kReasoning = "### Reasoning steps";
inline constexpr std::string_view kInput = "### Input code";
inline constexpr std::string_view kOutputFormat = "### Output format";
inline constexpr std::string_view kModelPrediction = "Small model prediction:";
inline constexpr std::string_view kConfidence = "confidence";
inline constexpr std::string_view kFinalLabel = "Final label:";
}  // namespace sentinel

namespace detail {

/// "'a', 'b', 'c'"
inline std::string quoted_label_list(std::span<const TacticLabel> labels) {
    std::string out;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (i != 0) out += ", ";
        out += '\'';
        out += to_string(labels[i]);
        out += '\'';
    }
    return out;
}

inline std::string format_confidence(double c) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", c);
    return buf;
}

inline std::string code_block(std::string_view code) {
    std::string out = "```java\n";
    out += code;
    if (!code.empty() && code.back() != '\n') out += '\n';
    out += "```\n";
    return out;
}

}  // namespace detail

// ---- chain of thought -------------------------------------------------------

struct CotPrompt {
    std::array<std::string, 5> steps;
    std::string prediction_set_render;
    std::vector<TacticLabel> candidates;

    std::string render() const {
        std::string out;
        out += "Candidate labels (prediction set): {" + prediction_set_render + "}\n";
        for (std::size_t i = 0; i < steps.size(); ++i) {
            out += "Step " + std::to_string(i + 1) + " - " + steps[i] + "\n";
        }
        return out;
    }
};

/// Instantiates the five-step reasoning template with the candidate labels.
inline CotPrompt build_cot(std::span<const TacticLabel> candidates) {
    if (candidates.empty()) throw UsageError("cannot build reasoning steps for an empty prediction set");
    CotPrompt cot;
    cot.candidates.assign(candidates.begin(), candidates.end());
    cot.prediction_set_render = detail::quoted_label_list(candidates);
    const std::string set = "{" + cot.prediction_set_render + "}";
    cot.steps[0] =
        "Semantic understanding: Explain what the input code snippet does and what it is for.";
    cot.steps[1] =
        "Structural analysis: Point out the key terms, types, fields, and control structures that could "
        "implement an architectural tactic.";
    cot.steps[2] =
        "Classification judgment: Using steps 1 and 2, decide whether the code snippet is related to one "
        "of the candidate architectural tactics " + set + ".";
    cot.steps[3] =
        "Label identification: If it is related, pick its label from the prediction set " + set +
        ". If it is not related, check if the label belongs to a category outside of the prediction set.";
    cot.steps[4] =
        "CoT construction: Chain the previous steps into one argument that states whether the snippet "
        "implements an architectural tactic and which label it carries.";
    return cot;
}

inline CotPrompt build_cot(const PredictionSet& pset) { return build_cot(pset.labels); }

// ---- demonstrations ---------------------------------------------------------

struct Demonstration {
    std::string example_id;
    std::string code;
    std::optional<Prediction> small_model_prediction;  ///< absent when the small model is ablated
    TacticLabel true_label = TacticLabel::unrelated;
    SimilarityBreakdown similarity;
};

struct DemonstrationSelection {
    std::vector<Demonstration> demonstrations;
    std::vector<std::string> warnings;
};

inline Demonstration make_demonstration(const RankedCandidate& candidate, const SmallModel* model) {
    Demonstration demo;
    demo.example_id = candidate.example->id;
    demo.code = candidate.example->code;
    demo.true_label = candidate.example->label;
    demo.similarity = candidate.similarity;
    if (model != nullptr) demo.small_model_prediction = model->predict(demo.code);
    return demo;
}

/// For each label of the prediction set, in set order, the `per_label` most
/// similar pool examples of that label, annotated with the small model's
/// prediction. Labels without pool examples are skipped with a warning.
inline DemonstrationSelection select_demonstrations(const CodeProfile& query, const CandidatePool& pool,
                                                    const PredictionSet& pset, const SmallModel& model,
                                                    const SimilarityWeights& weights, std::size_t per_label = 1) {
    if (pool.empty()) throw UsageError("demonstration pool is empty");
    DemonstrationSelection out;
    for (auto label : pset.labels) {
        const auto ranked = pool.rank(query, weights, [label](const LabeledExample& ex) { return ex.label == label; });
        if (ranked.empty()) {
            out.warnings.push_back("no pool examples for label '" + std::string(to_string(label)) + "'");
            continue;
        }
        for (std::size_t k = 0; k < std::min(per_label, ranked.size()); ++k) {
            out.demonstrations.push_back(make_demonstration(ranked[k], &model));
        }
    }
    return out;
}

inline DemonstrationSelection select_demonstrations(std::string_view query, const CandidatePool& pool,
                                                    const PredictionSet& pset, const SmallModel& model,
                                                    const SimilarityWeights& weights, std::size_t per_label = 1) {
    return select_demonstrations(pool.profile(query), pool, pset, model, weights, per_label);
}

/// Selection without the small model: the most similar example of every
/// label in the universe, ordered by descending similarity. No predictions.
inline DemonstrationSelection select_demonstrations_unguided(const CodeProfile& query, const CandidatePool& pool,
                                                             const SimilarityWeights& weights) {
    if (pool.empty()) throw UsageError("demonstration pool is empty");
    DemonstrationSelection out;
    std::array<bool, kLabelCount> taken{};
    for (const auto& candidate : pool.rank(query, weights)) {
        auto& seen = taken[index_of(candidate.example->label)];
        if (seen) continue;
        seen = true;
        out.demonstrations.push_back(make_demonstration(candidate, nullptr));
    }
    return out;
}

/// `count` pool examples drawn uniformly without replacement, annotated with
/// the small model's predictions. Deterministic for a fixed rng state.
inline DemonstrationSelection select_random_demonstrations(const CodeProfile& query, const CandidatePool& pool,
                                                           std::size_t count, const SmallModel& model,
                                                           const SimilarityWeights& weights, std::mt19937_64& rng) {
    if (pool.empty()) throw UsageError("demonstration pool is empty");
    std::vector<std::size_t> order(pool.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    portable_shuffle(order, rng);
    order.resize(std::min(count, order.size()));
    DemonstrationSelection out;
    const auto ranked = pool.rank(query, weights);
    for (std::size_t idx : order) {
        const LabeledExample* ex = &pool.examples()[idx];
        for (const auto& r : ranked) {
            if (r.example == ex) {
                out.demonstrations.push_back(make_demonstration(r, &model));
                break;
            }
        }
    }
    return out;
}

// ---- baseline prompts ------------------------------------------------------

inline constexpr std::string_view kCodePlaceholder = "[Code snippet]";

inline constexpr std::string_view kBasicPromptTemplate =
    "Please analyze the input code snippet, and determine the most appropriate architectural tactic label "
    "from {'audit', 'authenticate', 'heartbeat', 'pooling', 'scheduler', 'unrelated'}, providing your "
    "reasons. [Code snippet]";

inline constexpr std::string_view kAugmentedBasicPromptTemplate =
    "Step1: Please understand the behavior and purpose of the input code snippet.\n"
    "Step2: Determine the unique true label of this code from {'audit', 'authenticate', 'heartbeat', "
    "'pooling', 'scheduler', 'unrelated'}.\n"
    "Step3: Please give your reasoning. [Code snippet]";

namespace detail {

inline std::string substitute_code(std::string_view tmpl, std::string_view code) {
    const auto at = tmpl.find(kCodePlaceholder);
    std::string out(tmpl.substr(0, at));
    out += "\n\n";
    out += code;
    if (!code.empty() && code.back() != '\n') out += '\n';
    out += tmpl.substr(at + kCodePlaceholder.size());
    return out;
}

}  // namespace detail

struct BaselinePrompts {
    std::string p_bas;
    std::string p_abas;
};

/// The basic and augmented-basic prompts with the snippet in place of the
/// code placeholder.
inline BaselinePrompts baseline_prompts(std::string_view code) {
    return {detail::substitute_code(kBasicPromptTemplate, code),
            detail::substitute_code(kAugmentedBasicPromptTemplate, code)};
}

// ---- assembly --------------------------------------------------------------

/// Inputs to prompt assembly; which ones must be present depends on the variant.
struct PromptParts {
    std::vector<Demonstration> demonstrations;
    std::optional<CotPrompt> cot;
    std::string input_code;
    std::optional<Prediction> input_prediction;
};

struct PromptBundle {
    std::string task_description;
    std::vector<Demonstration> demonstrations;
    std::optional<CotPrompt> cot;
    std::string input_code;
    std::optional<Prediction> input_prediction;
    PromptVariant variant = PromptVariant::full;
    std::string rendered;
};

namespace detail {

inline bool uses_small_model(PromptVariant v) {
    return v == PromptVariant::full || v == PromptVariant::no_cot || v == PromptVariant::no_demos ||
           v == PromptVariant::random_demos;
}

inline void check_parts(const PromptParts& parts, PromptVariant variant) {
    auto mismatch = [&](const char* what) {
        throw UsageError(std::string("prompt variant '") + std::string(to_string(variant)) + "': " + what);
    };
    const bool baseline = variant == PromptVariant::p_bas || variant == PromptVariant::p_abas;
    if (baseline) {
        if (!parts.demonstrations.empty()) mismatch("baseline prompts take no demonstrations");
        if (parts.cot) mismatch("baseline prompts take no reasoning steps");
        if (parts.input_prediction) mismatch("baseline prompts take no small-model prediction");
        return;
    }
    if (variant == PromptVariant::no_cot && parts.cot) mismatch("reasoning steps must be absent");
    if (variant != PromptVariant::no_cot && !parts.cot) mismatch("reasoning steps are required");
    if (variant == PromptVariant::no_demos && !parts.demonstrations.empty()) mismatch("demonstrations must be empty");
    if (uses_small_model(variant)) {
        if (!parts.input_prediction) mismatch("small-model prediction for the input is required");
        for (const auto& d : parts.demonstrations) {
            if (!d.small_model_prediction) mismatch("every demonstration needs a small-model prediction");
        }
    } else {
        if (parts.input_prediction) mismatch("small-model prediction must be absent");
        for (const auto& d : parts.demonstrations) {
            if (d.small_model_prediction) mismatch("demonstrations must not carry small-model predictions");
        }
    }
}

inline std::string prediction_line(const Prediction& p) {
    return std::string(sentinel::kModelPrediction) + " " + std::string(to_string(p.label)) + " (" +
           std::string(sentinel::kConfidence) + ": " + format_confidence(p.confidence) + ")\n";
}

inline std::string task_description(PromptVariant variant) {
    std::string text =
        "You are an expert in software architecture. Your task is to detect which architectural tactic, if "
        "any, the input Java code snippet implements. Possible labels: " +
        quoted_label_list(kAllLabels) +
        ". Use 'audit' for code that keeps a trail of user or system actions, 'authenticate' for code that "
        "checks who a caller is, 'heartbeat' for periodic liveness signals between components, 'pooling' for "
        "reuse of a bounded set of expensive resources, 'scheduler' for code that decides when and in what "
        "order tasks run, and 'unrelated' when none of these applies.";
    if (uses_small_model(variant)) {
        text +=
            " A small model trained on labeled tactic code has already classified each snippet; its predicted "
            "label and confidence are given as hints. Follow the hint when your own analysis agrees with it, "
            "and override it when it does not.";
    }
    return text + "\n";
}

inline std::string render_full(const PromptBundle& b) {
    std::string out = "### Task\n" + b.task_description;
    if (!b.demonstrations.empty()) {
        out += "\n" + std::string(sentinel::kDemonstrations) + "\n";
        for (std::size_t i = 0; i < b.demonstrations.size(); ++i) {
            const auto& d = b.demonstrations[i];
            out += "\nDemonstration " + std::to_string(i + 1) + ":\n";
            out += code_block(d.code);
            if (d.small_model_prediction) out += prediction_line(*d.small_model_prediction);
            out += "True label: " + std::string(to_string(d.true_label)) + "\n";
        }
    }
    if (b.cot) {
        out += "\n" + std::string(sentinel::kReasoning) + "\n";
        out += b.cot->render();
    }
    out += "\n" + std::string(sentinel::kInput) + "\n";
    out += code_block(b.input_code);
    if (b.input_prediction) out += prediction_line(*b.input_prediction);
    out += "\n" + std::string(sentinel::kOutputFormat) + "\n";
    out += "Reply with a line of the form `" + std::string(sentinel::kFinalLabel) +
           " <label>`, where <label> is exactly one of " + quoted_label_list(kAllLabels) +
           ", followed by one paragraph that explains your reasoning in terms a developer can check against "
           "the code.\n";
    return out;
}

}  // namespace detail

/// Renders the final prompt. Throws UsageError if the parts do not match the
/// variant (e.g. demonstrations passed to no_demos).
inline PromptBundle assemble_prompt(PromptParts parts, PromptVariant variant) {
    detail::check_parts(parts, variant);
    PromptBundle b;
    b.variant = variant;
    b.demonstrations = std::move(parts.demonstrations);
    b.cot = std::move(parts.cot);
    b.input_code = std::move(parts.input_code);
    b.input_prediction = parts.input_prediction;
    if (variant == PromptVariant::p_bas || variant == PromptVariant::p_abas) {
        const auto baselines = baseline_prompts(b.input_code);
        b.rendered = variant == PromptVariant::p_bas ? baselines.p_bas : baselines.p_abas;
        return b;
    }
    b.task_description = detail::task_description(variant);
    b.rendered = detail::render_full(b);
    return b;
}

}  // namespace prmt4td
