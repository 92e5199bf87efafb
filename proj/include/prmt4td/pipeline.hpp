#pragma once

#include <cstdint>
#include <exception>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "prmt4td/classifier.hpp"
#include "prmt4td/conformal.hpp"
#include "prmt4td/corpus.hpp"
#include "prmt4td/error.hpp"
#include "prmt4td/llm_client.hpp"
#include "prmt4td/promptkit.hpp"
#include "prmt4td/random.hpp"
#include "prmt4td/similarity.hpp"

namespace prmt4td {

/// A pipeline stage failed for one input. Carries the exit code class of the
/// underlying error.
class StageError : public std::runtime_error {
public:
    StageError(std::string example_id, std::string stage, const std::string& cause, ExitCode code)
        : std::runtime_error("stage '" + stage + "' failed for example '" + example_id + "': " + cause),
          example_id_(std::move(example_id)), stage_(std::move(stage)), code_(code) {}

    const std::string& example_id() const noexcept { return example_id_; }
    const std::string& stage() const noexcept { return stage_; }
    ExitCode code() const noexcept { return code_; }

private:
    std::string example_id_;
    std::string stage_;
    ExitCode code_;
};

/// Exit code class for any exception thrown by the library.
inline ExitCode classify(const std::exception& e) noexcept {
    if (const auto* s = dynamic_cast<const StageError*>(&e)) return s->code();
    if (dynamic_cast<const UsageError*>(&e)) return ExitCode::usage;
    if (dynamic_cast<const BackendError*>(&e)) return ExitCode::backend;
    return ExitCode::data;
}

/// Runs `fn`, rethrowing any failure as a StageError naming `id` and `stage`.
template <typename Fn>
auto run_stage(const std::string& id, const char* stage, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(id, stage, e.what(), classify(e));
    }
}

struct PipelineSettings {
    PromptVariant variant = PromptVariant::full;
    SimilarityWeights weights;
    std::size_t per_label = 1;
    std::uint64_t seed = 42;
    std::string model_name = "deepseek-chat";
    double temperature = 0.0;
    int max_tokens = 1024;
    std::size_t concurrency = 4;
};

struct PreparedPrompt {
    std::string input_id;
    PromptBundle bundle;
    bool fallback_used = false;
    CompletionRequest request;
    std::string request_hash;
};

/// Everything needed to turn a snippet into a prompt: the small model, its
/// calibrator and the demonstration pool (embedded with the model's tf-idf).
class Detector {
public:
    Detector(std::shared_ptr<const SmallModel> model, Calibrator calibrator, std::vector<LabeledExample> pool)
        : model_(std::move(model)), calibrator_(std::move(calibrator)),
          pool_(std::move(pool), [m = model_](std::string_view code) { return m->features(code); }) {}

    const SmallModel& model() const noexcept { return *model_; }
    const Calibrator& calibrator() const noexcept { return calibrator_; }
    const CandidatePool& pool() const noexcept { return pool_; }

    /// predict -> predict_set -> build_cot -> select_demonstrations ->
    /// assemble_prompt for one input.
    PreparedPrompt prepare(const LabeledExample& input, const PipelineSettings& settings) const {
        const std::string& id = input.id;
        const PromptVariant variant = settings.variant;
        PreparedPrompt out;
        out.input_id = id;
        PromptParts parts;
        parts.input_code = input.code;

        if (variant != PromptVariant::p_bas && variant != PromptVariant::p_abas) {
            const Prediction prediction = run_stage(id, "predict", [&] { return model_->predict(input.code); });
            const PredictionSet pset =
                run_stage(id, "predict_set", [&] { return predict_set(calibrator_, prediction); });
            out.fallback_used = pset.fallback_used;
            const bool small_model = variant != PromptVariant::no_small_model;

            if (variant != PromptVariant::no_cot) {
                parts.cot = run_stage(id, "build_cot", [&] {
                    return small_model ? build_cot(pset) : build_cot(std::span<const TacticLabel>(kAllLabels));
                });
            }
            if (variant != PromptVariant::no_demos) {
                parts.demonstrations = run_stage(id, "select_demonstrations", [&] {
                    const CodeProfile query = pool_.profile(input.code);
                    switch (variant) {
                        case PromptVariant::no_small_model:
                            return select_demonstrations_unguided(query, pool_, settings.weights).demonstrations;
                        case PromptVariant::random_demos: {
                            std::mt19937_64 rng(derive_seed(settings.seed, "random_demos/" + id));
                            return select_random_demonstrations(query, pool_, pset.size() * settings.per_label,
                                                                *model_, settings.weights, rng)
                                .demonstrations;
                        }
                        default:
                            return select_demonstrations(query, pool_, pset, *model_, settings.weights,
                                                         settings.per_label)
                                .demonstrations;
                    }
                });
            }
            if (small_model) parts.input_prediction = prediction;
        }

        out.bundle = run_stage(id, "assemble_prompt", [&] { return assemble_prompt(std::move(parts), variant); });
        out.request = make_request(out.bundle.rendered, settings.model_name, settings.temperature, settings.max_tokens);
        out.request_hash = request_hash(out.request);
        return out;
    }

    /// Full pipeline over `inputs`; results in input order. The first failing
    /// input (in input order) aborts with a StageError.
    std::vector<DetectionResult> detect(std::span<const LabeledExample> inputs, CompletionBackend& backend,
                                        const PipelineSettings& settings) const {
        std::vector<PreparedPrompt> prepared;
        prepared.reserve(inputs.size());
        for (const auto& ex : inputs) prepared.push_back(prepare(ex, settings));

        std::vector<CompletionRequest> requests;
        requests.reserve(prepared.size());
        for (const auto& p : prepared) requests.push_back(p.request);
        auto outcomes = complete_all(backend, requests, settings.concurrency);

        std::vector<DetectionResult> results;
        results.reserve(prepared.size());
        for (std::size_t i = 0; i < prepared.size(); ++i) {
            const auto& p = prepared[i];
            run_stage(p.input_id, "complete", [&] {
                if (outcomes[i].error) std::rethrow_exception(outcomes[i].error);
                return 0;
            });
            const ParsedLabel parsed = parse_label(outcomes[i].response);
            DetectionResult r;
            r.input_id = p.input_id;
            r.parsed_label = parsed.label;
            r.rationale = parsed.rationale;
            r.raw_response = std::move(outcomes[i].response);
            r.prompt_variant = settings.variant;
            r.fallback_used = p.fallback_used;
            r.prompt_hash = p.request_hash;
            r.latency_ms = outcomes[i].latency_ms;
            results.push_back(std::move(r));
        }
        return results;
    }

private:
    std::shared_ptr<const SmallModel> model_;
    Calibrator calibrator_;
    CandidatePool pool_;
};

}  // namespace prmt4td
