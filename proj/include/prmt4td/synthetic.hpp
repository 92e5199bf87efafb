#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

#include "prmt4td/corpus.hpp"
#include "prmt4td/error.hpp"
#include "prmt4td/labels.hpp"
#include "prmt4td/random.hpp"

namespace prmt4td {

struct SyntheticSpec {
    std::size_t per_label = 20;
    double label_noise = 0.0;  ///< probability that a label is replaced by a different one
    std::uint64_t seed = 7;
};

namespace detail {

// Marker identifiers: each label's snippets draw from its own list, so the
// classes are separable by token features until noise is added.
inline constexpr std::array<std::array<std::string_view, 6>, kLabelCount> kMarkers{{
    {"auditTrail", "logEntry", "recordAction", "auditEvent", "changeHistory", "actorId"},
    {"verifyCredentials", "passwordHash", "loginAttempt", "authToken", "principal", "sessionKey"},
    {"sendHeartbeat", "pingPeer", "aliveSignal", "heartbeatInterval", "lastSeen", "monitorNode"},
    {"connectionPool", "borrowObject", "releaseObject", "idleQueue", "maxPoolSize", "pooledResource"},
    {"scheduleTask", "cronExpression", "taskQueue", "fixedDelay", "nextRunTime", "workerThread"},
    {"parseConfig", "renderView", "formatDate", "computeTotal", "bufferSize", "stringBuilder"},
}};

inline constexpr std::array<std::string_view, 12> kFiller{
    "value", "count", "result", "item", "index", "name", "data", "state", "input", "output", "helper", "context",
};

inline std::string_view pick(std::mt19937_64& rng, std::span<const std::string_view> from) {
    return from[bounded_index(rng, from.size())];
}

inline std::string capitalize(std::string_view s) {
    std::string out(s);
    if (!out.empty() && out[0] >= 'a' && out[0] <= 'z') out[0] = static_cast<char>(out[0] - 'a' + 'A');
    return out;
}

/// A small, syntactically valid Java class using markers of `label`.
inline std::string synthetic_snippet(TacticLabel label, std::mt19937_64& rng) {
    const auto& markers = kMarkers[index_of(label)];
    const auto m0 = pick(rng, markers);
    const auto m1 = pick(rng, markers);
    const auto m2 = pick(rng, markers);
    const auto f0 = pick(rng, kFiller);
    const auto f1 = pick(rng, kFiller);
    std::string code = "public class " + capitalize(m0) + capitalize(f0) + " {\n";
    code += "    private int " + std::string(m1) + ";\n";
    code += "    public void " + std::string(m2) + "(String " + std::string(f1) + ") {\n";
    switch (bounded_index(rng, 3)) {
        case 0:
            code += "        if (" + std::string(f1) + " != null) {\n";
            code += "            " + std::string(m1) + " = " + std::string(m1) + " + 1;\n";
            code += "        }\n";
            break;
        case 1:
            code += "        for (int i = 0; i < " + std::string(m1) + "; i++) {\n";
            code += "            " + std::string(pick(rng, markers)) + "(" + std::string(f1) + ");\n";
            code += "        }\n";
            break;
        default:
            code += "        " + std::string(f0) + " = " + std::string(pick(rng, markers)) + "(" +
                    std::string(f1) + ", " + std::string(m1) + ");\n";
            break;
    }
    code += "    }\n}\n";
    return code;
}

}  // namespace detail

/// Balanced synthetic corpus: `per_label` snippets for each of the six labels.
/// Deterministic for a fixed spec.
inline std::vector<LabeledExample> generate_synthetic(const SyntheticSpec& spec) {
    if (spec.per_label == 0) throw UsageError("per_label must be positive");
    if (!(spec.label_noise >= 0.0 && spec.label_noise <= 1.0)) throw UsageError("label_noise must lie in [0, 1]");
    std::mt19937_64 rng(derive_seed(spec.seed, "synthetic"));
    std::vector<LabeledExample> out;
    out.reserve(spec.per_label * kLabelCount);
    for (std::size_t k = 0; k < spec.per_label; ++k) {
        for (auto label : kAllLabels) {
            LabeledExample ex;
            ex.code = detail::synthetic_snippet(label, rng);
            ex.label = label;
            if (unit_uniform(rng) < spec.label_noise) {
                const auto shift = 1 + bounded_index(rng, kLabelCount - 1);
                ex.label = kAllLabels[(index_of(label) + shift) % kLabelCount];
            }
            char id[32];
            std::snprintf(id, sizeof id, "syn-%04zu", out.size());
            ex.id = id;
            out.push_back(std::move(ex));
        }
    }
    return out;
}

}  // namespace prmt4td
