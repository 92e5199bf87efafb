#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "prmt4td/error.hpp"
#include "prmt4td/labels.hpp"
#include "prmt4td/random.hpp"

namespace prmt4td {

enum class Split { unassigned, train, calibration, test };

constexpr std::string_view to_string(Split split) noexcept {
    switch (split) {
    case Split::train: return "train";
    case Split::calibration: return "calibration";
    case Split::test: return "test";
    case Split::unassigned: return "unassigned";
    }
    return "unassigned";
}

inline std::optional<Split> try_parse_split(std::string_view text) {
    const std::string lowered = detail::ascii_lower(detail::trim(text));
    if (lowered == "train") return Split::train;
    if (lowered == "calibration" || lowered == "calib") return Split::calibration;
    if (lowered == "test") return Split::test;
    if (lowered == "unassigned") return Split::unassigned;
    return std::nullopt;
}

struct LabeledExample {
    std::string id;
    std::string code;
    TacticLabel label = TacticLabel::unrelated;
    Split split = Split::unassigned;

    bool operator==(const LabeledExample&) const = default;
};

using LabelCounts = std::array<std::size_t, kLabelCount>;

/// Ordered, immutable collection of labeled snippets with unique ids.
class Corpus {
public:
    Corpus() = default;

    /// Validates the examples (non-empty code, unique ids).
    explicit Corpus(std::vector<LabeledExample> examples) : examples_(std::move(examples)) {
        std::unordered_set<std::string_view> seen;
        for (const auto& ex : examples_) {
            if (ex.code.empty()) throw DataError("example '" + ex.id + "' has empty code");
            if (!seen.insert(ex.id).second) throw DataError("duplicate example id '" + ex.id + "'");
            ++counts_[index_of(ex.label)];
        }
    }

    const std::vector<LabeledExample>& examples() const noexcept { return examples_; }
    const LabelCounts& label_counts() const noexcept { return counts_; }
    std::size_t size() const noexcept { return examples_.size(); }
    bool empty() const noexcept { return examples_.empty(); }

    std::vector<LabeledExample> in_split(Split split) const {
        std::vector<LabeledExample> out;
        for (const auto& ex : examples_) {
            if (ex.split == split) out.push_back(ex);
        }
        return out;
    }

    const LabeledExample* find(std::string_view id) const {
        for (const auto& ex : examples_) {
            if (ex.id == id) return &ex;
        }
        return nullptr;
    }

private:
    std::vector<LabeledExample> examples_;
    LabelCounts counts_{};
};

namespace detail {

inline std::string require_string(const nlohmann::json& record, const char* field, std::size_t line) {
    const auto it = record.find(field);
    if (it == record.end() || !it->is_string()) {
        throw DataError("line " + std::to_string(line) + ": missing or non-string field '" + field + "'");
    }
    return it->get<std::string>();
}

}  // namespace detail

/// Parses line-delimited JSON records {"id","code","label","split"?}.
/// Blank lines are skipped; errors name the 1-based line number.
inline Corpus parse_corpus(std::istream& in) {
    std::vector<LabeledExample> examples;
    std::unordered_set<std::string> ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        nlohmann::json record;
        try {
            record = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw DataError("line " + std::to_string(line_no) + ": malformed record: " + e.what());
        }
        if (!record.is_object()) {
            throw DataError("line " + std::to_string(line_no) + ": malformed record: not a JSON object");
        }
        LabeledExample ex;
        ex.id = detail::require_string(record, "id", line_no);
        ex.code = detail::require_string(record, "code", line_no);
        const std::string label = detail::require_string(record, "label", line_no);
        const auto parsed = try_parse_label(label);
        if (!parsed) {
            throw DataError("line " + std::to_string(line_no) + ": unknown label '" + label + "'");
        }
        ex.label = *parsed;
        if (const auto it = record.find("split"); it != record.end() && !it->is_null()) {
            const auto split = it->is_string() ? try_parse_split(it->get<std::string>()) : std::nullopt;
            if (!split) throw DataError("line " + std::to_string(line_no) + ": unknown split value");
            ex.split = *split;
        }
        if (ex.code.empty()) throw DataError("line " + std::to_string(line_no) + ": empty code");
        if (!ids.insert(ex.id).second) {
            throw DataError("line " + std::to_string(line_no) + ": duplicate id '" + ex.id + "'");
        }
        examples.push_back(std::move(ex));
    }
    return Corpus(std::move(examples));
}

inline Corpus load_corpus(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read corpus file '" + path + "'");
    return parse_corpus(in);
}

inline nlohmann::json to_json(const LabeledExample& ex) {
    nlohmann::json record = nlohmann::json::object();
    record["id"] = ex.id;
    record["code"] = ex.code;
    record["label"] = std::string(to_string(ex.label));
    if (ex.split != Split::unassigned) record["split"] = std::string(to_string(ex.split));
    return record;
}

/// Inverse of parse_corpus; `split` is omitted for unassigned examples.
inline void write_corpus(std::ostream& out, const Corpus& corpus) {
    for (const auto& ex : corpus.examples()) {
        out << to_json(ex).dump() << '\n';
    }
}

inline void save_corpus(const std::string& path, const Corpus& corpus) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write corpus file '" + path + "'");
    write_corpus(out, corpus);
}

/// Stratified, seeded train / calibration / test assignment. For every label,
/// each split receives round(fraction * label_total) examples (calibration
/// is trimmed if rounding overshoots), the rest go to test.
inline Corpus split_corpus(const Corpus& corpus, double train_frac, double calib_frac, std::uint64_t seed) {
    if (!(train_frac >= 0.0) || !(calib_frac >= 0.0) || train_frac + calib_frac > 1.0 + 1e-12) {
        throw UsageError("split fractions must be non-negative with train + calib <= 1");
    }
    const double test_frac = std::max(0.0, 1.0 - train_frac - calib_frac);
    const std::size_t splits_requested =
        (train_frac > 0.0 ? 1 : 0) + (calib_frac > 0.0 ? 1 : 0) + (test_frac > 1e-12 ? 1 : 0);

    std::vector<LabeledExample> examples = corpus.examples();
    for (std::size_t l = 0; l < kLabelCount; ++l) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < examples.size(); ++i) {
            if (index_of(examples[i].label) == l) members.push_back(i);
        }
        if (members.empty()) continue;
        const std::size_t n = members.size();
        if (n < splits_requested) {
            throw DataError("label '" + std::string(kLabelNames[l]) + "' has " + std::to_string(n) +
                            " examples, fewer than the " + std::to_string(splits_requested) +
                            " splits requested");
        }
        std::mt19937_64 rng(derive_seed(seed, kLabelNames[l]));
        portable_shuffle(members, rng);

        auto n_train = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(n)));
        auto n_calib = static_cast<std::size_t>(std::llround(calib_frac * static_cast<double>(n)));
        n_train = std::min(n_train, n);
        n_calib = std::min(n_calib, n - n_train);
        if (train_frac > 0.0 && n_train == 0) {
            throw DataError("label '" + std::string(kLabelNames[l]) + "' would have no training examples");
        }
        for (std::size_t k = 0; k < n; ++k) {
            auto& ex = examples[members[k]];
            ex.split = k < n_train ? Split::train : (k < n_train + n_calib ? Split::calibration : Split::test);
        }
    }
    return Corpus(std::move(examples));
}

}  // namespace prmt4td
