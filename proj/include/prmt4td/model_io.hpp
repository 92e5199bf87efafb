#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "prmt4td/classifier.hpp"
#include "prmt4td/conformal.hpp"
#include "prmt4td/error.hpp"
#include "prmt4td/labels.hpp"
#include "prmt4td/tokenizer.hpp"

namespace prmt4td {

inline constexpr std::string_view kModelFormat = "prmt4td-small-model";
inline constexpr std::string_view kCalibratorFormat = "prmt4td-calibrator";
inline constexpr int kModelFormatVersion = 1;

inline nlohmann::json to_json(const SmallModel& model) {
    nlohmann::json labels = nlohmann::json::array();
    for (auto l : SmallModel::label_order()) labels.push_back(std::string(to_string(l)));
    const auto& vocab = model.vocabulary();
    return {
        {"format", std::string(kModelFormat)},
        {"version", kModelFormatVersion},
        {"tokenizer", std::string(kTokenizerVersion)},
        {"label_order", labels},
        {"vocabulary", {{"terms", vocab.terms()}, {"df", vocab.document_frequencies()},
                        {"num_documents", vocab.num_documents()}}},
        {"weights", model.params().weights},
        {"bias", model.params().bias},
    };
}

inline nlohmann::json to_json(const Calibrator& cal) {
    return {
        {"format", std::string(kCalibratorFormat)},
        {"version", kModelFormatVersion},
        {"alpha", cal.alpha},
        {"threshold", cal.threshold},
        {"calib_size", cal.calib_size},
        {"score_kind", cal.score_kind},
    };
}

namespace detail {

inline void check_header(const nlohmann::json& j, std::string_view format) {
    if (!j.is_object() || j.value("format", "") != format) {
        throw CorruptFileError("not a " + std::string(format) + " file");
    }
    const auto version = j.value("version", -1);
    if (version != kModelFormatVersion) {
        throw VersionError("unsupported " + std::string(format) + " version " + std::to_string(version) +
                           " (expected " + std::to_string(kModelFormatVersion) + ")");
    }
}

inline nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw CorruptFileError("'" + path + "' is not valid JSON: " + e.what());
    }
}

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << j.dump(1) << '\n';
}

}  // namespace detail

inline SmallModel model_from_json(const nlohmann::json& j) {
    detail::check_header(j, kModelFormat);
    try {
        if (j.at("tokenizer").get<std::string>() != kTokenizerVersion) {
            throw VersionError("model was trained with tokenizer '" + j.at("tokenizer").get<std::string>() +
                               "', this build uses '" + std::string(kTokenizerVersion) + "'");
        }
        const auto labels = j.at("label_order").get<std::vector<std::string>>();
        if (labels.size() != kLabelCount) throw CorruptFileError("label_order has the wrong length");
        for (std::size_t i = 0; i < kLabelCount; ++i) {
            if (labels[i] != to_string(kAllLabels[i])) throw CorruptFileError("label_order does not match this build");
        }
        const auto& v = j.at("vocabulary");
        auto terms = v.at("terms").get<std::vector<std::string>>();
        const auto df = v.at("df").get<std::vector<std::uint32_t>>();
        if (terms.size() != df.size()) throw CorruptFileError("vocabulary terms and df differ in length");
        std::vector<std::pair<std::string, std::uint32_t>> pairs;
        pairs.reserve(terms.size());
        for (std::size_t i = 0; i < terms.size(); ++i) pairs.emplace_back(std::move(terms[i]), df[i]);
        Vocabulary vocab = Vocabulary::from_terms(std::move(pairs), v.at("num_documents").get<std::size_t>());

        LinearParams params;
        params.dims = vocab.size();
        params.weights = j.at("weights").get<std::vector<double>>();
        params.bias = j.at("bias").get<std::vector<double>>();
        return SmallModel(std::move(vocab), std::move(params));
    } catch (const nlohmann::json::exception& e) {
        throw CorruptFileError(std::string("malformed model file: ") + e.what());
    } catch (const VersionError&) {
        throw;
    } catch (const DataError& e) {
        throw CorruptFileError(e.what());
    }
}

inline Calibrator calibrator_from_json(const nlohmann::json& j) {
    detail::check_header(j, kCalibratorFormat);
    try {
        Calibrator cal;
        cal.alpha = j.at("alpha").get<double>();
        cal.threshold = j.at("threshold").get<double>();
        cal.calib_size = j.at("calib_size").get<std::size_t>();
        cal.score_kind = j.at("score_kind").get<std::string>();
        if (cal.score_kind != kScoreKind) throw CorruptFileError("unknown score kind '" + cal.score_kind + "'");
        if (!(cal.alpha > 0.0 && cal.alpha < 1.0) || !(cal.threshold >= 0.0 && cal.threshold <= 1.0) ||
            cal.calib_size == 0) {
            throw CorruptFileError("calibrator values out of range");
        }
        return cal;
    } catch (const nlohmann::json::exception& e) {
        throw CorruptFileError(std::string("malformed calibrator file: ") + e.what());
    }
}

inline void save_model(const std::string& path, const SmallModel& model) {
    detail::write_json_file(path, to_json(model));
}

inline SmallModel load_model(const std::string& path) { return model_from_json(detail::read_json_file(path)); }

inline void save_calibrator(const std::string& path, const Calibrator& cal) {
    detail::write_json_file(path, to_json(cal));
}

inline Calibrator load_calibrator(const std::string& path) {
    return calibrator_from_json(detail::read_json_file(path));
}

}  // namespace prmt4td
