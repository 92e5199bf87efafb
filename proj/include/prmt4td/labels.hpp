#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "prmt4td/error.hpp"

namespace prmt4td {

/// Closed set of tactic labels. Enumerator order is the canonical label order
/// used for tie-breaking everywhere.
enum class TacticLabel : std::size_t {
    audit = 0,
    authenticate,
    heartbeat,
    pooling,
    scheduler,
    unrelated,
};

inline constexpr std::size_t kLabelCount = 6;

inline constexpr std::array<TacticLabel, kLabelCount> kAllLabels{
    TacticLabel::audit,     TacticLabel::authenticate, TacticLabel::heartbeat,
    TacticLabel::pooling,   TacticLabel::scheduler,    TacticLabel::unrelated,
};

inline constexpr std::array<std::string_view, kLabelCount> kLabelNames{
    "audit", "authenticate", "heartbeat", "pooling", "scheduler", "unrelated",
};

/// Human-facing tactic names used in report tables.
inline constexpr std::array<std::string_view, kLabelCount> kTacticDisplayNames{
    "Audit Trail", "Authentication", "Heartbeat", "Pooling", "Scheduling", "Unrelated",
};

constexpr std::size_t index_of(TacticLabel label) noexcept {
    return static_cast<std::size_t>(label);
}

constexpr std::string_view to_string(TacticLabel label) noexcept {
    return kLabelNames[index_of(label)];
}

constexpr std::string_view display_name(TacticLabel label) noexcept {
    return kTacticDisplayNames[index_of(label)];
}

namespace detail {

inline std::string ascii_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

inline std::string_view trim(std::string_view s) {
    constexpr std::string_view ws = " \t\r\n\f\v";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Case-insensitive parse; surrounding whitespace ignored.
inline std::optional<TacticLabel> try_parse_label(std::string_view text) {
    const std::string lowered = detail::ascii_lower(detail::trim(text));
    for (std::size_t i = 0; i < kLabelCount; ++i) {
        if (lowered == kLabelNames[i]) {
            return kAllLabels[i];
        }
    }
    return std::nullopt;
}

inline TacticLabel parse_label_or_throw(std::string_view text) {
    if (auto label = try_parse_label(text)) {
        return *label;
    }
    throw DataError("unknown tactic label '" + std::string(text) + "'");
}

/// Five tactic labels, i.e. the universe without `unrelated`.
inline constexpr bool is_tactic(TacticLabel label) noexcept {
    return label != TacticLabel::unrelated;
}

}  // namespace prmt4td
