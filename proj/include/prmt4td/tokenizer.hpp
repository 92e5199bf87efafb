#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace prmt4td {

/// Bumped whenever lexing or normalization rules change; stored in model files.
inline constexpr std::string_view kTokenizerVersion = "java-lex-1";

enum class LexKind {
    identifier,
    keyword,
    number,
    string_literal,
    char_literal,
    op,
    separator,
    unknown,
};

constexpr std::string_view lex_kind_name(LexKind kind) noexcept {
    switch (kind) {
    case LexKind::identifier: return "Identifier";
    case LexKind::keyword: return "Keyword";
    case LexKind::number: return "NumberLiteral";
    case LexKind::string_literal: return "StringLiteral";
    case LexKind::char_literal: return "CharLiteral";
    case LexKind::op: return "Operator";
    case LexKind::separator: return "Separator";
    case LexKind::unknown: return "Unknown";
    }
    return "Unknown";
}

/// One raw lexeme. `adjacent` is true when the next lexeme starts immediately
/// after this one (no whitespace or comment in between).
struct Lexeme {
    LexKind kind;
    std::string text;
    std::size_t offset = 0;
    bool adjacent = false;
};

namespace detail {

inline constexpr std::array<std::string_view, 53> kJavaKeywords{
    "abstract", "assert",     "boolean",   "break",      "byte",      "case",
    "catch",    "char",       "class",     "const",      "continue",  "default",
    "do",       "double",     "else",      "enum",       "extends",   "final",
    "finally",  "float",      "for",       "goto",       "if",        "implements",
    "import",   "instanceof", "int",       "interface",  "long",      "native",
    "new",      "package",    "private",   "protected",  "public",    "return",
    "short",    "static",     "strictfp",  "super",      "switch",    "synchronized",
    "this",     "throw",      "throws",    "transient",  "try",       "void",
    "volatile", "while",      "true",      "false",      "null",
};

inline bool is_java_keyword(std::string_view word) {
    return std::find(kJavaKeywords.begin(), kJavaKeywords.end(), word) != kJavaKeywords.end();
}

inline bool is_ident_start(unsigned char c) {
    return std::isalpha(c) || c == '_' || c == '$' || c >= 0x80;
}

inline bool is_ident_part(unsigned char c) {
    return is_ident_start(c) || std::isdigit(c);
}

// '>' is never merged here; see merge_operators().
inline constexpr std::array<std::string_view, 31> kOperators{
    "<<=", "...", "->", "::", "++", "--", "&&", "||", "==", "!=", "<=", "+=", "-=",
    "*=",  "/=",  "&=", "|=", "^=", "%=", "<<", "=",  "<",  "!",  "~",  "?",  ":",
    "+",   "-",   "*",  "/",  "&",
};

inline constexpr std::string_view kSingleOps = "|^%>@";
inline constexpr std::string_view kSeparators = "(){}[];,.";

}  // namespace detail

/// Splits Java source into raw lexemes. Comments and whitespace are skipped;
/// never throws. Unterminated literals and comments run to end of line/input.
inline std::vector<Lexeme> lex_java(std::string_view src) {
    std::vector<Lexeme> out;
    std::size_t i = 0;
    const std::size_t n = src.size();
    auto at = [&](std::size_t k) -> unsigned char { return k < n ? static_cast<unsigned char>(src[k]) : 0; };
    auto emit = [&](LexKind kind, std::size_t begin, std::size_t end) {
        out.push_back(Lexeme{kind, std::string(src.substr(begin, end - begin)), begin, false});
    };

    while (i < n) {
        const unsigned char c = at(i);
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
            ++i;
            continue;
        }
        if (c == '/' && at(i + 1) == '/') {
            while (i < n && at(i) != '\n') ++i;
            continue;
        }
        if (c == '/' && at(i + 1) == '*') {
            const auto end = src.find("*/", i + 2);
            i = end == std::string_view::npos ? n : end + 2;
            continue;
        }
        const std::size_t begin = i;
        if (detail::is_ident_start(c)) {
            while (i < n && detail::is_ident_part(at(i))) ++i;
            const auto word = src.substr(begin, i - begin);
            emit(detail::is_java_keyword(word) ? LexKind::keyword : LexKind::identifier, begin, i);
            continue;
        }
        if (std::isdigit(c) || (c == '.' && std::isdigit(at(i + 1)))) {
            ++i;
            while (i < n) {
                const unsigned char d = at(i);
                if (std::isalnum(d) || d == '_' || d == '.') {
                    ++i;
                } else if ((d == '+' || d == '-') && (at(i - 1) == 'e' || at(i - 1) == 'E' ||
                                                      at(i - 1) == 'p' || at(i - 1) == 'P')) {
                    ++i;
                } else {
                    break;
                }
            }
            emit(LexKind::number, begin, i);
            continue;
        }
        if (c == '"') {
            if (at(i + 1) == '"' && at(i + 2) == '"') {
                const auto end = src.find("\"\"\"", i + 3);
                i = end == std::string_view::npos ? n : end + 3;
            } else {
                ++i;
                while (i < n && at(i) != '"' && at(i) != '\n') {
                    i += at(i) == '\\' ? 2 : 1;
                }
                if (i < n && at(i) == '"') ++i;
                i = std::min(i, n);
            }
            emit(LexKind::string_literal, begin, i);
            continue;
        }
        if (c == '\'') {
            ++i;
            while (i < n && at(i) != '\'' && at(i) != '\n') {
                i += at(i) == '\\' ? 2 : 1;
            }
            if (i < n && at(i) == '\'') ++i;
            i = std::min(i, n);
            emit(LexKind::char_literal, begin, i);
            continue;
        }
        if (detail::kSeparators.find(static_cast<char>(c)) != std::string_view::npos) {
            if (c == '.' && at(i + 1) == '.' && at(i + 2) == '.') {
                i += 3;
                emit(LexKind::op, begin, i);
            } else {
                ++i;
                emit(LexKind::separator, begin, i);
            }
            continue;
        }
        bool matched = false;
        for (auto op : detail::kOperators) {
            if (src.substr(i, op.size()) == op) {
                i += op.size();
                emit(LexKind::op, begin, i);
                matched = true;
                break;
            }
        }
        if (matched) continue;
        if (detail::kSingleOps.find(static_cast<char>(c)) != std::string_view::npos) {
            ++i;
            emit(LexKind::op, begin, i);
            continue;
        }
        ++i;
        emit(LexKind::unknown, begin, i);
    }

    for (std::size_t k = 0; k + 1 < out.size(); ++k) {
        out[k].adjacent = out[k].offset + out[k].text.size() == out[k + 1].offset;
    }
    return out;
}

/// Length (in lexemes) of the operator starting at `k` once adjacent '>' and
/// trailing '=' are merged: ">>", ">>>", ">=", ">>=", ">>>=".
inline std::size_t merged_gt_length(const std::vector<Lexeme>& lex, std::size_t k) {
    if (k >= lex.size() || lex[k].text != ">") return 0;
    std::size_t len = 1;
    while (len < 3 && k + len < lex.size() && lex[k + len - 1].adjacent && lex[k + len].text == ">") {
        ++len;
    }
    if (k + len < lex.size() && lex[k + len - 1].adjacent && lex[k + len].text == "=") {
        ++len;
    }
    return len;
}

/// Normalized lexical tokens of a snippet.
struct TokenSequence {
    std::vector<std::string> tokens;

    bool operator==(const TokenSequence&) const = default;
};

/// Splits an identifier on '_' / '$' and camelCase boundaries, lowercasing each
/// part. "HTTPServer" -> {http, server}; "log_entry2" -> {log, entry2}.
inline std::vector<std::string> split_identifier(std::string_view ident) {
    std::vector<std::string> parts;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) {
            parts.push_back(std::move(current));
            current.clear();
        }
    };
    for (std::size_t i = 0; i < ident.size(); ++i) {
        const auto c = static_cast<unsigned char>(ident[i]);
        if (c == '_' || c == '$') {
            flush();
            continue;
        }
        if (std::isupper(c) && !current.empty()) {
            const auto prev = static_cast<unsigned char>(ident[i - 1]);
            const bool next_lower =
                i + 1 < ident.size() && std::islower(static_cast<unsigned char>(ident[i + 1]));
            if (std::islower(prev) || std::isdigit(prev) || (std::isupper(prev) && next_lower)) {
                flush();
            }
        }
        current.push_back(static_cast<char>(std::tolower(c)));
    }
    flush();
    return parts;
}

/// Normalized token stream: identifiers split and lowercased, keywords,
/// numbers and operators kept, comments and string/char literals dropped.
inline TokenSequence tokenize(std::string_view code) {
    const auto lex = lex_java(code);
    TokenSequence seq;
    for (std::size_t k = 0; k < lex.size(); ++k) {
        const auto& tok = lex[k];
        switch (tok.kind) {
        case LexKind::identifier:
            for (auto& part : split_identifier(tok.text)) {
                seq.tokens.push_back(std::move(part));
            }
            break;
        case LexKind::keyword:
        case LexKind::separator:
            seq.tokens.push_back(tok.text);
            break;
        case LexKind::number: {
            std::string lowered = tok.text;
            std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                           [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
            seq.tokens.push_back(std::move(lowered));
            break;
        }
        case LexKind::op:
            if (const auto len = merged_gt_length(lex, k); len > 1) {
                std::string merged;
                for (std::size_t j = 0; j < len; ++j) merged += lex[k + j].text;
                seq.tokens.push_back(std::move(merged));
                k += len - 1;
            } else {
                seq.tokens.push_back(tok.text);
            }
            break;
        case LexKind::string_literal:
        case LexKind::char_literal:
        case LexKind::unknown:
            break;
        }
    }
    return seq;
}

/// Space-joined rendering; tokenize(render(s)) == s for any tokenize() output.
inline std::string render(const TokenSequence& seq) {
    std::string out;
    for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
        if (i != 0) out.push_back(' ');
        out += seq.tokens[i];
    }
    return out;
}

}  // namespace prmt4td
