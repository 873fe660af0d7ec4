#pragma once

#include <algorithm>
#include <cctype>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace editprop {

using Lines = std::vector<std::string>;

// Language-independent lexer shared by every module. Word runs
// ([A-Za-z0-9_$] plus any non-ASCII byte) are single tokens, so camelCase and
// snake_case identifiers stay whole; every other non-blank character is a
// token of its own.

namespace detail {
inline bool is_word_byte(unsigned char c) {
    return std::isalnum(c) || c == '_' || c == '$' || c >= 0x80;
}
inline bool is_blank(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' || c == '\f';
}
} // namespace detail

/// A token together with the whitespace that preceded it on its line, so that
/// token-level rewrites can be rendered back with the original layout.
struct Token {
    std::string text;
    std::string space_before;

    friend bool operator==(const Token&, const Token&) = default;
};

inline std::vector<Token> lex_line(std::string_view line) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < line.size()) {
        std::size_t ws = i;
        while (i < line.size() && detail::is_blank(static_cast<unsigned char>(line[i]))) ++i;
        if (i >= line.size()) break;
        std::size_t start = i;
        if (detail::is_word_byte(static_cast<unsigned char>(line[i]))) {
            while (i < line.size() && detail::is_word_byte(static_cast<unsigned char>(line[i]))) ++i;
        } else {
            ++i;
        }
        out.push_back(Token{std::string(line.substr(start, i - start)),
                            std::string(line.substr(ws, start - ws))});
    }
    return out;
}

inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        auto c = static_cast<unsigned char>(text[i]);
        if (detail::is_blank(c)) {
            ++i;
            continue;
        }
        std::size_t start = i;
        if (detail::is_word_byte(c)) {
            while (i < text.size() && detail::is_word_byte(static_cast<unsigned char>(text[i]))) ++i;
        } else {
            ++i;
        }
        out.emplace_back(text.substr(start, i - start));
    }
    return out;
}

inline std::vector<std::string> tokenize_lines(std::span<const std::string> lines) {
    std::vector<std::string> out;
    for (const auto& l : lines) {
        auto t = tokenize(l);
        out.insert(out.end(), std::make_move_iterator(t.begin()), std::make_move_iterator(t.end()));
    }
    return out;
}

inline std::size_t count_tokens(std::string_view text) {
    return tokenize(text).size();
}

/// Identifier tokens are word tokens that do not start with a digit.
inline bool is_identifier(std::string_view tok) {
    if (tok.empty()) return false;
    auto c = static_cast<unsigned char>(tok.front());
    return detail::is_word_byte(c) && !std::isdigit(c);
}

inline std::set<std::string> identifier_set(std::span<const std::string> tokens) {
    std::set<std::string> ids;
    for (const auto& t : tokens)
        if (is_identifier(t)) ids.insert(t);
    return ids;
}

inline std::set<std::string> token_set(std::span<const std::string> tokens) {
    return {tokens.begin(), tokens.end()};
}

/// Jaccard index over token sets; two empty sets are defined to be disjoint (0).
inline double token_jaccard(std::span<const std::string> a, std::span<const std::string> b) {
    auto sa = token_set(a);
    auto sb = token_set(b);
    if (sa.empty() && sb.empty()) return 0.0;
    std::size_t inter = 0;
    for (const auto& t : sa)
        if (sb.count(t)) ++inter;
    return static_cast<double>(inter) / static_cast<double>(sa.size() + sb.size() - inter);
}

/// Leading whitespace of a line.
inline std::string_view indentation(std::string_view line) {
    std::size_t i = 0;
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    return line.substr(0, i);
}

} // namespace editprop
