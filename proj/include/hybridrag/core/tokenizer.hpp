#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hybridrag {

/// Token view of a piece of text.
struct TokenSeq {
    std::vector<std::string> tokens;
    std::string source_text;

    std::size_t size() const noexcept { return tokens.size(); }
    bool empty() const noexcept { return tokens.empty(); }
    const std::string& operator[](std::size_t i) const { return tokens[i]; }

    friend bool operator==(const TokenSeq& a, const TokenSeq& b) { return a.tokens == b.tokens; }
};

namespace detail {

// Length of a Unicode whitespace sequence starting at text[i], or 0.
inline std::size_t whitespace_len(std::string_view text, std::size_t i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f') return 1;
    auto byte = [&](std::size_t k) -> unsigned {
        return i + k < text.size() ? static_cast<unsigned char>(text[i + k]) : 0u;
    };
    if (c == 0xC2 && (byte(1) == 0x85 || byte(1) == 0xA0)) return 2;
    if (c == 0xE1 && byte(1) == 0x9A && byte(2) == 0x80) return 3;
    if (c == 0xE2 && byte(1) == 0x80 &&
        ((byte(2) >= 0x80 && byte(2) <= 0x8A) || byte(2) == 0xA8 || byte(2) == 0xA9 || byte(2) == 0xAF))
        return 3;
    if (c == 0xE2 && byte(1) == 0x81 && byte(2) == 0x9F) return 3;
    if (c == 0xE3 && byte(1) == 0x80 && byte(2) == 0x80) return 3;
    return 0;
}

// Non-ASCII bytes count as word characters so UTF-8 letters stay intact.
inline bool is_word_byte(unsigned char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' ||
           c >= 0x80;
}

// Punctuation that stays inside a word when flanked by word characters.
inline bool is_joiner(unsigned char c) { return c == '-' || c == '.' || c == '\''; }

inline void split_word(std::string_view word, std::vector<std::string>& out) {
    std::string cur;
    for (std::size_t i = 0; i < word.size(); ++i) {
        const auto c = static_cast<unsigned char>(word[i]);
        if (is_word_byte(c)) {
            cur.push_back(static_cast<char>(c));
            continue;
        }
        const bool flanked = !cur.empty() && i + 1 < word.size() &&
                             is_word_byte(static_cast<unsigned char>(cur.back())) &&
                             is_word_byte(static_cast<unsigned char>(word[i + 1]));
        if (is_joiner(c) && flanked) {
            cur.push_back(static_cast<char>(c));
            continue;
        }
        if (!cur.empty()) out.push_back(std::move(cur));
        cur.clear();
        out.emplace_back(1, static_cast<char>(c));
    }
    if (!cur.empty()) out.push_back(std::move(cur));
}

inline bool attaches_left(std::string_view tok) {
    return tok.size() == 1 && std::string_view(",.;:!?)]}%").find(tok[0]) != std::string_view::npos;
}

inline bool attaches_right(std::string_view tok) {
    return tok.size() == 1 && std::string_view("([{").find(tok[0]) != std::string_view::npos;
}

} // namespace detail

/// Splits on Unicode whitespace; punctuation becomes its own token except
/// for '-', '.' and '\'' between word characters ("GPT-3.5", "don't").
inline TokenSeq tokenize(std::string_view text) {
    TokenSeq seq;
    seq.source_text = std::string(text);
    std::size_t i = 0;
    std::size_t word_start = 0;
    while (i < text.size()) {
        if (auto ws = detail::whitespace_len(text, i); ws > 0) {
            if (i > word_start) detail::split_word(text.substr(word_start, i - word_start), seq.tokens);
            i += ws;
            word_start = i;
        } else {
            ++i;
        }
    }
    if (text.size() > word_start) detail::split_word(text.substr(word_start), seq.tokens);
    return seq;
}

/// Joins tokens with single spaces, without a space before closing
/// punctuation or after opening brackets.
inline std::string detokenize(std::span<const std::string> tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i > 0 && !detail::attaches_left(tokens[i]) && !detail::attaches_right(tokens[i - 1]))
            out.push_back(' ');
        out += tokens[i];
    }
    return out;
}

inline std::string detokenize(const TokenSeq& seq) { return detokenize(std::span<const std::string>(seq.tokens)); }

inline std::size_t count_tokens(std::string_view text) { return tokenize(text).size(); }

/// Whitespace-delimited words; used for the 64-word bullet cap.
inline std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> words;
    std::size_t i = 0, start = 0;
    while (i < text.size()) {
        if (auto ws = detail::whitespace_len(text, i); ws > 0) {
            if (i > start) words.emplace_back(text.substr(start, i - start));
            i += ws;
            start = i;
        } else {
            ++i;
        }
    }
    if (text.size() > start) words.emplace_back(text.substr(start));
    return words;
}

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e) {
        auto ws = detail::whitespace_len(s, b);
        if (ws == 0) break;
        b += ws;
    }
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\n' || s[e - 1] == '\r')) --e;
    return std::string(s.substr(b, e - b));
}

} // namespace hybridrag
