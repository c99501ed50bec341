#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "hybridrag/core/tokenizer.hpp"

namespace hybridrag {

/// Sentence boundary: '.', '!' or '?' followed by whitespace or end of text.
inline std::vector<std::string> split_sentences(std::string_view text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (c != '.' && c != '!' && c != '?') continue;
        const bool at_end = i + 1 == text.size();
        if (!at_end && detail::whitespace_len(text, i + 1) == 0) continue;
        auto s = trim(text.substr(start, i + 1 - start));
        if (!s.empty()) out.push_back(std::move(s));
        start = i + 1;
    }
    if (start < text.size()) {
        auto s = trim(text.substr(start));
        if (!s.empty()) out.push_back(std::move(s));
    }
    return out;
}

} // namespace hybridrag
