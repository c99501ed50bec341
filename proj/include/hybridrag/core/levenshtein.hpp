#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hybridrag/core/tokenizer.hpp"

namespace hybridrag {

/// Token-level Levenshtein distance with unit costs.
///
/// The shared prefix and suffix are stripped first; they never contribute to
/// the distance, and an append-only edit (the common case for a writing
/// session) then costs O(n) instead of O(n*m).
inline std::size_t levenshtein(std::span<const std::string> a, std::span<const std::string> b) {
    std::size_t pre = 0;
    while (pre < a.size() && pre < b.size() && a[pre] == b[pre]) ++pre;
    a = a.subspan(pre);
    b = b.subspan(pre);
    std::size_t suf = 0;
    while (suf < a.size() && suf < b.size() && a[a.size() - 1 - suf] == b[b.size() - 1 - suf]) ++suf;
    a = a.first(a.size() - suf);
    b = b.first(b.size() - suf);

    if (a.empty()) return b.size();
    if (b.empty()) return a.size();
    if (a.size() < b.size()) std::swap(a, b);

    std::vector<std::size_t> row(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t diag = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t up = row[j];
            const std::size_t sub = diag + (a[i - 1] == b[j - 1] ? 0 : 1);
            row[j] = std::min({up + 1, row[j - 1] + 1, sub});
            diag = up;
        }
    }
    return row[b.size()];
}

inline std::size_t levenshtein(const TokenSeq& a, const TokenSeq& b) {
    return levenshtein(std::span<const std::string>(a.tokens), std::span<const std::string>(b.tokens));
}

} // namespace hybridrag
