#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "hybridrag/backend.hpp"
#include "hybridrag/core/errors.hpp"
#include "hybridrag/core/tokenizer.hpp"

namespace hybridrag::harness {

namespace detail {

inline std::map<std::string, std::size_t> ngram_counts(const std::vector<std::string>& toks, std::size_t n) {
    std::map<std::string, std::size_t> counts;
    if (toks.size() < n) return counts;
    for (std::size_t i = 0; i + n <= toks.size(); ++i) {
        std::string key;
        for (std::size_t j = 0; j < n; ++j) {
            key += toks[i + j];
            key.push_back('\x1f');
        }
        ++counts[key];
    }
    return counts;
}

} // namespace detail

struct GleuParts {
    std::size_t matches = 0;
    std::size_t hyp_ngrams = 0;
    std::size_t ref_ngrams = 0;
    double score = 0;
};

/// Sentence-level GLEU: min(precision, recall) over n-grams of orders
/// 1..max_n pooled together, with clipped matching.
inline GleuParts gleu_parts(const TokenSeq& hypothesis, const TokenSeq& reference, std::size_t max_n = 4) {
    if (reference.empty()) throw InvalidArgument("gleu: reference must be non-empty");
    GleuParts p;
    for (std::size_t n = 1; n <= max_n; ++n) {
        const auto h = detail::ngram_counts(hypothesis.tokens, n);
        const auto r = detail::ngram_counts(reference.tokens, n);
        for (const auto& [g, c] : h) {
            p.hyp_ngrams += c;
            if (auto it = r.find(g); it != r.end()) p.matches += std::min(c, it->second);
        }
        for (const auto& [g, c] : r) p.ref_ngrams += c;
    }
    if (p.hyp_ngrams == 0) return p;
    const double precision = static_cast<double>(p.matches) / static_cast<double>(p.hyp_ngrams);
    const double recall = static_cast<double>(p.matches) / static_cast<double>(p.ref_ngrams);
    p.score = std::min(precision, recall);
    return p;
}

inline double gleu(const TokenSeq& hypothesis, const TokenSeq& reference, std::size_t max_n = 4) {
    return gleu_parts(hypothesis, reference, max_n).score;
}

/// exp of the negative mean token log-probability.
inline double perplexity_from_logprobs(const std::vector<double>& logprobs) {
    if (logprobs.empty()) throw InvalidArgument("perplexity of an empty reference");
    const long double sum = std::accumulate(logprobs.begin(), logprobs.end(), 0.0L);
    return static_cast<double>(std::exp(-sum / static_cast<long double>(logprobs.size())));
}

inline double perplexity(const LlmBackend& backend, std::string_view prompt, const TokenSeq& reference) {
    if (!backend.has_logprobs())
        throw CapabilityError("backend '" + backend.id() + "' does not expose log-probabilities");
    if (reference.empty()) throw InvalidArgument("perplexity of an empty reference");
    const auto lp = backend.logprobs(prompt, reference);
    if (lp.size() != reference.size())
        throw BackendError("backend returned " + std::to_string(lp.size()) + " log-probabilities for " +
                           std::to_string(reference.size()) + " tokens");
    return perplexity_from_logprobs(lp);
}

template <typename Range>
double mean(const Range& values) {
    if (std::empty(values)) return 0.0;
    double s = 0;
    std::size_t n = 0;
    for (const auto& v : values) {
        s += static_cast<double>(v);
        ++n;
    }
    return s / static_cast<double>(n);
}

} // namespace hybridrag::harness
