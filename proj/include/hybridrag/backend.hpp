#pragma once

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <fstream>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <semaphore>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

#include "hybridrag/core/errors.hpp"
#include "hybridrag/core/sentences.hpp"
#include "hybridrag/core/tokenizer.hpp"
#include "hybridrag/core/types.hpp"
#include "hybridrag/prompts.hpp"

namespace hybridrag {

struct CompletionRequest {
    std::string prompt;
    std::size_t max_tokens = 44;
    double temperature = 0.0;
    double top_p = 1.0;
};

/// A language model the engine or the cloud service can call.
///
/// complete() is a blocking call and must be safe to invoke concurrently.
/// With temperature 0 it must be deterministic for a fixed id and prompt.
class LlmBackend {
public:
    virtual ~LlmBackend() = default;
    virtual std::string id() const = 0;
    virtual std::string complete(const CompletionRequest& req) const = 0;

    virtual bool has_logprobs() const { return false; }

    /// Per-token natural-log probabilities of `continuation` given `prompt`.
    virtual std::vector<double> logprobs(std::string_view /*prompt*/, const TokenSeq& /*continuation*/) const {
        throw CapabilityError("backend '" + id() + "' does not expose log-probabilities");
    }
};

/// The pieces of an instruction-enhanced completion prompt.
struct CompletionPromptParts {
    std::vector<std::string> reference_lines; ///< empty in vanilla mode
    std::string context;
};

inline CompletionPromptParts parse_completion_prompt(std::string_view prompt) {
    CompletionPromptParts parts;
    if (!prompt.starts_with(prompts::kReferencePrefix)) {
        parts.context = std::string(prompt);
        return parts;
    }
    const std::string marker = "\n\n" + std::string(prompts::kCompletionInstruction) + "\n\n";
    const auto pos = prompt.find(marker);
    if (pos == std::string_view::npos) {
        parts.context = std::string(prompt);
        return parts;
    }
    std::string_view ref = prompt.substr(prompts::kReferencePrefix.size(), pos - prompts::kReferencePrefix.size());
    std::size_t start = 0;
    while (start <= ref.size()) {
        auto nl = ref.find('\n', start);
        if (nl == std::string_view::npos) nl = ref.size();
        if (nl > start) parts.reference_lines.emplace_back(ref.substr(start, nl - start));
        start = nl + 1;
    }
    parts.context = std::string(prompt.substr(pos + marker.size()));
    return parts;
}

/// Deterministic test LM that continues the context by copying from the
/// Reference block.
///
/// The longest suffix of the context that also occurs in the reference
/// (latest occurrence on ties) selects where copying starts. Without any
/// overlap the first reference line is returned. Vanilla prompts yield "".
///
/// logprobs() scores each continuation token against the copy prediction:
/// `hit_mass + (1 - hit_mass)/V` on a match, `(1 - hit_mass)/V` otherwise.
class EchoMemoryBackend final : public LlmBackend {
public:
    explicit EchoMemoryBackend(std::size_t vocab_size = 50000, double hit_mass = 0.9)
        : vocab_(vocab_size), hit_mass_(hit_mass) {}

    std::string id() const override { return "echo-memory"; }

    std::string complete(const CompletionRequest& req) const override {
        const auto parts = parse_completion_prompt(req.prompt);
        if (parts.reference_lines.empty()) return {};
        const auto ref = reference_tokens(parts.reference_lines);
        const auto ctx = tokenize(parts.context).tokens;
        auto out = continuation(ref, ctx, parts.reference_lines.front(), req.max_tokens);
        return detokenize(out);
    }

    bool has_logprobs() const override { return true; }

    std::vector<double> logprobs(std::string_view prompt, const TokenSeq& cont) const override {
        const auto parts = parse_completion_prompt(prompt);
        const auto ref = reference_tokens(parts.reference_lines);
        auto ctx = tokenize(parts.context).tokens;
        const double miss = (1.0 - hit_mass_) / static_cast<double>(vocab_);
        std::vector<double> out;
        out.reserve(cont.size());
        for (const auto& tok : cont.tokens) {
            std::vector<std::string> next;
            if (!parts.reference_lines.empty()) next = continuation(ref, ctx, parts.reference_lines.front(), 1);
            const bool hit = !next.empty() && next.front() == tok;
            out.push_back(std::log(hit ? hit_mass_ + miss : miss));
            ctx.push_back(tok);
        }
        return out;
    }

private:
    static std::vector<std::string> reference_tokens(const std::vector<std::string>& lines) {
        std::vector<std::string> toks;
        for (const auto& l : lines) {
            auto t = tokenize(l).tokens;
            toks.insert(toks.end(), t.begin(), t.end());
        }
        return toks;
    }

    static std::vector<std::string> continuation(const std::vector<std::string>& ref,
                                                 const std::vector<std::string>& ctx, const std::string& first_line,
                                                 std::size_t max_tokens) {
        std::size_t best_len = 0, best_end = 0;
        for (std::size_t end = 1; end < ref.size(); ++end) {
            std::size_t len = 0;
            while (len < end && len < ctx.size() && ref[end - 1 - len] == ctx[ctx.size() - 1 - len]) ++len;
            if (len > 0 && len >= best_len) {
                best_len = len;
                best_end = end;
            }
        }
        std::vector<std::string> out;
        if (best_len == 0) {
            out = tokenize(first_line).tokens;
        } else {
            out.assign(ref.begin() + static_cast<std::ptrdiff_t>(best_end), ref.end());
        }
        if (out.size() > max_tokens) out.resize(max_tokens);
        return out;
    }

    std::size_t vocab_;
    double hit_mass_;
};

/// Assigns log(1/V) to every token; replies with a fixed text.
class UniformBackend final : public LlmBackend {
public:
    explicit UniformBackend(std::size_t vocab_size, std::string reply = "lorem ipsum")
        : vocab_(vocab_size), reply_(std::move(reply)) {
        if (vocab_ == 0) throw InvalidArgument("vocabulary size must be >= 1");
    }
    std::string id() const override { return "uniform-" + std::to_string(vocab_); }
    std::string complete(const CompletionRequest&) const override { return reply_; }
    bool has_logprobs() const override { return true; }
    std::vector<double> logprobs(std::string_view, const TokenSeq& cont) const override {
        return std::vector<double>(cont.size(), -std::log(static_cast<double>(vocab_)));
    }

private:
    std::size_t vocab_;
    std::string reply_;
};

/// Answers key-takeaway prompts with one bullet per sentence of each
/// passage (at most `max_bullets` per passage).
class TakeawayMockBackend final : public LlmBackend {
public:
    explicit TakeawayMockBackend(std::size_t max_bullets = 8) : max_bullets_(max_bullets) {}

    std::string id() const override { return "takeaway-mock"; }

    std::string complete(const CompletionRequest& req) const override {
        static const std::regex passage_re(R"(^P(\d+): (.*)$)");
        std::string out;
        std::size_t start = 0;
        const std::string& p = req.prompt;
        std::size_t label = 0;
        while (start < p.size()) {
            auto nl = p.find('\n', start);
            if (nl == std::string::npos) nl = p.size();
            const std::string line = p.substr(start, nl - start);
            start = nl + 1;
            std::smatch m;
            if (!std::regex_match(line, m, passage_re)) continue;
            ++label;
            if (label > 1) out += "\n### P" + std::to_string(label) + ":";
            std::size_t n = 0;
            for (const auto& s : split_sentences(m[2].str())) {
                if (n++ == max_bullets_) break;
                out += "\n- " + s;
            }
        }
        return out;
    }

private:
    std::size_t max_bullets_;
};

/// Table-driven mock: the first rule whose `contains` substring occurs in
/// the prompt supplies the response.
///
/// Fixture JSON: {"id": "...", "rules": [{"contains": "...", "response": "..."}],
///                "default": "...", "delay_ms": 0}
class FixtureBackend final : public LlmBackend {
public:
    struct Rule {
        std::string contains;
        std::string response;
    };

    FixtureBackend(std::string id, std::vector<Rule> rules, std::optional<std::string> fallback = std::nullopt,
                   Millis delay = Millis{0})
        : id_(std::move(id)), rules_(std::move(rules)), fallback_(std::move(fallback)), delay_(delay) {}

    static FixtureBackend from_json(const nlohmann::json& j) {
        std::vector<Rule> rules;
        for (const auto& r : j.value("rules", nlohmann::json::array()))
            rules.push_back({r.at("contains").get<std::string>(), r.at("response").get<std::string>()});
        std::optional<std::string> fallback;
        if (j.contains("default")) fallback = j.at("default").get<std::string>();
        return FixtureBackend(j.value("id", "fixture"), std::move(rules), std::move(fallback),
                              Millis{j.value("delay_ms", 0.0)});
    }

    static FixtureBackend load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw InvalidArgument("cannot open backend fixture " + path);
        try {
            return from_json(nlohmann::json::parse(in));
        } catch (const nlohmann::json::exception& e) {
            throw InvalidArgument("malformed backend fixture " + path + ": " + e.what());
        }
    }

    std::string id() const override { return id_; }

    std::string complete(const CompletionRequest& req) const override {
        if (delay_.count() > 0) std::this_thread::sleep_for(delay_);
        for (const auto& r : rules_)
            if (req.prompt.find(r.contains) != std::string::npos) return r.response;
        if (fallback_) return *fallback_;
        throw BackendError("fixture backend '" + id_ + "' has no rule for the prompt");
    }

private:
    std::string id_;
    std::vector<Rule> rules_;
    std::optional<std::string> fallback_;
    Millis delay_;
};

/// Sleeps before delegating; used for latency and timeout fault injection.
class DelayedBackend final : public LlmBackend {
public:
    DelayedBackend(std::shared_ptr<const LlmBackend> inner, Millis delay) : inner_(std::move(inner)), delay_(delay) {}
    std::string id() const override { return inner_->id(); }
    std::string complete(const CompletionRequest& req) const override {
        std::this_thread::sleep_for(delay_);
        return inner_->complete(req);
    }
    bool has_logprobs() const override { return inner_->has_logprobs(); }
    std::vector<double> logprobs(std::string_view p, const TokenSeq& c) const override { return inner_->logprobs(p, c); }

private:
    std::shared_ptr<const LlmBackend> inner_;
    Millis delay_;
};

/// Caps concurrent calls and enforces a per-call timeout.
///
/// A call that times out keeps running on its worker thread until the inner
/// backend returns; its result is discarded.
class GuardedBackend final : public LlmBackend {
public:
    GuardedBackend(std::shared_ptr<const LlmBackend> inner, Millis timeout = Millis{30000},
                   std::ptrdiff_t max_concurrent = 4)
        : inner_(std::move(inner)), timeout_(timeout), slots_(std::make_shared<std::counting_semaphore<>>(max_concurrent)) {
        if (timeout_.count() <= 0) throw InvalidArgument("backend timeout must be > 0");
        if (max_concurrent < 1) throw InvalidArgument("max concurrent calls must be >= 1");
    }

    std::string id() const override { return inner_->id(); }
    bool has_logprobs() const override { return inner_->has_logprobs(); }
    std::vector<double> logprobs(std::string_view p, const TokenSeq& c) const override { return inner_->logprobs(p, c); }

    std::string complete(const CompletionRequest& req) const override {
        const auto deadline = std::chrono::steady_clock::now() +
                              std::chrono::duration_cast<std::chrono::steady_clock::duration>(timeout_);
        if (!slots_->try_acquire_until(deadline))
            throw BackendTimeout("backend '" + id() + "' concurrency slot not available before timeout");

        auto promise = std::make_shared<std::promise<std::string>>();
        auto result = promise->get_future();
        std::thread([inner = inner_, slots = slots_, promise, req]() {
            try {
                promise->set_value(inner->complete(req));
            } catch (...) {
                promise->set_exception(std::current_exception());
            }
            slots->release();
        }).detach();

        if (result.wait_until(deadline) != std::future_status::ready)
            throw BackendTimeout("backend '" + id() + "' timed out after " + std::to_string(timeout_.count()) + " ms");
        return result.get();
    }

private:
    std::shared_ptr<const LlmBackend> inner_;
    Millis timeout_;
    std::shared_ptr<std::counting_semaphore<>> slots_;
};

} // namespace hybridrag
