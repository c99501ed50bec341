#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <type_traits>
#include <variant>

#include "hybridrag/backend.hpp"
#include "hybridrag/coordinator.hpp"
#include "hybridrag/core/tokenizer.hpp"
#include "hybridrag/core/types.hpp"
#include "hybridrag/prompts.hpp"

namespace hybridrag {

/// Instruction-enhanced prompt; the bare context when memory is empty.
inline std::string build_completion_prompt(const std::string& context_text, const Memory& memory) {
    if (context_text.empty()) throw InvalidArgument("completion prompt needs a non-empty context");
    if (memory.empty()) return context_text;
    std::string out{prompts::kReferencePrefix};
    bool first = true;
    for (const auto& bullet : memory.all_bullets()) {
        if (!first) out.push_back('\n');
        first = false;
        out += bullet;
    }
    out += "\n\n";
    out += prompts::kCompletionInstruction;
    out += "\n\n";
    out += context_text;
    return out;
}

struct Suggestion {
    std::string text;
    std::string prompt_used;
    RequestSeq memory_seq_used = 0;
    Millis latency{0};
};

/// Caps `text` at `max_tokens` tokens; untouched when already within the cap.
inline std::string truncate_tokens(const std::string& text, std::size_t max_tokens) {
    auto seq = tokenize(text);
    if (seq.size() <= max_tokens) return text;
    seq.tokens.resize(max_tokens);
    return detokenize(seq);
}

/// Appends an accepted suggestion, inserting a separating space when the
/// context ends mid-word and the suggestion does not start with whitespace
/// or closing punctuation.
inline std::string join_suggestion(const std::string& context, const std::string& suggestion) {
    if (context.empty() || suggestion.empty()) return context + suggestion;
    const auto last = static_cast<unsigned char>(context.back());
    const auto first = static_cast<unsigned char>(suggestion.front());
    const bool ctx_space = detail::whitespace_len(context, context.size() - 1) > 0 || last >= 0x80;
    const bool sug_space = detail::whitespace_len(suggestion, 0) > 0;
    const bool sug_closer = std::string_view(",.;:!?)]}%").find(static_cast<char>(first)) != std::string_view::npos;
    if (ctx_space || sug_space || sug_closer || detail::attaches_right(std::string(1, static_cast<char>(last))))
        return context + suggestion;
    return context + " " + suggestion;
}

struct TypeEvent {
    std::string delta;
};
struct AcceptEvent {};
struct RejectEvent {
    std::string new_input;
};
using UserEvent = std::variant<TypeEvent, AcceptEvent, RejectEvent>;

/// One writing session: the coordinator plus accept/reject bookkeeping.
/// Owned by a single logical task.
class Session {
public:
    Session(std::string session_id, EngineConfig cfg) : coord_(std::move(session_id), cfg), cfg_(cfg) {}

    /// Applies a user event and runs the coordinator; returns the memory
    /// request to send, if any.
    std::optional<MemoryRequest> step(const UserEvent& event) {
        std::string text = coord_.context().text;
        std::visit(
            [&](const auto& e) {
                using E = std::decay_t<decltype(e)>;
                if constexpr (std::is_same_v<E, AcceptEvent>) {
                    if (!pending_) throw InvalidArgument("accept without a pending suggestion");
                    text = join_suggestion(text, pending_->text);
                    accepted_history_ = text;
                } else if constexpr (std::is_same_v<E, RejectEvent>) {
                    if (!pending_) throw InvalidArgument("reject without a pending suggestion");
                    text += e.new_input;
                } else {
                    text += e.delta;
                }
            },
            event);
        pending_.reset();
        return coord_.observe(std::move(text));
    }

    /// Produces a suggestion from the current context and memory. Never
    /// waits on in-flight memory requests.
    Suggestion suggest(const LlmBackend& backend) {
        const auto start = std::chrono::steady_clock::now();
        const Memory& mem = coord_.current_memory();
        Suggestion s;
        s.prompt_used = build_completion_prompt(coord_.context().text, mem);
        s.memory_seq_used = mem.newest_seq();
        try {
            s.text = backend.complete({s.prompt_used, cfg_.max_suggest_tokens, 0.0, 1.0});
        } catch (const std::exception& e) {
            pending_.reset();
            throw SuggestionFailed(std::string("client backend failed: ") + e.what());
        }
        s.text = truncate_tokens(s.text, cfg_.max_suggest_tokens);
        s.latency = std::chrono::duration_cast<Millis>(std::chrono::steady_clock::now() - start);
        pending_ = s;
        return s;
    }

    ApplyResult apply_response(const MemoryResponse& resp) { return coord_.apply_response(resp); }
    std::optional<MemoryRequest> request_failed(RequestSeq seq) { return coord_.request_failed(coord_.session_id(), seq); }

    const Coordinator& coordinator() const noexcept { return coord_; }
    const std::string& text() const noexcept { return coord_.context().text; }
    const std::string& accepted_history() const noexcept { return accepted_history_; }
    const std::optional<Suggestion>& pending_suggestion() const noexcept { return pending_; }
    const EngineConfig& config() const noexcept { return cfg_; }

private:
    Coordinator coord_;
    EngineConfig cfg_;
    std::string accepted_history_;
    std::optional<Suggestion> pending_;
};

} // namespace hybridrag
