#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <utility>

#include "hybridrag/core/levenshtein.hpp"
#include "hybridrag/core/tokenizer.hpp"
#include "hybridrag/core/types.hpp"

namespace hybridrag {

struct MemoryRequest {
    std::string session_id;
    RequestSeq request_seq = 0;
    std::string query_text;
    std::size_t k = 3;
};

struct StageTimings {
    Millis retrieval{0};
    Millis generation{0};
    Millis total{0};
};

struct MemoryResponse {
    std::string session_id;
    RequestSeq request_seq = 0;
    MemoryEntry entry;
    StageTimings timings;
};

/// The new part of the context to retrieve with.
///
/// Takes the tokens after the longest common token prefix with the snapshot.
/// Fewer than `min_tokens` new tokens fall back to the last `max_tokens`
/// tokens of the text; longer suffixes are capped to their last `max_tokens`.
inline std::string incremental_query(const Context& ctx, std::size_t min_tokens = 8, std::size_t max_tokens = 64) {
    const TokenSeq cur = tokenize(ctx.text);
    const TokenSeq snap = tokenize(ctx.snapshot_at_last_request);
    if (cur == snap) throw InvalidArgument("incremental_query: context has no new content");

    std::size_t prefix = 0;
    while (prefix < cur.size() && prefix < snap.size() && cur[prefix] == snap[prefix]) ++prefix;

    std::size_t begin = prefix;
    if (cur.size() - prefix < min_tokens) begin = cur.size() - std::min(max_tokens, cur.size());
    else if (cur.size() - prefix > max_tokens) begin = cur.size() - max_tokens;

    std::span<const std::string> slice(cur.tokens);
    std::string q = detokenize(slice.subspan(begin));
    if (q.empty()) throw InvalidArgument("incremental_query: context is empty");
    return q;
}

/// Result of delivering a response to the coordinator.
struct ApplyResult {
    bool applied = false;     ///< false when dropped as stale
    std::size_t evicted = 0;  ///< entries evicted to stay within capacity
    std::optional<MemoryRequest> follow_up; ///< deferred threshold crossing, now issued
};

/// Client-side augmentation coordinator for one session.
///
/// Diffs the context against a reference text, issues at most one memory
/// request at a time and keeps the bounded FIFO memory. Not thread-safe:
/// one logical owner drives observe/apply_response.
class Coordinator {
public:
    Coordinator(std::string session_id, EngineConfig cfg)
        : session_id_(std::move(session_id)), cfg_(cfg), memory_(cfg.memory_capacity) {
        cfg_.validate();
    }

    /// Records the new context text and issues a request iff the token edit
    /// distance exceeds tau and nothing is in flight.
    std::optional<MemoryRequest> observe(std::string new_text) {
        std::string previous = std::exchange(ctx_.text, std::move(new_text));
        ++ctx_.step_counter;
        const std::string& base =
            cfg_.diff_mode == DiffMode::previous_step ? previous : ctx_.snapshot_at_last_request;
        const std::size_t ed = levenshtein(tokenize(ctx_.text), tokenize(base));
        last_distance_ = ed;
        if (ed <= cfg_.tau) return std::nullopt;
        if (in_flight_) {
            deferred_ = true;
            return std::nullopt;
        }
        return issue();
    }

    /// Delivers a cloud response. Stale responses (seq <= last applied) are
    /// dropped. A threshold crossing deferred during flight is re-checked.
    ApplyResult apply_response(const MemoryResponse& resp) {
        check_response_header(resp.session_id, resp.request_seq);
        if (resp.entry.bullets.empty()) throw ProtocolError("memory response carries no bullets");
        ApplyResult out;
        if (resp.request_seq <= last_applied_seq_) return out;

        MemoryEntry entry = resp.entry;
        entry.source_request_seq = resp.request_seq;
        out.evicted = memory_.push(std::move(entry));
        out.applied = true;
        last_applied_seq_ = resp.request_seq;
        if (auto it = issued_snapshots_.find(resp.request_seq); it != issued_snapshots_.end())
            applied_snapshot_ = it->second;
        issued_snapshots_.erase(issued_snapshots_.begin(), issued_snapshots_.upper_bound(resp.request_seq));
        if (resp.request_seq == last_issued_seq_) {
            in_flight_ = false;
            out.follow_up = recheck();
        }
        return out;
    }

    /// The outstanding request failed; the memory stays as it is.
    std::optional<MemoryRequest> request_failed(const std::string& session_id, RequestSeq seq) {
        check_response_header(session_id, seq);
        if (seq != last_issued_seq_ || !in_flight_) return std::nullopt;
        in_flight_ = false;
        return recheck();
    }

    /// Never blocks; unaffected by in-flight requests.
    const Memory& current_memory() const noexcept { return memory_; }

    /// Token edit distance between the context the newest applied memory was
    /// requested from and the current context. Empty before any memory.
    std::optional<std::size_t> staleness_tokens() const {
        if (!applied_snapshot_) return std::nullopt;
        return levenshtein(tokenize(*applied_snapshot_), tokenize(ctx_.text));
    }

    const std::string& session_id() const noexcept { return session_id_; }
    const EngineConfig& config() const noexcept { return cfg_; }
    const Context& context() const noexcept { return ctx_; }
    RequestSeq last_issued_seq() const noexcept { return last_issued_seq_; }
    RequestSeq last_applied_seq() const noexcept { return last_applied_seq_; }
    bool in_flight() const noexcept { return in_flight_; }
    std::size_t last_distance() const noexcept { return last_distance_; }

private:
    void check_response_header(const std::string& session_id, RequestSeq seq) const {
        if (session_id != session_id_) throw ProtocolError("unknown session_id '" + session_id + "'");
        if (seq == 0 || seq > last_issued_seq_)
            throw ProtocolError("request_seq " + std::to_string(seq) + " was never issued");
    }

    std::optional<MemoryRequest> recheck() {
        bool crossed = false;
        if (cfg_.diff_mode == DiffMode::previous_step) {
            crossed = deferred_;
        } else {
            crossed = levenshtein(tokenize(ctx_.text), tokenize(ctx_.snapshot_at_last_request)) > cfg_.tau;
        }
        deferred_ = false;
        if (!crossed) return std::nullopt;
        return issue();
    }

    std::optional<MemoryRequest> issue() {
        std::string query;
        try {
            query = incremental_query(ctx_, cfg_.min_query_tokens, cfg_.max_query_tokens);
        } catch (const InvalidArgument&) {
            return std::nullopt;
        }
        ctx_.snapshot_at_last_request = ctx_.text;
        ++last_issued_seq_;
        in_flight_ = true;
        deferred_ = false;
        issued_snapshots_[last_issued_seq_] = ctx_.text;
        return MemoryRequest{session_id_, last_issued_seq_, std::move(query), cfg_.k};
    }

    std::string session_id_;
    EngineConfig cfg_;
    Context ctx_;
    Memory memory_;
    RequestSeq last_issued_seq_ = 0;
    RequestSeq last_applied_seq_ = 0;
    bool in_flight_ = false;
    bool deferred_ = false;
    std::size_t last_distance_ = 0;
    std::map<RequestSeq, std::string> issued_snapshots_;
    std::optional<std::string> applied_snapshot_;
};

} // namespace hybridrag
