#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <string>
#include <vector>

#include "hybridrag/core/errors.hpp"

namespace hybridrag {

/// Milliseconds as a double; used for both wall-clock and virtual time.
using Millis = std::chrono::duration<double, std::milli>;

using RequestSeq = std::uint64_t;

/// Which text the coordinator diffs the current context against.
enum class DiffMode {
    since_last_request, ///< snapshot taken when the last request was issued
    previous_step,      ///< the context as of the previous observed step
};

struct Context {
    std::string text;
    std::string snapshot_at_last_request;
    std::uint64_t step_counter = 0;
};

/// One cloud-generated bundle of takeaways.
struct MemoryEntry {
    std::vector<std::string> bullets;
    RequestSeq source_request_seq = 0;
    Millis created_at{0};
};

inline constexpr std::size_t kMaxBulletWords = 64;

/// Bounded FIFO of memory entries, oldest first.
class Memory {
public:
    explicit Memory(std::size_t capacity = 4) : capacity_(capacity) {
        if (capacity_ == 0) throw InvalidArgument("memory capacity must be >= 1");
    }

    /// Appends, evicting the oldest entry once over capacity. Returns the
    /// number of evicted entries (0 or 1).
    std::size_t push(MemoryEntry e) {
        if (!entries_.empty() && e.source_request_seq <= entries_.back().source_request_seq)
            throw InvalidArgument("memory entries must arrive in ascending request_seq order");
        entries_.push_back(std::move(e));
        std::size_t evicted = 0;
        while (entries_.size() > capacity_) {
            entries_.pop_front();
            ++evicted;
        }
        return evicted;
    }

    const std::deque<MemoryEntry>& entries() const noexcept { return entries_; }
    std::size_t capacity() const noexcept { return capacity_; }
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }

    /// Highest request_seq present, 0 when empty.
    RequestSeq newest_seq() const noexcept { return entries_.empty() ? 0 : entries_.back().source_request_seq; }

    std::vector<std::string> all_bullets() const {
        std::vector<std::string> out;
        for (const auto& e : entries_) out.insert(out.end(), e.bullets.begin(), e.bullets.end());
        return out;
    }

private:
    std::size_t capacity_;
    std::deque<MemoryEntry> entries_;
};

inline constexpr std::size_t kNeverTrigger = std::numeric_limits<std::size_t>::max();

struct EngineConfig {
    std::size_t tau = 10;
    std::size_t memory_capacity = 4;
    std::size_t k = 3;
    std::size_t chunk_tokens = 128;
    std::size_t max_suggest_tokens = 15;
    std::size_t max_memory_tokens = 256;

    // memory generation
    std::size_t max_passage_tokens = 128;
    std::size_t passages_per_call = 4;
    std::size_t prompt_token_budget = 3000;

    // incremental query padding
    std::size_t min_query_tokens = 8;
    std::size_t max_query_tokens = 64;

    DiffMode diff_mode = DiffMode::since_last_request;

    void validate() const {
        if (k < 1) throw InvalidArgument("k must be >= 1");
        if (chunk_tokens < 1) throw InvalidArgument("chunk_tokens must be >= 1");
        if (memory_capacity < 1) throw InvalidArgument("memory_capacity must be >= 1");
        if (max_passage_tokens < 16) throw InvalidArgument("max_passage_tokens must be >= 16");
        if (passages_per_call < 1) throw InvalidArgument("passages_per_call must be >= 1");
        if (max_query_tokens < 1 || min_query_tokens > max_query_tokens)
            throw InvalidArgument("query token bounds are inconsistent");
    }
};

} // namespace hybridrag
