#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hybridrag/client_engine.hpp"
#include "hybridrag/coordinator.hpp"
#include "hybridrag/core/errors.hpp"

// JSON encodings for the cloud endpoint (POST /v1/memory) and the
// client-engine socket.
namespace hybridrag::wire {

using nlohmann::json;

inline json to_json(const MemoryRequest& r) {
    return {{"session_id", r.session_id}, {"request_seq", r.request_seq}, {"query_text", r.query_text}, {"k", r.k}};
}

/// Validates and decodes a memory request; `default_k` fills a missing "k".
inline MemoryRequest memory_request_from_json(const json& j, std::size_t default_k) {
    if (!j.is_object()) throw ProtocolError("memory request must be a JSON object");
    auto need = [&](const char* key) -> const json& {
        if (!j.contains(key)) throw ProtocolError(std::string("memory request missing '") + key + "'");
        return j.at(key);
    };
    MemoryRequest r;
    const auto& sid = need("session_id");
    const auto& seq = need("request_seq");
    const auto& q = need("query_text");
    if (!sid.is_string() || sid.get<std::string>().empty()) throw ProtocolError("session_id must be a non-empty string");
    if (!seq.is_number_unsigned() || seq.get<RequestSeq>() == 0) throw ProtocolError("request_seq must be a positive integer");
    if (!q.is_string() || trim(q.get<std::string>()).empty()) throw ProtocolError("query_text must be a non-empty string");
    r.session_id = sid.get<std::string>();
    r.request_seq = seq.get<RequestSeq>();
    r.query_text = q.get<std::string>();
    r.k = default_k;
    if (j.contains("k") && !j.at("k").is_null()) {
        if (!j.at("k").is_number_unsigned() || j.at("k").get<std::size_t>() < 1) throw ProtocolError("k must be >= 1");
        r.k = j.at("k").get<std::size_t>();
    }
    return r;
}

inline json to_json(const MemoryResponse& r) {
    return {{"session_id", r.session_id},
            {"request_seq", r.request_seq},
            {"bullets", r.entry.bullets},
            {"timings",
             {{"retrieval_ms", r.timings.retrieval.count()},
              {"generation_ms", r.timings.generation.count()},
              {"total_ms", r.timings.total.count()}}}};
}

inline MemoryResponse memory_response_from_json(const json& j) {
    try {
        MemoryResponse r;
        r.session_id = j.at("session_id").get<std::string>();
        r.request_seq = j.at("request_seq").get<RequestSeq>();
        r.entry.bullets = j.at("bullets").get<std::vector<std::string>>();
        r.entry.source_request_seq = r.request_seq;
        if (j.contains("timings")) {
            const auto& t = j.at("timings");
            r.timings.retrieval = Millis{t.value("retrieval_ms", 0.0)};
            r.timings.generation = Millis{t.value("generation_ms", 0.0)};
            r.timings.total = Millis{t.value("total_ms", 0.0)};
        }
        return r;
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("malformed memory response: ") + e.what());
    }
}

inline json error_body(const std::string& code, const std::string& message) {
    return {{"error", {{"code", code}, {"message", message}}}};
}

// ---- client-engine socket messages (one JSON object per line) ----

/// Inbound control messages that are not user events.
enum class Control { stats, context };

using Inbound = std::variant<UserEvent, Control>;

inline Inbound inbound_from_json(const json& j) {
    if (!j.is_object() || !j.contains("type") || !j.at("type").is_string())
        throw ProtocolError("message must be an object with a string 'type'");
    const auto type = j.at("type").get<std::string>();
    auto payload = [&]() -> std::string {
        if (!j.contains("payload") || j.at("payload").is_null()) return {};
        if (!j.at("payload").is_string()) throw ProtocolError("'payload' must be a string");
        return j.at("payload").get<std::string>();
    };
    if (type == "type") return UserEvent{TypeEvent{payload()}};
    if (type == "accept") return UserEvent{AcceptEvent{}};
    if (type == "reject") return UserEvent{RejectEvent{payload()}};
    if (type == "stats") return Control::stats;
    if (type == "context") return Control::context;
    throw ProtocolError("unknown message type '" + type + "'");
}

inline json suggestion_message(const Suggestion& s) {
    return {{"type", "suggestion"},
            {"text", s.text},
            {"memory_seq_used", s.memory_seq_used},
            {"latency_ms", s.latency.count()}};
}

inline json memory_update_message(const std::vector<std::string>& bullets, RequestSeq seq, std::size_t staleness) {
    return {{"type", "memory_update"}, {"bullets", bullets}, {"request_seq", seq}, {"staleness_tokens", staleness}};
}

inline json error_message(const std::string& message) { return {{"type", "error"}, {"message", message}}; }

} // namespace hybridrag::wire
