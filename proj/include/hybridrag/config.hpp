#pragma once

#include <cstdlib>
#include <fstream>
#include <memory>
#include <string>

#include <json.hpp>

#include "hybridrag/backend.hpp"
#include "hybridrag/core/types.hpp"
#include "hybridrag/http_backend.hpp"
#include "hybridrag/retriever.hpp"

namespace hybridrag {

/// Which LLM backend to construct.
///
/// kind: "echo" | "uniform" | "takeaway-mock" | "fixture" | "remote"
struct BackendDescriptor {
    std::string kind = "takeaway-mock";
    std::string fixture_path;
    std::string endpoint;
    std::string token;
    std::size_t vocab_size = 100;
    std::string reply = "lorem ipsum";
    double delay_ms = 0;
};

inline BackendDescriptor backend_descriptor_from_json(const nlohmann::json& j) {
    BackendDescriptor d;
    d.kind = j.value("kind", d.kind);
    d.fixture_path = j.value("fixture", d.fixture_path);
    d.endpoint = j.value("endpoint", d.endpoint);
    d.token = j.value("token", d.token);
    d.vocab_size = j.value("vocab_size", d.vocab_size);
    d.reply = j.value("reply", d.reply);
    d.delay_ms = j.value("delay_ms", d.delay_ms);
    return d;
}

inline std::shared_ptr<const LlmBackend> make_backend(const BackendDescriptor& d, Millis timeout = Millis{30000}) {
    std::shared_ptr<const LlmBackend> b;
    if (d.kind == "echo") b = std::make_shared<EchoMemoryBackend>();
    else if (d.kind == "uniform") b = std::make_shared<UniformBackend>(d.vocab_size, d.reply);
    else if (d.kind == "takeaway-mock") b = std::make_shared<TakeawayMockBackend>();
    else if (d.kind == "fixture") b = std::make_shared<FixtureBackend>(FixtureBackend::load(d.fixture_path));
    else if (d.kind == "remote") {
        if (d.endpoint.empty()) throw InvalidArgument("remote backend needs an endpoint");
        b = std::make_shared<HttpBackend>("remote:" + d.endpoint, d.endpoint, d.token, timeout);
    } else {
        throw InvalidArgument("unknown backend kind '" + d.kind + "'");
    }
    if (d.delay_ms > 0) b = std::make_shared<DelayedBackend>(b, Millis{d.delay_ms});
    return b;
}

inline std::shared_ptr<const Embedder> make_embedder(const std::string& embedder_id) {
    const std::string prefix = "hashed-bow-v1-";
    if (embedder_id.starts_with(prefix)) return std::make_shared<HashedBagEmbedder>(std::stoul(embedder_id.substr(prefix.size())));
    throw InvalidArgument("unknown embedder '" + embedder_id + "'");
}

inline EngineConfig engine_config_from_json(const nlohmann::json& j) {
    EngineConfig c;
    if (j.contains("tau")) {
        // null or a negative number disables triggering
        const auto& t = j.at("tau");
        c.tau = (t.is_null() || (t.is_number() && t.get<double>() < 0)) ? kNeverTrigger : t.get<std::size_t>();
    }
    c.memory_capacity = j.value("memory_capacity", c.memory_capacity);
    c.k = j.value("k", c.k);
    c.chunk_tokens = j.value("chunk_tokens", c.chunk_tokens);
    c.max_suggest_tokens = j.value("max_suggest_tokens", c.max_suggest_tokens);
    c.max_memory_tokens = j.value("max_memory_tokens", c.max_memory_tokens);
    c.max_passage_tokens = j.value("max_passage_tokens", c.max_passage_tokens);
    c.passages_per_call = j.value("passages_per_call", c.passages_per_call);
    c.prompt_token_budget = j.value("prompt_token_budget", c.prompt_token_budget);
    c.min_query_tokens = j.value("min_query_tokens", c.min_query_tokens);
    c.max_query_tokens = j.value("max_query_tokens", c.max_query_tokens);
    const auto mode = j.value("diff_mode", std::string("since_last_request"));
    if (mode == "since_last_request") c.diff_mode = DiffMode::since_last_request;
    else if (mode == "previous_step") c.diff_mode = DiffMode::previous_step;
    else throw InvalidArgument("unknown diff_mode '" + mode + "'");
    c.validate();
    return c;
}

struct ServiceConfig {
    std::string listen_host = "127.0.0.1";
    int listen_port = 8700;
    std::string corpus_path;
    std::string index_path; ///< optional prebuilt index
    std::string embedder_id = "hashed-bow-v1-256";
    BackendDescriptor backend;
    std::string auth_token; ///< bearer token clients must present; empty disables
    Millis timeout{30000};
    std::ptrdiff_t max_concurrent_calls = 4;
    EngineConfig engine;

    void validate() const {
        engine.validate();
        if (timeout.count() <= 0) throw InvalidArgument("timeout must be > 0");
    }
};

/// Reads a JSON config; HYBRIDRAG_BACKEND_TOKEN, HYBRIDRAG_AUTH_TOKEN and
/// HYBRIDRAG_BACKEND_ENDPOINT override the file.
inline ServiceConfig service_config_from_json(const nlohmann::json& j) {
    ServiceConfig c;
    c.listen_host = j.value("listen_host", c.listen_host);
    c.listen_port = j.value("listen_port", c.listen_port);
    c.corpus_path = j.value("corpus", c.corpus_path);
    c.index_path = j.value("index", c.index_path);
    c.embedder_id = j.value("embedder_id", c.embedder_id);
    if (j.contains("backend")) c.backend = backend_descriptor_from_json(j.at("backend"));
    c.auth_token = j.value("auth_token", c.auth_token);
    c.timeout = Millis{j.value("timeout_ms", c.timeout.count())};
    c.max_concurrent_calls = j.value("max_concurrent_calls", c.max_concurrent_calls);
    c.engine = engine_config_from_json(j.value("engine", nlohmann::json::object()));
    if (const char* v = std::getenv("HYBRIDRAG_BACKEND_TOKEN")) c.backend.token = v;
    if (const char* v = std::getenv("HYBRIDRAG_BACKEND_ENDPOINT")) c.backend.endpoint = v;
    if (const char* v = std::getenv("HYBRIDRAG_AUTH_TOKEN")) c.auth_token = v;
    c.validate();
    return c;
}

inline nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument("malformed JSON in " + path + ": " + e.what());
    }
}

} // namespace hybridrag
