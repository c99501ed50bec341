#pragma once

#include <atomic>
#include <chrono>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "hybridrag/backend.hpp"
#include "hybridrag/config.hpp"
#include "hybridrag/core/log.hpp"
#include "hybridrag/memgen.hpp"
#include "hybridrag/retriever.hpp"
#include "hybridrag/wire.hpp"

namespace hybridrag {

/// The service has no index yet.
class NotReady : public Error {
public:
    using Error::Error;
};

struct HealthStatus {
    std::string status; ///< "initializing" or "ok"
    std::size_t index_chunks = 0;
    std::string embedder_id;
    std::string backend_id;
    double uptime_s = 0;

    nlohmann::json to_json() const {
        return {{"status", status},
                {"index_chunks", index_chunks},
                {"embedder_id", embedder_id},
                {"backend_id", backend_id},
                {"uptime_s", uptime_s}};
    }
};

/// Cloud half: owns the index and the takeaway LLM, turns memory requests
/// into memory responses. Holds no per-session state.
class CloudService {
public:
    CloudService(std::shared_ptr<const Embedder> embedder, std::shared_ptr<const LlmBackend> backend, EngineConfig cfg,
                 Millis timeout = Millis{30000}, std::ptrdiff_t max_concurrent_calls = 4)
        : embedder_(std::move(embedder)),
          backend_(std::make_shared<GuardedBackend>(std::move(backend), timeout, max_concurrent_calls)), cfg_(cfg),
          started_(std::chrono::steady_clock::now()) {
        cfg_.validate();
    }

    void set_index(CorpusIndex index) {
        if (index.embedder_id() != embedder_->id())
            throw IndexError("index embedder '" + index.embedder_id() + "' does not match service embedder '" +
                             embedder_->id() + "'");
        auto p = std::make_shared<const CorpusIndex>(std::move(index));
        std::lock_guard lk(mu_);
        index_ = std::move(p);
    }

    void ingest(const std::vector<Document>& docs) { set_index(hybridrag::ingest(docs, *embedder_, cfg_.chunk_tokens)); }

    /// Throws ProtocolError for bad requests (no backend call is made),
    /// NotReady before an index is set and MemoryGenerationFailed when the
    /// backend fails or yields no bullets.
    MemoryResponse handle_memory_request(const MemoryRequest& req) const {
        const auto t0 = std::chrono::steady_clock::now();
        if (req.session_id.empty()) throw ProtocolError("session_id must be non-empty");
        if (req.request_seq == 0) throw ProtocolError("request_seq must be positive");
        if (trim(req.query_text).empty()) throw ProtocolError("query_text must be non-empty");
        if (req.k < 1) throw ProtocolError("k must be >= 1");
        auto index = current_index();
        if (!index) throw NotReady("index is still loading");
        if (index->empty()) throw NotReady("index is empty");

        EngineConfig cfg = cfg_;
        cfg.k = req.k;
        auto gen = generate_memory(req.query_text, *index, *embedder_, *backend_, cfg);
        MemoryResponse resp;
        resp.session_id = req.session_id;
        resp.request_seq = req.request_seq;
        resp.entry = std::move(gen.entry);
        resp.entry.source_request_seq = req.request_seq;
        resp.timings = gen.timings;
        resp.timings.total = std::chrono::duration_cast<Millis>(std::chrono::steady_clock::now() - t0);
        return resp;
    }

    HealthStatus healthcheck() const {
        HealthStatus h;
        auto index = current_index();
        h.status = index ? "ok" : "initializing";
        h.index_chunks = index ? index->size() : 0;
        h.embedder_id = embedder_->id();
        h.backend_id = backend_->id();
        h.uptime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
        return h;
    }

    const EngineConfig& config() const noexcept { return cfg_; }

private:
    std::shared_ptr<const CorpusIndex> current_index() const {
        std::lock_guard lk(mu_);
        return index_;
    }

    std::shared_ptr<const Embedder> embedder_;
    std::shared_ptr<const LlmBackend> backend_;
    EngineConfig cfg_;
    std::chrono::steady_clock::time_point started_;
    mutable std::mutex mu_;
    std::shared_ptr<const CorpusIndex> index_;
};

/// HTTP front end: POST /v1/memory, GET /v1/health.
class CloudHttpServer {
public:
    explicit CloudHttpServer(CloudService& service, std::string auth_token = {})
        : service_(service), auth_token_(std::move(auth_token)) {
        server_.Post("/v1/memory", [this](const httplib::Request& req, httplib::Response& res) { on_memory(req, res); });
        server_.Get("/v1/health", [this](const httplib::Request&, httplib::Response& res) {
            res.set_content(service_.healthcheck().to_json().dump(), "application/json");
        });
    }

    ~CloudHttpServer() { stop(); }
    CloudHttpServer(const CloudHttpServer&) = delete;
    CloudHttpServer& operator=(const CloudHttpServer&) = delete;

    /// Binds and serves on a background thread. Port 0 picks a free port.
    int start(const std::string& host, int port) {
        if (port == 0) port = server_.bind_to_any_port(host);
        else if (!server_.bind_to_port(host, port)) port = -1;
        if (port < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
        return port;
    }

    /// Serves on the calling thread until stop().
    void run(const std::string& host, int port) {
        if (!server_.listen(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
    }

    void stop() {
        server_.stop();
        if (thread_.joinable()) thread_.join();
    }

private:
    void on_memory(const httplib::Request& req, httplib::Response& res) {
        auto reply = [&](int status, const nlohmann::json& body) {
            res.status = status;
            res.set_content(body.dump(), "application/json");
        };
        if (!auth_token_.empty() && req.get_header_value("Authorization") != "Bearer " + auth_token_)
            return reply(401, wire::error_body("unauthorized", "missing or wrong bearer token"));
        try {
            const auto j = nlohmann::json::parse(req.body);
            const auto mreq = wire::memory_request_from_json(j, service_.config().k);
            reply(200, wire::to_json(service_.handle_memory_request(mreq)));
        } catch (const nlohmann::json::exception& e) {
            reply(400, wire::error_body("bad_request", std::string("malformed JSON: ") + e.what()));
        } catch (const ProtocolError& e) {
            reply(400, wire::error_body("bad_request", e.what()));
        } catch (const NotReady& e) {
            reply(503, wire::error_body("initializing", e.what()));
        } catch (const MemoryGenerationFailed& e) {
            log::warn(std::string("memory generation failed: ") + e.what());
            reply(500, wire::error_body(e.cause(), e.what()));
        } catch (const std::exception& e) {
            reply(500, wire::error_body("internal", e.what()));
        }
    }

    CloudService& service_;
    std::string auth_token_;
    httplib::Server server_;
    std::thread thread_;
};

} // namespace hybridrag
