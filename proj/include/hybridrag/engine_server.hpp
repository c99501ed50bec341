#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <variant>

#include <httplib.h>
#include <json.hpp>

#include "hybridrag/client_engine.hpp"
#include "hybridrag/cloud_service.hpp"
#include "hybridrag/core/log.hpp"
#include "hybridrag/http_backend.hpp"
#include "hybridrag/net.hpp"
#include "hybridrag/wire.hpp"

namespace hybridrag {

struct TransportFailure {
    std::string session_id;
    RequestSeq request_seq = 0;
    std::string reason;
};

using MemoryOutcome = std::variant<MemoryResponse, TransportFailure>;

/// Carries memory requests to the cloud. send() returns immediately; `done`
/// runs later on a transport thread.
class MemoryTransport {
public:
    using Callback = std::function<void(MemoryOutcome)>;
    virtual ~MemoryTransport() = default;
    virtual void send(MemoryRequest req, Callback done) = 0;
};

namespace detail {

/// Runs each job on its own thread; joins them all on destruction.
class JobThreads {
public:
    ~JobThreads() { join_all(); }

    void spawn(std::function<void()> job) {
        std::lock_guard lk(mu_);
        threads_.emplace_back(std::move(job));
    }

    void join_all() {
        std::list<std::thread> ts;
        {
            std::lock_guard lk(mu_);
            ts.swap(threads_);
        }
        for (auto& t : ts)
            if (t.joinable()) t.join();
    }

private:
    std::mutex mu_;
    std::list<std::thread> threads_;
};

} // namespace detail

/// POSTs to {cloud_url}/v1/memory.
class HttpMemoryTransport final : public MemoryTransport {
public:
    HttpMemoryTransport(std::string cloud_url, std::string token = {}, Millis timeout = Millis{30000})
        : url_(std::move(cloud_url)), token_(std::move(token)), timeout_(timeout) {}

    void send(MemoryRequest req, Callback done) override {
        jobs_.spawn([this, req = std::move(req), done = std::move(done)] { done(call(req)); });
    }

private:
    MemoryOutcome call(const MemoryRequest& req) const {
        httplib::Client cli(url_);
        const auto ms = static_cast<long>(timeout_.count());
        cli.set_read_timeout(ms / 1000, (ms % 1000) * 1000);
        httplib::Headers headers;
        if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);
        auto res = cli.Post("/v1/memory", headers, wire::to_json(req).dump(), "application/json");
        if (!res) return TransportFailure{req.session_id, req.request_seq, httplib::to_string(res.error())};
        if (res->status != 200)
            return TransportFailure{req.session_id, req.request_seq, "HTTP " + std::to_string(res->status) + ": " + res->body};
        try {
            return wire::memory_response_from_json(nlohmann::json::parse(res->body));
        } catch (const std::exception& e) {
            return TransportFailure{req.session_id, req.request_seq, e.what()};
        }
    }

    std::string url_;
    std::string token_;
    Millis timeout_;
    detail::JobThreads jobs_;
};

/// Calls a CloudService in-process on a worker thread.
class InProcessTransport final : public MemoryTransport {
public:
    explicit InProcessTransport(const CloudService& service) : service_(service) {}

    void send(MemoryRequest req, Callback done) override {
        jobs_.spawn([this, req = std::move(req), done = std::move(done)] {
            try {
                done(service_.handle_memory_request(req));
            } catch (const std::exception& e) {
                done(TransportFailure{req.session_id, req.request_seq, e.what()});
            }
        });
    }

private:
    const CloudService& service_;
    detail::JobThreads jobs_;
};

struct EngineStats {
    std::size_t events = 0;
    std::size_t requests_issued = 0;
    std::size_t responses_applied = 0;
    std::size_t responses_stale = 0;
    std::size_t responses_failed = 0;
    std::size_t seq_mismatches = 0;
    std::size_t suggestions = 0;
    std::size_t suggestion_failures = 0;
    double max_suggest_latency_ms = 0;

    nlohmann::json to_json() const {
        return {{"type", "stats"},
                {"events", events},
                {"requests_issued", requests_issued},
                {"responses_applied", responses_applied},
                {"responses_stale", responses_stale},
                {"responses_failed", responses_failed},
                {"seq_mismatches", seq_mismatches},
                {"suggestions", suggestions},
                {"suggestion_failures", suggestion_failures},
                {"max_suggest_latency_ms", max_suggest_latency_ms}};
    }
};

/// Single owner of one Session. User events and memory outcomes are queued
/// and handled in arrival order on the loop thread; outbound messages go to
/// `emit`.
class EngineLoop {
public:
    using Emit = std::function<void(const nlohmann::json&)>;

    EngineLoop(std::string session_id, EngineConfig cfg, std::shared_ptr<const LlmBackend> client_backend,
               std::shared_ptr<MemoryTransport> transport, Emit emit)
        : session_(std::move(session_id), cfg), backend_(std::move(client_backend)), transport_(std::move(transport)),
          emit_(std::move(emit)) {
        thread_ = std::thread([this] { run(); });
    }

    ~EngineLoop() {
        stop();
        transport_.reset(); // joins transport jobs while the queue is still alive
    }
    EngineLoop(const EngineLoop&) = delete;
    EngineLoop& operator=(const EngineLoop&) = delete;

    void post(wire::Inbound msg) { push(Item{std::move(msg)}); }

    void stop() {
        {
            std::lock_guard lk(mu_);
            if (stopping_) return;
            stopping_ = true;
        }
        cv_.notify_all();
        if (thread_.joinable()) thread_.join();
    }

private:
    struct Item {
        std::variant<wire::Inbound, MemoryOutcome> msg;
    };

    void push(Item item) {
        {
            std::lock_guard lk(mu_);
            if (stopping_) return;
            queue_.push_back(std::move(item));
        }
        cv_.notify_one();
    }

    void run() {
        for (;;) {
            Item item;
            {
                std::unique_lock lk(mu_);
                cv_.wait(lk, [&] { return stopping_ || !queue_.empty(); });
                if (stopping_) return;
                item = std::move(queue_.front());
                queue_.pop_front();
            }
            std::visit([this](auto& m) { handle(m); }, item.msg);
        }
    }

    void handle(wire::Inbound& in) {
        if (auto* ctl = std::get_if<wire::Control>(&in)) {
            if (*ctl == wire::Control::stats) {
                auto s = stats_;
                s.seq_mismatches += echo_mismatches_.load();
                emit_(s.to_json());
            }
            else emit_({{"type", "context"}, {"text", session_.text()}});
            return;
        }
        ++stats_.events;
        try {
            dispatch(session_.step(std::get<UserEvent>(in)));
        } catch (const InvalidArgument& e) {
            emit_(wire::error_message(e.what()));
            return;
        }
        if (session_.text().empty()) return;
        try {
            const auto s = session_.suggest(*backend_);
            ++stats_.suggestions;
            stats_.max_suggest_latency_ms = std::max(stats_.max_suggest_latency_ms, s.latency.count());
            emit_(wire::suggestion_message(s));
        } catch (const SuggestionFailed& e) {
            ++stats_.suggestion_failures;
            log::warn(e.what());
        }
    }

    void handle(MemoryOutcome& outcome) {
        if (auto* fail = std::get_if<TransportFailure>(&outcome)) {
            ++stats_.responses_failed;
            log::warn("memory request " + std::to_string(fail->request_seq) + " failed: " + fail->reason);
            dispatch(session_.request_failed(fail->request_seq));
            return;
        }
        auto& resp = std::get<MemoryResponse>(outcome);
        try {
            auto r = session_.apply_response(resp);
            if (r.applied) {
                ++stats_.responses_applied;
                emit_(wire::memory_update_message(resp.entry.bullets, resp.request_seq,
                                                  session_.coordinator().staleness_tokens().value_or(0)));
            } else {
                ++stats_.responses_stale;
            }
            dispatch(std::move(r.follow_up));
        } catch (const ProtocolError& e) {
            ++stats_.seq_mismatches;
            log::warn(std::string("rejected memory response: ") + e.what());
        }
    }

    void dispatch(std::optional<MemoryRequest> req) {
        if (!req) return;
        ++stats_.requests_issued;
        const auto expected_seq = req->request_seq;
        const auto expected_session = req->session_id;
        transport_->send(std::move(*req), [this, expected_seq, expected_session](MemoryOutcome o) {
            if (auto* r = std::get_if<MemoryResponse>(&o);
                r && (r->request_seq != expected_seq || r->session_id != expected_session)) {
                ++echo_mismatches_;
                o = TransportFailure{expected_session, expected_seq,
                                     "response echoed seq " + std::to_string(r->request_seq)};
            }
            push(Item{std::move(o)});
        });
    }

    Session session_;
    std::shared_ptr<const LlmBackend> backend_;
    std::shared_ptr<MemoryTransport> transport_;
    Emit emit_;
    EngineStats stats_;
    std::atomic<std::size_t> echo_mismatches_{0};

    std::mutex mu_;
    std::condition_variable cv_;
    std::deque<Item> queue_;
    bool stopping_ = false;
    std::thread thread_;
};

/// Client-engine socket: each TCP connection is one session speaking
/// newline-delimited JSON.
class EngineSocketServer {
public:
    using TransportFactory = std::function<std::shared_ptr<MemoryTransport>()>;

    EngineSocketServer(EngineConfig cfg, std::shared_ptr<const LlmBackend> client_backend, TransportFactory transports)
        : cfg_(cfg), backend_(std::move(client_backend)), transports_(std::move(transports)) {}

    ~EngineSocketServer() { stop(); }
    EngineSocketServer(const EngineSocketServer&) = delete;
    EngineSocketServer& operator=(const EngineSocketServer&) = delete;

    int start(const std::string& host, int port) {
        listener_ = net::listen_tcp(host, port, port_);
        accept_thread_ = std::thread([this] { accept_loop(); });
        return port_;
    }

    void wait() {
        if (accept_thread_.joinable()) accept_thread_.join();
    }

    void stop() {
        if (stopped_.exchange(true)) return;
        if (listener_) ::shutdown(listener_.get(), SHUT_RDWR);
        if (accept_thread_.joinable()) accept_thread_.join();
        std::list<std::unique_ptr<Connection>> conns;
        {
            std::lock_guard lk(mu_);
            conns.swap(connections_);
        }
        for (auto& c : conns) c->socket->shutdown();
        for (auto& c : conns)
            if (c->reader.joinable()) c->reader.join();
        listener_.reset();
    }

    int port() const noexcept { return port_; }

private:
    struct Connection {
        std::unique_ptr<net::LineSocket> socket;
        std::unique_ptr<EngineLoop> loop;
        std::thread reader;
    };

    void accept_loop() {
        std::size_t next_id = 0;
        while (!stopped_) {
            const int fd = ::accept(listener_.get(), nullptr, nullptr);
            if (fd < 0) {
                if (errno == EINTR) continue;
                return;
            }
            auto conn = std::make_unique<Connection>();
            conn->socket = std::make_unique<net::LineSocket>(net::Fd(fd));
            auto* sock = conn->socket.get();
            const std::string session_id = "session-" + std::to_string(++next_id);
            conn->loop = std::make_unique<EngineLoop>(session_id, cfg_, backend_, transports_(),
                                                      [sock](const nlohmann::json& m) { sock->send_line(m.dump()); });
            auto* loop = conn->loop.get();
            conn->reader = std::thread([sock, loop] {
                while (auto line = sock->read_line()) {
                    if (trim(*line).empty()) continue;
                    try {
                        loop->post(wire::inbound_from_json(nlohmann::json::parse(*line)));
                    } catch (const std::exception& e) {
                        sock->send_line(wire::error_message(e.what()).dump());
                    }
                }
                loop->stop();
            });
            std::lock_guard lk(mu_);
            connections_.push_back(std::move(conn));
        }
    }

    EngineConfig cfg_;
    std::shared_ptr<const LlmBackend> backend_;
    TransportFactory transports_;
    net::Fd listener_;
    int port_ = 0;
    std::atomic<bool> stopped_{false};
    std::thread accept_thread_;
    std::mutex mu_;
    std::list<std::unique_ptr<Connection>> connections_;
};

} // namespace hybridrag
