#include <atomic>
#include <chrono>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <gtest/gtest.h>
#include <httplib.h>

#include "hybridrag/cloud_service.hpp"
#include "hybridrag/config.hpp"
#include "hybridrag/engine_server.hpp"

using namespace hybridrag;
using namespace std::chrono_literals;
using nlohmann::json;

namespace {

class CountingBackend final : public LlmBackend {
public:
    std::string id() const override { return "counting"; }
    std::string complete(const CompletionRequest& req) const override {
        ++calls;
        return inner.complete(req);
    }
    mutable std::atomic<int> calls{0};
    TakeawayMockBackend inner;
};

std::vector<Document> toy_corpus() {
    return {{"a", "The pier opened in 1869."}, {"b", "The toll was two pence."}, {"c", "Storms hit in 1886."}};
}

std::string request_body(const std::string& query, RequestSeq seq = 1, const std::string& session = "s") {
    return json{{"session_id", session}, {"request_seq", seq}, {"query_text", query}}.dump();
}

/// Collects outbound engine messages for inspection.
struct Inbox {
    std::mutex mu;
    std::condition_variable cv;
    std::vector<json> messages;

    void push(const json& m) {
        std::lock_guard lk(mu);
        messages.push_back(m);
        cv.notify_all();
    }
    std::size_t count(const std::string& type) {
        std::lock_guard lk(mu);
        std::size_t n = 0;
        for (const auto& m : messages) n += m.at("type") == type;
        return n;
    }
    bool wait_for(const std::string& type, std::size_t n, std::chrono::milliseconds timeout = 5000ms) {
        std::unique_lock lk(mu);
        return cv.wait_for(lk, timeout, [&] {
            std::size_t c = 0;
            for (const auto& m : messages) c += m.at("type") == type;
            return c >= n;
        });
    }
};

} // namespace

TEST(CloudServiceTest, HandlesRequestAndEchoesSeq) {
    auto backend = std::make_shared<CountingBackend>();
    CloudService svc(std::make_shared<HashedBagEmbedder>(), backend, EngineConfig{});
    svc.ingest(toy_corpus());
    const auto resp = svc.handle_memory_request({"sess", 42, "pier toll storms", 3});
    EXPECT_EQ(resp.session_id, "sess");
    EXPECT_EQ(resp.request_seq, 42u);
    EXPECT_EQ(resp.entry.bullets.size(), 3u);
    EXPECT_EQ(resp.entry.source_request_seq, 42u);
}

TEST(CloudServiceTest, EmptyQueryMakesNoBackendCall) {
    auto backend = std::make_shared<CountingBackend>();
    CloudService svc(std::make_shared<HashedBagEmbedder>(), backend, EngineConfig{});
    svc.ingest(toy_corpus());
    EXPECT_THROW(svc.handle_memory_request({"s", 1, "  ", 3}), ProtocolError);
    EXPECT_EQ(backend->calls.load(), 0);
}

TEST(CloudServiceTest, Healthcheck) {
    CloudService svc(std::make_shared<HashedBagEmbedder>(), std::make_shared<TakeawayMockBackend>(), EngineConfig{});
    EXPECT_EQ(svc.healthcheck().status, "initializing");
    EXPECT_THROW(svc.handle_memory_request({"s", 1, "q", 3}), NotReady);
    svc.ingest({{"a", "alpha beta"}, {"b", "gamma delta"}});
    EXPECT_EQ(svc.healthcheck().status, "ok");
    EXPECT_EQ(svc.healthcheck().index_chunks, 2u);

    svc.ingest(read_corpus_jsonl(std::string(HYBRIDRAG_FIXTURE_DIR) + "/corpus.jsonl"));
    EXPECT_EQ(svc.healthcheck().index_chunks, 30u);
    EXPECT_THROW(svc.set_index(ingest({{"a", "x"}}, HashedBagEmbedder(64))), IndexError);
}

TEST(CloudHttp, EndToEndStatusCodes) {
    auto backend = std::make_shared<CountingBackend>();
    CloudService svc(std::make_shared<HashedBagEmbedder>(), backend, EngineConfig{});
    CloudHttpServer server(svc);
    const int port = server.start("127.0.0.1", 0);
    httplib::Client cli("127.0.0.1", port);

    auto health = cli.Get("/v1/health");
    ASSERT_TRUE(health);
    EXPECT_EQ(json::parse(health->body).at("status"), "initializing");

    auto early = cli.Post("/v1/memory", request_body("pier"), "application/json");
    ASSERT_TRUE(early);
    EXPECT_EQ(early->status, 503);

    svc.ingest(toy_corpus());
    auto ok = cli.Post("/v1/memory", request_body("pier toll storms", 9, "abc"), "application/json");
    ASSERT_TRUE(ok);
    ASSERT_EQ(ok->status, 200);
    const auto body = json::parse(ok->body);
    EXPECT_EQ(body.at("request_seq"), 9);
    EXPECT_EQ(body.at("session_id"), "abc");
    EXPECT_EQ(body.at("bullets").size(), 3u);
    EXPECT_TRUE(body.at("timings").contains("retrieval_ms"));
    EXPECT_TRUE(body.at("timings").contains("generation_ms"));

    const int before = backend->calls.load();
    auto empty = cli.Post("/v1/memory", request_body(""), "application/json");
    ASSERT_TRUE(empty);
    EXPECT_EQ(empty->status, 400);
    EXPECT_EQ(backend->calls.load(), before);

    auto garbage = cli.Post("/v1/memory", "{not json", "application/json");
    ASSERT_TRUE(garbage);
    EXPECT_EQ(garbage->status, 400);
    EXPECT_EQ(json::parse(garbage->body).at("error").at("code"), "bad_request");
    server.stop();
}

TEST(CloudHttp, StalledBackendTimesOutWith500) {
    auto slow = std::make_shared<DelayedBackend>(std::make_shared<TakeawayMockBackend>(), Millis{600});
    CloudService svc(std::make_shared<HashedBagEmbedder>(), slow, EngineConfig{}, Millis{100});
    svc.ingest(toy_corpus());
    CloudHttpServer server(svc);
    const int port = server.start("127.0.0.1", 0);
    httplib::Client cli("127.0.0.1", port);
    auto res = cli.Post("/v1/memory", request_body("pier"), "application/json");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 500);
    EXPECT_EQ(json::parse(res->body).at("error").at("code"), "backend_timeout");
    server.stop();
    std::this_thread::sleep_for(600ms); // let the abandoned call finish
}

TEST(CloudHttp, BearerTokenIsEnforced) {
    CloudService svc(std::make_shared<HashedBagEmbedder>(), std::make_shared<TakeawayMockBackend>(), EngineConfig{});
    svc.ingest(toy_corpus());
    CloudHttpServer server(svc, "sekrit");
    const int port = server.start("127.0.0.1", 0);
    httplib::Client cli("127.0.0.1", port);
    auto denied = cli.Post("/v1/memory", request_body("pier"), "application/json");
    ASSERT_TRUE(denied);
    EXPECT_EQ(denied->status, 401);
    auto allowed = cli.Post("/v1/memory", {{"Authorization", "Bearer sekrit"}}, request_body("pier"), "application/json");
    ASSERT_TRUE(allowed);
    EXPECT_EQ(allowed->status, 200);
    server.stop();
}

TEST(HttpBackendTest, PostsCompletionRequest) {
    httplib::Server fake;
    json seen;
    fake.Post("/complete", [&](const httplib::Request& req, httplib::Response& res) {
        seen = json::parse(req.body);
        res.set_content(json{{"text", "remote says hi"}}.dump(), "application/json");
    });
    const int port = fake.bind_to_any_port("127.0.0.1");
    std::thread t([&] { fake.listen_after_bind(); });
    fake.wait_until_ready();
    HttpBackend b("remote", "http://127.0.0.1:" + std::to_string(port) + "/complete");
    EXPECT_EQ(b.complete({"prompt text", 15, 0.0, 1.0}), "remote says hi");
    EXPECT_EQ(seen.at("prompt"), "prompt text");
    EXPECT_EQ(seen.at("max_tokens"), 15);
    fake.stop();
    t.join();

    HttpBackend dead("remote", "http://127.0.0.1:" + std::to_string(port) + "/complete", "", Millis{500});
    EXPECT_THROW(dead.complete({"p", 1, 0.0, 1.0}), BackendError);
}

TEST(Config, ParsesServiceConfig) {
    const auto c = service_config_from_json(json::parse(R"({
        "listen_port": 9000, "corpus": "c.jsonl",
        "backend": {"kind": "takeaway-mock"},
        "engine": {"tau": null, "k": 2}
    })"));
    EXPECT_EQ(c.listen_port, 9000);
    EXPECT_EQ(c.engine.tau, kNeverTrigger);
    EXPECT_EQ(c.engine.k, 2u);
    EXPECT_EQ(make_backend(c.backend)->id(), "takeaway-mock");
    EXPECT_THROW(engine_config_from_json(json{{"diff_mode", "sideways"}}), InvalidArgument);
    EXPECT_THROW(make_backend(backend_descriptor_from_json(json{{"kind", "nope"}})), InvalidArgument);
    EXPECT_EQ(make_embedder("hashed-bow-v1-64")->dimension(), 64u);
}

TEST(EngineLoopTest, SuggestsWhileMemoryIsInFlight) {
    auto slow = std::make_shared<DelayedBackend>(std::make_shared<TakeawayMockBackend>(), Millis{300});
    CloudService svc(std::make_shared<HashedBagEmbedder>(), slow, EngineConfig{});
    svc.ingest(toy_corpus());
    EngineConfig cfg;
    cfg.tau = 2;
    Inbox inbox;
    {
        EngineLoop loop("s", cfg, std::make_shared<EchoMemoryBackend>(), std::make_shared<InProcessTransport>(svc),
                        [&](const json& m) { inbox.push(m); });
        loop.post(UserEvent{TypeEvent{"The pier opened and the toll"}});
        ASSERT_TRUE(inbox.wait_for("suggestion", 1, 200ms)); // well before the 300 ms cloud call ends
        EXPECT_EQ(inbox.count("memory_update"), 0u);
        ASSERT_TRUE(inbox.wait_for("memory_update", 1));
        loop.post(UserEvent{TypeEvent{" was"}});
        ASSERT_TRUE(inbox.wait_for("suggestion", 2));
        loop.post(wire::Control::stats);
        ASSERT_TRUE(inbox.wait_for("stats", 1));
    }
    std::lock_guard lk(inbox.mu);
    for (const auto& m : inbox.messages)
        if (m.at("type") == "memory_update") {
            EXPECT_EQ(m.at("request_seq"), 1);
        }
    for (const auto& m : inbox.messages)
        if (m.at("type") == "stats") {
            EXPECT_EQ(m.at("requests_issued"), 1);
            EXPECT_EQ(m.at("responses_applied"), 1);
        }
}

TEST(EngineLoopTest, TransportFailureKeepsSessionAlive) {
    CloudService svc(std::make_shared<HashedBagEmbedder>(), std::make_shared<TakeawayMockBackend>(), EngineConfig{});
    // no index: every request fails with NotReady
    EngineConfig cfg;
    cfg.tau = 0;
    Inbox inbox;
    {
        EngineLoop loop("s", cfg, std::make_shared<UniformBackend>(10, "x"), std::make_shared<InProcessTransport>(svc),
                        [&](const json& m) { inbox.push(m); });
        loop.post(UserEvent{AcceptEvent{}}); // nothing pending yet
        ASSERT_TRUE(inbox.wait_for("error", 1));
        loop.post(UserEvent{TypeEvent{"one"}});
        loop.post(UserEvent{TypeEvent{" two"}});
        ASSERT_TRUE(inbox.wait_for("suggestion", 2));
        std::this_thread::sleep_for(50ms);
        loop.post(wire::Control::stats);
        ASSERT_TRUE(inbox.wait_for("stats", 1));
    }
    EXPECT_EQ(inbox.count("memory_update"), 0u);
    std::lock_guard lk(inbox.mu);
    for (const auto& m : inbox.messages)
        if (m.at("type") == "stats") {
            EXPECT_GE(m.at("responses_failed").get<int>(), 1);
        }
}
