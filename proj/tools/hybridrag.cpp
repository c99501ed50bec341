// hybridrag command-line front end.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hybridrag/hybridrag.hpp"

namespace fs = std::filesystem;
using namespace hybridrag;
using nlohmann::json;

namespace {

/// A JSON config plus the directory relative paths inside it resolve against.
struct ConfigFile {
    json j = json::object();
    fs::path dir = fs::current_path();

    static ConfigFile load(const std::string& path) {
        ConfigFile c;
        if (path.empty()) return c;
        c.j = read_json_file(path);
        c.dir = fs::absolute(path).parent_path();
        return c;
    }

    std::string path_value(const std::string& key, const std::string& override_value = {}) const {
        if (!override_value.empty()) return override_value;
        const auto v = j.value(key, std::string{});
        if (v.empty()) return v;
        return fs::path(v).is_absolute() ? v : (dir / v).string();
    }

    BackendDescriptor backend(const std::string& key, const std::string& fallback_kind) const {
        BackendDescriptor d;
        d.kind = fallback_kind;
        if (j.contains(key)) d = backend_descriptor_from_json(j.at(key));
        if (!d.fixture_path.empty() && fs::path(d.fixture_path).is_relative())
            d.fixture_path = (dir / d.fixture_path).string();
        return d;
    }

    EngineConfig engine() const { return engine_config_from_json(j.value("engine", json::object())); }
    std::string embedder_id() const { return j.value("embedder_id", std::string("hashed-bow-v1-256")); }
};

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InvalidArgument("cannot write " + path);
    return out;
}

std::vector<harness::TraceEvent> load_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open trace " + path);
    return harness::read_trace_jsonl(in);
}

/// Blocks SIGINT/SIGTERM so a later sigwait() can catch them. Call before
/// any thread starts.
sigset_t block_shutdown_signals() {
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);
    return set;
}

void wait_for_shutdown(const sigset_t& set) {
    int sig = 0;
    sigwait(&set, &sig);
    log::info("caught signal " + std::to_string(sig) + ", shutting down");
}

/// Simulation inputs that outlive the SimBackends pointers.
struct SimWorld {
    std::shared_ptr<const Embedder> embedder;
    CorpusIndex index;
    std::shared_ptr<const LlmBackend> cloud, client, reference;

    SimWorld(const ConfigFile& cfg, const std::string& corpus_override) {
        embedder = make_embedder(cfg.embedder_id());
        const auto corpus = cfg.path_value("corpus", corpus_override);
        if (corpus.empty()) throw InvalidArgument("no corpus: pass --corpus or set \"corpus\" in the config");
        index = ingest(read_corpus_jsonl(corpus), *embedder, cfg.engine().chunk_tokens);
        cloud = make_backend(cfg.backend("backend", "takeaway-mock"));
        client = make_backend(cfg.backend("client_backend", "echo"));
        if (cfg.j.contains("reference_backend")) reference = make_backend(cfg.backend("reference_backend", "echo"));
    }

    harness::SimBackends backends() const {
        return {&index, embedder.get(), cloud.get(), client.get(), reference ? reference.get() : nullptr};
    }
};

harness::LatencyModel latency_of(const ConfigFile& cfg) {
    return harness::latency_model_from_json(cfg.j.value("latency", json::object()));
}

json run_summary(const harness::RunMetrics& m) {
    return {{"suggestions", m.suggestions.size()},
            {"requests_issued", m.requests_issued},
            {"responses_applied", m.responses_applied},
            {"generation_failures", m.generation_failures},
            {"skipped_events", m.skipped_events},
            {"mean_latency_ms", m.mean_latency()},
            {"mean_staleness_tokens", m.mean_staleness()},
            {"mean_gleu", m.mean_gleu()},
            {"mean_perplexity", m.mean_perplexity()}};
}

std::vector<std::size_t> parse_taus(const std::string& list) {
    std::vector<std::size_t> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        std::size_t used = 0;
        const auto v = std::stoul(item, &used);
        if (used != item.size()) throw InvalidArgument("bad tau value '" + item + "'");
        out.push_back(v);
    }
    if (out.empty()) throw InvalidArgument("--tau needs at least one value");
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hybrid edge/cloud retrieval-augmented writing assistant"};
    app.require_subcommand(1);
    std::string log_level = "warn";
    app.add_option("--log-level", log_level, "debug|info|warn|error")
        ->check(CLI::IsMember({"debug", "info", "warn", "error"}));

    // ---- sim ----
    auto* sim = app.add_subcommand("sim", "Virtual-clock simulations");
    sim->require_subcommand(1);

    std::string run_trace_path, run_config, run_corpus, run_out, run_mode = "async";
    std::uint64_t run_seed = 0;
    auto* sim_run = sim->add_subcommand("run", "Replay a trace and write per-suggestion metrics");
    sim_run->add_option("--trace", run_trace_path, "trace JSONL")->required()->check(CLI::ExistingFile);
    sim_run->add_option("--config", run_config, "JSON config")->check(CLI::ExistingFile);
    sim_run->add_option("--corpus", run_corpus, "corpus JSONL (overrides the config)");
    sim_run->add_option("--out", run_out, "per-suggestion CSV");
    sim_run->add_option("--mode", run_mode, "async|sync|compare")->check(CLI::IsMember({"async", "sync", "compare"}));
    sim_run->add_option("--seed", run_seed, "RNG seed for latency draws");

    std::string sweep_taus = "5,10,15,20", sweep_config, sweep_corpus, sweep_out;
    harness::SweepOptions sweep_opt;
    auto* sim_sweep = sim->add_subcommand("sweep", "Edit-distance threshold sweep");
    sim_sweep->add_option("--tau", sweep_taus, "comma-separated thresholds");
    sim_sweep->add_option("--config", sweep_config, "JSON config")->check(CLI::ExistingFile);
    sim_sweep->add_option("--corpus", sweep_corpus, "corpus JSONL (overrides the config)");
    sim_sweep->add_option("--out", sweep_out, "sweep CSV");
    sim_sweep->add_option("--seed", sweep_opt.seed, "RNG seed");
    sim_sweep->add_option("--tokens-per-event", sweep_opt.tokens_per_event, "typing granularity");

    std::string trace_corpus, trace_doc, trace_out;
    std::size_t trace_tpe = 2;
    double trace_interval = 250;
    auto* sim_trace = sim->add_subcommand("trace", "Write a typing trace for one corpus document");
    sim_trace->add_option("--corpus", trace_corpus, "corpus JSONL")->required()->check(CLI::ExistingFile);
    sim_trace->add_option("--doc-id", trace_doc, "document to type (default: first)");
    sim_trace->add_option("--tokens-per-event", trace_tpe, "tokens per type event");
    sim_trace->add_option("--interval-ms", trace_interval, "virtual time between events");
    sim_trace->add_option("--out", trace_out, "trace JSONL")->required();

    // ---- data ----
    auto* data = app.add_subcommand("data", "Dataset preparation");
    data->require_subcommand(1);
    std::string prep_corpus, prep_config, prep_out;
    std::uint64_t prep_seed = 0;
    auto* data_prepare = data->add_subcommand("prepare", "Build (prompt, memory, reference) training triplets");
    data_prepare->add_option("--corpus", prep_corpus, "corpus JSONL (overrides the config)");
    data_prepare->add_option("--config", prep_config, "JSON config")->check(CLI::ExistingFile);
    data_prepare->add_option("--seed", prep_seed, "split-ratio seed");
    data_prepare->add_option("--out", prep_out, "triplets JSONL")->required();

    // ---- index ----
    auto* index_cmd = app.add_subcommand("index", "Corpus index tools");
    index_cmd->require_subcommand(1);
    std::string idx_corpus, idx_out, idx_embedder = "hashed-bow-v1-256";
    std::size_t idx_chunk = 128;
    auto* index_build = index_cmd->add_subcommand("build", "Chunk, embed and save a corpus index");
    index_build->add_option("--corpus", idx_corpus, "corpus JSONL")->required()->check(CLI::ExistingFile);
    index_build->add_option("--out", idx_out, "index JSON")->required();
    index_build->add_option("--embedder", idx_embedder, "embedder id");
    index_build->add_option("--chunk-tokens", idx_chunk, "tokens per chunk");

    // ---- serve ----
    std::string serve_config;
    int serve_port = -1;
    auto* serve = app.add_subcommand("serve", "Run the cloud memory service");
    serve->add_option("--config", serve_config, "service JSON config")->required()->check(CLI::ExistingFile);
    serve->add_option("--port", serve_port, "override listen_port (0 picks a free port)");

    // ---- engine ----
    std::string engine_host = "127.0.0.1", engine_cloud, engine_config;
    int engine_port = 8701;
    auto* engine = app.add_subcommand("engine", "Run the client engine socket server");
    engine->add_option("--listen", engine_host, "listen address");
    engine->add_option("--port", engine_port, "listen port (0 picks a free port)");
    engine->add_option("--cloud", engine_cloud, "cloud service base URL, e.g. http://127.0.0.1:8700")->required();
    engine->add_option("--config", engine_config, "JSON config")->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    const std::map<std::string, log::Level> levels{
        {"debug", log::Level::debug}, {"info", log::Level::info}, {"warn", log::Level::warn}, {"error", log::Level::error}};
    log::set_level(levels.at(log_level));

    try {
        if (sim_run->parsed()) {
            const auto cfg = ConfigFile::load(run_config);
            SimWorld world(cfg, run_corpus);
            const auto trace = load_trace(run_trace_path);
            const auto engine_cfg = cfg.engine();
            const auto lat = latency_of(cfg);
            if (run_mode == "compare") {
                const auto r = harness::compare_sync_async(engine_cfg, lat, trace, world.backends(), run_seed);
                if (!run_out.empty()) {
                    auto out = open_out(run_out);
                    harness::write_run_csv(out, r.async_run);
                }
                std::cout << json{{"sync_mean_latency_ms", r.sync_mean_latency},
                                  {"async_mean_latency_ms", r.async_mean_latency},
                                  {"speedup", r.speedup},
                                  {"async", run_summary(r.async_run)},
                                  {"sync", run_summary(r.sync_run)}}
                                 .dump(2)
                          << '\n';
            } else {
                const auto mode = run_mode == "sync" ? harness::CloudMode::sync : harness::CloudMode::async;
                const auto m = harness::run_trace(trace, engine_cfg, lat, world.backends(), run_seed, mode);
                if (!run_out.empty()) {
                    auto out = open_out(run_out);
                    harness::write_run_csv(out, m);
                }
                std::cout << run_summary(m).dump(2) << '\n';
            }
        } else if (sim_sweep->parsed()) {
            const auto cfg = ConfigFile::load(sweep_config);
            SimWorld world(cfg, sweep_corpus);
            const auto corpus = cfg.path_value("corpus", sweep_corpus);
            sweep_opt.latency = latency_of(cfg);
            const auto rows = harness::threshold_sweep(read_corpus_jsonl(corpus), parse_taus(sweep_taus), cfg.engine(),
                                                       world.backends(), sweep_opt);
            if (!sweep_out.empty()) {
                auto out = open_out(sweep_out);
                harness::write_sweep_csv(out, rows);
            }
            harness::write_sweep_csv(std::cout, rows);
        } else if (sim_trace->parsed()) {
            const auto docs = read_corpus_jsonl(trace_corpus);
            if (docs.empty()) throw InvalidArgument("corpus is empty");
            const Document* doc = &docs.front();
            if (!trace_doc.empty()) {
                auto it = std::find_if(docs.begin(), docs.end(), [&](const Document& d) { return d.doc_id == trace_doc; });
                if (it == docs.end()) throw InvalidArgument("no document '" + trace_doc + "'");
                doc = &*it;
            }
            auto out = open_out(trace_out);
            harness::write_trace_jsonl(out, harness::typing_trace(doc->text, trace_tpe, trace_interval));
        } else if (data_prepare->parsed()) {
            const auto cfg = ConfigFile::load(prep_config);
            const auto corpus = cfg.path_value("corpus", prep_corpus);
            if (corpus.empty()) throw InvalidArgument("no corpus: pass --corpus or set \"corpus\" in the config");
            const auto embedder = make_embedder(cfg.embedder_id());
            const auto memory_backend = make_backend(cfg.backend("backend", "takeaway-mock"));
            const auto reference_backend = make_backend(cfg.backend("reference_backend", "echo"));
            const auto triplets = harness::prepare_training_triplets(read_corpus_jsonl(corpus), *embedder,
                                                                     *memory_backend, *reference_backend, prep_seed,
                                                                     cfg.engine());
            auto out = open_out(prep_out);
            harness::write_triplets_jsonl(out, triplets);
            std::cout << json{{"triplets", triplets.size()}, {"out", prep_out}}.dump() << '\n';
        } else if (index_build->parsed()) {
            const auto embedder = make_embedder(idx_embedder);
            const auto index = ingest(read_corpus_jsonl(idx_corpus), *embedder, idx_chunk);
            index.save(idx_out);
            std::cout << json{{"chunks", index.size()}, {"embedder_id", index.embedder_id()}, {"out", idx_out}}.dump()
                      << '\n';
        } else if (serve->parsed()) {
            const auto file = ConfigFile::load(serve_config);
            auto cfg = service_config_from_json(file.j);
            cfg.corpus_path = file.path_value("corpus");
            cfg.index_path = file.path_value("index");
            if (!cfg.backend.fixture_path.empty() && fs::path(cfg.backend.fixture_path).is_relative())
                cfg.backend.fixture_path = (file.dir / cfg.backend.fixture_path).string();
            if (serve_port >= 0) cfg.listen_port = serve_port;
            if (cfg.corpus_path.empty() && cfg.index_path.empty())
                throw InvalidArgument("service config needs \"corpus\" or \"index\"");

            const auto signals = block_shutdown_signals();
            const auto embedder = make_embedder(cfg.embedder_id);
            CloudService service(embedder, make_backend(cfg.backend, cfg.timeout), cfg.engine, cfg.timeout,
                                 cfg.max_concurrent_calls);
            CloudHttpServer server(service, cfg.auth_token);
            const int port = server.start(cfg.listen_host, cfg.listen_port);
            std::cout << "cloud service listening on http://" << cfg.listen_host << ":" << port << std::endl;
            if (!cfg.index_path.empty()) service.set_index(CorpusIndex::load(cfg.index_path, embedder->id()));
            else service.ingest(read_corpus_jsonl(cfg.corpus_path));
            std::cout << "index ready: " << service.healthcheck().index_chunks << " chunks" << std::endl;
            wait_for_shutdown(signals);
            server.stop();
        } else if (engine->parsed()) {
            const auto file = ConfigFile::load(engine_config);
            const auto cfg = file.engine();
            std::string token = file.j.value("auth_token", std::string{});
            if (const char* v = std::getenv("HYBRIDRAG_AUTH_TOKEN")) token = v;
            const Millis timeout{file.j.value("timeout_ms", 30000.0)};

            const auto signals = block_shutdown_signals();
            EngineSocketServer server(cfg, make_backend(file.backend("client_backend", "echo")), [&] {
                return std::make_shared<HttpMemoryTransport>(engine_cloud, token, timeout);
            });
            const int port = server.start(engine_host, engine_port);
            std::cout << "client engine listening on " << engine_host << ":" << port << std::endl;
            wait_for_shutdown(signals);
            server.stop();
        }
    } catch (const std::exception& e) {
        std::cerr << "hybridrag: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
