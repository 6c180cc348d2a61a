#include "easteer/cli.hpp"

#include <atomic>
#include <csignal>
#include <cstdio>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "easteer/adapter.hpp"
#include "easteer/benchmark.hpp"
#include "easteer/config.hpp"
#include "easteer/container.hpp"
#include "easteer/errors.hpp"
#include "easteer/mock.hpp"
#include "easteer/probes.hpp"
#include "easteer/render.hpp"
#include "easteer/transport.hpp"

namespace easteer {

namespace fs = std::filesystem;

namespace {

std::atomic<bool> g_interrupted{false};

extern "C" void on_sigint(int) {
    g_interrupted.store(true);
    // A second Ctrl-C kills the process the usual way.
    std::signal(SIGINT, SIG_DFL);
}

struct SigintGuard {
    using Handler = void (*)(int);
    Handler previous;
    SigintGuard() : previous(std::signal(SIGINT, on_sigint)) { g_interrupted.store(false); }
    ~SigintGuard() { std::signal(SIGINT, previous); }
};

struct Common {
    std::string config;
    std::string fixtures;
    std::optional<std::uint64_t> seed;
    bool allow_partial = false;
};

void add_common(CLI::App* cmd, Common& c, bool config_required = true) {
    auto* opt = cmd->add_option("--config", c.config, "experiment config (JSON)");
    if (config_required) {
        opt->required();
    }
    cmd->add_option("--fixtures", c.fixtures, "replay adapter traffic from this fixture bundle");
    cmd->add_option("--seed", c.seed, "override master_seed");
    cmd->add_flag("--allow-partial", c.allow_partial, "exit 0 even when some images failed");
}

ExperimentConfig load(const Common& c) {
    auto cfg = load_config(c.config);
    if (c.seed) {
        cfg.master_seed = *c.seed;
    }
    if (!c.fixtures.empty()) {
        cfg.adapter.fixtures = c.fixtures;
    }
    return cfg;
}

bool has_adapter(const ExperimentConfig& cfg) {
    return !cfg.adapter.fixtures.empty() || !cfg.adapter.mock.empty() || !cfg.adapter.url.empty();
}

fs::path table_stem(const ExperimentConfig& cfg) {
    return cfg.table.empty() ? RunLayout{cfg.output_dir}.table_stem() : cfg.table;
}

int finish(bool incomplete, bool allow_partial, const std::string& what) {
    if (g_interrupted.load()) {
        std::cerr << what << ": interrupted, partial state saved\n";
        return kExitInterrupted;
    }
    if (incomplete && !allow_partial) {
        std::cerr << what << ": incomplete (rerun to resume, or pass --allow-partial)\n";
        return kExitIncomplete;
    }
    return kExitOk;
}

// Commands ----------------------------------------------------------------------------

int cmd_derive(const Common& c, const std::string& out) {
    const auto cfg = load(c);
    const auto adapter = open_adapter(cfg.adapter);
    const auto stem = out.empty() ? table_stem(cfg) : fs::path(out);
    const auto requests = attribute_requests(cfg.attributes);
    const auto table = build_lookup_table(requests, cfg.source_concepts, cfg.prompt_template,
                                          [&](const std::string& p) { return adapter->encode(p); },
                                          cfg.adapter.max_in_flight);
    save_lookup_table(table, stem);
    std::cout << "derived " << table.size() << " attribute vectors (K=" << table.created_with_k() << ", dim "
              << table.dim() << ") -> " << table_paths(stem).tensors.string() << "\n";
    return kExitOk;
}

SteeringTerm parse_term(const std::string& s) {
    const auto eq = s.rfind('=');
    if (eq == std::string::npos || eq == 0) {
        throw Error(ErrorCode::InvalidArgument, "term '" + s + "' must look like attribute=alpha");
    }
    try {
        return {s.substr(0, eq), std::stod(s.substr(eq + 1))};
    } catch (const std::exception&) {
        throw Error(ErrorCode::InvalidArgument, "term '" + s + "' has no numeric alpha");
    }
}

int cmd_compose(const Common& c, std::string concept_name, const std::vector<std::string>& terms, std::string out) {
    const auto cfg = load(c);
    if (concept_name.empty()) {
        concept_name = cfg.compose.base_concept;
    }
    if (concept_name.empty()) {
        throw Error(ErrorCode::ConfigError, "no base concept (compose.base_concept or --concept)");
    }
    SteeringSpec spec{cfg.compose.terms};
    if (!terms.empty()) {
        spec.terms.clear();
        for (const auto& t : terms) {
            spec.terms.push_back(parse_term(t));
        }
    }
    fs::path dest = out.empty() ? cfg.compose.output : fs::path(out);
    if (dest.empty()) {
        dest = cfg.output_dir / "composed.tensors";
    }
    const auto table = load_lookup_table(table_stem(cfg));
    const auto adapter = open_adapter(cfg.adapter);
    const auto prompt = render_prompt(cfg.prompt_template, concept_name);
    const auto base = adapter->encode(prompt);
    const auto steered = compose(base, spec, table);
    const std::vector<NamedTensor> tensors{{"base", base.values()}, {"steered", steered.values()}};
    save_container(dest, tensors);
    std::cout << "composed '" << prompt << "' with " << spec.terms.size() << " term(s) -> " << dest.string() << "\n";
    return kExitOk;
}

void write_probe(const fs::path& dir, const std::string& name, const std::string& json, const std::string& csv,
                 const std::string& svg) {
    write_file(dir / (name + ".json"), json);
    if (!csv.empty()) {
        write_file(dir / (name + ".csv"), csv);
    }
    if (!svg.empty()) {
        write_file(dir / (name + ".svg"), svg);
    }
    std::cout << name << " -> " << (dir / (name + ".json")).string() << "\n";
}

int cmd_probe(const Common& c, const std::string& kind, const std::string& out, bool no_generate) {
    SigintGuard guard;
    const auto cfg = load(c);
    const fs::path dir = out.empty() ? cfg.output_dir / "probes" : fs::path(out);
    auto options = cfg.probe_options();
    options.cancel = &g_interrupted;

    if (kind == "orthogonality") {
        const auto table = load_lookup_table(table_stem(cfg));
        const auto m = orthogonality_matrix(table, cfg.orthogonality_subset);
        write_probe(dir, kind, matrix_to_json(m), matrix_to_csv(m), render_heatmap_svg(m));
        return kExitOk;
    }
    if (kind == "composability") {
        const auto table = load_lookup_table(table_stem(cfg));
        std::shared_ptr<Adapter> adapter;
        if (!no_generate && has_adapter(cfg) && cfg.composability.n_images > 0) {
            adapter = open_adapter(cfg.adapter);
        }
        const auto r = composability_probe(table, cfg.composability.race, cfg.composability.gender, adapter.get(),
                                           cfg.composability.base_concept, cfg.composability.n_images, options);
        write_probe(dir, kind, composition_to_json(r), "", "");
        return finish(r.incomplete, c.allow_partial, "probe composability");
    }
    if (kind == "sweep") {
        const auto adapter = open_adapter(cfg.adapter);
        const auto table = obtain_table(cfg, *adapter, RunLayout{cfg.output_dir}.table_stem());
        const auto r = alpha_sweep(*adapter, table, cfg.sweep.base_concept, cfg.sweep.attribute, cfg.sweep.alphas,
                                   cfg.sweep.n_per_point, options);
        write_probe(dir, kind, sweep_to_json(r), sweep_to_csv(r), render_sweep_svg(r));
        return finish(r.incomplete, c.allow_partial, "probe sweep");
    }
    if (kind == "ablation") {
        const auto adapter = open_adapter(cfg.adapter);
        auto k_configs = cfg.ablation.k_configs;
        if (k_configs.empty()) {
            for (const auto& s : cfg.source_concepts) {
                k_configs.push_back({s});
            }
            k_configs.push_back(cfg.source_concepts);
        }
        const auto r = k_ablation(*adapter, cfg.ablation.targets, k_configs, cfg.ablation.attribute,
                                  cfg.ablation.n_images, options);
        write_probe(dir, kind, ablation_to_json(r), ablation_to_csv(r), "");
        return finish(r.incomplete, c.allow_partial, "probe ablation");
    }
    throw Error(ErrorCode::InvalidArgument, "unknown probe '" + kind + "'");
}

int print_benchmark(const BenchmarkOutcome& o, const ExperimentConfig& cfg, bool allow_partial) {
    std::cout << "records: " << o.records << " (reused " << o.reused << ", failed " << o.failed << ")\n";
    if (!o.report.rows.empty()) {
        std::cout << report_to_markdown(o.report);
        std::cout << "report -> " << (cfg.output_dir / "report.json").string() << "\n";
    }
    return finish(o.incomplete, allow_partial, "benchmark");
}

int cmd_benchmark(const Common& c, const std::string& output_dir) {
    SigintGuard guard;
    auto cfg = load(c);
    if (!output_dir.empty()) {
        cfg.output_dir = output_dir;
    }
    const auto adapter = open_adapter(cfg.adapter);
    const auto outcome = run_benchmark(cfg, *adapter, &g_interrupted);
    return print_benchmark(outcome, cfg, c.allow_partial);
}

int cmd_report(const std::string& dir, const std::string& out, bool allow_partial) {
    const auto records = collect_records(dir);
    if (records.empty()) {
        std::cerr << "report: no records in " << dir << "\n";
        return kExitNoRecords;
    }
    const auto incomplete = std::count_if(records.begin(), records.end(), [](const auto& r) { return !r.complete; });
    const auto report = report_from_records(records);
    write_report_files(out.empty() ? fs::path(dir) : fs::path(out), report);
    std::cout << report_to_markdown(report);
    if (incomplete > 0) {
        std::cerr << "report: " << incomplete << " incomplete record(s) left out\n";
    }
    return finish(incomplete > 0, allow_partial, "report");
}

std::shared_ptr<Transport> mock_service(const fs::path& world) {
    return std::make_shared<AdapterService>(std::make_shared<MockAdapter>(MockWorld::load(world)));
}

int cmd_fixtures_serve(const std::string& fixtures, const std::string& mock, const std::string& host, int port) {
    std::shared_ptr<Transport> handler;
    if (!fixtures.empty()) {
        handler = std::make_shared<ReplayTransport>(FixtureStore::open(fixtures));
    } else if (!mock.empty()) {
        handler = mock_service(mock);
    } else {
        throw Error(ErrorCode::InvalidArgument, "serve needs --fixtures or --mock");
    }
    HttpServer server(handler);
    const int bound = server.start(host, port);
    std::cout << "listening on http://" << host << ":" << bound << std::endl;
    SigintGuard guard;
    while (!g_interrupted.load()) {
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    server.stop();
    return kExitOk;
}

int cmd_fixtures_record(const Common& c, const std::string& mock, const std::string& output_dir) {
    SigintGuard guard;
    auto cfg = load_config(c.config);
    if (c.seed) {
        cfg.master_seed = *c.seed;
    }
    if (!output_dir.empty()) {
        cfg.output_dir = output_dir;
    }
    if (c.fixtures.empty()) {
        throw Error(ErrorCode::InvalidArgument, "record needs --fixtures <dir> to write to");
    }
    const fs::path world = mock.empty() ? cfg.adapter.mock : fs::path(mock);

    // The mock is served over real HTTP so the recording covers the wire path.
    std::unique_ptr<HttpServer> server;
    std::string url = cfg.adapter.url;
    if (!world.empty()) {
        server = std::make_unique<HttpServer>(mock_service(world));
        url = "http://127.0.0.1:" + std::to_string(server->start("127.0.0.1", 0));
    }
    if (url.empty()) {
        throw Error(ErrorCode::ConfigError, "record needs adapter.url or a mock world");
    }
    auto store = std::make_shared<FixtureStore>();
    auto endpoint = cfg.adapter.endpoint();
    endpoint.base_url = url;
    auto transport = std::make_shared<RecordingTransport>(std::make_shared<HttplibTransport>(url, endpoint.timeout_ms),
                                                          store);
    HttpAdapter adapter(transport, endpoint);
    const auto outcome = run_benchmark(cfg, adapter, &g_interrupted);
    store->save(c.fixtures);
    std::cout << "recorded " << store->size() << " exchanges -> "
              << (fs::path(c.fixtures) / FixtureStore::kFileName).string() << "\n";
    if (server) {
        server->stop();
    }
    return print_benchmark(outcome, cfg, c.allow_partial);
}

int cmd_fixtures_check(const std::string& fixtures) {
    if (!fs::exists(fs::path(fixtures) / FixtureStore::kFileName)) {
        throw Error(ErrorCode::StoreCorrupt, "no fixture bundle at " + fixtures);
    }
    const auto store = FixtureStore::open(fixtures);
    std::cout << store->size() << " fixtures OK in " << fixtures << "\n";
    return store->size() > 0 ? kExitOk : kExitNoRecords;
}

bool is_safetensors(const fs::path& p) { return p.extension() == ".safetensors"; }

int cmd_convert(const std::string& in, const std::string& out) {
    const auto bytes = read_file(in);
    const auto tensors = is_safetensors(in) ? read_safetensors(bytes) : read_container(bytes);
    write_file(out, is_safetensors(out) ? write_safetensors(tensors) : write_container(tensors));
    std::cout << "converted " << tensors.size() << " tensors -> " << out << "\n";
    return kExitOk;
}

} // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"Embedding-arithmetic steering toolkit"};
    app.require_subcommand(1);

    Common common;
    std::string out, concept_name, output_dir, mock, host = "127.0.0.1", dir, probe_kind;
    std::vector<std::string> terms;
    int port = 0;
    bool no_generate = false;

    auto* derive = app.add_subcommand("derive", "build and save the attribute lookup table");
    add_common(derive, common);
    derive->add_option("--out", out, "table stem (default: config table or <output_dir>/table)");

    auto* compose_cmd = app.add_subcommand("compose", "steer one base prompt and save the embeddings");
    add_common(compose_cmd, common);
    compose_cmd->add_option("--concept", concept_name, "base concept");
    compose_cmd->add_option("--term", terms, "attribute=alpha (repeatable)");
    compose_cmd->add_option("--out", out, "container file");

    auto* probe = app.add_subcommand("probe", "geometry probes");
    add_common(probe, common);
    probe->add_option("kind", probe_kind, "orthogonality | composability | sweep | ablation")
        ->required()
        ->check(CLI::IsMember({"orthogonality", "composability", "sweep", "ablation"}));
    probe->add_option("--out", out, "output directory (default <output_dir>/probes)");
    probe->add_flag("--no-generate", no_generate, "composability: cosine only");

    auto* bench = app.add_subcommand("benchmark", "run the generalization benchmark");
    add_common(bench, common);
    bench->add_option("--output-dir", output_dir, "override output_dir");

    auto* report = app.add_subcommand("report", "rebuild report tables from raw records");
    report->add_option("dir", dir, "run directory or records directory")->required();
    report->add_option("--out", out, "where to write report files (default: dir)");
    bool report_partial = false;
    report->add_flag("--allow-partial", report_partial, "exit 0 even with incomplete records");

    auto* fixtures = app.add_subcommand("fixtures", "record / replay adapter traffic");
    fixtures->require_subcommand(1);
    auto* serve = fixtures->add_subcommand("serve", "serve a fixture bundle or mock world over HTTP");
    std::string serve_fixtures;
    serve->add_option("--fixtures", serve_fixtures, "fixture bundle directory");
    serve->add_option("--mock", mock, "mock world JSON");
    serve->add_option("--host", host, "bind address");
    serve->add_option("--port", port, "port (0 = any free port)");
    auto* record = fixtures->add_subcommand("record", "run a benchmark and capture every exchange");
    add_common(record, common);
    record->add_option("--mock", mock, "serve this mock world locally and record against it");
    record->add_option("--output-dir", output_dir, "override output_dir");
    auto* check = fixtures->add_subcommand("check", "validate a fixture bundle");
    std::string check_fixtures;
    check->add_option("--fixtures", check_fixtures, "fixture bundle directory")->required();

    auto* convert = app.add_subcommand("convert", "convert between .safetensors and the native container");
    std::string in_path, out_path;
    convert->add_option("input", in_path)->required();
    convert->add_option("output", out_path)->required();

    std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
    try {
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    }

    const std::string name = app.get_subcommands().front()->get_name();
    try {
        if (*derive) {
            return cmd_derive(common, out);
        }
        if (*compose_cmd) {
            return cmd_compose(common, concept_name, terms, out);
        }
        if (*probe) {
            return cmd_probe(common, probe_kind, out, no_generate);
        }
        if (*bench) {
            return cmd_benchmark(common, output_dir);
        }
        if (*report) {
            return cmd_report(dir, out, report_partial);
        }
        if (*serve) {
            return cmd_fixtures_serve(serve_fixtures, mock, host, port);
        }
        if (*record) {
            return cmd_fixtures_record(common, mock, output_dir);
        }
        if (*check) {
            return cmd_fixtures_check(check_fixtures);
        }
        if (*convert) {
            return cmd_convert(in_path, out_path);
        }
    } catch (const Error& e) {
        std::cerr << "easteer " << name << ": " << e.what() << "\n";
        return e.code() == ErrorCode::ConfigError ? kExitUsage : kExitError;
    } catch (const std::exception& e) {
        std::cerr << "easteer " << name << ": " << e.what() << "\n";
        return kExitError;
    }
    return kExitUsage;
}

} // namespace easteer
