#include "easteer/benchmark.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>

#include <json.hpp>

#include "easteer/container.hpp"
#include "easteer/errors.hpp"
#include "easteer/mock.hpp"
#include "easteer/render.hpp"
#include "easteer/transport.hpp"

namespace easteer {

namespace fs = std::filesystem;

std::shared_ptr<Adapter> open_adapter(const AdapterConfig& config, const fs::path& fixtures_override) {
    const auto fixtures = fixtures_override.empty() ? config.fixtures : fixtures_override;
    if (!fixtures.empty()) {
        if (!fs::exists(fixtures / FixtureStore::kFileName)) {
            throw Error(ErrorCode::StoreCorrupt, "no fixture bundle at " + fixtures.string());
        }
        auto transport = std::make_shared<ReplayTransport>(FixtureStore::open(fixtures));
        auto endpoint = config.endpoint();
        endpoint.retries = 1;
        return std::make_shared<HttpAdapter>(transport, endpoint);
    }
    if (!config.mock.empty()) {
        return std::make_shared<MockAdapter>(MockWorld::load(config.mock));
    }
    if (config.url.empty()) {
        throw Error(ErrorCode::ConfigError, "no adapter configured (set adapter.url, adapter.mock or --fixtures)");
    }
    return make_http_adapter(config.endpoint());
}

LookupTable obtain_table(const ExperimentConfig& config, Adapter& adapter, const fs::path& fallback_stem) {
    if (!config.table.empty()) {
        return load_lookup_table(config.table);
    }
    if (fs::exists(table_paths(fallback_stem).metadata)) {
        return load_lookup_table(fallback_stem);
    }
    const auto requests = attribute_requests(config.attributes);
    auto table = build_lookup_table(requests, config.source_concepts, config.prompt_template,
                                    [&](const std::string& p) { return adapter.encode(p); },
                                    config.adapter.max_in_flight);
    save_lookup_table(table, fallback_stem);
    return table;
}

std::vector<GenerationRecord> read_records(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::CorruptRecord, "cannot open " + file.string());
    }
    std::vector<GenerationRecord> out;
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
        if (line.empty()) {
            continue;
        }
        try {
            out.push_back(record_from_json(line));
        } catch (const Error& e) {
            throw Error(ErrorCode::CorruptRecord, file.string() + ":" + std::to_string(n) + ": " + e.message());
        }
    }
    return out;
}

void write_records(const fs::path& file, std::span<const GenerationRecord> records) {
    std::string text;
    for (const auto& r : records) {
        text += record_to_json(r) + "\n";
    }
    write_file(file, text);
}

std::vector<GenerationRecord> collect_records(const fs::path& dir) {
    auto where = dir;
    if (fs::is_directory(dir / "records")) {
        where = dir / "records";
    }
    if (!fs::is_directory(where)) {
        throw Error(ErrorCode::InvalidArgument, where.string() + " is not a directory");
    }
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(where)) {
        if (e.is_regular_file() && e.path().extension() == ".jsonl") {
            files.push_back(e.path());
        }
    }
    std::sort(files.begin(), files.end());
    std::vector<GenerationRecord> out;
    for (const auto& f : files) {
        auto part = read_records(f);
        out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    return out;
}

ExperimentReport report_from_records(std::span<const GenerationRecord> records) {
    std::vector<ImageRecord> images;
    std::vector<ClassifyResult> classifications;
    std::vector<CcsRecord> ccs;
    records_to_report_inputs(records, images, classifications, ccs);
    if (images.empty()) {
        throw Error(ErrorCode::MissingRecord, "no complete records");
    }
    return assemble_report(images, classifications, ccs);
}

void write_report_files(const fs::path& dir, const ExperimentReport& report) {
    write_file(dir / "report.json", report_to_json(report));
    write_file(dir / "report.csv", report_to_csv(report));
    write_file(dir / "report.md", report_to_markdown(report));
    write_file(dir / "report.svg", render_report_svg(report));
}

BenchmarkOutcome run_benchmark(const ExperimentConfig& config, Adapter& adapter, const std::atomic<bool>* cancel) {
    const RunLayout layout{config.output_dir};
    fs::create_directories(layout.records_dir());
    write_file(layout.config(), config_to_json(config));

    std::optional<LookupTable> table;
    const bool steered = std::any_of(config.methods.begin(), config.methods.end(),
                                     [](Method m) { return m != Method::Default; });
    if (steered) {
        table = obtain_table(config, adapter, layout.table_stem());
    }

    std::map<std::string, GenerationRecord> existing;
    if (fs::exists(layout.records())) {
        for (auto& r : read_records(layout.records())) {
            if (r.complete) {
                existing.insert_or_assign(record_key(r), std::move(r));
            }
        }
    }

    std::ofstream journal(layout.records(), std::ios::binary | std::ios::app);
    if (!journal) {
        throw Error(ErrorCode::InvalidArgument, "cannot write " + layout.records().string());
    }
    BenchmarkOutcome outcome;
    RunHooks hooks;
    hooks.existing = &existing;
    hooks.on_record = [&](const GenerationRecord& r) {
        journal << record_to_json(r) << '\n';
        journal.flush();
    };

    auto options = config.probe_options();
    options.cancel = cancel;
    const GeneralizationSplit split{config.source_concepts, config.target_concepts};
    std::vector<GenerationRecord> all;
    for (auto method : config.methods) {
        auto result = generalization_run(adapter, method == Method::Default ? nullptr : &*table, split, method,
                                         config.alpha, config.n_images, options, config.allow_source_overlap, hooks);
        outcome.incomplete = outcome.incomplete || result.incomplete;
        for (auto& r : result.records) {
            if (existing.contains(record_key(r)) && existing.at(record_key(r)) == r) {
                ++outcome.reused;
            }
            outcome.failed += (!r.complete && !r.error.empty() && r.error != "cancelled") ? 1 : 0;
            all.push_back(std::move(r));
        }
    }
    journal.close();

    // Canonical order; skipped (cancelled) images are left out so a resume regenerates them.
    std::vector<GenerationRecord> kept;
    for (auto& r : all) {
        if (r.complete || r.error != "cancelled") {
            kept.push_back(std::move(r));
        }
    }
    write_records(layout.records(), kept);
    outcome.records = kept.size();

    nlohmann::ordered_json status = {{"incomplete", outcome.incomplete},
                                     {"records", outcome.records},
                                     {"reused", outcome.reused},
                                     {"failed", outcome.failed}};
    write_file(layout.status(), status.dump(2) + "\n");

    bool any_complete = std::any_of(kept.begin(), kept.end(), [](const auto& r) { return r.complete; });
    if (any_complete) {
        outcome.report = report_from_records(kept);
        write_report_files(layout.root, outcome.report);
    }
    return outcome;
}

} // namespace easteer
