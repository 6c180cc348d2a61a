#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <vector>

#include "easteer/config.hpp"
#include "easteer/metrics.hpp"
#include "easteer/probes.hpp"

namespace easteer {

/// Builds the adapter a config asks for: replay over a fixture bundle, the
/// in-process mock world, or the HTTP client. A non-empty fixtures_override
/// wins over the config.
[[nodiscard]] std::shared_ptr<Adapter> open_adapter(const AdapterConfig& config,
                                                    const std::filesystem::path& fixtures_override = {});

/// Loads the configured table, or derives one from the source concepts when
/// config.table is empty (saved under `fallback_stem`, reused if present).
[[nodiscard]] LookupTable obtain_table(const ExperimentConfig& config, Adapter& adapter,
                                       const std::filesystem::path& fallback_stem);

struct RunLayout {
    std::filesystem::path root;

    [[nodiscard]] std::filesystem::path config() const { return root / "config.json"; }
    [[nodiscard]] std::filesystem::path records_dir() const { return root / "records"; }
    [[nodiscard]] std::filesystem::path records() const { return records_dir() / "records.jsonl"; }
    [[nodiscard]] std::filesystem::path table_stem() const { return root / "table"; }
    [[nodiscard]] std::filesystem::path status() const { return root / "status.json"; }
};

/// Reads a JSON-lines record file. Throws CorruptRecord naming the path and line.
[[nodiscard]] std::vector<GenerationRecord> read_records(const std::filesystem::path& file);
void write_records(const std::filesystem::path& file, std::span<const GenerationRecord> records);

/// Every *.jsonl under dir (or dir/records), files in name order.
[[nodiscard]] std::vector<GenerationRecord> collect_records(const std::filesystem::path& dir);

/// Report over the complete records; incomplete ones are counted, not used.
[[nodiscard]] ExperimentReport report_from_records(std::span<const GenerationRecord> records);

/// Writes report.json, report.csv, report.md and report.svg into dir.
void write_report_files(const std::filesystem::path& dir, const ExperimentReport& report);

struct BenchmarkOutcome {
    ExperimentReport report;
    bool incomplete = false;
    std::size_t records = 0;
    std::size_t reused = 0;
    std::size_t failed = 0;
};

/// sample -> compose -> generate -> classify -> vqa -> report, for every
/// configured method and target concept. Records are appended as they finish
/// and reused on a rerun with the same output_dir; at the end the record file
/// is rewritten in run order and the report files are written.
[[nodiscard]] BenchmarkOutcome run_benchmark(const ExperimentConfig& config, Adapter& adapter,
                                             const std::atomic<bool>* cancel = nullptr);

} // namespace easteer
