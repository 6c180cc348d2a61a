#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "easteer/schema.hpp"

namespace easteer {

/// Category counts on one attribute axis with N categories (zero-count
/// categories still count toward N).
struct AttributeCounts {
    std::map<std::string, std::uint64_t> counts;
    int category_count = 2;
};

/// Shannon entropy with a base-N logarithm, in [0, 1]; 0 log 0 is taken as 0.
[[nodiscard]] double shannon_entropy(std::span<const std::uint64_t> counts, int category_count);
[[nodiscard]] double shannon_entropy(const AttributeCounts& counts);

[[nodiscard]] double ccs_image(const CcsRecord& record);
[[nodiscard]] double ccs_condition(std::span<const CcsRecord> records);

struct SetStats {
    std::size_t n = 0;
    double median = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
    double min = 0.0;
    double max = 0.0;
};

/// Separation thresholds for the CCS validation sets.
struct CcsThresholds {
    double coherent_median_min = 0.45;
    double negative_median_max = 0.25;
};

struct CcsValidation {
    SetStats real;
    SetStats positive;
    SetStats negative;
    bool real_pass = false;
    bool positive_pass = false;
    bool negative_pass = false;

    [[nodiscard]] bool pass() const noexcept { return real_pass && positive_pass && negative_pass; }
};

/// Quantile with linear interpolation between order statistics.
[[nodiscard]] double quantile(std::vector<double> values, double q);

[[nodiscard]] CcsValidation ccs_validation(std::span<const CcsRecord> real, std::span<const CcsRecord> positive,
                                           std::span<const CcsRecord> negative, const CcsThresholds& thresholds = {});

// Report assembly ---------------------------------------------------------------

/// Identity of one generated image within an experiment.
struct ImageRecord {
    std::string image_id;
    std::string model_id;
    std::string method;
    std::string concept_name;
};

struct ReportRow {
    std::string model_id;
    std::string method;
    std::string concept_name;
    double h_gender = 0.0;
    double h_race = 0.0;
    double ccs = 0.0;
    std::size_t n_images = 0;
    std::array<std::uint64_t, 2> gender_counts{};
    std::array<std::uint64_t, 4> race_counts{};

    friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

struct ExperimentReport {
    std::vector<ReportRow> rows;

    friend bool operator==(const ExperimentReport&, const ExperimentReport&) = default;
};

/// Index of the largest probability; ties go to the lowest index.
[[nodiscard]] std::size_t argmax(std::span<const double> probs);

/// Groups images by (model, method, concept) in first-seen order. Each image
/// needs exactly one classifier and one CCS record.
[[nodiscard]] ExperimentReport assemble_report(std::span<const ImageRecord> images,
                                               std::span<const ClassifyResult> classifications,
                                               std::span<const CcsRecord> ccs_records);

[[nodiscard]] std::string report_to_json(const ExperimentReport& report);
[[nodiscard]] std::string report_to_csv(const ExperimentReport& report);
/// Wide layout: one line per (model, method), H_g/H_r/CCS columns per concept.
[[nodiscard]] std::string report_to_markdown(const ExperimentReport& report);
[[nodiscard]] ExperimentReport report_from_json(std::string_view text);

[[nodiscard]] std::string validation_to_json(const CcsValidation& v, const CcsThresholds& thresholds);

} // namespace easteer
