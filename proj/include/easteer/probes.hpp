#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "easteer/adapter.hpp"
#include "easteer/metrics.hpp"
#include "easteer/steering.hpp"

namespace easteer {

struct SimilarityMatrix {
    std::vector<std::string> labels;
    /// Row-major |labels| x |labels|.
    std::vector<double> values;

    [[nodiscard]] std::size_t size() const noexcept { return labels.size(); }
    [[nodiscard]] double at(std::size_t i, std::size_t j) const { return values.at(i * labels.size() + j); }
};

/// Pairwise cosine similarity over the table entries (or the named subset, in
/// the given order). Needs at least two vectors.
[[nodiscard]] SimilarityMatrix orthogonality_matrix(const LookupTable& table,
                                                    const std::optional<std::vector<std::string>>& subset = {});

/// Settings shared by every probe that talks to an adapter.
struct ProbeOptions {
    std::string prompt_template{kDefaultTemplate};
    ImageParams params;
    std::size_t max_in_flight = 1;
    std::uint64_t master_seed = 0;
    double alpha = 1.25;
    AttributeAxes axes = AttributeAxes::demographic();
    /// Polled between images; once set, remaining images are skipped and the run is flagged incomplete.
    const std::atomic<bool>* cancel = nullptr;
};

/// Frequency of each "{race} {gender}" category by classifier argmax.
using FrequencyTable = std::map<std::string, double>;

struct CompositionReport {
    std::string identity;
    double cosine_composed_vs_intersectional = 0.0;
    /// (composed-conditioned, intersectional-conditioned); absent without an adapter.
    std::optional<std::pair<FrequencyTable, FrequencyTable>> generation_rates;
    std::string base_concept;
    std::size_t n_images = 0;
    bool incomplete = false;
    std::string error;
};

/// Cosine between normalize(race + gender) and the stored "race gender" vector.
/// With an adapter, also generates n images of base_concept per variant at
/// options.alpha and tabulates the classified demographics.
[[nodiscard]] CompositionReport composability_probe(const LookupTable& table, const std::string& race,
                                                    const std::string& gender, Adapter* adapter,
                                                    const std::string& base_concept, std::size_t n,
                                                    const ProbeOptions& options);

struct SweepPoint {
    double alpha = 0.0;
    double attribute_confidence = 0.0;
    double ccs = 0.0;
    std::size_t n_images = 0;
    std::vector<std::uint64_t> seed_set;
};

struct SweepResult {
    std::string base_concept;
    std::string attribute;
    std::vector<SweepPoint> points;
    bool incomplete = false;
    std::string error;
};

/// Classifier probability for an attribute: its gender or race class, or the
/// product of both for an intersection "race gender".
[[nodiscard]] double attribute_confidence(const ClassifyResult& c, const std::string& attribute);

/// Default sweep grid 0, 0.25, ..., 5.0.
[[nodiscard]] std::vector<double> default_alpha_grid();

/// Per alpha: mean target-attribute confidence and mean CCS over n_per_point
/// images. Image i uses image_seed(master_seed, i) at every alpha.
[[nodiscard]] SweepResult alpha_sweep(Adapter& adapter, const LookupTable& table, const std::string& base_concept,
                                      const std::string& attribute, const std::vector<double>& alphas,
                                      std::size_t n_per_point, const ProbeOptions& options);

struct AblationRow {
    std::string target;
    std::vector<std::string> k_config;
    std::size_t created_with_k = 0;
    std::size_t n_images = 0;
    std::array<std::uint64_t, 2> gender_counts{};
    std::array<std::uint64_t, 4> race_counts{};
    double ccs = 0.0;

    [[nodiscard]] double gender_fraction(std::size_t category) const;
};

struct AblationReport {
    std::string attribute;
    std::vector<AblationRow> rows;
    bool incomplete = false;
    std::string error;
};

/// For each base-concept subset: derive a table from it, steer every target
/// with it and record the gender split and CCS. `attribute` is a table
/// attribute applied to every image, or an axis name ("gender", "race",
/// "intersection") meaning a uniformly sampled attribute of that axis per image.
[[nodiscard]] AblationReport k_ablation(Adapter& adapter, const std::vector<std::string>& target_concepts,
                                        const std::vector<std::vector<std::string>>& k_configs,
                                        const std::string& attribute, std::size_t n, const ProbeOptions& options);

// Generalization runs -------------------------------------------------------------

enum class Method { Default, EAGender, EAIntersectional };

[[nodiscard]] std::string_view to_string(Method m) noexcept;
[[nodiscard]] Method method_from_string(std::string_view s);

struct GeneralizationSplit {
    std::vector<std::string> source_concepts;
    std::vector<std::string> target_concepts;
};

inline constexpr int kRecordVersion = 1;

struct GenerationRecord {
    std::string model_id;
    std::string method;
    std::string concept_name;
    std::size_t index = 0;
    std::uint64_t seed = 0;
    std::string attribute;
    double alpha = 0.0;
    std::string base_prompt;
    std::string image_id;
    std::optional<ClassifyResult> classification;
    std::optional<VqaResult> vqa;
    bool complete = false;
    std::string error;

    friend bool operator==(const GenerationRecord&, const GenerationRecord&) = default;
};

[[nodiscard]] std::string record_to_json(const GenerationRecord& r);
/// Throws CorruptRecord on malformed input or a different record_version.
[[nodiscard]] GenerationRecord record_from_json(std::string_view line);

/// Identity used for resume: (concept, method, seed).
[[nodiscard]] std::string record_key(const GenerationRecord& r);

struct GeneralizationResult {
    std::vector<GenerationRecord> records;
    bool incomplete = false;
};

struct RunHooks {
    /// Complete records from an earlier run, keyed by record_key; these images are not regenerated.
    const std::map<std::string, GenerationRecord>* existing = nullptr;
    /// Called (serialized) for every record as soon as it is final.
    std::function<void(const GenerationRecord&)> on_record;
};

/// Checks the split and the table's provenance: the table must be derived only
/// from split sources and must not touch split targets. allow_overlap lifts the
/// disjointness requirements (source/target overlap) for replicating setups that reuse a concept.
void check_split(const GeneralizationSplit& split, const LookupTable* table, bool allow_overlap);

/// n images per target concept. Default applies no steering; EA_g / EA_i
/// sample one gender / intersectional vector per image uniformly.
[[nodiscard]] GeneralizationResult generalization_run(Adapter& adapter, const LookupTable* table,
                                                      const GeneralizationSplit& split, Method method, double alpha,
                                                      std::size_t n, const ProbeOptions& options,
                                                      bool allow_overlap = false, const RunHooks& hooks = {});

/// Per-image sampling seed for a concept's attribute draws.
[[nodiscard]] std::uint64_t sampling_seed(std::uint64_t master_seed, const std::string& concept_name);

/// Splits records into the inputs of assemble_report. Incomplete records are skipped.
void records_to_report_inputs(std::span<const GenerationRecord> records, std::vector<ImageRecord>& images,
                              std::vector<ClassifyResult>& classifications, std::vector<CcsRecord>& ccs);

// Result documents -------------------------------------------------------------------

[[nodiscard]] std::string matrix_to_json(const SimilarityMatrix& m);
[[nodiscard]] std::string matrix_to_csv(const SimilarityMatrix& m);
[[nodiscard]] std::string composition_to_json(const CompositionReport& r);
[[nodiscard]] std::string sweep_to_json(const SweepResult& r);
[[nodiscard]] std::string sweep_to_csv(const SweepResult& r);
[[nodiscard]] std::string ablation_to_json(const AblationReport& r);
[[nodiscard]] std::string ablation_to_csv(const AblationReport& r);

} // namespace easteer
