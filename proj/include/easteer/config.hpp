#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "easteer/adapter.hpp"
#include "easteer/probes.hpp"
#include "easteer/steering.hpp"

namespace easteer {

/// How the CLI reaches a model adapter. Exactly one source is used, in this
/// priority: fixtures (hermetic replay), mock (in-process synthetic world), url.
struct AdapterConfig {
    std::string url;
    int timeout_ms = 60000;
    std::size_t max_in_flight = 4;
    int retries = 2;
    bool permissive = false;
    int protocol_version = kProtocolVersion;
    std::filesystem::path fixtures;
    std::filesystem::path mock;

    [[nodiscard]] AdapterEndpoint endpoint() const;
};

struct ComposabilityConfig {
    std::string race = "black";
    std::string gender = "female";
    std::string base_concept = "Doctor";
    /// 0 means cosine only, no generation.
    std::size_t n_images = 100;
};

struct SweepConfig {
    std::string base_concept = "Carpenter";
    std::string attribute = "female";
    std::vector<double> alphas = default_alpha_grid();
    std::size_t n_per_point = 20;
};

struct AblationConfig {
    std::vector<std::string> targets{"Carpenter", "Flight Attendant"};
    /// Empty means {each source alone} plus the full source set.
    std::vector<std::vector<std::string>> k_configs;
    std::string attribute = "gender";
    std::size_t n_images = 200;
};

struct ComposeConfig {
    std::string base_concept;
    std::vector<SteeringTerm> terms;
    std::filesystem::path output;
};

inline const std::vector<std::string> kDefaultSourceConcepts{
    "Interior Designer", "Doctor", "Engineer", "Teacher", "Childcare Worker",
    "Clergy", "Police Officer", "CEO", "Artist", "Mechanic"};

inline const std::vector<std::string> kDefaultTargetConcepts{"Fire Fighter", "Mechanic", "Flight Attendant", "Nurse"};

struct ExperimentConfig {
    AdapterConfig adapter;
    /// Lookup table stem. Empty: benchmark derives a table into the run directory.
    std::filesystem::path table;
    AttributeAxes attributes = AttributeAxes::demographic();
    std::vector<std::string> source_concepts = kDefaultSourceConcepts;
    std::vector<std::string> target_concepts = kDefaultTargetConcepts;
    std::string prompt_template{kDefaultTemplate};
    std::vector<Method> methods{Method::Default, Method::EAGender, Method::EAIntersectional};
    double alpha = 1.25;
    std::size_t n_images = 100;
    std::uint64_t master_seed = 0;
    std::filesystem::path output_dir = "runs/latest";
    bool allow_source_overlap = false;
    ImageParams image_params;

    std::optional<std::vector<std::string>> orthogonality_subset;
    ComposabilityConfig composability;
    SweepConfig sweep;
    AblationConfig ablation;
    ComposeConfig compose;

    [[nodiscard]] ProbeOptions probe_options() const;
};

/// Parses a JSON config. Unknown keys anywhere are a ConfigError. Relative
/// paths are resolved against base_dir.
[[nodiscard]] ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
[[nodiscard]] ExperimentConfig load_config(const std::filesystem::path& path);
/// Effective configuration as a JSON document (paths as resolved).
[[nodiscard]] std::string config_to_json(const ExperimentConfig& config);

} // namespace easteer
