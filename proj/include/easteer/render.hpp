#pragma once

#include <string>

#include "easteer/metrics.hpp"
#include "easteer/probes.hpp"

namespace easteer {

// Deterministic SVG output: same input, same bytes.

/// Cosine heatmap, blue (-1) to white (0) to red (+1), values printed per cell.
[[nodiscard]] std::string render_heatmap_svg(const SimilarityMatrix& m);

/// Attribute confidence and CCS against alpha on a shared [0, 1] axis.
[[nodiscard]] std::string render_sweep_svg(const SweepResult& r);

/// Grouped bars of H_g, H_r and CCS per report row.
[[nodiscard]] std::string render_report_svg(const ExperimentReport& report);

} // namespace easteer
