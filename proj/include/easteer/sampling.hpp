#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace easteer {

/// Categorical distribution over attribute names. Weights are normalized on
/// construction; categories are kept in lexicographic name order, which fixes
/// the inverse-CDF layout used by sample_attributes.
class AttributeDistribution {
public:
    explicit AttributeDistribution(const std::map<std::string, double>& weights);

    static AttributeDistribution uniform(std::span<const std::string> names);

    [[nodiscard]] const std::vector<std::string>& names() const noexcept { return names_; }
    [[nodiscard]] const std::vector<double>& probabilities() const noexcept { return probs_; }

private:
    std::vector<std::string> names_;
    std::vector<double> probs_;
    std::vector<double> cdf_;

    friend std::vector<std::string> sample_attributes(const AttributeDistribution&, std::size_t,
                                                      std::uint64_t);
};

/// n independent draws. The generator is std::mt19937_64 seeded with `seed`;
/// each draw takes the top 53 bits of one output as u in [0, 1) and returns the
/// first category whose cumulative probability exceeds u. Both the engine and
/// this mapping are fully specified, so sequences are identical on every platform.
[[nodiscard]] std::vector<std::string> sample_attributes(const AttributeDistribution& dist, std::size_t n,
                                                         std::uint64_t seed);

/// Per-image seed derived from a master seed: the splitmix64 output for state
/// master + (index + 1) * 0x9E3779B97F4A7C15. Every method and alpha value
/// reuses the same index -> seed mapping so comparisons stay paired.
[[nodiscard]] std::uint64_t image_seed(std::uint64_t master_seed, std::uint64_t index) noexcept;

[[nodiscard]] std::uint64_t splitmix64(std::uint64_t state) noexcept;

} // namespace easteer
