#include "easteer/sampling.hpp"

#include <cmath>
#include <random>

#include "easteer/errors.hpp"

namespace easteer {

AttributeDistribution::AttributeDistribution(const std::map<std::string, double>& weights) {
    if (weights.empty()) {
        throw Error(ErrorCode::InvalidDistribution, "no categories");
    }
    double total = 0.0;
    for (const auto& [name, w] : weights) {
        if (!std::isfinite(w) || w < 0.0) {
            throw Error(ErrorCode::InvalidDistribution, "weight for '" + name + "' is negative or non-finite");
        }
        total += w;
    }
    if (!(total > 0.0)) {
        throw Error(ErrorCode::InvalidDistribution, "all weights are zero");
    }

    std::size_t last_positive = 0;
    double running = 0.0;
    for (const auto& [name, w] : weights) {
        names_.push_back(name);
        probs_.push_back(w / total);
        running += w / total;
        cdf_.push_back(running);
        if (w > 0.0) {
            last_positive = names_.size() - 1;
        }
    }
    // Rounding must not leave a gap at the top or hand mass to a zero-weight tail.
    for (std::size_t i = last_positive; i < cdf_.size(); ++i) {
        cdf_[i] = 1.0;
    }
}

AttributeDistribution AttributeDistribution::uniform(std::span<const std::string> names) {
    std::map<std::string, double> w;
    for (const auto& n : names) {
        w[n] = 1.0;
    }
    return AttributeDistribution(w);
}

std::vector<std::string> sample_attributes(const AttributeDistribution& dist, std::size_t n,
                                           std::uint64_t seed) {
    std::mt19937_64 engine(seed);
    std::vector<std::string> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = static_cast<double>(engine() >> 11) * 0x1.0p-53;
        std::size_t k = 0;
        while (k + 1 < dist.cdf_.size() && !(u < dist.cdf_[k])) {
            ++k;
        }
        out.push_back(dist.names_[k]);
    }
    return out;
}

std::uint64_t splitmix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t image_seed(std::uint64_t master_seed, std::uint64_t index) noexcept {
    return splitmix64(master_seed + (index + 1) * 0x9E3779B97F4A7C15ULL);
}

} // namespace easteer
