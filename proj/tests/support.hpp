#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "easteer/container.hpp"

namespace easteer::test {

inline std::filesystem::path data_dir() { return EASTEER_TEST_DATA; }
inline std::filesystem::path data(const std::string& name) { return data_dir() / name; }

/// Fresh scratch directory under the build tree, emptied on creation.
inline std::filesystem::path scratch(const std::string& name) {
    auto p = std::filesystem::path(EASTEER_TEST_SCRATCH) / name;
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline std::vector<float> random_vector(std::mt19937_64& rng, std::size_t dim, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    std::vector<float> v(dim);
    for (auto& x : v) {
        x = static_cast<float>(n(rng));
    }
    return v;
}

// Long-double references, kept independent of the library code.
inline long double ref_dot(const std::vector<float>& a, const std::vector<float>& b) {
    long double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += static_cast<long double>(a[i]) * b[i];
    }
    return s;
}

inline long double ref_norm(const std::vector<float>& a) { return std::sqrt(ref_dot(a, a)); }

} // namespace easteer::test
