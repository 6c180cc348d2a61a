#include "easteer/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "easteer/errors.hpp"

namespace easteer {

namespace {

void require_finite(std::span<const float> v, const char* what) {
    if (!all_finite(v)) {
        throw Error(ErrorCode::NonFiniteInput, std::string(what) + " contains NaN or Inf");
    }
}

void require_same_dim(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) {
        throw Error(ErrorCode::DimensionMismatch,
                    "dims " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
    }
}

} // namespace

Embedding::Embedding(std::vector<float> values, std::string encoder_id)
    : values_(std::move(values)), encoder_id_(std::move(encoder_id)) {
    if (values_.empty()) {
        throw Error(ErrorCode::InvalidArgument, "embedding must have dim >= 1");
    }
    require_finite(values_, "embedding");
}

DirectionVector::DirectionVector(std::vector<float> values, bool is_unit)
    : values_(std::move(values)), is_unit_(is_unit) {
    require_finite(values_, "direction vector");
    if (is_unit_ && std::abs(l2_norm(values_) - 1.0) > kUnitTolerance) {
        throw Error(ErrorCode::InvalidArgument, "vector flagged unit does not have unit norm");
    }
}

bool all_finite(std::span<const float> v) noexcept {
    return std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x); });
}

double dot(std::span<const float> a, std::span<const float> b) {
    require_same_dim(a, b);
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    }
    return acc;
}

double l2_norm(std::span<const float> v) {
    double acc = 0.0;
    for (float x : v) {
        acc += static_cast<double>(x) * static_cast<double>(x);
    }
    return std::sqrt(acc);
}

std::vector<float> add(std::span<const float> a, std::span<const float> b) {
    require_same_dim(a, b);
    require_finite(a, "lhs");
    require_finite(b, "rhs");
    std::vector<float> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = static_cast<float>(static_cast<double>(a[i]) + static_cast<double>(b[i]));
    }
    require_finite(out, "sum (overflow)");
    return out;
}

std::vector<float> scale(std::span<const float> v, double alpha) {
    require_finite(v, "vector");
    if (!std::isfinite(alpha)) {
        throw Error(ErrorCode::NonFiniteInput, "alpha is not finite");
    }
    std::vector<float> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = static_cast<float>(static_cast<double>(v[i]) * alpha);
    }
    require_finite(out, "scaled vector (overflow)");
    return out;
}

DirectionVector normalize(std::span<const float> v) {
    require_finite(v, "vector");
    const double norm = l2_norm(v);
    if (!(norm > kNormEpsilon)) {
        throw Error(ErrorCode::DegenerateVector, "norm " + std::to_string(norm) + " <= 1e-8");
    }
    std::vector<float> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = static_cast<float>(static_cast<double>(v[i]) / norm);
    }
    return DirectionVector(std::move(out), true);
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
    require_same_dim(a, b);
    const double na = l2_norm(a);
    const double nb = l2_norm(b);
    if (!(na > kNormEpsilon) || !(nb > kNormEpsilon)) {
        throw Error(ErrorCode::DegenerateVector, "cosine of a zero-norm vector");
    }
    return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

} // namespace easteer
