#pragma once

#include <span>
#include <string>
#include <vector>

namespace easteer {

/// Norms at or below this are treated as degenerate (zero) vectors.
inline constexpr double kNormEpsilon = 1e-8;

/// Tolerance on the L2 norm of a vector flagged as unit.
inline constexpr double kUnitTolerance = 1e-5;

/// A d-dimensional float32 vector tagged with the encoder that produced it.
/// Construction enforces dim >= 1 and finite values.
class Embedding {
public:
    Embedding() = default;
    Embedding(std::vector<float> values, std::string encoder_id);

    [[nodiscard]] const std::vector<float>& values() const noexcept { return values_; }
    [[nodiscard]] std::span<const float> span() const noexcept { return values_; }
    [[nodiscard]] const std::string& encoder_id() const noexcept { return encoder_id_; }
    [[nodiscard]] std::size_t dim() const noexcept { return values_.size(); }

    friend bool operator==(const Embedding&, const Embedding&) = default;

private:
    std::vector<float> values_;
    std::string encoder_id_;
};

/// A direction in embedding space. When is_unit is set the norm is 1 within kUnitTolerance.
class DirectionVector {
public:
    DirectionVector() = default;
    DirectionVector(std::vector<float> values, bool is_unit);

    [[nodiscard]] const std::vector<float>& values() const noexcept { return values_; }
    [[nodiscard]] std::span<const float> span() const noexcept { return values_; }
    [[nodiscard]] bool is_unit() const noexcept { return is_unit_; }
    [[nodiscard]] std::size_t dim() const noexcept { return values_.size(); }

    friend bool operator==(const DirectionVector&, const DirectionVector&) = default;

private:
    std::vector<float> values_;
    bool is_unit_ = false;
};

// Elementary algebra. Accumulation is done in double, results are stored as float.

[[nodiscard]] bool all_finite(std::span<const float> v) noexcept;

[[nodiscard]] double dot(std::span<const float> a, std::span<const float> b);
[[nodiscard]] double l2_norm(std::span<const float> v);

[[nodiscard]] std::vector<float> add(std::span<const float> a, std::span<const float> b);
[[nodiscard]] std::vector<float> scale(std::span<const float> v, double alpha);

/// Throws DegenerateVector when the norm is <= kNormEpsilon.
[[nodiscard]] DirectionVector normalize(std::span<const float> v);

/// a.b / (|a||b|) clamped to [-1, 1].
[[nodiscard]] double cosine_similarity(std::span<const float> a, std::span<const float> b);

} // namespace easteer
