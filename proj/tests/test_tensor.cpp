#include <gtest/gtest.h>

#include <limits>

#include "easteer/errors.hpp"
#include "easteer/tensor.hpp"
#include "support.hpp"

using namespace easteer;
using easteer::test::random_vector;

namespace {

template <typename F>
void expect_code(ErrorCode code, F&& f) {
    try {
        f();
        FAIL() << "expected " << to_string(code);
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), code) << e.what();
    }
}

} // namespace

TEST(Embedding, RejectsEmptyAndNonFinite) {
    expect_code(ErrorCode::InvalidArgument, [] { Embedding({}, "enc"); });
    expect_code(ErrorCode::NonFiniteInput, [] { Embedding({1.0f, std::numeric_limits<float>::quiet_NaN()}, "enc"); });
    expect_code(ErrorCode::NonFiniteInput, [] { Embedding({std::numeric_limits<float>::infinity()}, "enc"); });
    Embedding e({0.1f, 0.2f}, "enc");
    EXPECT_EQ(e.dim(), 2u);
    EXPECT_EQ(e.encoder_id(), "enc");
}

TEST(DirectionVector, UnitFlagIsChecked) {
    expect_code(ErrorCode::InvalidArgument, [] { DirectionVector({1.0f, 1.0f}, true); });
    DirectionVector ok({0.6f, 0.8f}, true);
    EXPECT_TRUE(ok.is_unit());
    DirectionVector raw({3.0f, 4.0f}, false);
    EXPECT_FALSE(raw.is_unit());
}

TEST(VectorAlgebra, DotAndNormMatchLongDouble) {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 1000; ++i) {
        const auto dim = 1 + rng() % 64;
        const auto a = random_vector(rng, dim), b = random_vector(rng, dim);
        EXPECT_NEAR(dot(a, b), static_cast<double>(test::ref_dot(a, b)), 1e-9);
        EXPECT_NEAR(l2_norm(a), static_cast<double>(test::ref_norm(a)), 1e-9);
    }
}

TEST(VectorAlgebra, DimensionMismatch) {
    std::vector<float> a{1, 2}, b{1, 2, 3};
    expect_code(ErrorCode::DimensionMismatch, [&] { (void)dot(a, b); });
    expect_code(ErrorCode::DimensionMismatch, [&] { (void)add(a, b); });
    expect_code(ErrorCode::DimensionMismatch, [&] { (void)cosine_similarity(a, b); });
}

TEST(VectorAlgebra, NormalizeIsIdempotent) {
    std::mt19937_64 rng(12);
    for (int i = 0; i < 1000; ++i) {
        const auto v = random_vector(rng, 1 + rng() % 32, std::pow(10.0, static_cast<double>(rng() % 7) - 3.0));
        const auto once = normalize(v);
        const auto twice = normalize(once.span());
        EXPECT_TRUE(once.is_unit());
        EXPECT_NEAR(static_cast<double>(test::ref_norm(once.values())), 1.0, 1e-6);
        for (std::size_t k = 0; k < v.size(); ++k) {
            EXPECT_NEAR(once.values()[k], twice.values()[k], 1e-6);
        }
    }
}

TEST(VectorAlgebra, NormalizeZeroIsDegenerate) {
    std::vector<float> z(8, 0.0f);
    expect_code(ErrorCode::DegenerateVector, [&] { (void)normalize(z); });
    std::vector<float> tiny(4, 1e-12f);
    expect_code(ErrorCode::DegenerateVector, [&] { (void)normalize(tiny); });
}

TEST(VectorAlgebra, CosineSymmetryBoundsAndOracle) {
    std::mt19937_64 rng(13);
    for (int i = 0; i < 1000; ++i) {
        const auto dim = 1 + rng() % 48;
        const auto a = random_vector(rng, dim), b = random_vector(rng, dim);
        const double ab = cosine_similarity(a, b), ba = cosine_similarity(b, a);
        EXPECT_EQ(ab, ba);
        EXPECT_GE(ab, -1.0);
        EXPECT_LE(ab, 1.0);
        const long double ref = test::ref_dot(a, b) / (test::ref_norm(a) * test::ref_norm(b));
        EXPECT_NEAR(ab, static_cast<double>(ref), 1e-9);
    }
}

TEST(VectorAlgebra, CosineClampsParallelVectors) {
    std::mt19937_64 rng(14);
    for (int i = 0; i < 1000; ++i) {
        const auto a = random_vector(rng, 1 + rng() % 64);
        const auto scaled = scale(a, 1.0 + static_cast<double>(rng() % 100));
        const double c = cosine_similarity(a, scaled);
        EXPECT_LE(c, 1.0);
        EXPECT_NEAR(c, 1.0, 1e-6);
        const auto neg = scale(a, -1.0);
        EXPECT_GE(cosine_similarity(a, neg), -1.0);
        EXPECT_NEAR(cosine_similarity(a, neg), -1.0, 1e-6);
    }
}

TEST(VectorAlgebra, CosineOfZeroIsDegenerate) {
    std::vector<float> a{1, 2, 3}, z{0, 0, 0};
    expect_code(ErrorCode::DegenerateVector, [&] { (void)cosine_similarity(a, z); });
}

TEST(VectorAlgebra, AxisAlignedAreOrthogonal) {
    std::vector<float> x{1, 0, 0}, y{0, 1, 0};
    EXPECT_EQ(cosine_similarity(x, y), 0.0);
    EXPECT_EQ(cosine_similarity(x, x), 1.0);
}
