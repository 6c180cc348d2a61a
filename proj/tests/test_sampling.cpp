#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include <json.hpp>

#include "easteer/errors.hpp"
#include "easteer/probes.hpp"
#include "easteer/sampling.hpp"
#include "support.hpp"

using namespace easteer;

namespace {

std::vector<std::string> intersections() { return AttributeAxes::demographic().intersection_names(); }

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) {
        out.push_back(l);
    }
    return out;
}

} // namespace

TEST(Sampling, MatchesIndependentReferenceSequence) {
    const auto names = intersections();
    const auto seq = sample_attributes(AttributeDistribution::uniform(names), 64, 20240607);
    EXPECT_EQ(seq, lines(read_file(test::data("sampling_reference.txt"))));
}

TEST(Sampling, SameSeedSameSequence) {
    const auto d = AttributeDistribution::uniform(intersections());
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        EXPECT_EQ(sample_attributes(d, 100, seed), sample_attributes(d, 100, seed));
    }
    EXPECT_NE(sample_attributes(d, 100, 1), sample_attributes(d, 100, 2));
}

TEST(Sampling, PrefixStable) {
    const auto d = AttributeDistribution::uniform(intersections());
    const auto long_run = sample_attributes(d, 500, 9);
    const auto short_run = sample_attributes(d, 120, 9);
    EXPECT_TRUE(std::equal(short_run.begin(), short_run.end(), long_run.begin()));
}

TEST(Sampling, UniformEightFrequencies) {
    const auto names = intersections();
    const std::size_t n = 100000;
    std::map<std::string, std::size_t> counts;
    for (const auto& s : sample_attributes(AttributeDistribution::uniform(names), n, 77)) {
        ++counts[s];
    }
    ASSERT_EQ(counts.size(), 8u);
    for (const auto& [_, c] : counts) {
        EXPECT_LT(std::abs(static_cast<double>(c) / n - 0.125), 0.02);
    }
}

TEST(Sampling, WeightedFrequenciesAndZeroWeights) {
    const AttributeDistribution d({{"a", 0.7}, {"b", 0.0}, {"c", 0.2}, {"d", 0.1}, {"z", 0.0}});
    EXPECT_EQ(d.names(), (std::vector<std::string>{"a", "b", "c", "d", "z"}));
    std::map<std::string, std::size_t> counts;
    const std::size_t n = 200000;
    for (const auto& s : sample_attributes(d, n, 5)) {
        ++counts[s];
    }
    EXPECT_EQ(counts.count("b"), 0u);
    EXPECT_EQ(counts.count("z"), 0u);
    EXPECT_NEAR(counts["a"] / double(n), 0.7, 0.01);
    EXPECT_NEAR(counts["c"] / double(n), 0.2, 0.01);
    EXPECT_NEAR(counts["d"] / double(n), 0.1, 0.01);
}

TEST(Sampling, WeightsAreNormalized) {
    const AttributeDistribution d({{"x", 3.0}, {"y", 1.0}});
    EXPECT_DOUBLE_EQ(d.probabilities()[0], 0.75);
    EXPECT_DOUBLE_EQ(d.probabilities()[1], 0.25);
}

TEST(Sampling, InvalidDistributions) {
    auto code = [](const std::map<std::string, double>& w) {
        try {
            AttributeDistribution d(w);
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::Incomplete;
    };
    EXPECT_EQ(code({}), ErrorCode::InvalidDistribution);
    EXPECT_EQ(code({{"a", -1.0}, {"b", 2.0}}), ErrorCode::InvalidDistribution);
    EXPECT_EQ(code({{"a", 0.0}}), ErrorCode::InvalidDistribution);
    EXPECT_EQ(code({{"a", std::nan("")}}), ErrorCode::InvalidDistribution);
}

TEST(Seeds, ImageSeedsAreDistinctAndIndependentOfMethod) {
    std::set<std::uint64_t> seen;
    for (std::uint64_t i = 0; i < 20000; ++i) {
        EXPECT_TRUE(seen.insert(image_seed(42, i)).second);
    }
    EXPECT_NE(image_seed(1, 0), image_seed(2, 0));
}

TEST(Seeds, MatchIndependentReference) {
    const auto ref = nlohmann::json::parse(read_file(test::data("ea_reference.json")));
    const auto master = ref["master_seed"].get<std::uint64_t>();
    for (const auto& [concept_name, doc] : ref["concepts"].items()) {
        const auto seeds = doc["image_seeds"].get<std::vector<std::uint64_t>>();
        for (std::size_t i = 0; i < seeds.size(); ++i) {
            EXPECT_EQ(image_seed(master, i), seeds[i]);
        }
        const auto s = sampling_seed(master, concept_name);
        EXPECT_EQ(sample_attributes(AttributeDistribution::uniform(intersections()), 8, s),
                  doc["EA_i"].get<std::vector<std::string>>());
        const std::vector<std::string> genders{"male", "female"};
        EXPECT_EQ(sample_attributes(AttributeDistribution::uniform(genders), 8, s),
                  doc["EA_g"].get<std::vector<std::string>>());
    }
}
