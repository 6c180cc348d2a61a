#include <gtest/gtest.h>

#include <atomic>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "easteer/config.hpp"
#include "easteer/errors.hpp"
#include "easteer/mock.hpp"
#include "easteer/probes.hpp"
#include "easteer/sampling.hpp"
#include "support.hpp"

using namespace easteer;
using nlohmann::json;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::Incomplete;
}

AttributeVector vec(const std::string& name, std::vector<float> v, std::vector<std::string> sources = {"Doctor"}) {
    AttributeVector a;
    a.name = name;
    a.direction = normalize(v);
    a.raw_norm = 1.0;
    a.source_concepts = std::move(sources);
    a.intersectional = name.find(' ') != std::string::npos;
    a.encoder_id = "enc";
    return a;
}

/// Forwards to a backend and counts generate calls.
class CountingAdapter : public Adapter {
public:
    explicit CountingAdapter(Adapter& inner) : inner_(inner) {}
    AdapterMeta meta() override { return inner_.meta(); }
    Embedding encode(const std::string& p) override { return inner_.encode(p); }
    std::string generate(const GenerationRequest& r) override {
        ++generated;
        return inner_.generate(r);
    }
    std::string fetch_image(const std::string& id) override { return inner_.fetch_image(id); }
    ClassifyResult classify(const std::string& id) override { return inner_.classify(id); }
    VqaResult vqa(const std::string& id, const std::string& c) override { return inner_.vqa(id, c); }

    std::atomic<int> generated{0};

private:
    Adapter& inner_;
};

MockWorld demo_world() { return MockWorld::load(test::data("mock_world.json")); }

LookupTable table_from(MockAdapter& mock, const std::vector<std::string>& sources) {
    const auto reqs = attribute_requests(AttributeAxes::demographic());
    return build_lookup_table(reqs, sources, kDefaultTemplate, [&](const std::string& p) { return mock.encode(p); },
                              4);
}

const std::vector<std::string> kSources{"Interior Designer", "Doctor", "Engineer", "Teacher", "Childcare Worker",
                                        "Clergy", "Police Officer", "CEO", "Artist"};

} // namespace

// Orthogonality ------------------------------------------------------------------------

TEST(Orthogonality, SymmetricUnitDiagonalBounded) {
    MockAdapter mock(demo_world());
    const auto table = table_from(mock, kSources);
    const auto m = orthogonality_matrix(table);
    ASSERT_EQ(m.size(), 14u);
    for (std::size_t i = 0; i < m.size(); ++i) {
        EXPECT_EQ(m.at(i, i), 1.0);
        for (std::size_t j = 0; j < m.size(); ++j) {
            EXPECT_EQ(m.at(i, j), m.at(j, i));
            EXPECT_LE(std::abs(m.at(i, j)), 1.0);
        }
    }
}

TEST(Orthogonality, SubsetOrderAndErrors) {
    LookupTable t("enc", 3, std::string(kDefaultTemplate), 1,
                  {vec("male", {1, 0, 0}), vec("female", {0, 1, 0}), vec("white", {1, 1, 0})});
    const auto m = orthogonality_matrix(t, std::vector<std::string>{"white", "male"});
    EXPECT_EQ(m.labels, (std::vector<std::string>{"white", "male"}));
    EXPECT_NEAR(m.at(0, 1), std::sqrt(0.5), 1e-7);
    EXPECT_EQ(m.at(0, 1), m.at(1, 0));
    EXPECT_EQ(matrix_to_csv(orthogonality_matrix(t, std::vector<std::string>{"male", "female"})),
              "label,male,female\nmale,1.000000,0.000000\nfemale,0.000000,1.000000\n");
    EXPECT_EQ(code_of([&] { (void)orthogonality_matrix(t, std::vector<std::string>{"male"}); }),
              ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([&] { (void)orthogonality_matrix(t, std::vector<std::string>{"male", "teal"}); }),
              ErrorCode::UnknownAttribute);
}

// Composability ------------------------------------------------------------------------

TEST(Composability, ConstructedIdentityIsOne) {
    LookupTable t("enc", 3, std::string(kDefaultTemplate), 1,
                  {vec("female", {0, 1, 0}), vec("black", {1, 0, 0}), vec("black female", {1, 1, 0})});
    const auto r = composability_probe(t, "black", "female", nullptr, "Doctor", 10, {});
    EXPECT_EQ(r.identity, "black female");
    EXPECT_NEAR(r.cosine_composed_vs_intersectional, 1.0, 1e-6);
    EXPECT_FALSE(r.generation_rates.has_value());
    EXPECT_NE(composition_to_json(r).find("\"generation_omitted\": true"), std::string::npos);
}

TEST(Composability, HandComputedCosine) {
    const float z = static_cast<float>(std::sqrt(1.0 - 0.72));
    LookupTable t("enc", 3, std::string(kDefaultTemplate), 1,
                  {vec("female", {0, 1, 0}), vec("black", {1, 0, 0}), vec("black female", {0.6f, 0.6f, z})});
    const auto r = composability_probe(t, "black", "female", nullptr, "Doctor", 0, {});
    EXPECT_NEAR(r.cosine_composed_vs_intersectional, 1.2 / std::sqrt(2.0), 1e-6);
}

TEST(Composability, WithAdapterTabulatesBothVariants) {
    MockAdapter mock(demo_world());
    const auto table = table_from(mock, kSources);
    ProbeOptions o;
    o.master_seed = 5;
    o.max_in_flight = 4;
    const auto r = composability_probe(table, "black", "female", &mock, "Doctor", 20, o);
    ASSERT_TRUE(r.generation_rates.has_value());
    EXPECT_FALSE(r.incomplete);
    EXPECT_GT(r.cosine_composed_vs_intersectional, 0.9);
    for (const auto* f : {&r.generation_rates->first, &r.generation_rates->second}) {
        EXPECT_EQ(f->size(), 8u);
        double total = 0.0;
        for (const auto& [_, v] : *f) {
            total += v;
        }
        EXPECT_NEAR(total, 1.0, 1e-12);
    }
    EXPECT_EQ(code_of([&] { (void)composability_probe(table, "green", "female", nullptr, "Doctor", 0, o); }),
              ErrorCode::UnknownAttribute);
}

// Alpha sweep ----------------------------------------------------------------------------

namespace {

struct ExpectedRow {
    double alpha, confidence, ccs;
};

std::vector<ExpectedRow> expected_sweep() {
    std::ifstream in(test::data("sweep_expected.csv"));
    std::string line;
    std::getline(in, line);
    std::vector<ExpectedRow> rows;
    while (std::getline(in, line)) {
        std::istringstream s(line);
        ExpectedRow r{};
        char comma;
        s >> r.alpha >> comma >> r.confidence >> comma >> r.ccs;
        rows.push_back(r);
    }
    return rows;
}

} // namespace

TEST(Sweep, MatchesAnalyticOracle) {
    MockAdapter mock(MockWorld::load(test::data("sweep_world.json")));
    const auto table = build_lookup_table(std::vector<AttributeRequest>{{"female", false}}, std::vector<std::string>{"Carpenter"},
                                          kDefaultTemplate, [&](const std::string& p) { return mock.encode(p); }, 1);
    EXPECT_EQ(table.at("female").direction.values(), (std::vector<float>{1, 0, 0, 0, 0, 0}));

    const auto expected = expected_sweep();
    ASSERT_EQ(expected.size(), 21u);
    ProbeOptions o;
    o.master_seed = 77;
    const auto r = alpha_sweep(mock, table, "Carpenter", "female", default_alpha_grid(), 3, o);
    ASSERT_FALSE(r.incomplete) << r.error;
    ASSERT_EQ(r.points.size(), expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
        EXPECT_DOUBLE_EQ(r.points[i].alpha, expected[i].alpha);
        EXPECT_NEAR(r.points[i].attribute_confidence, expected[i].confidence, 1e-6) << "alpha " << expected[i].alpha;
        EXPECT_NEAR(r.points[i].ccs, expected[i].ccs, 1e-6) << "alpha " << expected[i].alpha;
        EXPECT_EQ(r.points[i].seed_set, r.points[0].seed_set);
        if (i > 0) {
            EXPECT_GE(r.points[i].attribute_confidence, r.points[i - 1].attribute_confidence);
            EXPECT_LE(r.points[i].ccs, r.points[i - 1].ccs);
        }
    }
    EXPECT_EQ(r.points[0].seed_set[1], image_seed(77, 1));
}

TEST(Sweep, ZeroAlphaIsUnsteered) {
    MockAdapter mock(demo_world());
    const auto table = table_from(mock, kSources);
    ProbeOptions o;
    o.master_seed = 3;
    const auto r = alpha_sweep(mock, table, "Nurse", "male", {0.0}, 4, o);
    const auto prompt = render_prompt(kDefaultTemplate, "Nurse");
    const auto base = mock.encode(prompt);
    double conf = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        const auto id = mock.generate({prompt, base, image_seed(3, i), {}});
        conf += mock.classify(id).gender_probs[0];
    }
    EXPECT_DOUBLE_EQ(r.points.at(0).attribute_confidence, conf / 4.0);
}

TEST(Sweep, RejectsBadArguments) {
    MockAdapter mock(demo_world());
    const auto table = table_from(mock, kSources);
    EXPECT_EQ(code_of([&] { (void)alpha_sweep(mock, table, "Nurse", "male", {1.0, 0.5}, 2, {}); }),
              ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([&] { (void)alpha_sweep(mock, table, "Nurse", "male", {}, 2, {}); }),
              ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([&] { (void)alpha_sweep(mock, table, "Nurse", "male", {0.0}, 0, {}); }),
              ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([&] { (void)alpha_sweep(mock, table, "Nurse", "teal", {0.0}, 2, {}); }),
              ErrorCode::UnknownAttribute);
}

TEST(Sweep, AttributeConfidence) {
    ClassifyResult c{"x", {0.3, 0.7}, {0.1, 0.2, 0.3, 0.4}};
    EXPECT_DOUBLE_EQ(attribute_confidence(c, "female"), 0.7);
    EXPECT_DOUBLE_EQ(attribute_confidence(c, "asian"), 0.3);
    EXPECT_DOUBLE_EQ(attribute_confidence(c, "indian male"), 0.4 * 0.3);
    EXPECT_EQ(code_of([&] { (void)attribute_confidence(c, "smiling"); }), ErrorCode::InvalidArgument);
}

// K ablation -------------------------------------------------------------------------------

TEST(Ablation, RowsPerConfigAndTarget) {
    MockAdapter mock(demo_world());
    ProbeOptions o;
    o.master_seed = 11;
    o.max_in_flight = 4;
    const std::vector<std::vector<std::string>> configs{{"Doctor"}, kSources};
    const auto r = k_ablation(mock, {"Flight Attendant", "Carpenter"}, configs, "gender", 12, o);
    ASSERT_FALSE(r.incomplete) << r.error;
    ASSERT_EQ(r.rows.size(), 4u);
    EXPECT_EQ(r.rows[0].created_with_k, 1u);
    EXPECT_EQ(r.rows[3].created_with_k, 9u);
    for (const auto& row : r.rows) {
        EXPECT_EQ(row.gender_counts[0] + row.gender_counts[1], 12u);
        EXPECT_EQ(row.race_counts[0] + row.race_counts[1] + row.race_counts[2] + row.race_counts[3], 12u);
        EXPECT_NEAR(row.gender_fraction(0) + row.gender_fraction(1), 1.0, 1e-12);
    }
    const auto csv = ablation_to_csv(r);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "target,K,k_config,n_images,male_fraction,female_fraction,ccs");
}

TEST(Ablation, FixedAttributeSteersEveryImage) {
    MockAdapter mock(demo_world());
    ProbeOptions o;
    o.master_seed = 12;
    o.alpha = 3.0;
    const auto r = k_ablation(mock, {"Mechanic"}, {kSources}, "female", 10, o);
    ASSERT_EQ(r.rows.size(), 1u);
    EXPECT_EQ(r.rows[0].gender_counts[1], 10u);
}

TEST(Ablation, Errors) {
    MockAdapter mock(demo_world());
    EXPECT_EQ(code_of([&] { (void)k_ablation(mock, {"Doctor"}, {{"Doctor", "CEO"}}, "gender", 2, {}); }),
              ErrorCode::ProvenanceMismatch);
    EXPECT_EQ(code_of([&] { (void)k_ablation(mock, {}, {{"Doctor"}}, "gender", 2, {}); }),
              ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([&] { (void)k_ablation(mock, {"Nurse"}, {{}}, "gender", 2, {}); }),
              ErrorCode::InvalidArgument);
}

// Generalization ---------------------------------------------------------------------------

TEST(Generalization, SamplesMatchReferenceOracle) {
    const auto ref = json::parse(read_file(test::data("ea_reference.json")));
    MockAdapter mock(demo_world());
    const auto table = table_from(mock, kSources);
    ProbeOptions o;
    o.master_seed = ref["master_seed"].get<std::uint64_t>();
    o.max_in_flight = 3;
    const auto n = ref["n"].get<std::size_t>();
    std::vector<std::string> targets;
    for (const auto& [c, _] : ref["concepts"].items()) {
        targets.push_back(c);
    }
    const GeneralizationSplit split{kSources, targets};
    for (auto [method, key] : {std::pair{Method::EAIntersectional, "EA_i"}, std::pair{Method::EAGender, "EA_g"}}) {
        const auto r = generalization_run(mock, &table, split, method, 1.25, n, o);
        ASSERT_FALSE(r.incomplete);
        ASSERT_EQ(r.records.size(), n * targets.size());
        for (const auto& rec : r.records) {
            const auto& c = ref["concepts"][rec.concept_name];
            EXPECT_EQ(rec.attribute, c[key][rec.index].get<std::string>());
            EXPECT_EQ(rec.seed, c["image_seeds"][rec.index].get<std::uint64_t>());
            EXPECT_EQ(rec.alpha, 1.25);
            EXPECT_EQ(rec.method, key);
            EXPECT_EQ(rec.model_id, "mock-t2i");
        }
    }
}

TEST(Generalization, DefaultAppliesNoSteering) {
    MockAdapter mock(demo_world());
    ProbeOptions o;
    o.master_seed = 8;
    const auto r = generalization_run(mock, nullptr, {kSources, {"Nurse"}}, Method::Default, 1.25, 5, o);
    for (const auto& rec : r.records) {
        EXPECT_TRUE(rec.attribute.empty());
        EXPECT_EQ(rec.alpha, 0.0);
        const auto base = mock.encode(rec.base_prompt);
        EXPECT_EQ(rec.image_id, mock.generate({rec.base_prompt, base, rec.seed, {}}));
    }
}

TEST(Generalization, SeedsSharedAcrossMethods) {
    MockAdapter mock(demo_world());
    const auto table = table_from(mock, kSources);
    ProbeOptions o;
    o.master_seed = 21;
    const GeneralizationSplit split{kSources, {"Nurse"}};
    const auto a = generalization_run(mock, &table, split, Method::Default, 1.25, 6, o);
    const auto b = generalization_run(mock, &table, split, Method::EAGender, 1.25, 6, o);
    for (std::size_t i = 0; i < 6; ++i) {
        EXPECT_EQ(a.records[i].seed, b.records[i].seed);
    }
}

TEST(Generalization, LeakageGuard) {
    MockAdapter mock(demo_world());
    const auto leaky = table_from(mock, {"Doctor", "Nurse"});
    ProbeOptions o;
    EXPECT_EQ(code_of([&] {
                  (void)generalization_run(mock, &leaky, {{"Doctor", "Nurse"}, {"Nurse"}}, Method::EAGender, 1.0, 1, o);
              }),
              ErrorCode::ProvenanceMismatch);
    EXPECT_EQ(code_of([&] {
                  (void)generalization_run(mock, &leaky, {{"Doctor"}, {"Fire Fighter"}}, Method::EAGender, 1.0, 1, o);
              }),
              ErrorCode::ProvenanceMismatch);
    // Explicit overlap switch for setups that reuse a concept on both sides.
    EXPECT_NO_THROW((void)generalization_run(mock, &leaky, {{"Doctor", "Nurse"}, {"Nurse"}}, Method::EAGender, 1.0,
                                             1, o, true));
    EXPECT_EQ(code_of([&] { (void)generalization_run(mock, nullptr, {{"Doctor"}, {"Nurse"}}, Method::EAGender, 1, 1, o); }),
              ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([&] { (void)generalization_run(mock, nullptr, {{}, {"Nurse"}}, Method::Default, 1, 1, o); }),
              ErrorCode::InvalidArgument);
}

TEST(Generalization, FailedImagesAreFlaggedNotDropped) {
    auto world = demo_world();
    world.fail_generate_seeds = {image_seed(4, 2)};
    MockAdapter mock(world);
    ProbeOptions o;
    o.master_seed = 4;
    o.max_in_flight = 2;
    int seen = 0;
    RunHooks hooks;
    hooks.on_record = [&](const GenerationRecord&) { ++seen; };
    const auto r = generalization_run(mock, nullptr, {kSources, {"Nurse"}}, Method::Default, 0, 5, o, false, hooks);
    EXPECT_TRUE(r.incomplete);
    ASSERT_EQ(r.records.size(), 5u);
    EXPECT_EQ(seen, 5);
    for (const auto& rec : r.records) {
        EXPECT_EQ(rec.complete, rec.index != 2);
    }
    EXPECT_NE(r.records[2].error.find("GenerationFailure"), std::string::npos);
}

TEST(Generalization, ResumeSkipsCompleteRecords) {
    MockAdapter mock(demo_world());
    CountingAdapter counting(mock);
    ProbeOptions o;
    o.master_seed = 9;
    const GeneralizationSplit split{kSources, {"Nurse", "Mechanic"}};
    const auto first = generalization_run(counting, nullptr, split, Method::Default, 0, 4, o);
    EXPECT_EQ(counting.generated.load(), 8);
    std::map<std::string, GenerationRecord> existing;
    for (std::size_t i = 0; i < first.records.size(); i += 2) {
        existing[record_key(first.records[i])] = first.records[i];
    }
    RunHooks hooks;
    hooks.existing = &existing;
    const auto second = generalization_run(counting, nullptr, split, Method::Default, 0, 4, o, false, hooks);
    EXPECT_EQ(counting.generated.load(), 12);
    EXPECT_EQ(second.records, first.records);
}

TEST(Generalization, CancelledRunsMarkRemainingImages) {
    MockAdapter mock(demo_world());
    std::atomic<bool> cancel{true};
    ProbeOptions o;
    o.cancel = &cancel;
    int seen = 0;
    RunHooks hooks;
    hooks.on_record = [&](const GenerationRecord&) { ++seen; };
    const auto r = generalization_run(mock, nullptr, {kSources, {"Nurse"}}, Method::Default, 0, 3, o, false, hooks);
    EXPECT_TRUE(r.incomplete);
    EXPECT_EQ(seen, 0);
    for (const auto& rec : r.records) {
        EXPECT_EQ(rec.error, "cancelled");
    }
}

TEST(Records, JsonRoundTripAndVersion) {
    MockAdapter mock(demo_world());
    const auto table = table_from(mock, kSources);
    ProbeOptions o;
    o.master_seed = 31;
    const auto r = generalization_run(mock, &table, {kSources, {"Nurse"}}, Method::EAIntersectional, 1.25, 3, o);
    for (const auto& rec : r.records) {
        EXPECT_EQ(record_from_json(record_to_json(rec)), rec);
    }
    auto j = json::parse(record_to_json(r.records[0]));
    j["record_version"] = 2;
    EXPECT_EQ(code_of([&] { (void)record_from_json(j.dump()); }), ErrorCode::CorruptRecord);
    j["record_version"] = 1;
    j.erase("vqa");
    EXPECT_EQ(code_of([&] { (void)record_from_json(j.dump()); }), ErrorCode::CorruptRecord);
    EXPECT_EQ(code_of([&] { (void)record_from_json("{"); }), ErrorCode::CorruptRecord);
    EXPECT_EQ(method_from_string("EA_i"), Method::EAIntersectional);
    EXPECT_EQ(code_of([&] { (void)method_from_string("ea"); }), ErrorCode::ConfigError);
}

TEST(Records, ReportInputsQualifyIds) {
    MockAdapter mock(demo_world());
    ProbeOptions o;
    o.master_seed = 1;
    const auto r = generalization_run(mock, nullptr, {kSources, {"Nurse"}}, Method::Default, 0, 2, o);
    std::vector<ImageRecord> images;
    std::vector<ClassifyResult> cls;
    std::vector<CcsRecord> ccs;
    records_to_report_inputs(r.records, images, cls, ccs);
    ASSERT_EQ(images.size(), 2u);
    EXPECT_EQ(images[0].image_id, "default/" + r.records[0].image_id);
    EXPECT_EQ(cls[0].image_id, images[0].image_id);
    EXPECT_EQ(ccs[0].concept_name, "Nurse");
}

TEST(Ablation, SingleSourceLeavesTargetMostlyMale) {
    // Scripted world: "female Mechanic" differs from "Mechanic" only in content, so a
    // K=1 table built from Mechanic carries no gender signal at all.
    MockAdapter mock(MockWorld::load(test::data("ablation_world.json")));
    ProbeOptions o;
    o.master_seed = 2024;
    o.max_in_flight = 4;
    const auto r = k_ablation(mock, {"Fire Fighter"}, {{"Mechanic"}, kDefaultSourceConcepts}, "female", 200, o);
    ASSERT_EQ(r.rows.size(), 2u);
    EXPECT_EQ(r.rows[0].created_with_k, 1u);
    EXPECT_EQ(r.rows[0].gender_counts[0], 192u);
    EXPECT_DOUBLE_EQ(r.rows[0].gender_fraction(0), 0.96);
    EXPECT_EQ(r.rows[1].created_with_k, 10u);
    EXPECT_GT(r.rows[1].gender_fraction(1), 0.5);
}
