#include <gtest/gtest.h>

#include <cstring>
#include <limits>

#include <json.hpp>

#include "easteer/container.hpp"
#include "easteer/errors.hpp"
#include "support.hpp"

using namespace easteer;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::Incomplete;
}

std::uint32_t bits(float f) {
    std::uint32_t b;
    std::memcpy(&b, &f, 4);
    return b;
}

void expect_bit_equal(const std::vector<NamedTensor>& a, const std::vector<NamedTensor>& b) {
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].name, b[i].name);
        ASSERT_EQ(a[i].values.size(), b[i].values.size());
        for (std::size_t k = 0; k < a[i].values.size(); ++k) {
            EXPECT_EQ(bits(a[i].values[k]), bits(b[i].values[k]));
        }
    }
}

} // namespace

TEST(Container, ExactBytesOfSmallFile) {
    const std::vector<NamedTensor> t{{"a", {1.0f}}};
    const std::string expected("EASTEER1"
                               "\x01\x00\x00\x00"
                               "\x01\x00\x00\x00"
                               "\x01\x00\x00\x00"
                               "a"
                               "\x01\x00\x00\x00"
                               "\x00\x00\x00\x00\x00\x00\x00\x00"
                               "\x00\x00\x80\x3f",
                               8 + 4 + 4 + 4 + 1 + 4 + 8 + 4);
    EXPECT_EQ(write_container(t), expected);
}

TEST(Container, RoundTripIsBitExact) {
    std::mt19937_64 rng(21);
    for (int round = 0; round < 200; ++round) {
        std::vector<NamedTensor> ts;
        const auto n = 1 + rng() % 6;
        for (std::size_t i = 0; i < n; ++i) {
            ts.push_back({"t" + std::to_string(i) + (i % 2 ? " with space" : ""), test::random_vector(rng, 1 + rng() % 40)});
        }
        ts[0].values[0] = -0.0f;
        ts[0].values.push_back(std::numeric_limits<float>::denorm_min());
        ts[0].values.push_back(std::numeric_limits<float>::max());
        expect_bit_equal(read_container(write_container(ts)), ts);
    }
}

TEST(Container, SaveLoadThroughFiles) {
    const auto dir = test::scratch("container_files");
    const std::vector<NamedTensor> ts{{"x", {1, 2, 3}}, {"y", {4}}};
    save_container(dir / "nested" / "t.tensors", ts);
    expect_bit_equal(load_container(dir / "nested" / "t.tensors"), ts);
}

TEST(Container, ReadsOutOfOrderPayloadFromIndependentWriter) {
    const auto bytes = read_file(test::data("out_of_order.tensors"));
    const auto expect = nlohmann::json::parse(read_file(test::data("out_of_order.json")));
    const auto ts = read_container(bytes);
    ASSERT_EQ(ts.size(), 3u);
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const auto name = expect["order"][i].get<std::string>();
        EXPECT_EQ(ts[i].name, name);
        EXPECT_EQ(ts[i].values, expect["tensors"][name].get<std::vector<float>>());
    }
}

TEST(Container, RejectsCorruptInput) {
    const std::vector<NamedTensor> ts{{"a", {1, 2}}, {"b", {3}}};
    const auto good = write_container(ts);

    auto bad_magic = good;
    bad_magic[0] = 'X';
    EXPECT_EQ(code_of([&] { (void)read_container(bad_magic); }), ErrorCode::CorruptContainer);

    auto bad_version = good;
    bad_version[8] = 2;
    EXPECT_EQ(code_of([&] { (void)read_container(bad_version); }), ErrorCode::CorruptContainer);

    EXPECT_EQ(code_of([&] { (void)read_container(good.substr(0, 20)); }), ErrorCode::CorruptContainer);
    EXPECT_EQ(code_of([&] { (void)read_container(good.substr(0, good.size() - 1)); }), ErrorCode::CorruptContainer);
    EXPECT_EQ(code_of([&] { (void)read_container(""); }), ErrorCode::CorruptContainer);

    // Point "b" into the middle of "a".
    auto overlap = good;
    const auto b_offset_pos = 8 + 4 + 4 + (4 + 1 + 4 + 8) + (4 + 1 + 4);
    overlap[b_offset_pos] = 4;
    EXPECT_EQ(code_of([&] { (void)read_container(overlap); }), ErrorCode::CorruptContainer);

    auto dup = good;
    dup[8 + 4 + 4 + 4 + 1 + 4 + 8 + 4] = 'a';
    EXPECT_EQ(code_of([&] { (void)read_container(dup); }), ErrorCode::CorruptContainer);

    auto dim0 = good;
    dim0[8 + 4 + 4 + 4 + 1] = 0;
    EXPECT_EQ(code_of([&] { (void)read_container(dim0); }), ErrorCode::CorruptContainer);
}

TEST(Container, WriterRejectsDuplicateOrEmpty) {
    const std::vector<NamedTensor> dup{{"a", {1}}, {"a", {2}}};
    EXPECT_EQ(code_of([&] { (void)write_container(dup); }), ErrorCode::InvalidArgument);
    const std::vector<NamedTensor> empty{{"a", {}}};
    EXPECT_EQ(code_of([&] { (void)write_container(empty); }), ErrorCode::InvalidArgument);
}

TEST(Safetensors, RoundTripAndConversion) {
    std::mt19937_64 rng(22);
    std::vector<NamedTensor> ts{{"male", test::random_vector(rng, 16)}, {"black female", test::random_vector(rng, 16)}};
    const auto st = write_safetensors(ts);
    // 8-byte little-endian header length, then JSON padded to a multiple of 8.
    std::uint64_t header_len = 0;
    std::memcpy(&header_len, st.data(), 8);
    EXPECT_EQ(header_len % 8, 0u);
    auto back = read_safetensors(st);
    std::sort(back.begin(), back.end(), [](auto& a, auto& b) { return a.name < b.name; });
    std::sort(ts.begin(), ts.end(), [](auto& a, auto& b) { return a.name < b.name; });
    expect_bit_equal(back, ts);
    expect_bit_equal(read_container(write_container(back)), ts);
}

TEST(Safetensors, RejectsNonF32) {
    const std::string header = R"({"x":{"dtype":"F16","shape":[2],"data_offsets":[0,4]}})";
    std::string bytes(8, '\0');
    const std::uint64_t n = header.size();
    std::memcpy(bytes.data(), &n, 8);
    bytes += header;
    bytes += std::string(4, '\0');
    EXPECT_EQ(code_of([&] { (void)read_safetensors(bytes); }), ErrorCode::CorruptContainer);
}
