#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace easteer {

struct NamedTensor {
    std::string name;
    std::vector<float> values;

    friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

inline constexpr std::string_view kContainerMagic = "EASTEER1";
inline constexpr std::uint32_t kContainerVersion = 1;

// Layout (all integers little-endian):
//   magic "EASTEER1" | u32 format_version | u32 entry count
//   per entry: u32 name length | name bytes (UTF-8) | u32 dim | u64 byte offset into payload
//   payload: binary32 LE floats, the remainder of the file
[[nodiscard]] std::string write_container(std::span<const NamedTensor> tensors);
[[nodiscard]] std::vector<NamedTensor> read_container(std::string_view bytes);

void save_container(const std::filesystem::path& path, std::span<const NamedTensor> tensors);
[[nodiscard]] std::vector<NamedTensor> load_container(const std::filesystem::path& path);

// safetensors interchange (F32 only; any shape is flattened).
[[nodiscard]] std::vector<NamedTensor> read_safetensors(std::string_view bytes);
[[nodiscard]] std::string write_safetensors(std::span<const NamedTensor> tensors);

[[nodiscard]] std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

} // namespace easteer
