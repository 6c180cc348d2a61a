#include "easteer/container.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

#include <json.hpp>

#include "easteer/errors.hpp"

namespace easteer {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
T to_le(T v) {
    if constexpr (std::endian::native == std::endian::big) {
        auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
        std::reverse(bytes.begin(), bytes.end());
        return std::bit_cast<T>(bytes);
    } else {
        return v;
    }
}

template <typename T>
void put(std::string& out, T v) {
    v = to_le(v);
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

void put_floats(std::string& out, std::span<const float> values) {
    for (float f : values) {
        put(out, std::bit_cast<std::uint32_t>(f));
    }
}

std::vector<float> get_floats(std::string_view bytes, std::size_t offset, std::size_t count) {
    std::vector<float> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint32_t bits;
        std::memcpy(&bits, bytes.data() + offset + 4 * i, 4);
        out[i] = std::bit_cast<float>(to_le(bits));
    }
    return out;
}

class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    template <typename T>
    T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return to_le(v);
    }

    std::string_view take(std::size_t n) {
        need(n);
        auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    [[nodiscard]] std::size_t pos() const { return pos_; }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) {
            throw Error(ErrorCode::CorruptContainer, "truncated header");
        }
    }

    std::string_view bytes_;
    std::size_t pos_ = 0;
};

void check_unique_names(std::span<const NamedTensor> tensors) {
    std::set<std::string_view> seen;
    for (const auto& t : tensors) {
        if (t.values.empty()) {
            throw Error(ErrorCode::InvalidArgument, "tensor '" + t.name + "' has dim 0");
        }
        if (!seen.insert(t.name).second) {
            throw Error(ErrorCode::InvalidArgument, "duplicate tensor name '" + t.name + "'");
        }
    }
}

} // namespace

std::string write_container(std::span<const NamedTensor> tensors) {
    check_unique_names(tensors);
    std::string out(kContainerMagic);
    put<std::uint32_t>(out, kContainerVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
    std::uint64_t offset = 0;
    for (const auto& t : tensors) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
        out.append(t.name);
        put<std::uint32_t>(out, static_cast<std::uint32_t>(t.values.size()));
        put<std::uint64_t>(out, offset);
        offset += 4 * t.values.size();
    }
    for (const auto& t : tensors) {
        put_floats(out, t.values);
    }
    return out;
}

std::vector<NamedTensor> read_container(std::string_view bytes) {
    Reader r(bytes);
    if (r.take(kContainerMagic.size()) != kContainerMagic) {
        throw Error(ErrorCode::CorruptContainer, "bad magic");
    }
    const auto version = r.get<std::uint32_t>();
    if (version != kContainerVersion) {
        throw Error(ErrorCode::CorruptContainer, "unsupported format_version " + std::to_string(version));
    }
    const auto count = r.get<std::uint32_t>();

    struct Entry {
        std::string name;
        std::uint64_t dim;
        std::uint64_t offset;
    };
    std::vector<Entry> entries;
    std::set<std::string> names;
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name_len = r.get<std::uint32_t>();
        std::string name(r.take(name_len));
        const auto dim = r.get<std::uint32_t>();
        const auto offset = r.get<std::uint64_t>();
        if (dim == 0) {
            throw Error(ErrorCode::CorruptContainer, "tensor '" + name + "' has dim 0");
        }
        if (!names.insert(name).second) {
            throw Error(ErrorCode::CorruptContainer, "duplicate tensor name '" + name + "'");
        }
        entries.push_back({std::move(name), dim, offset});
    }

    const std::size_t payload_start = r.pos();
    const std::uint64_t payload_size = bytes.size() - payload_start;

    std::vector<const Entry*> by_offset;
    for (const auto& e : entries) {
        if (e.offset > payload_size || 4 * e.dim > payload_size - e.offset) {
            throw Error(ErrorCode::CorruptContainer, "tensor '" + e.name + "' extends past payload");
        }
        by_offset.push_back(&e);
    }
    std::sort(by_offset.begin(), by_offset.end(),
              [](const Entry* a, const Entry* b) { return a->offset < b->offset; });
    for (std::size_t i = 1; i < by_offset.size(); ++i) {
        if (by_offset[i - 1]->offset + 4 * by_offset[i - 1]->dim > by_offset[i]->offset) {
            throw Error(ErrorCode::CorruptContainer,
                        "tensors '" + by_offset[i - 1]->name + "' and '" + by_offset[i]->name + "' overlap");
        }
    }

    std::vector<NamedTensor> out;
    out.reserve(entries.size());
    for (const auto& e : entries) {
        out.push_back({e.name, get_floats(bytes, payload_start + e.offset, e.dim)});
    }
    return out;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::InvalidArgument, "cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorCode::InvalidArgument, "cannot write " + path.string());
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

void save_container(const std::filesystem::path& path, std::span<const NamedTensor> tensors) {
    write_file(path, write_container(tensors));
}

std::vector<NamedTensor> load_container(const std::filesystem::path& path) {
    return read_container(read_file(path));
}

std::vector<NamedTensor> read_safetensors(std::string_view bytes) {
    Reader r(bytes);
    const auto header_len = r.get<std::uint64_t>();
    if (header_len > bytes.size() - 8) {
        throw Error(ErrorCode::CorruptContainer, "safetensors header length past end of file");
    }
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(r.take(header_len));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::CorruptContainer, std::string("safetensors header: ") + e.what());
    }
    const std::size_t data_start = 8 + header_len;
    const std::size_t data_size = bytes.size() - data_start;

    std::vector<NamedTensor> out;
    for (const auto& [name, info] : header.items()) {
        if (name == "__metadata__") {
            continue;
        }
        if (info.value("dtype", "") != "F32") {
            throw Error(ErrorCode::CorruptContainer, "tensor '" + name + "' is not F32");
        }
        std::uint64_t elements = 1;
        for (const auto& d : info.at("shape")) {
            elements *= d.get<std::uint64_t>();
        }
        const auto begin = info.at("data_offsets").at(0).get<std::uint64_t>();
        const auto end = info.at("data_offsets").at(1).get<std::uint64_t>();
        if (end < begin || end > data_size || end - begin != 4 * elements || elements == 0) {
            throw Error(ErrorCode::CorruptContainer, "tensor '" + name + "' has bad data_offsets");
        }
        out.push_back({name, get_floats(bytes, data_start + begin, elements)});
    }
    return out;
}

std::string write_safetensors(std::span<const NamedTensor> tensors) {
    check_unique_names(tensors);
    nlohmann::ordered_json header = nlohmann::ordered_json::object();
    std::uint64_t offset = 0;
    for (const auto& t : tensors) {
        header[t.name] = {{"dtype", "F32"},
                          {"shape", {t.values.size()}},
                          {"data_offsets", {offset, offset + 4 * t.values.size()}}};
        offset += 4 * t.values.size();
    }
    std::string text = header.dump();
    while ((8 + text.size()) % 8 != 0) {
        text.push_back(' ');
    }
    std::string out;
    put<std::uint64_t>(out, text.size());
    out += text;
    for (const auto& t : tensors) {
        put_floats(out, t.values);
    }
    return out;
}

} // namespace easteer
