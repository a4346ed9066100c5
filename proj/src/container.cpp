#include "cefr/container.hpp"

#include <array>
#include <bit>
#include <fstream>

#include "cefr/dataset.hpp"

namespace cefr {

namespace {

constexpr std::array<char, 4> kMagic = {'C', 'E', 'F', 'R'};

template <typename U>
void put_le(std::ostream& out, U value) {
    std::array<char, sizeof(U)> bytes{};
    for (std::size_t i = 0; i < sizeof(U); ++i) {
        bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFFu);
    }
    out.write(bytes.data(), bytes.size());
}

template <typename U>
U get_le(std::istream& in) {
    std::array<unsigned char, sizeof(U)> bytes{};
    in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
    if (!in) throw DataError("model file truncated");
    U value = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
    return value;
}

}  // namespace

void write_container(std::ostream& out, const Container& c) {
    out.write(kMagic.data(), kMagic.size());
    put_le<std::uint32_t>(out, kFormatVersion);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.type));
    const std::string header = c.header.dump();
    put_le<std::uint64_t>(out, header.size());
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    put_le<std::uint64_t>(out, c.payload.size());
    for (double v : c.payload) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
}

Container read_container(std::istream& in) {
    std::array<char, 4> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kMagic) throw DataError("not a model file (bad magic)");
    const auto version = get_le<std::uint32_t>(in);
    if (version != kFormatVersion) {
        throw DataError("unsupported model format version " + std::to_string(version));
    }
    Container c;
    const auto tag = get_le<std::uint32_t>(in);
    if (tag < 1 || tag > 3) throw DataError("unknown model type tag " + std::to_string(tag));
    c.type = static_cast<ModelType>(tag);
    const auto header_len = get_le<std::uint64_t>(in);
    if (header_len > (1ull << 32)) throw DataError("model header too large");
    std::string header(header_len, '\0');
    in.read(header.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw DataError("model file truncated in header");
    try {
        c.header = nlohmann::json::parse(header);
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(std::string("corrupt model header: ") + e.what());
    }
    const auto count = get_le<std::uint64_t>(in);
    if (count > (1ull << 34)) throw DataError("model payload too large");
    c.payload.resize(count);
    for (auto& v : c.payload) v = std::bit_cast<double>(get_le<std::uint64_t>(in));
    return c;
}

void save_container(const std::string& path, const Container& c) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write model file '" + path + "'");
    write_container(out, c);
    if (!out) throw DataError("failed writing model file '" + path + "'");
}

Container load_container(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model file '" + path + "'");
    return read_container(in);
}

}  // namespace cefr
