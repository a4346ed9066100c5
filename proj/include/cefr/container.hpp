#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

namespace cefr {

// Versioned binary container shared by all model types.
//
//   bytes 0-3   magic "CEFR"
//   u32         format version
//   u32         type tag
//   u64         header length in bytes, followed by a UTF-8 JSON header
//   u64         payload length in doubles, followed by little-endian IEEE-754 doubles
enum class ModelType : std::uint32_t { Prototype = 1, Knn = 2, Bow = 3 };

inline constexpr std::uint32_t kFormatVersion = 1;

struct Container {
    ModelType type = ModelType::Prototype;
    nlohmann::json header;
    std::vector<double> payload;
};

void write_container(std::ostream& out, const Container& c);
Container read_container(std::istream& in);

void save_container(const std::string& path, const Container& c);
Container load_container(const std::string& path);

}  // namespace cefr
