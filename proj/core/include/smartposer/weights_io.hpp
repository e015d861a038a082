#pragma once

// Binary weight file:
//
//   "SPWV" | version u32 | tensor count u32 |
//   count x { name_len u16 | name (UTF-8) | rank u8 | dims u32[rank] | f32[] } |
//   crc32 u32 over every preceding byte
//
// All integers and floats little-endian. The ModelSpec travels as a rank-1
// tensor named "spec" (see kSpecTensorName).

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "smartposer/nn.hpp"

namespace smartposer::nn {

inline constexpr std::uint32_t kWeightFormatVersion = 1;
inline constexpr char kSpecTensorName[] = "spec";
inline constexpr std::size_t kMinStandardParameters = 40000;
inline constexpr std::size_t kMaxStandardParameters = 50000;

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_weights(const ModelWeights& weights);

// Throws FormatError on bad magic, newer version, CRC mismatch, truncation,
// trailing bytes, duplicate/missing/unexpected tensor names or shape errors.
ModelWeights decode_weights(std::span<const std::uint8_t> bytes);

void save_weights(const std::filesystem::path& path, const ModelWeights& weights);
ModelWeights load_weights(const std::filesystem::path& path);

}  // namespace smartposer::nn
