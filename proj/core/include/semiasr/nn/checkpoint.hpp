// semiasr/nn/checkpoint.hpp
//
// Binary parameter container (all integers little-endian):
//
//   magic    8 bytes  "SASRCKPT"
//   version  u32      currently 1
//   count    u64      number of parameter records
//   record*  count times:
//     name_len u32, name bytes (UTF-8, no terminator)
//     dtype    u8     1 = float64, 0 = float32
//     rank     u32
//     dims     u64 * rank
//     values   prod(dims) raw little-endian values of the given dtype
//
// Records are written in lexicographic name order, so identical parameter sets
// produce byte-identical files.
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "semiasr/nn/params.hpp"

namespace semiasr::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class DType : std::uint8_t { kFloat32 = 0, kFloat64 = 1 };

void write_checkpoint(std::ostream& out, const ParameterSet& params, DType dtype = DType::kFloat64);
void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params,
                     DType dtype = DType::kFloat64);
ParameterSet read_checkpoint(std::istream& in);
ParameterSet load_checkpoint(const std::filesystem::path& path);

}  // namespace semiasr::nn
