// nn/checkpoint.cpp
#include "semiasr/nn/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "semiasr/error.hpp"

namespace semiasr::nn {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr std::array<char, 8> kMagic = {'S', 'A', 'S', 'R', 'C', 'K', 'P', 'T'};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IoError("checkpoint: unexpected end of file");
  return v;
}

}  // namespace

void write_checkpoint(std::ostream& out, const ParameterSet& params, DType dtype) {
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, params.entries().size());
  for (const auto& [name, p] : params.entries()) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint8_t>(out, static_cast<std::uint8_t>(dtype));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.rank()));
    for (std::size_t d : p.value.shape()) put<std::uint64_t>(out, d);
    for (double v : p.value.values()) {
      if (dtype == DType::kFloat64) {
        put<double>(out, v);
      } else {
        put<float>(out, static_cast<float>(v));
      }
    }
  }
  if (!out) throw IoError("checkpoint: write failed");
}

void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params, DType dtype) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write_checkpoint(out, params, dtype);
}

ParameterSet read_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw IoError("checkpoint: bad magic");
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) throw IoError("checkpoint: unsupported version " + std::to_string(version));
  const auto count = get<std::uint64_t>(in);
  ParameterSet params;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = get<std::uint32_t>(in);
    std::string name(len, '\0');
    in.read(name.data(), len);
    const auto dtype = static_cast<DType>(get<std::uint8_t>(in));
    if (dtype != DType::kFloat32 && dtype != DType::kFloat64) throw IoError("checkpoint: unknown dtype for " + name);
    const auto rank = get<std::uint32_t>(in);
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(get<std::uint64_t>(in));
    Tensor t(shape);
    for (double& v : t.values()) v = dtype == DType::kFloat64 ? get<double>(in) : static_cast<double>(get<float>(in));
    params.add(name, std::move(t));
  }
  return params;
}

ParameterSet load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  return read_checkpoint(in);
}

}  // namespace semiasr::nn
