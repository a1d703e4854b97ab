#include "fmim/model/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "fmim/binary_io.hpp"

namespace fmim {

template <typename T>
void Checkpoint::add_params(const ModelParams<T>& params) {
  constexpr DType dtype = sizeof(T) == 4 ? DType::f32 : DType::f64;
  for (const auto& e : params.entries())
    add_reals(e.name, e.tensor.shape(),
              dtype, std::vector<double>(e.tensor.data().begin(), e.tensor.data().end()));
}

void Checkpoint::add_reals(std::string name, Shape shape, DType dtype, std::vector<double> values) {
  require(dtype != DType::u64, "Checkpoint: real entry cannot use the u64 dtype");
  require(shape_numel(shape) == values.size(), "Checkpoint: values do not match shape");
  entries.push_back({std::move(name), std::move(shape), dtype, std::move(values), {}});
}

void Checkpoint::add_integers(std::string name, Shape shape, std::vector<std::uint64_t> values) {
  require(shape_numel(shape) == values.size(), "Checkpoint: values do not match shape");
  entries.push_back({std::move(name), std::move(shape), DType::u64, {}, std::move(values)});
}

const CheckpointEntry* Checkpoint::find(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return &e;
  return nullptr;
}

template <typename T>
ModelParams<T> Checkpoint::params(const std::string& prefix) const {
  ModelParams<T> out;
  for (const auto& e : entries) {
    if (e.dtype == DType::u64 || e.name.compare(0, prefix.size(), prefix) != 0) continue;
    if (e.name.compare(0, 4, "tok/") == 0) continue;
    std::vector<T> values(e.reals.begin(), e.reals.end());
    // Decay applies to weight matrices only, matching init_params.
    const bool decay = e.shape.size() == 2 && e.name.find("/pos") == std::string::npos;
    out.add(e.name, Tensor<T>::parameter(e.shape, std::move(values)), decay);
  }
  return out;
}

void write_checkpoint(std::ostream& out, const Checkpoint& checkpoint) {
  BinaryWriter w(out);
  w.bytes(kCheckpointMagic, 4);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(checkpoint.entries.size()));
  for (const auto& e : checkpoint.entries) {
    w.u32(static_cast<std::uint32_t>(e.name.size()));
    w.bytes(e.name.data(), e.name.size());
    w.u32(static_cast<std::uint32_t>(e.shape.size()));
    for (const auto extent : e.shape) w.u64(extent);
    w.u8(static_cast<std::uint8_t>(e.dtype));
    switch (e.dtype) {
      case DType::f32:
        for (const auto v : e.reals) w.f32(static_cast<float>(v));
        break;
      case DType::f64:
        for (const auto v : e.reals) w.f64(v);
        break;
      case DType::u64:
        for (const auto v : e.integers) w.u64(v);
        break;
    }
  }
  if (!out) throw FormatError("checkpoint: write failed");
}

Checkpoint read_checkpoint(std::istream& in) {
  BinaryReader r(in, "checkpoint");
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0) throw FormatError("checkpoint: bad magic");
  const auto version = r.u32();
  if (version != kCheckpointVersion)
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  Checkpoint checkpoint;
  const auto count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointEntry e;
    e.name.resize(r.u32());
    r.bytes(e.name.data(), e.name.size());
    const auto rank = r.u32();
    if (rank > 8) throw FormatError("checkpoint: implausible rank for " + e.name);
    for (std::uint32_t d = 0; d < rank; ++d) e.shape.push_back(static_cast<std::size_t>(r.u64()));
    const auto n = shape_numel(e.shape);
    const auto tag = r.u8();
    switch (tag) {
      case static_cast<std::uint8_t>(DType::f32):
        e.dtype = DType::f32;
        e.reals.resize(n);
        for (auto& v : e.reals) v = r.f32();
        break;
      case static_cast<std::uint8_t>(DType::f64):
        e.dtype = DType::f64;
        e.reals.resize(n);
        for (auto& v : e.reals) v = r.f64();
        break;
      case static_cast<std::uint8_t>(DType::u64):
        e.dtype = DType::u64;
        e.integers.resize(n);
        for (auto& v : e.integers) v = r.u64();
        break;
      default:
        throw FormatError("checkpoint: unknown dtype tag for " + e.name);
    }
    checkpoint.entries.push_back(std::move(e));
  }
  return checkpoint;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("checkpoint: cannot open " + path.string());
  write_checkpoint(out, checkpoint);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("checkpoint: cannot open " + path.string());
  return read_checkpoint(in);
}

template void Checkpoint::add_params<float>(const ModelParams<float>&);
template void Checkpoint::add_params<double>(const ModelParams<double>&);
template ModelParams<float> Checkpoint::params<float>(const std::string&) const;
template ModelParams<double> Checkpoint::params<double>(const std::string&) const;

}  // namespace fmim
