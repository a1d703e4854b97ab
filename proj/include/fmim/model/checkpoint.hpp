#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "fmim/numerics/params.hpp"

namespace fmim {

inline constexpr char kCheckpointMagic[4] = {'F', 'M', 'I', 'M'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class DType : std::uint8_t { f32 = 1, f64 = 2, u64 = 3 };

/// One named array. Real-valued entries keep their values widened to double
/// (exact for f32); u64 entries use `integers`.
struct CheckpointEntry {
  std::string name;
  Shape shape;
  DType dtype = DType::f64;
  std::vector<double> reals;
  std::vector<std::uint64_t> integers;

  bool operator==(const CheckpointEntry&) const = default;
};

/// Layout on disk (all integers little-endian):
///   "FMIM" | version u32 | entry count u32 |
///   per entry: name length u32 | name bytes | rank u32 | extents u64 x rank |
///              dtype u8 | raw values (f32, f64 or u64)
struct Checkpoint {
  std::vector<CheckpointEntry> entries;

  template <typename T>
  void add_params(const ModelParams<T>& params);
  void add_reals(std::string name, Shape shape, DType dtype, std::vector<double> values);
  void add_integers(std::string name, Shape shape, std::vector<std::uint64_t> values);

  const CheckpointEntry* find(const std::string& name) const;
  /// Real-valued entries whose names start with prefix, as trainable tensors.
  template <typename T>
  ModelParams<T> params(const std::string& prefix = "") const;

  bool operator==(const Checkpoint&) const = default;
};

void write_checkpoint(std::ostream& out, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace fmim
