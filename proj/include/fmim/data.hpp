#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fmim/rng.hpp"

namespace fmim {

struct ImageShape {
  std::size_t height = 16;
  std::size_t width = 16;
  std::size_t channels = 1;
  std::size_t pixels() const { return height * width * channels; }
  bool operator==(const ImageShape&) const = default;
};

enum class Split { train, test };

/// Images (H x W x C, values in [0, 1], channels interleaved) with labels in
/// [0, classes). Immutable after construction by convention.
struct Dataset {
  ImageShape shape;
  std::size_t classes = 0;
  Split split = Split::train;
  std::vector<float> pixels;
  std::vector<std::size_t> labels;

  std::size_t size() const { return labels.size(); }
  std::span<const float> image(std::size_t i) const {
    return std::span<const float>(pixels).subspan(i * shape.pixels(), shape.pixels());
  }
  void push_back(std::span<const float> image, std::size_t label);
  /// Throws ContractViolation if sizes or labels are inconsistent.
  void validate() const;
  std::vector<std::size_t> class_counts() const;
};

struct SynthOptions {
  std::size_t classes = 2;
  std::size_t train_per_class = 300;
  std::size_t test_per_class = 100;
  ImageShape shape{16, 16, 1};
  double noise = 0.15;
  /// Phase of the class grating is drawn from [0, phase_spread * 2pi).
  /// Values below 1 leave a weak class-dependent mean image.
  double phase_spread = 0.6;
  std::uint64_t seed = 0;
};

struct SynthData {
  Dataset train;
  Dataset public_pool;  // unlabeled held-out split (tokenizer fitting)
  Dataset test;
};

/// Class-conditional generators: oriented gratings whose orientation band
/// depends on the class, drawn with random frequency, phase and contrast,
/// plus pixel noise.
SynthData synth_dataset(const SynthOptions& options);

struct PartitionSpec {
  std::size_t clients = 5;
  double alpha = 0.5;
  std::uint64_t seed = 0;
  /// Redraw the whole partition while some client is empty (bounded).
  bool resample_empty = false;
};

/// Disjoint assignment of dataset indices to clients.
struct Partition {
  std::vector<std::vector<std::size_t>> clients;
  /// proportions[j][k]: drawn share of class j given to client k.
  std::vector<std::vector<double>> proportions;

  std::size_t client_count() const { return clients.size(); }
};

/// Per class j: p_j ~ Dir_N(alpha); the class's shuffled instances are split
/// by largest-remainder rounding of p_jk * count_j.
Partition dirichlet_partition(const Dataset& dataset, const PartitionSpec& spec);

/// Class-balanced split: each class's shuffled instances are divided into N
/// near-equal shares.
Partition iid_partition(const Dataset& dataset, std::size_t clients, std::uint64_t seed);

/// Largest-remainder apportionment of `total` by `shares` (ties: lower index).
std::vector<std::size_t> largest_remainder(std::span<const double> shares, std::size_t total);

struct ClientSplit {
  std::vector<std::size_t> labeled;
  std::vector<std::size_t> unlabeled;
};

/// Per client and class, round-half-up(fraction * count) instances become
/// labeled, the rest unlabeled.
std::vector<ClientSplit> subsample_labels(const Partition& partition, const Dataset& dataset,
                                          double fraction, std::uint64_t seed);

struct AugmentPolicy {
  double scale_lo = 1.0;
  double scale_hi = 1.0;
  std::size_t crop_height = 0;  // 0 means the input height
  std::size_t crop_width = 0;
  double flip_probability = 0.0;
  double rotation_degrees = 0.0;
  double color_jitter = 0.0;
  double grayscale_probability = 0.0;

  static AugmentPolicy identity() { return {}; }
  bool is_identity() const;
};

/// Random rescale, crop, horizontal flip, rotation, colour jitter and
/// grayscale, then clamping to [0, 1].
std::vector<float> augment(std::span<const float> image, const ImageShape& shape,
                           const AugmentPolicy& policy, Rng& rng);
ImageShape augmented_shape(const ImageShape& shape, const AugmentPolicy& policy);

// ---- file formats -------------------------------------------------------

enum class PixelType : std::uint8_t { u8 = 1, f32 = 2 };

/// "FIMG" | version u32 | count u32 | H u16 | W u16 | C u8 | dtype u8 | raw.
/// u8 pixels are scaled by 1/255 on load.
void write_images(const std::filesystem::path& path, const Dataset& dataset,
                  PixelType type = PixelType::f32);
Dataset read_images(const std::filesystem::path& path);

/// Labels CSV: index,label,client_id (client_id column optional and may be empty).
void write_labels(const std::filesystem::path& path, const Dataset& dataset,
                  const Partition* partition = nullptr);
void read_labels(const std::filesystem::path& path, Dataset& dataset);

/// Partition manifest CSV: client_id,dataset_index.
void write_manifest(const std::filesystem::path& path, const Partition& partition);
Partition read_manifest(const std::filesystem::path& path, const Dataset& dataset);

}  // namespace fmim
