#pragma once

#include <cstddef>

#include "fmim/masking.hpp"

namespace fmim {

/// Image size (height x width x channels) and square patch side.
struct ImageGeometry {
  std::size_t height = 16;
  std::size_t width = 16;
  std::size_t channels = 1;
  std::size_t patch = 4;

  std::size_t pixels() const { return height * width * channels; }
  std::size_t patch_dim() const { return patch * patch * channels; }
  std::size_t patch_count() const { return (height / patch) * (width / patch); }
  PatchGrid grid() const { return {height / patch, width / patch}; }
  /// Throws ContractViolation unless the patch side divides both extents.
  void validate() const;
  bool operator==(const ImageGeometry&) const = default;
};

/// Transformer sizes. The decoder fields apply to the pixel-regression
/// decoder only; vocab is the visual-token codebook size.
struct ModelDims {
  std::size_t dim = 32;
  std::size_t depth = 2;
  std::size_t heads = 4;
  std::size_t mlp_ratio = 4;
  std::size_t decoder_dim = 32;
  std::size_t decoder_depth = 1;
  std::size_t decoder_heads = 4;
  std::size_t vocab = 64;
  std::size_t classes = 2;
  double init_std = 0.02;

  void validate() const;
  bool operator==(const ModelDims&) const = default;
};

}  // namespace fmim
