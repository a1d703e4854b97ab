#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fmim/model/geometry.hpp"
#include "fmim/numerics/optim.hpp"

namespace fmim {

struct GradSuiteEntry {
  std::string name;
  GradCheckResult result;
};

/// Tiny model used by the gradient suite: 8x8x1 images with 2x2 patches
/// (16 patches), width 16, one encoder block and one decoder block.
ImageGeometry tiny_geometry();
ModelDims tiny_dims();

/// Central-difference checks (64-bit) of every differentiable primitive and
/// of the full masked-image-modeling, classification and consistency losses
/// on the tiny model.
std::vector<GradSuiteEntry> gradient_suite(std::uint64_t seed,
                                           std::size_t coords_per_tensor = 12);

}  // namespace fmim
