#pragma once

#include <cstddef>
#include <vector>

#include "fmim/rng.hpp"

namespace fmim {

/// Patch layout of an image: rows x cols patches, indexed row-major from 0.
struct PatchGrid {
  std::size_t rows = 1;
  std::size_t cols = 1;
  std::size_t size() const { return rows * cols; }
  bool operator==(const PatchGrid&) const = default;
};

/// Masked/visible split of one image's patches. Both index lists are sorted
/// and together partition [0, grid.size()).
struct MaskPlan {
  double ratio = 0.0;
  std::vector<std::size_t> masked;
  std::vector<std::size_t> visible;
  PatchGrid grid;

  std::size_t patch_count() const { return grid.size(); }

  /// Plan with every patch visible (used for fine-tuning and inference).
  static MaskPlan all_visible(PatchGrid grid);
  /// Builds the visible complement of a masked index set.
  static MaskPlan from_masked(PatchGrid grid, double ratio, std::vector<std::size_t> masked);

  bool operator==(const MaskPlan&) const = default;
};

/// |M| for a ratio: round-half-up(ratio * P).
std::size_t mask_count(std::size_t patches, double ratio);

/// Uniform random subset of exactly mask_count(P, ratio) patches.
MaskPlan random_mask(PatchGrid grid, double ratio, Rng& rng);
MaskPlan random_mask(std::size_t patches, double ratio, Rng& rng);

struct BlockMaskOptions {
  std::size_t min_block = 4;  // minimum block area in patches
  double max_aspect = 3.0;    // max(h/w, w/h) of a block
};

/// Block-wise masking: unions random rectangles until the target count is
/// reached, then trims the final block's newest patches (row-major order) so
/// that |M| equals mask_count(P, ratio) exactly.
MaskPlan blockwise_mask(PatchGrid grid, double ratio, Rng& rng, const BlockMaskOptions& options = {});

}  // namespace fmim
