#include "fmim/masking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fmim/common.hpp"

namespace fmim {

MaskPlan MaskPlan::all_visible(PatchGrid grid) {
  MaskPlan plan;
  plan.grid = grid;
  plan.visible.resize(grid.size());
  std::iota(plan.visible.begin(), plan.visible.end(), std::size_t{0});
  return plan;
}

MaskPlan MaskPlan::from_masked(PatchGrid grid, double ratio, std::vector<std::size_t> masked) {
  std::sort(masked.begin(), masked.end());
  require(std::adjacent_find(masked.begin(), masked.end()) == masked.end(),
          "MaskPlan: duplicate masked index");
  require(masked.empty() || masked.back() < grid.size(), "MaskPlan: masked index out of range");
  MaskPlan plan;
  plan.grid = grid;
  plan.ratio = ratio;
  plan.visible.reserve(grid.size() - masked.size());
  std::size_t next = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (next < masked.size() && masked[next] == i)
      ++next;
    else
      plan.visible.push_back(i);
  }
  plan.masked = std::move(masked);
  return plan;
}

std::size_t mask_count(std::size_t patches, double ratio) { return round_half_up(ratio, patches); }

MaskPlan random_mask(PatchGrid grid, double ratio, Rng& rng) {
  const std::size_t patches = grid.size();
  const std::size_t count = mask_count(patches, ratio);
  require(ratio > 0.0 && ratio < 1.0 && count >= 1 && count + 1 <= patches,
          "random_mask: ratio yields an empty or full mask");
  std::vector<std::size_t> order(patches);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(patches - i));
    std::swap(order[i], order[j]);
  }
  order.resize(count);
  return MaskPlan::from_masked(grid, ratio, std::move(order));
}

MaskPlan random_mask(std::size_t patches, double ratio, Rng& rng) {
  return random_mask(PatchGrid{1, patches}, ratio, rng);
}

MaskPlan blockwise_mask(PatchGrid grid, double ratio, Rng& rng, const BlockMaskOptions& options) {
  const std::size_t patches = grid.size();
  require(ratio > 0.0 && ratio < 1.0, "blockwise_mask: ratio must lie in (0, 1)");
  require(options.min_block >= 1 && options.max_aspect >= 1.0,
          "blockwise_mask: invalid block options");
  const std::size_t target = mask_count(patches, ratio);
  require(target >= 1 && target + 1 <= patches, "blockwise_mask: ratio yields an empty or full mask");
  require(static_cast<double>(options.min_block) <= ratio * static_cast<double>(patches),
          "blockwise_mask: minimum block larger than the masked budget");

  bool admissible = false;
  for (std::size_t h = 1; h <= grid.rows && !admissible; ++h)
    for (std::size_t w = 1; w <= grid.cols && !admissible; ++w)
      admissible = h * w >= options.min_block &&
                   static_cast<double>(std::max(h, w)) <= options.max_aspect * static_cast<double>(std::min(h, w));
  require(admissible, "blockwise_mask: no block shape satisfies min_block and max_aspect on this grid");

  std::vector<char> mask(patches, 0);
  std::size_t masked = 0;
  const double log_aspect = std::log(options.max_aspect);
  std::size_t attempts_without_progress = 0;
  while (masked < target) {
    const std::size_t remaining = target - masked;
    const double max_area = static_cast<double>(std::max(options.min_block, remaining));
    const double area = rng.uniform(static_cast<double>(options.min_block), max_area);
    const double aspect = std::exp(rng.uniform(-log_aspect, log_aspect));
    const auto h = static_cast<std::size_t>(std::lround(std::sqrt(area * aspect)));
    const auto w = static_cast<std::size_t>(std::lround(std::sqrt(area / aspect)));
    const bool fits = h >= 1 && w >= 1 && h <= grid.rows && w <= grid.cols &&
                      h * w >= options.min_block &&
                      static_cast<double>(std::max(h, w)) <=
                          options.max_aspect * static_cast<double>(std::min(h, w));
    if (!fits) {
      if (++attempts_without_progress > 100000)
        throw ContractViolation("blockwise_mask: no admissible block fits the grid");
      continue;
    }
    const auto top = static_cast<std::size_t>(rng.below(grid.rows - h + 1));
    const auto left = static_cast<std::size_t>(rng.below(grid.cols - w + 1));
    std::vector<std::size_t> fresh;  // row-major by construction
    for (std::size_t r = top; r < top + h; ++r)
      for (std::size_t c = left; c < left + w; ++c)
        if (!mask[r * grid.cols + c]) fresh.push_back(r * grid.cols + c);
    if (fresh.empty()) {
      if (++attempts_without_progress > 100000)
        throw ContractViolation("blockwise_mask: unable to reach the target mask count");
      continue;
    }
    attempts_without_progress = 0;
    if (fresh.size() > remaining) fresh.resize(remaining);
    for (const auto idx : fresh) mask[idx] = 1;
    masked += fresh.size();
  }

  std::vector<std::size_t> indices;
  indices.reserve(target);
  for (std::size_t i = 0; i < patches; ++i)
    if (mask[i]) indices.push_back(i);
  return MaskPlan::from_masked(grid, ratio, std::move(indices));
}

}  // namespace fmim
