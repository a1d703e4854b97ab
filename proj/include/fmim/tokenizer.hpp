#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fmim/model/checkpoint.hpp"

namespace fmim {

/// Visual-token vocabulary: K centroids in patch space. A patch's token is
/// the index of its nearest centroid.
struct Codebook {
  std::size_t dim = 0;
  std::vector<double> centroids;  // size() x dim, row-major
  std::size_t iterations = 0;
  double inertia = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> inertia_history;  // one value per Lloyd iteration, not serialized

  std::size_t size() const { return dim ? centroids.size() / dim : 0; }
  std::span<const double> centroid(std::size_t j) const {
    return std::span<const double>(centroids).subspan(j * dim, dim);
  }
};

/// Lloyd's k-means with k-means++ seeding over `patches` (count x dim).
/// Empty clusters are re-seeded from the point farthest from its centroid.
Codebook fit_codebook(std::span<const double> patches, std::size_t dim, std::size_t vocab,
                      std::size_t iterations, std::uint64_t seed);

/// Nearest centroid by squared Euclidean distance; ties go to the lowest index.
std::size_t tokenize(std::span<const double> patch, const Codebook& codebook);

template <typename T>
std::size_t tokenize(std::span<const T> patch, const Codebook& codebook) {
  std::vector<double> wide(patch.begin(), patch.end());
  return tokenize(std::span<const double>(wide), codebook);
}

/// Stores the codebook under the "tok/" prefix.
void add_codebook(Checkpoint& checkpoint, const Codebook& codebook);
std::optional<Codebook> codebook_from(const Checkpoint& checkpoint);

}  // namespace fmim
