#include "fmim/tokenizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fmim/rng.hpp"

namespace fmim {
namespace {

double squared_distance(const double* a, const double* b, std::size_t dim) {
  double d = 0.0;
  for (std::size_t i = 0; i < dim; ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
  return d;
}

std::size_t count_distinct(std::span<const double> patches, std::size_t dim, std::size_t cap) {
  const std::size_t count = patches.size() / dim;
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  auto row = [&](std::size_t i) { return patches.begin() + static_cast<std::ptrdiff_t>(i * dim); };
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::lexicographical_compare(row(a), row(a) + static_cast<std::ptrdiff_t>(dim), row(b),
                                        row(b) + static_cast<std::ptrdiff_t>(dim));
  });
  std::size_t distinct = count ? 1 : 0;
  for (std::size_t i = 1; i < count && distinct < cap; ++i)
    if (!std::equal(row(order[i]), row(order[i]) + static_cast<std::ptrdiff_t>(dim), row(order[i - 1])))
      ++distinct;
  return distinct;
}

}  // namespace

std::size_t tokenize(std::span<const double> patch, const Codebook& codebook) {
  require(patch.size() == codebook.dim, "tokenize: patch length does not match codebook");
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < codebook.size(); ++j) {
    const double d = squared_distance(patch.data(), codebook.centroids.data() + j * codebook.dim,
                                      codebook.dim);
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

Codebook fit_codebook(std::span<const double> patches, std::size_t dim, std::size_t vocab,
                      std::size_t iterations, std::uint64_t seed) {
  require(dim > 0 && patches.size() % dim == 0, "fit_codebook: patch data is not count x dim");
  require(vocab >= 2, "fit_codebook: vocabulary must have at least two tokens");
  const std::size_t count = patches.size() / dim;
  if (count_distinct(patches, dim, vocab) < vocab)
    throw ContractViolation("fit_codebook: fewer distinct patches than tokens");

  auto rng = Rng::derive(seed, Stream::kmeans);
  Codebook cb;
  cb.dim = dim;
  cb.seed = seed;
  cb.centroids.reserve(vocab * dim);
  const double* data = patches.data();

  // k-means++ seeding
  std::vector<double> nearest(count, std::numeric_limits<double>::infinity());
  std::size_t first = static_cast<std::size_t>(rng.below(count));
  cb.centroids.insert(cb.centroids.end(), data + first * dim, data + (first + 1) * dim);
  for (std::size_t k = 1; k < vocab; ++k) {
    const double* last = cb.centroids.data() + (k - 1) * dim;
    double total = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
      nearest[i] = std::min(nearest[i], squared_distance(data + i * dim, last, dim));
      total += nearest[i];
    }
    double pick = rng.uniform() * total;
    std::size_t chosen = count;
    for (std::size_t i = 0; i < count; ++i) {
      if (nearest[i] <= 0.0) continue;
      chosen = i;
      pick -= nearest[i];
      if (pick < 0.0) break;
    }
    cb.centroids.insert(cb.centroids.end(), data + chosen * dim, data + (chosen + 1) * dim);
  }

  std::vector<std::size_t> assign(count, vocab);
  std::vector<double> dist(count, 0.0);
  for (std::size_t iter = 0; iter < iterations; ++iter) {
    bool changed = false;
    double inertia = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
      const auto j = tokenize(patches.subspan(i * dim, dim), cb);
      dist[i] = squared_distance(data + i * dim, cb.centroids.data() + j * dim, dim);
      inertia += dist[i];
      if (j != assign[i]) changed = true;
      assign[i] = j;
    }
    cb.inertia_history.push_back(inertia);
    cb.inertia = inertia;
    cb.iterations = iter + 1;
    if (!changed && iter > 0) break;

    std::vector<double> sums(vocab * dim, 0.0);
    std::vector<std::size_t> sizes(vocab, 0);
    for (std::size_t i = 0; i < count; ++i) {
      ++sizes[assign[i]];
      for (std::size_t d = 0; d < dim; ++d) sums[assign[i] * dim + d] += data[i * dim + d];
    }
    for (std::size_t j = 0; j < vocab; ++j) {
      if (sizes[j] == 0) {
        // Re-seed from the point currently farthest from its centroid.
        const auto far = static_cast<std::size_t>(
            std::max_element(dist.begin(), dist.end()) - dist.begin());
        std::copy(data + far * dim, data + (far + 1) * dim, cb.centroids.begin() + j * dim);
        dist[far] = 0.0;
        continue;
      }
      for (std::size_t d = 0; d < dim; ++d)
        cb.centroids[j * dim + d] = sums[j * dim + d] / static_cast<double>(sizes[j]);
    }
  }
  // Final inertia against the final centroids.
  double inertia = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = tokenize(patches.subspan(i * dim, dim), cb);
    inertia += squared_distance(data + i * dim, cb.centroids.data() + j * dim, dim);
  }
  if (cb.inertia_history.empty() || inertia != cb.inertia_history.back())
    cb.inertia_history.push_back(inertia);
  cb.inertia = inertia;
  return cb;
}

void add_codebook(Checkpoint& checkpoint, const Codebook& codebook) {
  checkpoint.add_reals("tok/centroids", {codebook.size(), codebook.dim}, DType::f64,
                       codebook.centroids);
  checkpoint.add_reals("tok/meta", {2}, DType::f64,
                       {static_cast<double>(codebook.iterations), codebook.inertia});
  checkpoint.add_integers("tok/seed", {1}, {codebook.seed});
}

std::optional<Codebook> codebook_from(const Checkpoint& checkpoint) {
  const auto* centroids = checkpoint.find("tok/centroids");
  if (!centroids) return std::nullopt;
  if (centroids->shape.size() != 2) throw FormatError("codebook: centroids must be rank 2");
  Codebook cb;
  cb.dim = centroids->shape[1];
  cb.centroids = centroids->reals;
  if (const auto* meta = checkpoint.find("tok/meta"); meta && meta->reals.size() == 2) {
    cb.iterations = static_cast<std::size_t>(meta->reals[0]);
    cb.inertia = meta->reals[1];
  }
  if (const auto* s = checkpoint.find("tok/seed"); s && s->integers.size() == 1)
    cb.seed = s->integers[0];
  return cb;
}

}  // namespace fmim
