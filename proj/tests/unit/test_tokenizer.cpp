#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "fmim/model/checkpoint.hpp"
#include "fmim/rng.hpp"
#include "fmim/tokenizer.hpp"

using namespace fmim;

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

// Plain Lloyd iterations from k distinct random points; returns the inertia.
double lloyd_inertia(const std::vector<double>& x, std::size_t dim, std::size_t k, Rng& rng) {
  const std::size_t n = x.size() / dim;
  std::vector<std::size_t> pick(n);
  for (std::size_t i = 0; i < n; ++i) pick[i] = i;
  rng.shuffle(std::span(pick));
  std::vector<double> c(k * dim);
  for (std::size_t j = 0; j < k; ++j)
    std::copy_n(x.begin() + pick[j] * dim, dim, c.begin() + j * dim);
  std::vector<std::size_t> assign(n);
  double inertia = 0.0;
  for (int it = 0; it < 100; ++it) {
    inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < k; ++j) {
        const double d = sq_dist({x.data() + i * dim, dim}, {c.data() + j * dim, dim});
        if (d < best) {
          best = d;
          assign[i] = j;
        }
      }
      inertia += best;
    }
    std::vector<double> sum(k * dim, 0.0);
    std::vector<std::size_t> cnt(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++cnt[assign[i]];
      for (std::size_t t = 0; t < dim; ++t) sum[assign[i] * dim + t] += x[i * dim + t];
    }
    for (std::size_t j = 0; j < k; ++j)
      if (cnt[j])
        for (std::size_t t = 0; t < dim; ++t) c[j * dim + t] = sum[j * dim + t] / double(cnt[j]);
  }
  return inertia;
}

}  // namespace

TEST_CASE("k-means separates two clusters") {
  std::vector<double> x;
  for (int i = 0; i < 10; ++i) x.insert(x.end(), 4, 0.0);
  for (int i = 0; i < 10; ++i) x.insert(x.end(), 4, 1.0);
  const auto cb = fit_codebook(x, 4, 2, 20, 3);
  REQUIRE(cb.size() == 2);
  std::vector<double> firsts{cb.centroid(0)[0], cb.centroid(1)[0]};
  std::sort(firsts.begin(), firsts.end());
  CHECK(firsts[0] == 0.0);
  CHECK(firsts[1] == 1.0);
  CHECK(cb.inertia == 0.0);
}

TEST_CASE("k-means inertia is non-increasing and near the multi-restart optimum") {
  Rng rng(17);
  std::vector<double> x(64 * 3);
  for (auto& v : x) v = rng.uniform();
  const auto cb = fit_codebook(x, 3, 4, 50, 5);
  for (std::size_t i = 1; i < cb.inertia_history.size(); ++i)
    CHECK(cb.inertia_history[i] <= cb.inertia_history[i - 1] + 1e-12);
  double best = std::numeric_limits<double>::infinity();
  Rng restarts(99);
  for (int r = 0; r < 100; ++r) best = std::min(best, lloyd_inertia(x, 3, 4, restarts));
  CHECK(cb.inertia <= 1.05 * best);
}

TEST_CASE("tokenize: centroids, ties and brute force") {
  Codebook cb;
  cb.dim = 2;
  cb.centroids = {0, 0, 1, 0, 5, 5, -1, 0};
  for (std::size_t j = 0; j < 4; ++j) CHECK(tokenize(cb.centroid(j), cb) == j);
  const std::vector<double> mid{0.0, 0.0};
  cb.centroids = {9, 9, 1, 0, 5, 5, -1, 0};  // (0,0) is equidistant from 1 and 3
  CHECK(tokenize(std::span<const double>(mid), cb) == 1);

  Rng rng(2);
  Codebook big;
  big.dim = 5;
  big.centroids.resize(8 * 5);
  for (auto& v : big.centroids) v = rng.uniform();
  for (int i = 0; i < 50; ++i) {
    std::vector<double> p(5);
    for (auto& v : p) v = rng.uniform();
    std::size_t best = 0;
    for (std::size_t j = 1; j < 8; ++j)
      if (sq_dist(p, big.centroid(j)) < sq_dist(p, big.centroid(best))) best = j;
    CHECK(tokenize(std::span<const double>(p), big) == best);
  }
}

TEST_CASE("fit_codebook is deterministic per seed and survives a checkpoint") {
  Rng rng(8);
  std::vector<double> x(200 * 4);
  for (auto& v : x) v = rng.uniform();
  const auto a = fit_codebook(x, 4, 6, 30, 11);
  const auto b = fit_codebook(x, 4, 6, 30, 11);
  CHECK(a.centroids == b.centroids);
  Checkpoint ck;
  add_codebook(ck, a);
  const auto back = codebook_from(ck);
  REQUIRE(back.has_value());
  CHECK(back->centroids == a.centroids);
  CHECK(back->dim == a.dim);
  CHECK_FALSE(codebook_from(Checkpoint{}).has_value());
}
