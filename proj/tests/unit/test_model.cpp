#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "fmim/model/vit.hpp"
#include "fmim/numerics/ops.hpp"

using namespace fmim;

namespace {

ModelDims small_dims() {
  ModelDims d;
  d.dim = 8;
  d.depth = 1;
  d.heads = 2;
  d.mlp_ratio = 2;
  d.decoder_dim = 8;
  d.decoder_depth = 1;
  d.decoder_heads = 2;
  d.vocab = 5;
  d.classes = 3;
  d.init_std = 0.2;
  return d;
}

Tensor<double> random_patches(std::size_t batch, const ImageGeometry& g, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(batch * g.pixels());
  for (auto& x : v) x = rng.uniform();
  return Tensor<double>::constant({batch * g.patch_count(), g.patch_dim()}, std::move(v));
}

std::vector<MaskPlan> plans_for(std::size_t batch, const ImageGeometry& g, double ratio, std::uint64_t seed) {
  std::vector<MaskPlan> plans;
  for (std::size_t i = 0; i < batch; ++i) {
    auto rng = Rng::derive(seed, Stream::mask, {i});
    plans.push_back(random_mask(g.grid(), ratio, rng));
  }
  return plans;
}

bool same_bits(const Tensor<double>& a, const Tensor<double>& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data().data(), b.data().data(), a.numel() * sizeof(double)) == 0;
}

Representations<double> custom_reps(Tensor<double> h, std::vector<MaskPlan> plans, bool covers_all) {
  Representations<double> r;
  r.batch = plans.size();
  r.tokens = h.dim(0) / plans.size();
  r.h = std::move(h);
  r.covers_all = covers_all;
  r.plans = std::move(plans);
  return r;
}

}  // namespace

TEST_CASE("patchify: zero image, row-major order, round trip") {
  const ImageGeometry g4{4, 4, 1, 2};
  const std::vector<double> zeros(16, 0.0);
  const auto p = patchify<double>(zeros, g4);
  CHECK(p.size() == 16);
  CHECK(std::all_of(p.begin(), p.end(), [](double v) { return v == 0.0; }));

  const ImageGeometry g2{2, 2, 1, 1};
  const std::vector<double> img{1, 2, 3, 4};
  CHECK(patchify<double>(img, g2) == std::vector<double>{1, 2, 3, 4});

  const ImageGeometry g8{8, 8, 3, 4};
  Rng rng(1);
  std::vector<float> x(g8.pixels());
  for (auto& v : x) v = float(rng.uniform());
  CHECK(unpatchify<float>(patchify<float>(x, g8), g8) == x);
  // First patch, second pixel of its first row, channel 1.
  CHECK(patchify<float>(x, g8)[1 * 3 + 1] == x[1 * 3 + 1]);
  CHECK(patchify<float>(x, g8)[4 * 3] == x[8 * 3]);
}

TEST_CASE("encode_beit: shapes and mask embedding use") {
  const ImageGeometry g{8, 8, 1, 2};
  const auto d = small_dims();
  auto p = init_params<double>(g, d, 2);
  const auto patches = random_patches(2, g, 3);
  const std::vector<MaskPlan> none{MaskPlan::all_visible(g.grid()), MaskPlan::all_visible(g.grid())};
  const auto a = encode_beit(patches, none, p, d);
  CHECK(a.h.shape() == Shape{2 * 16, 8});
  for (auto& v : p.get("enc/mask_token").mutable_data()) v += 1.0;
  CHECK(same_bits(a.h, encode_beit(patches, none, p, d).h));

  const auto masked = plans_for(2, g, 0.4, 5);
  const auto b = encode_beit(patches, masked, p, d);
  CHECK(b.h.shape() == Shape{2 * 16, 8});
  for (auto& v : p.get("enc/mask_token").mutable_data()) v -= 0.5;
  CHECK_FALSE(same_bits(b.h, encode_beit(patches, masked, p, d).h));
}

TEST_CASE("encode_beit: masked positions see only the mask embedding and their position") {
  // Two masked positions carry different pixels but produce layer inputs that
  // differ only by position embedding, so equalizing those makes them agree.
  const ImageGeometry g{4, 4, 1, 2};
  auto d = small_dims();
  auto p = init_params<double>(g, d, 6);
  const auto patches = random_patches(1, g, 9);
  const std::vector<MaskPlan> plan{MaskPlan::from_masked(g.grid(), 0.5, {1, 2})};
  auto pos = p.get("enc/pos").mutable_data();
  for (std::size_t c = 0; c < d.dim; ++c) pos[2 * d.dim + c] = pos[1 * d.dim + c];
  const auto out = encode_beit(patches, plan, p, d).h.data();
  for (std::size_t c = 0; c < d.dim; ++c) CHECK(out[1 * d.dim + c] == doctest::Approx(out[2 * d.dim + c]).epsilon(1e-12));
}

TEST_CASE("encode_mae: visible rows only, unmasked equals full encoding") {
  const ImageGeometry g{56, 56, 1, 4};
  auto d = small_dims();
  const auto p = init_params<double>(g, d, 2);
  const auto patches = random_patches(1, g, 4);
  const auto plans = plans_for(1, g, 0.6, 7);
  const auto r = encode_mae(patches, plans, p, d);
  CHECK(r.h.dim(0) == 78);
  CHECK_FALSE(r.covers_all);

  // Masked pixels are never read.
  auto changed = patches.clone();
  auto v = changed.mutable_data();
  for (const auto row : masked_rows(plans))
    for (std::size_t c = 0; c < g.patch_dim(); ++c) v[row * g.patch_dim() + c] = -7.0;
  CHECK(same_bits(r.h, encode_mae(changed, plans, p, d).h));

  const ImageGeometry small{8, 8, 1, 2};
  const auto q = init_params<double>(small, d, 3);
  const auto x = random_patches(2, small, 5);
  const std::vector<MaskPlan> none(2, MaskPlan::all_visible(small.grid()));
  CHECK(same_bits(encode_mae(x, none, q, d).h, encode_full(x, 2, small, q, d).h));
}

TEST_CASE("decode_beit: zero weights, shape, linearity") {
  const ImageGeometry g{56, 56, 1, 4};
  auto d = small_dims();
  d.vocab = 64;
  auto p = init_params<double>(g, d, 1);
  const auto plans = plans_for(1, g, 0.4, 2);
  const auto reps = encode_beit(random_patches(1, g, 3), plans, p, d);
  const auto logits = decode_beit(reps, p);
  CHECK(logits.shape() == Shape{78, 64});

  auto zero = p.clone();
  for (auto& v : zero.get("beit/head/w").mutable_data()) v = 0.0;
  for (auto& v : zero.get("beit/head/b").mutable_data()) v = 0.0;
  for (const double v : decode_beit(reps, zero).data()) CHECK(v == 0.0);

  Rng rng(4);
  std::vector<double> h1(196 * 8), h2(196 * 8), h12(196 * 8);
  for (std::size_t i = 0; i < h1.size(); ++i) {
    h1[i] = rng.uniform(-1, 1);
    h2[i] = rng.uniform(-1, 1);
    h12[i] = h1[i] + h2[i];
  }
  auto nobias = p.clone();
  for (auto& v : nobias.get("beit/head/b").mutable_data()) v = 0.0;
  const auto o1 = decode_beit(custom_reps(Tensor<double>::constant({196, 8}, h1), plans, true), nobias);
  const auto o2 = decode_beit(custom_reps(Tensor<double>::constant({196, 8}, h2), plans, true), nobias);
  const auto o12 = decode_beit(custom_reps(Tensor<double>::constant({196, 8}, h12), plans, true), nobias);
  for (std::size_t i = 0; i < o12.numel(); ++i)
    CHECK(o12.data()[i] == doctest::Approx(o1.data()[i] + o2.data()[i]).epsilon(1e-12));
}

TEST_CASE("decode_mae: shape, determinism, mask-embedding-only predictions") {
  const ImageGeometry g{8, 8, 1, 2};
  auto d = small_dims();
  const auto p = init_params<double>(g, d, 5);
  const auto patches = random_patches(2, g, 6);
  const auto plans = plans_for(2, g, 0.75, 7);
  const auto reps = encode_mae(patches, plans, p, d);
  const auto out = decode_mae(reps, p, d);
  CHECK(out.shape() == Shape{24, 4});
  CHECK(same_bits(out, decode_mae(encode_mae(patches, plans, p, d), p, d)));

  // Without decoder blocks and with zeroed visible rows, a masked position's
  // prediction depends only on the mask embedding and its position.
  d.decoder_depth = 0;
  const auto q = init_params<double>(g, d, 8);
  const std::vector<MaskPlan> a{MaskPlan::from_masked(g.grid(), 0.25, {0, 5, 9, 12})};
  const std::vector<MaskPlan> b{MaskPlan::from_masked(g.grid(), 0.25, {1, 5, 7, 15})};
  const auto za = custom_reps(Tensor<double>::zeros({12, 8}), a, false);
  const auto zb = custom_reps(Tensor<double>::zeros({12, 8}), b, false);
  const auto ta = decode_mae(za, q, d), tb = decode_mae(zb, q, d);
  const auto pa = ta.data(), pb = tb.data();
  // Position 5 is the second masked patch in both plans.
  for (std::size_t c = 0; c < 4; ++c) CHECK(pa[1 * 4 + c] == doctest::Approx(pb[1 * 4 + c]).epsilon(1e-12));
  CHECK(pa[0] != doctest::Approx(pb[0]).epsilon(1e-6));
}

TEST_CASE("classify: pooling and zero classifier") {
  const ImageGeometry g{4, 4, 1, 2};
  auto d = small_dims();
  d.classes = 8;
  auto p = init_params<double>(g, d, 1);
  std::vector<double> rows;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 8; ++c) rows.push_back(0.1 * c - 0.3);
  auto w = p.get("cls/w").mutable_data();
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 8; ++j) w[i * 8 + j] = i == j ? 1.0 : 0.0;
  const std::vector<MaskPlan> plan{MaskPlan::all_visible(g.grid())};
  const auto logits = classify(custom_reps(Tensor<double>::constant({4, 8}, rows), plan, true), p);
  for (int c = 0; c < 8; ++c) CHECK(logits.data()[c] == doctest::Approx(0.1 * c - 0.3).epsilon(1e-12));

  d.classes = 2;
  const auto z = init_params<double>(g, d, 1);  // classifier starts at zero
  const auto zl = classify(encode_full(random_patches(3, g, 2), 3, g, z, d), z);
  for (const double v : zl.data()) CHECK(v == 0.0);
  const auto probs = ops::softmax(zl);
  for (const double v : probs.data()) CHECK(v == 0.5);
}

TEST_CASE("beit_loss examples") {
  const std::vector<std::size_t> t16{3, 15};
  CHECK(beit_loss(Tensor<double>::zeros({2, 16}), t16).item() == doctest::Approx(std::log(16.0)));
  CHECK(std::log(16.0) == doctest::Approx(2.7726).epsilon(1e-4));
  const std::vector<std::size_t> t{0, 1};
  const auto hand = Tensor<double>::constant({2, 2}, {0, 0, std::log(3.0), 0});
  CHECK(beit_loss(hand, t).item() == doctest::Approx((std::log(2.0) + std::log(4.0)) / 2).epsilon(1e-14));
  double previous = 1e9;
  for (const double margin : {1.0, 5.0, 20.0, 60.0}) {
    const double l = beit_loss(Tensor<double>::constant({1, 3}, {margin, 0, 0}), std::vector<std::size_t>{0}).item();
    CHECK(l >= 0.0);
    CHECK(l < previous);
    previous = l;
  }
  CHECK(previous < 1e-20);
}

TEST_CASE("mae_loss examples") {
  const auto a = Tensor<double>::constant({2, 3}, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6});
  CHECK(mae_loss(a, a.clone()).item() == 0.0);
  CHECK(mae_loss(Tensor<double>::zeros({2, 3}), Tensor<double>::constant({2, 3}, std::vector<double>(6, 1.0))).item() == 1.0);
  // Per-patch pixel-mean squared errors 0.5 and 1.5.
  const auto pred = Tensor<double>::zeros({2, 2});
  const auto target = Tensor<double>::constant({2, 2}, {1.0, 0.0, 1.0, std::sqrt(2.0)});
  CHECK(mae_loss(pred, target).item() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("ce_loss examples") {
  const std::vector<std::size_t> one{0};
  CHECK(ce_loss(Tensor<double>::zeros({1, 2}), one).item() == doctest::Approx(std::log(2.0)));
  CHECK(ce_loss(Tensor<double>::constant({1, 2}, {1.0, 0.0}), one).item() ==
        doctest::Approx(-std::log(std::exp(1.0) / (std::exp(1.0) + 1.0))));
  CHECK(-std::log(std::exp(1.0) / (std::exp(1.0) + 1.0)) == doctest::Approx(0.3133).epsilon(1e-4));
  const std::vector<std::size_t> same{1, 1, 1};
  const auto batch = Tensor<double>::constant({3, 3}, {0.2, -1, 3, 0.2, -1, 3, 0.2, -1, 3});
  CHECK(ce_loss(batch, same).item() ==
        doctest::Approx(ce_loss(Tensor<double>::constant({1, 3}, {0.2, -1, 3}), std::vector<std::size_t>{1}).item()));
}

TEST_CASE("shape contracts over randomized configurations") {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t patch = 1 + rng.below(3);
    const ImageGeometry g{patch * (2 + rng.below(4)), patch * (2 + rng.below(4)), 1 + rng.below(3), patch};
    ModelDims d;
    d.heads = 1 + rng.below(3);
    d.dim = d.heads * (2 + rng.below(3));
    d.depth = 1 + rng.below(2);
    d.mlp_ratio = 1 + rng.below(2);
    d.decoder_heads = 1 + rng.below(2);
    d.decoder_dim = d.decoder_heads * (2 + rng.below(3));
    d.decoder_depth = rng.below(2);
    d.vocab = 2 + rng.below(6);
    d.classes = 2 + rng.below(4);
    const auto p = init_params<double>(g, d, trial);
    const std::size_t batch = 1 + rng.below(3);
    const std::size_t P = g.patch_count();
    const double ratio = rng.uniform(0.1, 0.9);
    if (mask_count(P, ratio) < 1 || mask_count(P, ratio) + 1 > P) continue;
    CAPTURE(trial);
    const auto patches = random_patches(batch, g, trial);
    const auto plans = plans_for(batch, g, ratio, trial);
    const std::size_t m = mask_count(P, ratio);
    const auto beit = encode_beit(patches, plans, p, d);
    CHECK(beit.h.shape() == Shape{batch * P, d.dim});
    CHECK(decode_beit(beit, p).shape() == Shape{batch * m, d.vocab});
    const auto mae = encode_mae(patches, plans, p, d);
    CHECK(mae.h.shape() == Shape{batch * (P - m), d.dim});
    const auto pred = decode_mae(mae, p, d);
    CHECK(pred.shape() == Shape{batch * m, g.patch_dim()});
    CHECK(classify(encode_full(patches, batch, g, p, d), p).shape() == Shape{batch, d.classes});
    CHECK(mae_loss(pred, ops::gather_rows(patches, masked_rows(plans))).item() >= 0.0);
  }
}
