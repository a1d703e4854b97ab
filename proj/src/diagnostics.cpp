#include "fmim/diagnostics.hpp"

#include <cmath>

#include "fmim/data.hpp"
#include "fmim/fed.hpp"
#include "fmim/model/vit.hpp"
#include "fmim/numerics/ops.hpp"
#include "fmim/rng.hpp"

namespace fmim {
namespace {

using T64 = Tensor<double>;

std::vector<double> random_values(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

T64 random_param(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  const auto n = shape_numel(shape);
  return T64::parameter(std::move(shape), random_values(rng, n, lo, hi));
}

struct Case {
  std::string name;
  std::function<T64()> closure;
  std::vector<T64> params;
};

std::vector<Case> primitive_cases(Rng& rng) {
  std::vector<Case> cases;
  auto add_case = [&](std::string name, std::vector<T64> params,
                      std::function<T64(const std::vector<T64>&)> op) {
    const auto out = op(params);
    const auto w = T64::constant(out.shape(), random_values(rng, out.numel()));
    cases.push_back({std::move(name),
                     [params, op, w] { return ops::sum(ops::mul(op(params), w)); }, params});
  };
  using P = const std::vector<T64>&;
  add_case("add", {random_param(rng, {3, 4}), random_param(rng, {3, 4})},
           [](P p) { return ops::add(p[0], p[1]); });
  add_case("sub", {random_param(rng, {3, 4}), random_param(rng, {3, 4})},
           [](P p) { return ops::sub(p[0], p[1]); });
  add_case("mul", {random_param(rng, {3, 4}), random_param(rng, {3, 4})},
           [](P p) { return ops::mul(p[0], p[1]); });
  add_case("scale", {random_param(rng, {5})}, [](P p) { return ops::scale(p[0], 1.7); });
  add_case("add_bias", {random_param(rng, {3, 4}), random_param(rng, {4})},
           [](P p) { return ops::add_bias(p[0], p[1]); });
  add_case("matmul", {random_param(rng, {3, 4}), random_param(rng, {4, 5})},
           [](P p) { return ops::matmul(p[0], p[1]); });
  add_case("bmm", {random_param(rng, {2, 3, 4}), random_param(rng, {2, 4, 5})},
           [](P p) { return ops::bmm(p[0], p[1]); });
  add_case("bmm_transposed", {random_param(rng, {2, 3, 4}), random_param(rng, {2, 5, 4})},
           [](P p) { return ops::bmm(p[0], p[1], true); });
  add_case("transpose", {random_param(rng, {3, 4})}, [](P p) { return ops::transpose(p[0]); });
  add_case("permute", {random_param(rng, {2, 3, 2, 2})},
           [](P p) { return ops::permute(p[0], {0, 2, 1, 3}); });
  add_case("reshape", {random_param(rng, {3, 4})}, [](P p) { return ops::reshape(p[0], {2, 6}); });
  add_case("gather_rows", {random_param(rng, {4, 3})}, [](P p) {
    const std::vector<std::size_t> idx{2, 0, 2, 3};
    return ops::gather_rows(p[0], idx);
  });
  add_case("interleave_rows", {random_param(rng, {2, 3}), random_param(rng, {3})}, [](P p) {
    const std::vector<std::size_t> pos{3, 1};
    return ops::interleave_rows(p[0], pos, 5, p[1]);
  });
  add_case("softmax", {random_param(rng, {3, 5}, -2.0, 2.0)}, [](P p) { return ops::softmax(p[0]); });
  add_case("layer_norm",
           {random_param(rng, {3, 6}, -2.0, 2.0), random_param(rng, {6}), random_param(rng, {6})},
           [](P p) { return ops::layer_norm(p[0], p[1], p[2]); });
  add_case("gelu", {random_param(rng, {4, 4}, -3.0, 3.0)}, [](P p) { return ops::gelu(p[0]); });
  add_case("square", {random_param(rng, {6})}, [](P p) { return ops::square(p[0]); });
  add_case("log", {random_param(rng, {6}, 0.5, 2.0)}, [](P p) { return ops::log(p[0]); });
  add_case("sum", {random_param(rng, {3, 4})}, [](P p) { return ops::sum(p[0]); });
  add_case("mean", {random_param(rng, {3, 4})}, [](P p) { return ops::mean(p[0]); });
  add_case("mean_axis", {random_param(rng, {2, 3, 4})}, [](P p) { return ops::mean_axis(p[0], 1); });
  add_case("cross_entropy", {random_param(rng, {4, 5}, -2.0, 2.0)}, [](P p) {
    const std::vector<std::size_t> targets{0, 4, 2, 2};
    return ops::cross_entropy(p[0], targets);
  });
  return cases;
}

std::vector<T64> tensors_of(const ModelParams<double>& p) {
  std::vector<T64> out;
  for (const auto& e : p.entries()) out.push_back(e.tensor);
  return out;
}

std::vector<std::vector<float>> random_images(Rng& rng, std::size_t count, const ImageGeometry& g) {
  std::vector<std::vector<float>> images(count, std::vector<float>(g.pixels()));
  for (auto& img : images)
    for (auto& v : img) v = static_cast<float>(rng.uniform());
  return images;
}

}  // namespace

ImageGeometry tiny_geometry() { return {8, 8, 1, 2}; }

ModelDims tiny_dims() {
  ModelDims d;
  d.dim = 16;
  d.depth = 1;
  d.heads = 2;
  d.mlp_ratio = 2;
  d.decoder_dim = 16;
  d.decoder_depth = 1;
  d.decoder_heads = 2;
  d.vocab = 8;
  d.classes = 3;
  d.init_std = 0.3;
  return d;
}

std::vector<GradSuiteEntry> gradient_suite(std::uint64_t seed, std::size_t coords_per_tensor) {
  auto rng = Rng::derive(seed, Stream::gradcheck, {1});
  GradCheckOptions opts;
  opts.seed = seed;
  opts.coords_per_tensor = coords_per_tensor;
  std::vector<GradSuiteEntry> results;
  for (auto& c : primitive_cases(rng)) {
    GradCheckOptions all = opts;
    all.coords_per_tensor = 1000;
    results.push_back({"primitive/" + c.name, grad_check(c.closure, c.params, all)});
  }

  const auto g = tiny_geometry();
  const auto d = tiny_dims();
  auto params = init_params<double>(g, d, seed);
  // A zero classifier would zero every encoder gradient of the classification losses.
  {
    auto w = params.get("cls/w").mutable_data();
    for (auto& v : w) v = rng.uniform(-0.5, 0.5);
    auto b = params.get("cls/b").mutable_data();
    for (auto& v : b) v = rng.uniform(-0.5, 0.5);
  }
  const std::size_t batch = 2;
  const auto images = random_images(rng, batch, g);
  const auto patches = patch_batch<double>(images, g);

  {
    auto p = params.subset(trained_prefixes(StageKind::pretrain, Method::mae));
    std::vector<MaskPlan> plans;
    for (std::size_t i = 0; i < batch; ++i) {
      auto mrng = Rng::derive(seed, Stream::mask, {i});
      plans.push_back(random_mask(g.grid(), 0.5, mrng));
    }
    const auto target = ops::gather_rows(patches, masked_rows(plans));
    auto closure = [=] {
      return mae_loss(decode_mae(encode_mae(patches, plans, p, d), p, d), target);
    };
    results.push_back({"model/mae_loss", grad_check(closure, tensors_of(p), opts)});
  }
  {
    auto p = params.subset(trained_prefixes(StageKind::pretrain, Method::beit));
    std::vector<MaskPlan> plans;
    for (std::size_t i = 0; i < batch; ++i) {
      auto mrng = Rng::derive(seed, Stream::mask, {batch + i});
      plans.push_back(blockwise_mask(g.grid(), 0.4, mrng, {2, 3.0}));
    }
    std::vector<std::size_t> tokens(masked_rows(plans).size());
    for (auto& t : tokens) t = static_cast<std::size_t>(rng.below(d.vocab));
    auto closure = [=] {
      return beit_loss(decode_beit(encode_beit(patches, plans, p, d), p), tokens);
    };
    results.push_back({"model/beit_loss", grad_check(closure, tensors_of(p), opts)});
  }
  {
    auto p = params.subset(trained_prefixes(StageKind::finetune, Method::supervised));
    const std::vector<std::size_t> labels{2, 0};
    auto closure = [=] { return ce_loss(classify(encode_full(patches, batch, g, p, d), p), labels); };
    results.push_back({"model/ce_loss", grad_check(closure, tensors_of(p), opts)});
  }
  {
    auto p = params.subset(trained_prefixes(StageKind::finetune, Method::supervised));
    AugmentPolicy policy;
    policy.flip_probability = 1.0;
    std::vector<std::vector<float>> views;
    for (std::size_t i = 0; i < batch; ++i) {
      auto arng = Rng::derive(seed, Stream::augment, {i});
      views.push_back(augment(images[i], {g.height, g.width, g.channels}, policy, arng));
    }
    auto closure = [=] { return *semifl_consistency_loss(p, images, views, g, d); };
    results.push_back({"model/consistency_loss", grad_check(closure, tensors_of(p), opts)});
  }
  return results;
}

}  // namespace fmim
