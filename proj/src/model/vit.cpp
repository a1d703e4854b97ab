#include "fmim/model/vit.hpp"

#include <cmath>
#include <string>

#include "fmim/numerics/ops.hpp"
#include "fmim/rng.hpp"

namespace fmim {

void ImageGeometry::validate() const {
  require(height > 0 && width > 0 && channels > 0 && patch > 0,
          "ImageGeometry: extents must be positive");
  require(height % patch == 0 && width % patch == 0,
          "ImageGeometry: patch side must divide height and width");
}

void ModelDims::validate() const {
  require(dim > 0 && heads > 0 && dim % heads == 0, "ModelDims: dim must be divisible by heads");
  require(depth >= 1, "ModelDims: encoder depth must be at least 1");
  require(decoder_dim > 0 && decoder_heads > 0 && decoder_dim % decoder_heads == 0,
          "ModelDims: decoder_dim must be divisible by decoder_heads");
  require(mlp_ratio >= 1, "ModelDims: mlp_ratio must be at least 1");
  require(vocab >= 2, "ModelDims: vocab must be at least 2");
  require(classes >= 2, "ModelDims: classes must be at least 2");
  require(init_std > 0.0, "ModelDims: init_std must be positive");
}

namespace {

template <typename T>
class Initializer {
 public:
  Initializer(std::uint64_t seed, double std) : rng_(Rng::derive(seed, Stream::init)), std_(std) {}

  Tensor<T> trunc_normal(Shape shape) {
    std::vector<T> values(shape_numel(shape));
    for (auto& v : values) {
      double x = rng_.normal();
      while (std::abs(x) > 2.0) x = rng_.normal();
      v = static_cast<T>(x * std_);
    }
    return Tensor<T>::parameter(std::move(shape), std::move(values));
  }

  static Tensor<T> filled(Shape shape, T value) {
    const auto n = shape_numel(shape);
    return Tensor<T>::parameter(std::move(shape), std::vector<T>(n, value));
  }

 private:
  Rng rng_;
  double std_;
};

template <typename T>
void add_linear(ModelParams<T>& p, Initializer<T>& init, const std::string& name, std::size_t in,
                std::size_t out) {
  p.add(name + "/w", init.trunc_normal({in, out}));
  p.add(name + "/b", Initializer<T>::filled({out}, T(0)), false);
}

template <typename T>
void add_norm(ModelParams<T>& p, const std::string& name, std::size_t width) {
  p.add(name + "/g", Initializer<T>::filled({width}, T(1)), false);
  p.add(name + "/b", Initializer<T>::filled({width}, T(0)), false);
}

template <typename T>
void add_block(ModelParams<T>& p, Initializer<T>& init, const std::string& name, std::size_t width,
               std::size_t mlp_ratio) {
  add_norm(p, name + "/ln1", width);
  add_linear(p, init, name + "/attn/q", width, width);
  add_linear(p, init, name + "/attn/k", width, width);
  add_linear(p, init, name + "/attn/v", width, width);
  add_linear(p, init, name + "/attn/proj", width, width);
  add_norm(p, name + "/ln2", width);
  add_linear(p, init, name + "/mlp/fc1", width, width * mlp_ratio);
  add_linear(p, init, name + "/mlp/fc2", width * mlp_ratio, width);
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const ModelParams<T>& p, const std::string& name) {
  return ops::add_bias(ops::matmul(x, p.get(name + "/w")), p.get(name + "/b"));
}

template <typename T>
Tensor<T> norm(const Tensor<T>& x, const ModelParams<T>& p, const std::string& name) {
  return ops::layer_norm(x, p.get(name + "/g"), p.get(name + "/b"));
}

// [batch * tokens, width] -> [batch * heads, tokens, width / heads]
template <typename T>
Tensor<T> split_heads(const Tensor<T>& x, std::size_t batch, std::size_t tokens,
                      std::size_t heads) {
  const std::size_t head_dim = x.dim(1) / heads;
  auto t = ops::reshape(x, {batch, tokens, heads, head_dim});
  t = ops::permute(t, {0, 2, 1, 3});
  return ops::reshape(t, {batch * heads, tokens, head_dim});
}

template <typename T>
Tensor<T> merge_heads(const Tensor<T>& x, std::size_t batch, std::size_t tokens,
                      std::size_t heads) {
  const std::size_t head_dim = x.dim(2);
  auto t = ops::reshape(x, {batch, heads, tokens, head_dim});
  t = ops::permute(t, {0, 2, 1, 3});
  return ops::reshape(t, {batch * tokens, heads * head_dim});
}

// Pre-norm transformer block over batch items of `tokens` rows each.
template <typename T>
Tensor<T> block(const Tensor<T>& x, const ModelParams<T>& p, const std::string& name,
                std::size_t batch, std::size_t tokens, std::size_t heads) {
  const std::size_t width = x.dim(1);
  const T scale = T(1) / std::sqrt(static_cast<T>(width / heads));
  const auto h = norm(x, p, name + "/ln1");
  const auto q = split_heads(linear(h, p, name + "/attn/q"), batch, tokens, heads);
  const auto k = split_heads(linear(h, p, name + "/attn/k"), batch, tokens, heads);
  const auto v = split_heads(linear(h, p, name + "/attn/v"), batch, tokens, heads);
  const auto attn = ops::softmax(ops::scale(ops::bmm(q, k, true), scale));
  const auto ctx = merge_heads(ops::bmm(attn, v), batch, tokens, heads);
  auto y = ops::add(x, linear(ctx, p, name + "/attn/proj"));
  const auto m = linear(ops::gelu(linear(norm(y, p, name + "/ln2"), p, name + "/mlp/fc1")), p,
                        name + "/mlp/fc2");
  return ops::add(y, m);
}

template <typename T>
Tensor<T> run_encoder_blocks(Tensor<T> x, const ModelParams<T>& p, const ModelDims& dims,
                             std::size_t batch, std::size_t tokens) {
  for (std::size_t i = 0; i < dims.depth; ++i)
    x = block(x, p, "enc/blk" + std::to_string(i), batch, tokens, dims.heads);
  return norm(x, p, "enc/norm");
}

std::vector<std::size_t> tiled_positions(std::size_t batch, std::size_t patches) {
  std::vector<std::size_t> idx(batch * patches);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t i = 0; i < patches; ++i) idx[b * patches + i] = i;
  return idx;
}

void check_plans(std::span<const MaskPlan> plans, std::size_t patch_rows) {
  require(!plans.empty(), "encoder: at least one mask plan required");
  const std::size_t patches = plans.front().patch_count();
  require(patch_rows == plans.size() * patches, "encoder: patch rows do not match mask plans");
  for (const auto& plan : plans) {
    require(plan.patch_count() == patches, "encoder: mask plans disagree on patch count");
    require(plan.masked.size() + plan.visible.size() == patches,
            "encoder: mask plan does not partition the patches");
    require(plan.visible.size() == plans.front().visible.size(),
            "encoder: mask plans in one batch must have equal visible counts");
  }
}

}  // namespace

template <typename T>
ModelParams<T> init_params(const ImageGeometry& geometry, const ModelDims& dims,
                           std::uint64_t seed) {
  geometry.validate();
  dims.validate();
  Initializer<T> init(seed, dims.init_std);
  ModelParams<T> p;
  const std::size_t patches = geometry.patch_count();
  add_linear(p, init, "enc/patch", geometry.patch_dim(), dims.dim);
  p.add("enc/pos", init.trunc_normal({patches, dims.dim}), false);
  p.add("enc/mask_token", init.trunc_normal({dims.dim}), false);
  for (std::size_t i = 0; i < dims.depth; ++i)
    add_block(p, init, "enc/blk" + std::to_string(i), dims.dim, dims.mlp_ratio);
  add_norm(p, "enc/norm", dims.dim);

  add_linear(p, init, "mae/embed", dims.dim, dims.decoder_dim);
  p.add("mae/mask_token", init.trunc_normal({dims.decoder_dim}), false);
  p.add("mae/pos", init.trunc_normal({patches, dims.decoder_dim}), false);
  for (std::size_t i = 0; i < dims.decoder_depth; ++i)
    add_block(p, init, "mae/blk" + std::to_string(i), dims.decoder_dim, dims.mlp_ratio);
  add_norm(p, "mae/norm", dims.decoder_dim);
  add_linear(p, init, "mae/head", dims.decoder_dim, geometry.patch_dim());

  add_linear(p, init, "beit/head", dims.dim, dims.vocab);
  p.merge(init_classifier<T>(dims));
  return p;
}

template <typename T>
ModelParams<T> init_classifier(const ModelDims& dims) {
  ModelParams<T> p;
  p.add("cls/w", Tensor<T>::zeros({dims.dim, dims.classes}, true));
  p.add("cls/b", Tensor<T>::zeros({dims.classes}, true), false);
  return p;
}

template <typename T>
std::vector<T> patchify(std::span<const T> image, const ImageGeometry& g) {
  g.validate();
  require(image.size() == g.pixels(), "patchify: image size does not match geometry");
  const std::size_t grid_cols = g.width / g.patch;
  const std::size_t pd = g.patch_dim();
  std::vector<T> out(g.pixels());
  for (std::size_t y = 0; y < g.height; ++y) {
    for (std::size_t x = 0; x < g.width; ++x) {
      const std::size_t patch = (y / g.patch) * grid_cols + x / g.patch;
      const std::size_t inner = ((y % g.patch) * g.patch + x % g.patch) * g.channels;
      for (std::size_t c = 0; c < g.channels; ++c)
        out[patch * pd + inner + c] = image[(y * g.width + x) * g.channels + c];
    }
  }
  return out;
}

template <typename T>
std::vector<T> unpatchify(std::span<const T> patches, const ImageGeometry& g) {
  g.validate();
  require(patches.size() == g.pixels(), "unpatchify: patch data does not match geometry");
  const std::size_t grid_cols = g.width / g.patch;
  const std::size_t pd = g.patch_dim();
  std::vector<T> out(g.pixels());
  for (std::size_t y = 0; y < g.height; ++y) {
    for (std::size_t x = 0; x < g.width; ++x) {
      const std::size_t patch = (y / g.patch) * grid_cols + x / g.patch;
      const std::size_t inner = ((y % g.patch) * g.patch + x % g.patch) * g.channels;
      for (std::size_t c = 0; c < g.channels; ++c)
        out[(y * g.width + x) * g.channels + c] = patches[patch * pd + inner + c];
    }
  }
  return out;
}

std::vector<std::size_t> masked_rows(std::span<const MaskPlan> plans) {
  std::vector<std::size_t> rows;
  for (std::size_t b = 0; b < plans.size(); ++b)
    for (const auto i : plans[b].masked) rows.push_back(b * plans[b].patch_count() + i);
  return rows;
}

std::vector<std::size_t> visible_rows(std::span<const MaskPlan> plans) {
  std::vector<std::size_t> rows;
  for (std::size_t b = 0; b < plans.size(); ++b)
    for (const auto i : plans[b].visible) rows.push_back(b * plans[b].patch_count() + i);
  return rows;
}

template <typename T>
Representations<T> encode_beit(const Tensor<T>& patches, std::span<const MaskPlan> plans,
                               const ModelParams<T>& params, const ModelDims& dims) {
  require(patches.rank() == 2, "encode_beit: patches must be [rows, patch_dim]");
  check_plans(plans, patches.dim(0));
  const std::size_t batch = plans.size();
  const std::size_t count = plans.front().patch_count();
  const auto vis = visible_rows(plans);
  auto x = linear(ops::gather_rows(patches, vis), params, "enc/patch");
  x = ops::interleave_rows(x, vis, batch * count, params.get("enc/mask_token"));
  const auto pos_idx = tiled_positions(batch, count);
  x = ops::add(x, ops::gather_rows(params.get("enc/pos"), pos_idx));
  Representations<T> reps;
  reps.h = run_encoder_blocks(std::move(x), params, dims, batch, count);
  reps.batch = batch;
  reps.tokens = count;
  reps.covers_all = true;
  reps.plans.assign(plans.begin(), plans.end());
  return reps;
}

template <typename T>
Representations<T> encode_mae(const Tensor<T>& patches, std::span<const MaskPlan> plans,
                              const ModelParams<T>& params, const ModelDims& dims) {
  require(patches.rank() == 2, "encode_mae: patches must be [rows, patch_dim]");
  check_plans(plans, patches.dim(0));
  const std::size_t batch = plans.size();
  const std::size_t visible = plans.front().visible.size();
  require(visible >= 1, "encode_mae: no visible patches");
  const auto vis = visible_rows(plans);
  std::vector<std::size_t> pos_idx;
  pos_idx.reserve(vis.size());
  for (const auto& plan : plans) pos_idx.insert(pos_idx.end(), plan.visible.begin(), plan.visible.end());
  auto x = linear(ops::gather_rows(patches, vis), params, "enc/patch");
  x = ops::add(x, ops::gather_rows(params.get("enc/pos"), pos_idx));
  Representations<T> reps;
  reps.h = run_encoder_blocks(std::move(x), params, dims, batch, visible);
  reps.batch = batch;
  reps.tokens = visible;
  reps.covers_all = visible == plans.front().patch_count();
  reps.plans.assign(plans.begin(), plans.end());
  return reps;
}

template <typename T>
Representations<T> encode_full(const Tensor<T>& patches, std::size_t batch,
                               const ImageGeometry& geometry, const ModelParams<T>& params,
                               const ModelDims& dims) {
  const std::vector<MaskPlan> plans(batch, MaskPlan::all_visible(geometry.grid()));
  return encode_mae(patches, std::span<const MaskPlan>(plans), params, dims);
}

template <typename T>
Tensor<T> decode_beit(const Representations<T>& reps, const ModelParams<T>& params) {
  require(reps.covers_all && !reps.plans.empty() &&
              reps.tokens == reps.plans.front().patch_count(),
          "decode_beit: representations must cover every patch position");
  const auto rows = masked_rows(reps.plans);
  return linear(ops::gather_rows(reps.h, rows), params, std::string("beit/head"));
}

template <typename T>
Tensor<T> decode_mae(const Representations<T>& reps, const ModelParams<T>& params,
                     const ModelDims& dims) {
  require(!reps.plans.empty() && reps.tokens == reps.plans.front().visible.size() &&
              reps.h.dim(0) == reps.batch * reps.tokens,
          "decode_mae: representations must cover exactly the visible patches");
  const std::size_t count = reps.plans.front().patch_count();
  const std::size_t batch = reps.batch;
  auto y = linear(reps.h, params, std::string("mae/embed"));
  y = ops::interleave_rows(y, visible_rows(reps.plans), batch * count,
                           params.get("mae/mask_token"));
  y = ops::add(y, ops::gather_rows(params.get("mae/pos"), tiled_positions(batch, count)));
  for (std::size_t i = 0; i < dims.decoder_depth; ++i)
    y = block(y, params, "mae/blk" + std::to_string(i), batch, count, dims.decoder_heads);
  y = norm(y, params, std::string("mae/norm"));
  return linear(ops::gather_rows(y, masked_rows(reps.plans)), params, std::string("mae/head"));
}

template <typename T>
Tensor<T> classify(const Representations<T>& reps, const ModelParams<T>& params) {
  require(reps.batch > 0 && reps.tokens > 0, "classify: empty representations");
  const std::size_t width = reps.h.dim(1);
  auto pooled = ops::mean_axis(ops::reshape(reps.h, {reps.batch, reps.tokens, width}), 1);
  return linear(pooled, params, std::string("cls"));
}

template <typename T>
Tensor<T> beit_loss(const Tensor<T>& logits, std::span<const std::size_t> targets) {
  return ops::cross_entropy(logits, targets);
}

template <typename T>
Tensor<T> mae_loss(const Tensor<T>& predicted, const Tensor<T>& target) {
  require(predicted.shape() == target.shape(), "mae_loss: prediction and target shapes differ");
  return ops::mean(ops::square(ops::sub(predicted, target)));
}

template <typename T>
Tensor<T> ce_loss(const Tensor<T>& logits, std::span<const std::size_t> labels) {
  return ops::cross_entropy(logits, labels);
}

#define FMIM_INSTANTIATE_VIT(T)                                                                 \
  template ModelParams<T> init_params<T>(const ImageGeometry&, const ModelDims&, std::uint64_t);\
  template ModelParams<T> init_classifier<T>(const ModelDims&);                                 \
  template std::vector<T> patchify<T>(std::span<const T>, const ImageGeometry&);                \
  template std::vector<T> unpatchify<T>(std::span<const T>, const ImageGeometry&);              \
  template Representations<T> encode_beit<T>(const Tensor<T>&, std::span<const MaskPlan>,       \
                                             const ModelParams<T>&, const ModelDims&);          \
  template Representations<T> encode_mae<T>(const Tensor<T>&, std::span<const MaskPlan>,        \
                                            const ModelParams<T>&, const ModelDims&);           \
  template Representations<T> encode_full<T>(const Tensor<T>&, std::size_t,                     \
                                             const ImageGeometry&, const ModelParams<T>&,       \
                                             const ModelDims&);                                 \
  template Tensor<T> decode_beit<T>(const Representations<T>&, const ModelParams<T>&);          \
  template Tensor<T> decode_mae<T>(const Representations<T>&, const ModelParams<T>&,            \
                                   const ModelDims&);                                           \
  template Tensor<T> classify<T>(const Representations<T>&, const ModelParams<T>&);             \
  template Tensor<T> beit_loss<T>(const Tensor<T>&, std::span<const std::size_t>);              \
  template Tensor<T> mae_loss<T>(const Tensor<T>&, const Tensor<T>&);                           \
  template Tensor<T> ce_loss<T>(const Tensor<T>&, std::span<const std::size_t>);

FMIM_INSTANTIATE_VIT(float)
FMIM_INSTANTIATE_VIT(double)

}  // namespace fmim
