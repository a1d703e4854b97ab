#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fmim/masking.hpp"
#include "fmim/model/geometry.hpp"
#include "fmim/numerics/params.hpp"

namespace fmim {

// Parameter name prefixes. A stage trains the union of the encoder with one
// head: the pixel decoder, the token head, or the classifier.
inline constexpr const char* kEncoderPrefix = "enc/";
inline constexpr const char* kPixelDecoderPrefix = "mae/";
inline constexpr const char* kTokenHeadPrefix = "beit/";
inline constexpr const char* kClassifierPrefix = "cls/";

/// Every parameter of the encoder, both pre-training heads and the
/// classifier. Projections and embeddings draw from a normal truncated at two
/// standard deviations; biases and the classifier start at zero; layer-norm
/// gains start at one.
template <typename T>
ModelParams<T> init_params(const ImageGeometry& geometry, const ModelDims& dims,
                           std::uint64_t seed);

/// Fresh classifier parameters (zeros) for fine-tuning.
template <typename T>
ModelParams<T> init_classifier(const ModelDims& dims);

/// Splits an H x W x C image (row-major, channels interleaved) into P patch
/// vectors, patches in row-major order, each laid out (row, col, channel).
template <typename T>
std::vector<T> patchify(std::span<const T> image, const ImageGeometry& geometry);

template <typename T>
std::vector<T> unpatchify(std::span<const T> patches, const ImageGeometry& geometry);

/// Encoder output for a batch of equally sized token sets. rows() is
/// batch * tokens; covers_all is false when only visible patches were encoded.
template <typename T>
struct Representations {
  Tensor<T> h;
  std::size_t batch = 0;
  std::size_t tokens = 0;
  bool covers_all = true;
  std::vector<MaskPlan> plans;
};

/// Full-sequence encoding: visible patches are projected, masked positions
/// receive the learnable mask embedding; position embeddings are added to
/// both. patches is [batch * P, patch_dim].
template <typename T>
Representations<T> encode_beit(const Tensor<T>& patches, std::span<const MaskPlan> plans,
                               const ModelParams<T>& params, const ModelDims& dims);

/// Visible-only encoding. Masked patch rows are never read.
template <typename T>
Representations<T> encode_mae(const Tensor<T>& patches, std::span<const MaskPlan> plans,
                              const ModelParams<T>& params, const ModelDims& dims);

/// Encodes complete, unmasked images (the fine-tuning and inference path).
template <typename T>
Representations<T> encode_full(const Tensor<T>& patches, std::size_t batch,
                               const ImageGeometry& geometry, const ModelParams<T>& params,
                               const ModelDims& dims);

/// Linear token head applied to the masked rows: [batch * |M|, vocab].
template <typename T>
Tensor<T> decode_beit(const Representations<T>& reps, const ModelParams<T>& params);

/// Pixel decoder: re-inserts the decoder mask embedding at masked positions,
/// adds decoder position embeddings, runs the decoder blocks and regresses
/// the masked patches in ascending index order: [batch * |M|, patch_dim].
template <typename T>
Tensor<T> decode_mae(const Representations<T>& reps, const ModelParams<T>& params,
                     const ModelDims& dims);

/// Average-pools each item's representations and applies the linear
/// classifier: [batch, classes].
template <typename T>
Tensor<T> classify(const Representations<T>& reps, const ModelParams<T>& params);

template <typename T>
Tensor<T> beit_loss(const Tensor<T>& logits, std::span<const std::size_t> targets);

/// Per-pixel mean squared error within each patch, averaged over patches.
template <typename T>
Tensor<T> mae_loss(const Tensor<T>& predicted, const Tensor<T>& target);

template <typename T>
Tensor<T> ce_loss(const Tensor<T>& logits, std::span<const std::size_t> labels);

/// Flat row indices (item * P + patch) of the masked / visible patches.
std::vector<std::size_t> masked_rows(std::span<const MaskPlan> plans);
std::vector<std::size_t> visible_rows(std::span<const MaskPlan> plans);

}  // namespace fmim
