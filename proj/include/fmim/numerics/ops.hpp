#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fmim/numerics/tensor.hpp"

// Differentiable primitives. Every op validates shapes and throws
// ContractViolation on mismatch. Matrices are row-major; "rows" always means
// the leading dimension of a rank-2 tensor.
namespace fmim::ops {

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& a, T factor);

/// a[n,m] + bias[m] broadcast over rows.
template <typename T> Tensor<T> add_bias(const Tensor<T>& a, const Tensor<T>& bias);

/// a[n,k] @ b[k,m].
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

/// Batched a[B,n,k] @ b[B,k,m], or a[B,n,k] @ b[B,m,k]^T when transpose_b.
template <typename T>
Tensor<T> bmm(const Tensor<T>& a, const Tensor<T>& b, bool transpose_b = false);

/// a[n,m] -> [m,n].
template <typename T> Tensor<T> transpose(const Tensor<T>& a);

/// General axis permutation: output axis i is input axis axes[i].
template <typename T>
Tensor<T> permute(const Tensor<T>& a, const std::vector<std::size_t>& axes);

template <typename T> Tensor<T> reshape(const Tensor<T>& a, Shape shape);

/// Selects rows a[index[i], :]; indices may repeat (gradients accumulate).
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& a, std::span<const std::size_t> index);

/// Builds a [total, d] matrix whose row positions[i] is rows[i] and whose
/// remaining rows are copies of filler[d]. positions must be distinct.
template <typename T>
Tensor<T> interleave_rows(const Tensor<T>& rows, std::span<const std::size_t> positions,
                          std::size_t total, const Tensor<T>& filler);

/// Softmax over the last axis.
template <typename T> Tensor<T> softmax(const Tensor<T>& a);

/// Row-wise layer normalization of x[n,d] with affine gain[d] and shift[d].
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& shift,
                     T eps = T(1e-6));

/// Exact (erf) GELU.
template <typename T> Tensor<T> gelu(const Tensor<T>& a);

template <typename T> Tensor<T> square(const Tensor<T>& a);
template <typename T> Tensor<T> log(const Tensor<T>& a);

/// Scalar sum / mean over all elements.
template <typename T> Tensor<T> sum(const Tensor<T>& a);
template <typename T> Tensor<T> mean(const Tensor<T>& a);

/// Mean over one axis (the axis is removed from the shape).
template <typename T> Tensor<T> mean_axis(const Tensor<T>& a, std::size_t axis);

/// Mean over rows of -log softmax(logits[i])[targets[i]].
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const std::size_t> targets);

}  // namespace fmim::ops
