#include "fmim/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace fmim::ops {
namespace {

template <typename T>
using NodeT = detail::Node<T>;

// C[n,m] += A[n,k] * B[k,m]
template <typename T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t n, std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    T* crow = c + i * m;
    const T* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = arow[p];
      const T* brow = b + p * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[n,k] += A[n,m] * B[k,m]^T
template <typename T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t n, std::size_t m, std::size_t k) {
  for (std::size_t i = 0; i < n; ++i) {
    const T* arow = a + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const T* brow = b + p * m;
      T acc = T(0);
      for (std::size_t j = 0; j < m; ++j) acc += arow[j] * brow[j];
      c[i * k + p] += acc;
    }
  }
}

// C[k,m] += A[n,k]^T * B[n,m]
template <typename T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t n, std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    const T* arow = a + i * k;
    const T* brow = b + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = arow[p];
      T* crow = c + p * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " +
                                      shape_string(a.shape()) + " vs " + shape_string(b.shape()));
}

template <typename T>
void require_rank(const Tensor<T>& a, std::size_t rank, const char* op) {
  require(a.rank() == rank, std::string(op) + ": expected rank " + std::to_string(rank) +
                                ", got " + shape_string(a.shape()));
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  std::vector<T> out(a.numel());
  const auto x = a.data();
  const auto y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return Tensor<T>::from_op(a.shape(), std::move(out), {a, b}, [](NodeT<T>& n) {
    for (auto& in : n.inputs) {
      if (!in->requires_grad) continue;
      for (std::size_t i = 0; i < n.grad.size(); ++i) in->grad[i] += n.grad[i];
    }
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "sub");
  std::vector<T> out(a.numel());
  const auto x = a.data();
  const auto y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return Tensor<T>::from_op(a.shape(), std::move(out), {a, b}, [](NodeT<T>& n) {
    auto& lhs = *n.inputs[0];
    auto& rhs = *n.inputs[1];
    if (lhs.requires_grad)
      for (std::size_t i = 0; i < n.grad.size(); ++i) lhs.grad[i] += n.grad[i];
    if (rhs.requires_grad)
      for (std::size_t i = 0; i < n.grad.size(); ++i) rhs.grad[i] -= n.grad[i];
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  std::vector<T> out(a.numel());
  const auto x = a.data();
  const auto y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return Tensor<T>::from_op(a.shape(), std::move(out), {a, b}, [](NodeT<T>& n) {
    auto& lhs = *n.inputs[0];
    auto& rhs = *n.inputs[1];
    if (lhs.requires_grad)
      for (std::size_t i = 0; i < n.grad.size(); ++i) lhs.grad[i] += n.grad[i] * rhs.value[i];
    if (rhs.requires_grad)
      for (std::size_t i = 0; i < n.grad.size(); ++i) rhs.grad[i] += n.grad[i] * lhs.value[i];
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  std::vector<T> out(a.data().begin(), a.data().end());
  for (auto& v : out) v *= factor;
  return Tensor<T>::from_op(a.shape(), std::move(out), {a}, [factor](NodeT<T>& n) {
    auto& in = *n.inputs[0];
    for (std::size_t i = 0; i < n.grad.size(); ++i) in.grad[i] += n.grad[i] * factor;
  });
}

template <typename T>
Tensor<T> add_bias(const Tensor<T>& a, const Tensor<T>& bias) {
  require_rank(a, 2, "add_bias");
  require_rank(bias, 1, "add_bias");
  const std::size_t rows = a.dim(0);
  const std::size_t cols = a.dim(1);
  require(bias.dim(0) == cols, "add_bias: bias length does not match columns");
  std::vector<T> out(a.data().begin(), a.data().end());
  const auto bv = bias.data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] += bv[c];
  return Tensor<T>::from_op(a.shape(), std::move(out), {a, bias}, [rows, cols](NodeT<T>& n) {
    auto& x = *n.inputs[0];
    auto& b = *n.inputs[1];
    if (x.requires_grad)
      for (std::size_t i = 0; i < n.grad.size(); ++i) x.grad[i] += n.grad[i];
    if (b.requires_grad)
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) b.grad[c] += n.grad[r * cols + c];
  });
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t n = a.dim(0);
  const std::size_t k = a.dim(1);
  const std::size_t m = b.dim(1);
  require(b.dim(0) == k, "matmul: inner dimensions differ " + shape_string(a.shape()) + " @ " +
                             shape_string(b.shape()));
  std::vector<T> out(n * m, T(0));
  gemm_nn(a.data().data(), b.data().data(), out.data(), n, k, m);
  return Tensor<T>::from_op({n, m}, std::move(out), {a, b}, [n, k, m](NodeT<T>& node) {
    auto& x = *node.inputs[0];
    auto& y = *node.inputs[1];
    if (x.requires_grad) gemm_nt(node.grad.data(), y.value.data(), x.grad.data(), n, m, k);
    if (y.requires_grad) gemm_tn(x.value.data(), node.grad.data(), y.grad.data(), n, k, m);
  });
}

template <typename T>
Tensor<T> bmm(const Tensor<T>& a, const Tensor<T>& b, bool transpose_b) {
  require_rank(a, 3, "bmm");
  require_rank(b, 3, "bmm");
  const std::size_t batch = a.dim(0);
  const std::size_t n = a.dim(1);
  const std::size_t k = a.dim(2);
  require(b.dim(0) == batch, "bmm: batch sizes differ");
  require((transpose_b ? b.dim(2) : b.dim(1)) == k, "bmm: inner dimensions differ");
  const std::size_t m = transpose_b ? b.dim(1) : b.dim(2);
  std::vector<T> out(batch * n * m, T(0));
  const T* ad = a.data().data();
  const T* bd = b.data().data();
  for (std::size_t s = 0; s < batch; ++s) {
    if (transpose_b)
      gemm_nt(ad + s * n * k, bd + s * m * k, out.data() + s * n * m, n, k, m);
    else
      gemm_nn(ad + s * n * k, bd + s * k * m, out.data() + s * n * m, n, k, m);
  }
  return Tensor<T>::from_op(
      {batch, n, m}, std::move(out), {a, b}, [batch, n, k, m, transpose_b](NodeT<T>& node) {
        auto& x = *node.inputs[0];
        auto& y = *node.inputs[1];
        for (std::size_t s = 0; s < batch; ++s) {
          const T* g = node.grad.data() + s * n * m;
          const T* xv = x.value.data() + s * n * k;
          const T* yv = y.value.data() + s * k * m;
          if (transpose_b) {
            // out = x y^T with y[m,k]: dx = g y, dy = g^T x
            if (x.requires_grad) gemm_nn(g, yv, x.grad.data() + s * n * k, n, m, k);
            if (y.requires_grad) gemm_tn(g, xv, y.grad.data() + s * m * k, n, m, k);
          } else {
            if (x.requires_grad) gemm_nt(g, yv, x.grad.data() + s * n * k, n, m, k);
            if (y.requires_grad) gemm_tn(xv, g, y.grad.data() + s * k * m, n, k, m);
          }
        }
      });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  require_rank(a, 2, "transpose");
  return permute(a, {1, 0});
}

template <typename T>
Tensor<T> permute(const Tensor<T>& a, const std::vector<std::size_t>& axes) {
  const std::size_t rank = a.rank();
  require(axes.size() == rank, "permute: axes length must equal rank");
  std::vector<bool> seen(rank, false);
  for (const auto ax : axes) {
    require(ax < rank && !seen[ax], "permute: axes must be a permutation");
    seen[ax] = true;
  }
  const Shape& in_shape = a.shape();
  Shape out_shape(rank);
  for (std::size_t i = 0; i < rank; ++i) out_shape[i] = in_shape[axes[i]];
  std::vector<std::size_t> in_strides(rank, 1);
  for (std::size_t i = rank; i-- > 1;) in_strides[i - 1] = in_strides[i] * in_shape[i];
  // source offset for each destination element, computed once
  const std::size_t total = a.numel();
  auto source = std::make_shared<std::vector<std::size_t>>(total);
  std::vector<std::size_t> counter(rank, 0);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t off = 0;
    for (std::size_t i = 0; i < rank; ++i) off += counter[i] * in_strides[axes[i]];
    (*source)[flat] = off;
    for (std::size_t i = rank; i-- > 0;) {
      if (++counter[i] < out_shape[i]) break;
      counter[i] = 0;
    }
  }
  std::vector<T> out(total);
  const auto src = a.data();
  for (std::size_t i = 0; i < total; ++i) out[i] = src[(*source)[i]];
  return Tensor<T>::from_op(std::move(out_shape), std::move(out), {a}, [source](NodeT<T>& n) {
    auto& in = *n.inputs[0];
    for (std::size_t i = 0; i < n.grad.size(); ++i) in.grad[(*source)[i]] += n.grad[i];
  });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  require(shape_numel(shape) == a.numel(),
          "reshape: cannot reshape " + shape_string(a.shape()) + " to " + shape_string(shape));
  std::vector<T> out(a.data().begin(), a.data().end());
  return Tensor<T>::from_op(std::move(shape), std::move(out), {a}, [](NodeT<T>& n) {
    auto& in = *n.inputs[0];
    for (std::size_t i = 0; i < n.grad.size(); ++i) in.grad[i] += n.grad[i];
  });
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& a, std::span<const std::size_t> index) {
  require_rank(a, 2, "gather_rows");
  const std::size_t rows = a.dim(0);
  const std::size_t cols = a.dim(1);
  auto idx = std::make_shared<std::vector<std::size_t>>(index.begin(), index.end());
  std::vector<T> out(idx->size() * cols);
  const auto src = a.data();
  for (std::size_t i = 0; i < idx->size(); ++i) {
    require((*idx)[i] < rows, "gather_rows: index out of range");
    std::copy_n(src.begin() + (*idx)[i] * cols, cols, out.begin() + i * cols);
  }
  return Tensor<T>::from_op({idx->size(), cols}, std::move(out), {a}, [idx, cols](NodeT<T>& n) {
    auto& in = *n.inputs[0];
    for (std::size_t i = 0; i < idx->size(); ++i) {
      T* dst = in.grad.data() + (*idx)[i] * cols;
      const T* g = n.grad.data() + i * cols;
      for (std::size_t c = 0; c < cols; ++c) dst[c] += g[c];
    }
  });
}

template <typename T>
Tensor<T> interleave_rows(const Tensor<T>& rows, std::span<const std::size_t> positions,
                          std::size_t total, const Tensor<T>& filler) {
  require_rank(rows, 2, "interleave_rows");
  require_rank(filler, 1, "interleave_rows");
  const std::size_t cols = filler.dim(0);
  require(rows.dim(0) == positions.size(), "interleave_rows: one position per row required");
  require(rows.dim(1) == cols, "interleave_rows: filler width does not match rows");
  // source[r] = index into rows, or npos for filler rows
  constexpr auto npos = static_cast<std::size_t>(-1);
  auto source = std::make_shared<std::vector<std::size_t>>(total, npos);
  for (std::size_t i = 0; i < positions.size(); ++i) {
    require(positions[i] < total, "interleave_rows: position out of range");
    require((*source)[positions[i]] == npos, "interleave_rows: duplicate position");
    (*source)[positions[i]] = i;
  }
  std::vector<T> out(total * cols);
  const auto rv = rows.data();
  const auto fv = filler.data();
  for (std::size_t r = 0; r < total; ++r) {
    const std::size_t s = (*source)[r];
    if (s == npos)
      std::copy(fv.begin(), fv.end(), out.begin() + r * cols);
    else
      std::copy_n(rv.begin() + s * cols, cols, out.begin() + r * cols);
  }
  return Tensor<T>::from_op({total, cols}, std::move(out), {rows, filler},
                            [source, cols](NodeT<T>& n) {
                              auto& rin = *n.inputs[0];
                              auto& fin = *n.inputs[1];
                              for (std::size_t r = 0; r < source->size(); ++r) {
                                const std::size_t s = (*source)[r];
                                const T* g = n.grad.data() + r * cols;
                                if (s == npos) {
                                  if (fin.requires_grad)
                                    for (std::size_t c = 0; c < cols; ++c) fin.grad[c] += g[c];
                                } else if (rin.requires_grad) {
                                  for (std::size_t c = 0; c < cols; ++c)
                                    rin.grad[s * cols + c] += g[c];
                                }
                              }
                            });
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& a) {
  require(a.rank() >= 1, "softmax: rank must be at least 1");
  const std::size_t cols = a.shape().back();
  const std::size_t rows = a.numel() / cols;
  std::vector<T> out(a.numel());
  const auto x = a.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = x.data() + r * cols;
    T* yr = out.data() + r * cols;
    const T mx = *std::max_element(xr, xr + cols);
    T total = T(0);
    for (std::size_t c = 0; c < cols; ++c) {
      yr[c] = std::exp(xr[c] - mx);
      total += yr[c];
    }
    for (std::size_t c = 0; c < cols; ++c) yr[c] /= total;
  }
  return Tensor<T>::from_op(a.shape(), std::move(out), {a}, [rows, cols](NodeT<T>& n) {
    auto& in = *n.inputs[0];
    for (std::size_t r = 0; r < rows; ++r) {
      const T* y = n.value.data() + r * cols;
      const T* g = n.grad.data() + r * cols;
      T dot = T(0);
      for (std::size_t c = 0; c < cols; ++c) dot += g[c] * y[c];
      for (std::size_t c = 0; c < cols; ++c) in.grad[r * cols + c] += y[c] * (g[c] - dot);
    }
  });
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& shift, T eps) {
  require_rank(x, 2, "layer_norm");
  require_rank(gain, 1, "layer_norm");
  require_rank(shift, 1, "layer_norm");
  const std::size_t rows = x.dim(0);
  const std::size_t cols = x.dim(1);
  require(gain.dim(0) == cols && shift.dim(0) == cols, "layer_norm: affine width mismatch");
  auto xhat = std::make_shared<std::vector<T>>(x.numel());
  auto rstd = std::make_shared<std::vector<T>>(rows);
  std::vector<T> out(x.numel());
  const auto xv = x.data();
  const auto gv = gain.data();
  const auto sv = shift.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = xv.data() + r * cols;
    T mu = T(0);
    for (std::size_t c = 0; c < cols; ++c) mu += xr[c];
    mu /= static_cast<T>(cols);
    T var = T(0);
    for (std::size_t c = 0; c < cols; ++c) var += (xr[c] - mu) * (xr[c] - mu);
    var /= static_cast<T>(cols);
    const T rs = T(1) / std::sqrt(var + eps);
    (*rstd)[r] = rs;
    for (std::size_t c = 0; c < cols; ++c) {
      const T h = (xr[c] - mu) * rs;
      (*xhat)[r * cols + c] = h;
      out[r * cols + c] = h * gv[c] + sv[c];
    }
  }
  return Tensor<T>::from_op(
      x.shape(), std::move(out), {x, gain, shift}, [xhat, rstd, rows, cols](NodeT<T>& n) {
        auto& xin = *n.inputs[0];
        auto& gin = *n.inputs[1];
        auto& sin = *n.inputs[2];
        const T inv_cols = T(1) / static_cast<T>(cols);
        for (std::size_t r = 0; r < rows; ++r) {
          const T* g = n.grad.data() + r * cols;
          const T* h = xhat->data() + r * cols;
          if (gin.requires_grad)
            for (std::size_t c = 0; c < cols; ++c) gin.grad[c] += g[c] * h[c];
          if (sin.requires_grad)
            for (std::size_t c = 0; c < cols; ++c) sin.grad[c] += g[c];
          if (!xin.requires_grad) continue;
          T mean_dh = T(0);
          T mean_dh_h = T(0);
          for (std::size_t c = 0; c < cols; ++c) {
            const T dh = g[c] * gin.value[c];
            mean_dh += dh;
            mean_dh_h += dh * h[c];
          }
          mean_dh *= inv_cols;
          mean_dh_h *= inv_cols;
          for (std::size_t c = 0; c < cols; ++c) {
            const T dh = g[c] * gin.value[c];
            xin.grad[r * cols + c] += (*rstd)[r] * (dh - mean_dh - h[c] * mean_dh_h);
          }
        }
      });
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& a) {
  const T inv_sqrt2 = T(1) / std::numbers::sqrt2_v<T>;
  std::vector<T> out(a.numel());
  const auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = T(0.5) * x[i] * (T(1) + std::erf(x[i] * inv_sqrt2));
  return Tensor<T>::from_op(a.shape(), std::move(out), {a}, [inv_sqrt2](NodeT<T>& n) {
    auto& in = *n.inputs[0];
    const T inv_sqrt2pi = inv_sqrt2 * std::numbers::inv_sqrtpi_v<T>;
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      const T v = in.value[i];
      const T cdf = T(0.5) * (T(1) + std::erf(v * inv_sqrt2));
      const T pdf = inv_sqrt2pi * std::exp(T(-0.5) * v * v);
      in.grad[i] += n.grad[i] * (cdf + v * pdf);
    }
  });
}

template <typename T>
Tensor<T> square(const Tensor<T>& a) {
  std::vector<T> out(a.numel());
  const auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * x[i];
  return Tensor<T>::from_op(a.shape(), std::move(out), {a}, [](NodeT<T>& n) {
    auto& in = *n.inputs[0];
    for (std::size_t i = 0; i < n.grad.size(); ++i) in.grad[i] += T(2) * in.value[i] * n.grad[i];
  });
}

template <typename T>
Tensor<T> log(const Tensor<T>& a) {
  std::vector<T> out(a.numel());
  const auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(x[i]);
  return Tensor<T>::from_op(a.shape(), std::move(out), {a}, [](NodeT<T>& n) {
    auto& in = *n.inputs[0];
    for (std::size_t i = 0; i < n.grad.size(); ++i) in.grad[i] += n.grad[i] / in.value[i];
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T total = T(0);
  for (const auto v : a.data()) total += v;
  return Tensor<T>::from_op({}, {total}, {a}, [](NodeT<T>& n) {
    auto& in = *n.inputs[0];
    for (auto& g : in.grad) g += n.grad[0];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  require(a.numel() > 0, "mean: empty tensor");
  T total = T(0);
  for (const auto v : a.data()) total += v;
  const T inv = T(1) / static_cast<T>(a.numel());
  return Tensor<T>::from_op({}, {total * inv}, {a}, [inv](NodeT<T>& n) {
    auto& in = *n.inputs[0];
    for (auto& g : in.grad) g += n.grad[0] * inv;
  });
}

template <typename T>
Tensor<T> mean_axis(const Tensor<T>& a, std::size_t axis) {
  require(axis < a.rank(), "mean_axis: axis out of range");
  const Shape& shape = a.shape();
  const std::size_t len = shape[axis];
  require(len > 0, "mean_axis: empty axis");
  std::size_t outer = 1;
  std::size_t inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  Shape out_shape;
  for (std::size_t i = 0; i < shape.size(); ++i)
    if (i != axis) out_shape.push_back(shape[i]);
  const T inv = T(1) / static_cast<T>(len);
  std::vector<T> out(outer * inner, T(0));
  const auto x = a.data();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t l = 0; l < len; ++l)
      for (std::size_t i = 0; i < inner; ++i) out[o * inner + i] += x[(o * len + l) * inner + i];
  for (auto& v : out) v *= inv;
  return Tensor<T>::from_op(std::move(out_shape), std::move(out), {a},
                            [outer, len, inner, inv](NodeT<T>& n) {
                              auto& in = *n.inputs[0];
                              for (std::size_t o = 0; o < outer; ++o)
                                for (std::size_t l = 0; l < len; ++l)
                                  for (std::size_t i = 0; i < inner; ++i)
                                    in.grad[(o * len + l) * inner + i] +=
                                        n.grad[o * inner + i] * inv;
                            });
}

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const std::size_t> targets) {
  require_rank(logits, 2, "cross_entropy");
  const std::size_t rows = logits.dim(0);
  const std::size_t cols = logits.dim(1);
  require(rows > 0, "cross_entropy: empty batch");
  require(targets.size() == rows, "cross_entropy: one target per row required");
  for (const auto t : targets) require(t < cols, "cross_entropy: target out of range");
  auto probs = std::make_shared<std::vector<T>>(logits.numel());
  auto tgt = std::make_shared<std::vector<std::size_t>>(targets.begin(), targets.end());
  const auto x = logits.data();
  T total = T(0);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = x.data() + r * cols;
    const T mx = *std::max_element(xr, xr + cols);
    T z = T(0);
    for (std::size_t c = 0; c < cols; ++c) z += std::exp(xr[c] - mx);
    const T lse = mx + std::log(z);
    total += lse - xr[(*tgt)[r]];
    for (std::size_t c = 0; c < cols; ++c) (*probs)[r * cols + c] = std::exp(xr[c] - lse);
  }
  const T inv = T(1) / static_cast<T>(rows);
  return Tensor<T>::from_op({}, {total * inv}, {logits},
                            [probs, tgt, rows, cols, inv](NodeT<T>& n) {
                              auto& in = *n.inputs[0];
                              const T g = n.grad[0] * inv;
                              for (std::size_t r = 0; r < rows; ++r) {
                                for (std::size_t c = 0; c < cols; ++c)
                                  in.grad[r * cols + c] += g * (*probs)[r * cols + c];
                                in.grad[r * cols + (*tgt)[r]] -= g;
                              }
                            });
}

#define FMIM_INSTANTIATE_OPS(T)                                                               \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> scale(const Tensor<T>&, T);                                              \
  template Tensor<T> add_bias(const Tensor<T>&, const Tensor<T>&);                            \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                              \
  template Tensor<T> bmm(const Tensor<T>&, const Tensor<T>&, bool);                           \
  template Tensor<T> transpose(const Tensor<T>&);                                             \
  template Tensor<T> permute(const Tensor<T>&, const std::vector<std::size_t>&);              \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                        \
  template Tensor<T> gather_rows(const Tensor<T>&, std::span<const std::size_t>);             \
  template Tensor<T> interleave_rows(const Tensor<T>&, std::span<const std::size_t>,          \
                                     std::size_t, const Tensor<T>&);                          \
  template Tensor<T> softmax(const Tensor<T>&);                                               \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);     \
  template Tensor<T> gelu(const Tensor<T>&);                                                  \
  template Tensor<T> square(const Tensor<T>&);                                                \
  template Tensor<T> log(const Tensor<T>&);                                                   \
  template Tensor<T> sum(const Tensor<T>&);                                                   \
  template Tensor<T> mean(const Tensor<T>&);                                                  \
  template Tensor<T> mean_axis(const Tensor<T>&, std::size_t);                                \
  template Tensor<T> cross_entropy(const Tensor<T>&, std::span<const std::size_t>);

FMIM_INSTANTIATE_OPS(float)
FMIM_INSTANTIATE_OPS(double)

}  // namespace fmim::ops
