#pragma once

// Differentiable operations over Tensor. Matrices are rank-2 row-major;
// per-patch vectors (relation maps) are rank-1.

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "cecnet/tensor.hpp"

namespace cecnet {

namespace detail {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using ConstMap = Eigen::Map<const RowMat<T>>;
template <class T>
using MutMap = Eigen::Map<RowMat<T>>;

template <class T>
ConstMap<T> cmap(const T* p, std::size_t r, std::size_t c) {
  return ConstMap<T>(p, static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}
template <class T>
MutMap<T> mmap(T* p, std::size_t r, std::size_t c) {
  return MutMap<T>(p, static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

// Products run on Eigen-owned (64-byte aligned) copies. On unaligned maps the
// vectorized kernels peel a pointer-dependent number of leading elements, so
// the rounding of a product would otherwise depend on heap addresses.
template <class T>
RowMat<T> owned(const T* p, std::size_t r, std::size_t c) {
  return cmap(p, r, c);
}
template <class T>
void store(const RowMat<T>& m, T* dst) {
  std::copy(m.data(), m.data() + m.size(), dst);
}
template <class T>
void accumulate(const RowMat<T>& m, T* dst) {
  const T* src = m.data();
  for (Eigen::Index i = 0; i < m.size(); ++i) dst[i] += src[i];
}

inline void require_rank(const Shape& s, std::size_t rank, const char* op) {
  if (s.size() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_str(s));
  }
}

inline void require_same(const Shape& a, const Shape& b, const char* op) {
  if (a != b) throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

}  // namespace detail

// ---------------------------------------------------------------- products

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_rank(a.shape(), 2, "matmul");
  detail::require_rank(b.shape(), 2, "matmul");
  const auto m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul: inner dimensions differ " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  std::vector<T> out(m * n);
  detail::store<T>(detail::owned(a.data().data(), m, k) * detail::owned(b.data().data(), k, n), out.data());
  return detail::make_op<T>(Shape{m, n}, std::move(out), {a, b}, [m, k, n](Node<T>& self) {
    const auto g = detail::owned(self.grad.data(), m, n);
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    if (pa->requires_grad)
      detail::accumulate<T>(g * detail::owned(pb->value.data(), k, n).transpose(), pa->grad_buffer().data());
    if (pb->requires_grad)
      detail::accumulate<T>(detail::owned(pa->value.data(), m, k).transpose() * g, pb->grad_buffer().data());
  });
}

/// a · bᵀ for a [m×k], b [n×k].
template <class T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_rank(a.shape(), 2, "matmul_nt");
  detail::require_rank(b.shape(), 2, "matmul_nt");
  const auto m = a.rows(), k = a.cols(), n = b.rows();
  if (b.cols() != k) {
    throw DimensionError("matmul_nt: inner dimensions differ " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()) + "^T");
  }
  std::vector<T> out(m * n);
  detail::store<T>(detail::owned(a.data().data(), m, k) * detail::owned(b.data().data(), n, k).transpose(), out.data());
  return detail::make_op<T>(Shape{m, n}, std::move(out), {a, b}, [m, k, n](Node<T>& self) {
    const auto g = detail::owned(self.grad.data(), m, n);
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    if (pa->requires_grad) detail::accumulate<T>(g * detail::owned(pb->value.data(), n, k), pa->grad_buffer().data());
    if (pb->requires_grad)
      detail::accumulate<T>(g.transpose() * detail::owned(pa->value.data(), m, k), pb->grad_buffer().data());
  });
}

template <class T>
Tensor<T> transpose(const Tensor<T>& a) {
  detail::require_rank(a.shape(), 2, "transpose");
  const auto m = a.rows(), n = a.cols();
  std::vector<T> out(m * n);
  detail::mmap(out.data(), n, m) = detail::cmap(a.data().data(), m, n).transpose();
  return detail::make_op<T>(Shape{n, m}, std::move(out), {a}, [m, n](Node<T>& self) {
    auto& p = self.parents[0];
    detail::mmap(p->grad_buffer().data(), m, n) += detail::cmap(self.grad.data(), n, m).transpose();
  });
}

// ------------------------------------------------------------- elementwise

namespace detail {

template <class T, class Fwd, class Deriv>
Tensor<T> unary(const Tensor<T>& a, Fwd fwd, Deriv deriv) {
  std::vector<T> out(a.size());
  const auto in = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(in[i]);
  return make_op<T>(a.shape(), std::move(out), {a}, [deriv](Node<T>& self) {
    auto& p = self.parents[0];
    auto& g = p->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * deriv(p->value[i], self.value[i]);
  });
}

}  // namespace detail

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same(a.shape(), b.shape(), "add");
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return detail::make_op<T>(a.shape(), std::move(out), {a, b}, [](Node<T>& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      auto& g = p->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same(a.shape(), b.shape(), "sub");
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return detail::make_op<T>(a.shape(), std::move(out), {a, b}, [](Node<T>& self) {
    const T sign[2] = {T(1), T(-1)};
    for (std::size_t k = 0; k < 2; ++k) {
      auto& p = self.parents[k];
      if (!p->requires_grad) continue;
      auto& g = p->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += sign[k] * self.grad[i];
    }
  });
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same(a.shape(), b.shape(), "mul");
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return detail::make_op<T>(a.shape(), std::move(out), {a, b}, [](Node<T>& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    if (pa->requires_grad) {
      auto& g = pa->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb->value[i];
    }
    if (pb->requires_grad) {
      auto& g = pb->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa->value[i];
    }
  });
}

/// Sum of equally shaped tensors.
template <class T>
Tensor<T> add_n(const std::vector<Tensor<T>>& xs) {
  if (xs.empty()) throw DimensionError("add_n: empty input");
  std::vector<T> out(xs.front().size(), T(0));
  for (const auto& x : xs) {
    detail::require_same(xs.front().shape(), x.shape(), "add_n");
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += x[i];
  }
  return detail::make_op<T>(xs.front().shape(), std::move(out), xs, [](Node<T>& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      auto& g = p->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

template <class T>
Tensor<T> scale(const Tensor<T>& a, T s) {
  return detail::unary(a, [s](T x) { return s * x; }, [s](T, T) { return s; });
}

template <class T>
Tensor<T> add_scalar(const Tensor<T>& a, T s) {
  return detail::unary(a, [s](T x) { return x + s; }, [](T, T) { return T(1); });
}

template <class T>
Tensor<T> relu(const Tensor<T>& a) {
  return detail::unary(a, [](T x) { return x > T(0) || std::isnan(x) ? x : T(0); }, [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <class T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  return detail::unary(
      a, [](T x) { return T(1) / (T(1) + std::exp(-x)); }, [](T, T y) { return y * (T(1) - y); });
}

template <class T>
Tensor<T> exp(const Tensor<T>& a) {
  return detail::unary(a, [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}

/// log(max(x, floor)); zero gradient below the floor.
template <class T>
Tensor<T> log(const Tensor<T>& a, T floor = T(0)) {
  return detail::unary(
      a, [floor](T x) { return std::log(std::max(x, floor)); },
      [floor](T x, T) { return x < floor ? T(0) : T(1) / x; });
}

template <class T>
Tensor<T> square(const Tensor<T>& a) {
  return detail::unary(a, [](T x) { return x * x; }, [](T x, T) { return T(2) * x; });
}

template <class T>
Tensor<T> reciprocal(const Tensor<T>& a) {
  return detail::unary(a, [](T x) { return T(1) / x; }, [](T, T y) { return -y * y; });
}

// -------------------------------------------------------------- reductions

template <class T>
Tensor<T> sum(const Tensor<T>& a) {
  T s = T(0);
  for (T v : a.data()) s += v;
  return detail::make_op<T>(Shape{}, std::vector<T>{s}, {a}, [](Node<T>& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (auto& v : g) v += self.grad[0];
  });
}

template <class T>
Tensor<T> mean(const Tensor<T>& a) {
  return scale(sum(a), T(1) / static_cast<T>(a.size()));
}

/// Column means of a [m×n] matrix, returned as [1×n].
template <class T>
Tensor<T> mean_rows(const Tensor<T>& a) {
  detail::require_rank(a.shape(), 2, "mean_rows");
  const auto m = a.rows(), n = a.cols();
  std::vector<T> out(n, T(0));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j] += a(i, j);
  for (auto& v : out) v /= static_cast<T>(m);
  return detail::make_op<T>(Shape{1, n}, std::move(out), {a}, [m, n](Node<T>& self) {
    auto& g = self.parents[0]->grad_buffer();
    const T inv = T(1) / static_cast<T>(m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[j] * inv;
  });
}

template <class T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  if (shape_size(shape) != a.size()) {
    throw DimensionError("reshape: " + shape_str(a.shape()) + " -> " + shape_str(shape));
  }
  std::vector<T> out(a.data().begin(), a.data().end());
  return detail::make_op<T>(std::move(shape), std::move(out), {a}, [](Node<T>& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

// ---------------------------------------------------------- row-wise maths

/// Row softmax of a / temperature with max subtraction.
template <class T>
Tensor<T> softmax_rows(const Tensor<T>& a, T temperature = T(1)) {
  detail::require_rank(a.shape(), 2, "softmax_rows");
  if (!(temperature > T(0))) throw ParameterError("softmax_rows: temperature must be positive");
  const auto m = a.rows(), n = a.cols();
  std::vector<T> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    const T* row = a.data().data() + i * n;
    T* o = out.data() + i * n;
    T mx = row[0];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    T z = T(0);
    for (std::size_t j = 0; j < n; ++j) z += (o[j] = std::exp((row[j] - mx) / temperature));
    for (std::size_t j = 0; j < n; ++j) o[j] /= z;
  }
  return detail::make_op<T>(a.shape(), std::move(out), {a}, [m, n, temperature](Node<T>& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < m; ++i) {
      const T* y = self.value.data() + i * n;
      const T* dy = self.grad.data() + i * n;
      T dot = T(0);
      for (std::size_t j = 0; j < n; ++j) dot += y[j] * dy[j];
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += y[j] * (dy[j] - dot) / temperature;
    }
  });
}

template <class T>
Tensor<T> log_softmax_rows(const Tensor<T>& a) {
  detail::require_rank(a.shape(), 2, "log_softmax_rows");
  const auto m = a.rows(), n = a.cols();
  std::vector<T> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    const T* row = a.data().data() + i * n;
    T mx = row[0];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    T z = T(0);
    for (std::size_t j = 0; j < n; ++j) z += std::exp(row[j] - mx);
    const T lse = mx + std::log(z);
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = row[j] - lse;
  }
  return detail::make_op<T>(a.shape(), std::move(out), {a}, [m, n](Node<T>& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < m; ++i) {
      T gs = T(0);
      for (std::size_t j = 0; j < n; ++j) gs += self.grad[i * n + j];
      for (std::size_t j = 0; j < n; ++j)
        g[i * n + j] += self.grad[i * n + j] - std::exp(self.value[i * n + j]) * gs;
    }
  });
}

/// Each row divided by max(‖row‖₂, eps).
template <class T>
Tensor<T> l2_normalize_rows(const Tensor<T>& a, T eps = T(1e-12)) {
  detail::require_rank(a.shape(), 2, "l2_normalize_rows");
  const auto m = a.rows(), n = a.cols();
  std::vector<T> out(m * n);
  std::vector<T> denom(m);
  std::vector<char> active(m);
  for (std::size_t i = 0; i < m; ++i) {
    T ss = T(0);
    for (std::size_t j = 0; j < n; ++j) ss += a(i, j) * a(i, j);
    const T norm = std::sqrt(ss);
    active[i] = norm > eps;
    denom[i] = active[i] ? norm : eps;
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = a(i, j) / denom[i];
  }
  return detail::make_op<T>(a.shape(), std::move(out), {a},
                            [m, n, denom = std::move(denom), active = std::move(active)](Node<T>& self) {
                              auto& g = self.parents[0]->grad_buffer();
                              for (std::size_t i = 0; i < m; ++i) {
                                const T* y = self.value.data() + i * n;
                                const T* dy = self.grad.data() + i * n;
                                T dot = T(0);
                                if (active[i])
                                  for (std::size_t j = 0; j < n; ++j) dot += y[j] * dy[j];
                                for (std::size_t j = 0; j < n; ++j) g[i * n + j] += (dy[j] - y[j] * dot) / denom[i];
                              }
                            });
}

/// Patch-wise dot product: [m×c] ⊗ [m×c] -> [m].
template <class T>
Tensor<T> row_dot(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_rank(a.shape(), 2, "row_dot");
  detail::require_same(a.shape(), b.shape(), "row_dot");
  const auto m = a.rows(), n = a.cols();
  std::vector<T> out(m, T(0));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i] += a(i, j) * b(i, j);
  return detail::make_op<T>(Shape{m}, std::move(out), {a, b}, [m, n](Node<T>& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    if (pa->requires_grad) {
      auto& g = pa->grad_buffer();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[i] * pb->value[i * n + j];
    }
    if (pb->requires_grad) {
      auto& g = pb->grad_buffer();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[i] * pa->value[i * n + j];
    }
  });
}

/// Row i of a [m×n] multiplied by s[i].
template <class T>
Tensor<T> scale_rows(const Tensor<T>& a, const Tensor<T>& s) {
  detail::require_rank(a.shape(), 2, "scale_rows");
  const auto m = a.rows(), n = a.cols();
  if (s.size() != m) throw DimensionError("scale_rows: need " + std::to_string(m) + " scales, got " + shape_str(s.shape()));
  std::vector<T> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = s[i] * a(i, j);
  return detail::make_op<T>(a.shape(), std::move(out), {a, s}, [m, n](Node<T>& self) {
    auto& pa = self.parents[0];
    auto& ps = self.parents[1];
    if (pa->requires_grad) {
      auto& g = pa->grad_buffer();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[i * n + j] * ps->value[i];
    }
    if (ps->requires_grad) {
      auto& g = ps->grad_buffer();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[i] += self.grad[i * n + j] * pa->value[i * n + j];
    }
  });
}

/// a [m×n] + b broadcast over rows; b has n entries.
template <class T>
Tensor<T> add_row_vector(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_rank(a.shape(), 2, "add_row_vector");
  const auto m = a.rows(), n = a.cols();
  if (b.size() != n) throw DimensionError("add_row_vector: bias of " + shape_str(b.shape()) + " for " + shape_str(a.shape()));
  std::vector<T> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = a(i, j) + b[j];
  return detail::make_op<T>(a.shape(), std::move(out), {a, b}, [m, n](Node<T>& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    if (pa->requires_grad) {
      auto& g = pa->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (pb->requires_grad) {
      auto& g = pb->grad_buffer();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[i * n + j];
    }
  });
}

/// Columns built from N rank-1 tensors of length m: result [m×N].
template <class T>
Tensor<T> stack_columns(const std::vector<Tensor<T>>& cols) {
  if (cols.empty()) throw DimensionError("stack_columns: empty input");
  const auto m = cols.front().size(), n = cols.size();
  std::vector<T> out(m * n);
  for (std::size_t k = 0; k < n; ++k) {
    if (cols[k].size() != m) throw DimensionError("stack_columns: ragged columns");
    for (std::size_t i = 0; i < m; ++i) out[i * n + k] = cols[k][i];
  }
  return detail::make_op<T>(Shape{m, n}, std::move(out), cols, [m, n](Node<T>& self) {
    for (std::size_t k = 0; k < n; ++k) {
      auto& p = self.parents[k];
      if (!p->requires_grad) continue;
      auto& g = p->grad_buffer();
      for (std::size_t i = 0; i < m; ++i) g[i] += self.grad[i * n + k];
    }
  });
}

/// Rows stacked vertically: [m1×c] ++ [m2×c] ...
template <class T>
Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: empty input");
  const auto c = parts.front().cols();
  std::size_t m = 0;
  std::vector<T> out;
  for (const auto& p : parts) {
    detail::require_rank(p.shape(), 2, "concat_rows");
    if (p.cols() != c) throw DimensionError("concat_rows: column mismatch");
    m += p.rows();
    out.insert(out.end(), p.data().begin(), p.data().end());
  }
  return detail::make_op<T>(Shape{m, c}, std::move(out), parts, [](Node<T>& self) {
    std::size_t off = 0;
    for (auto& p : self.parents) {
      if (p->requires_grad) {
        auto& g = p->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[off + i];
      }
      off += p->value.size();
    }
  });
}

/// out[i] = a[i, index[i]].
template <class T>
Tensor<T> pick(const Tensor<T>& a, const std::vector<std::size_t>& index) {
  detail::require_rank(a.shape(), 2, "pick");
  const auto m = a.rows(), n = a.cols();
  if (index.size() != m) throw DimensionError("pick: one index per row required");
  std::vector<T> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (index[i] >= n) throw DataError("pick: index " + std::to_string(index[i]) + " out of range");
    out[i] = a(i, index[i]);
  }
  return detail::make_op<T>(Shape{m}, std::move(out), {a}, [m, n, index](Node<T>& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < m; ++i) g[i * n + index[i]] += self.grad[i];
  });
}

// ---------------------------------------------------------- nn conveniences

/// x·Wᵀ + b with W [out×in].
template <class T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  return add_row_vector(matmul_nt(x, weight), bias);
}

template <class T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight) {
  return matmul_nt(x, weight);
}

template <class T>
bool all_finite(const Tensor<T>& a) {
  return std::all_of(a.data().begin(), a.data().end(), [](T v) { return std::isfinite(v); });
}

}  // namespace cecnet
