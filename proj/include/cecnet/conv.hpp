#pragma once

// Batched 2-D convolution (im2col + GEMM), max pooling and the reshape from
// an NCHW activation to per-image patch matrices.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <utility>

#include "cecnet/ops.hpp"

namespace cecnet {

namespace detail {

/// Column range [lo, hi) of output positions whose input index x + off - pad lies inside [0, n).
inline std::pair<std::size_t, std::size_t> valid_span(std::size_t n, std::size_t out, std::size_t off, std::size_t pad) {
  const std::size_t lo = off >= pad ? 0 : pad - off;
  const std::size_t hi = std::min(out, n + pad > off ? n + pad - off : 0);
  return {std::min(lo, hi), hi};
}

template <class T>
void im2col(const T* img, std::size_t cin, std::size_t h, std::size_t w, std::size_t k, std::size_t pad,
            std::size_t oh, std::size_t ow, T* cols) {
  for (std::size_t c = 0; c < cin; ++c)
    for (std::size_t ky = 0; ky < k; ++ky) {
      const auto [ylo, yhi] = valid_span(h, oh, ky, pad);
      for (std::size_t kx = 0; kx < k; ++kx) {
        const auto [xlo, xhi] = valid_span(w, ow, kx, pad);
        T* row = cols + ((c * k + ky) * k + kx) * oh * ow;
        for (std::size_t y = 0; y < oh; ++y) {
          T* dst = row + y * ow;
          if (y < ylo || y >= yhi) {
            std::fill(dst, dst + ow, T(0));
            continue;
          }
          std::fill(dst, dst + xlo, T(0));
          if (xlo < xhi) std::copy_n(img + (c * h + (y + ky - pad)) * w + (xlo + kx - pad), xhi - xlo, dst + xlo);
          std::fill(dst + xhi, dst + ow, T(0));
        }
      }
    }
}

template <class T>
void col2im_add(const T* cols, std::size_t cin, std::size_t h, std::size_t w, std::size_t k, std::size_t pad,
                std::size_t oh, std::size_t ow, T* img) {
  for (std::size_t c = 0; c < cin; ++c)
    for (std::size_t ky = 0; ky < k; ++ky) {
      const auto [ylo, yhi] = valid_span(h, oh, ky, pad);
      for (std::size_t kx = 0; kx < k; ++kx) {
        const auto [xlo, xhi] = valid_span(w, ow, kx, pad);
        const T* row = cols + ((c * k + ky) * k + kx) * oh * ow;
        if (xlo >= xhi) continue;
        for (std::size_t y = ylo; y < yhi; ++y) {
          T* dst = img + (c * h + (y + ky - pad)) * w + (xlo + kx - pad);
          const T* src = row + y * ow + xlo;
          for (std::size_t x = 0; x < xhi - xlo; ++x) dst[x] += src[x];
        }
      }
    }
}

}  // namespace detail

/// Stride-1 square convolution. x [B×Cin×H×W], weight [Cout×Cin×k×k], bias [Cout].
template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, std::size_t pad) {
  detail::require_rank(x.shape(), 4, "conv2d input");
  detail::require_rank(weight.shape(), 4, "conv2d weight");
  const auto batch = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
  const auto cout = weight.dim(0), k = weight.dim(2);
  if (weight.dim(1) != cin || weight.dim(3) != k) {
    throw DimensionError("conv2d: weight " + shape_str(weight.shape()) + " vs input " + shape_str(x.shape()));
  }
  if (bias.size() != cout) throw DimensionError("conv2d: bias size");
  if (h + 2 * pad < k || w + 2 * pad < k) throw DimensionError("conv2d: kernel larger than padded input");
  const auto oh = h + 2 * pad - k + 1, ow = w + 2 * pad - k + 1;
  const auto patch = cin * k * k, spatial = oh * ow;

  // im2col buffers are kept for the weight gradient
  // im2col writes every entry, so the buffer is left uninitialized
  std::shared_ptr<T[]> cols(new T[batch * patch * spatial]);
  std::vector<T> out(batch * cout * spatial);
  const auto wmat = detail::owned(weight.data().data(), cout, patch);
  for (std::size_t b = 0; b < batch; ++b) {
    T* cb = cols.get() + b * patch * spatial;
    detail::im2col(x.data().data() + b * cin * h * w, cin, h, w, k, pad, oh, ow, cb);
    T* o = out.data() + b * cout * spatial;
    detail::store<T>(wmat * detail::owned<T>(cb, patch, spatial), o);
    for (std::size_t c = 0; c < cout; ++c)
      for (std::size_t i = 0; i < spatial; ++i) o[c * spatial + i] += bias[c];
  }
  return detail::make_op<T>(
      Shape{batch, cout, oh, ow}, std::move(out), {x, weight, bias},
      [=](Node<T>& self) {
        auto& px = self.parents[0];
        auto& pw = self.parents[1];
        auto& pb = self.parents[2];
        std::vector<T> dcols(px->requires_grad ? patch * spatial : 0);
        for (std::size_t b = 0; b < batch; ++b) {
          const T* graw = self.grad.data() + b * cout * spatial;
          const auto g = detail::owned(graw, cout, spatial);
          if (pw->requires_grad)
            detail::accumulate<T>(g * detail::owned<T>(cols.get() + b * patch * spatial, patch, spatial).transpose(),
                                  pw->grad_buffer().data());
          if (pb->requires_grad) {
            auto& gb = pb->grad_buffer();
            for (std::size_t c = 0; c < cout; ++c)
              for (std::size_t i = 0; i < spatial; ++i) gb[c] += graw[c * spatial + i];
          }
          if (px->requires_grad) {
            detail::store<T>(detail::owned(pw->value.data(), cout, patch).transpose() * g, dcols.data());
            detail::col2im_add(dcols.data(), cin, h, w, k, pad, oh, ow, px->grad_buffer().data() + b * cin * h * w);
          }
        }
      });
}

/// Non-overlapping k×k max pooling; trailing rows/cols that do not fill a window are dropped.
template <class T>
Tensor<T> max_pool2d(const Tensor<T>& x, std::size_t k) {
  detail::require_rank(x.shape(), 4, "max_pool2d");
  const auto batch = x.dim(0), ch = x.dim(1), h = x.dim(2), w = x.dim(3);
  const auto oh = h / k, ow = w / k;
  if (oh == 0 || ow == 0) throw DimensionError("max_pool2d: window larger than input");
  std::vector<T> out(batch * ch * oh * ow);
  std::vector<std::size_t> argmax(out.size());
  const auto in = x.data();
  for (std::size_t bc = 0; bc < batch * ch; ++bc)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t xx = 0; xx < ow; ++xx) {
        std::size_t best = bc * h * w + (y * k) * w + xx * k;
        for (std::size_t dy = 0; dy < k; ++dy)
          for (std::size_t dx = 0; dx < k; ++dx) {
            const std::size_t idx = bc * h * w + (y * k + dy) * w + xx * k + dx;
            if (in[idx] > in[best] || std::isnan(in[idx])) best = idx;
          }
        const std::size_t o = (bc * oh + y) * ow + xx;
        out[o] = in[best];
        argmax[o] = best;
      }
  return detail::make_op<T>(Shape{batch, ch, oh, ow}, std::move(out), {x}, [argmax = std::move(argmax)](Node<T>& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t o = 0; o < argmax.size(); ++o) g[argmax[o]] += self.grad[o];
  });
}

/// Image `b` of an NCHW activation as a patch matrix [H·W × C].
template <class T>
Tensor<T> image_patches(const Tensor<T>& x, std::size_t b) {
  detail::require_rank(x.shape(), 4, "image_patches");
  const auto ch = x.dim(1), hw = x.dim(2) * x.dim(3);
  if (b >= x.dim(0)) throw DimensionError("image_patches: batch index out of range");
  std::vector<T> out(hw * ch);
  const T* src = x.data().data() + b * ch * hw;
  for (std::size_t c = 0; c < ch; ++c)
    for (std::size_t p = 0; p < hw; ++p) out[p * ch + c] = src[c * hw + p];
  return detail::make_op<T>(Shape{hw, ch}, std::move(out), {x}, [b, ch, hw](Node<T>& self) {
    T* dst = self.parents[0]->grad_buffer().data() + b * ch * hw;
    for (std::size_t c = 0; c < ch; ++c)
      for (std::size_t p = 0; p < hw; ++p) dst[c * hw + p] += self.grad[p * ch + c];
  });
}

}  // namespace cecnet
