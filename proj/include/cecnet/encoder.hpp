#pragma once

// Four-block convolutional embedding: 3×32×32 images -> 5×5 grids of c-dim patches.
//
//   block 1: conv3x3 valid (32 -> 30), relu, max-pool 2  (-> 15)
//   block 2: conv3x3 same,             relu
//   block 3: conv3x3 same,             relu
//   block 4: conv3x3 same,                   max-pool 3  (-> 5)
//
// Pooling down to the grid only at the end keeps each output patch's
// receptive field to about 20 of the 32 pixels.

#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "cecnet/conv.hpp"
#include "cecnet/patch_cluster.hpp"
#include "cecnet/synthetic.hpp"

namespace cecnet {

inline constexpr std::size_t kGridSide = 5;
inline constexpr std::size_t kGridPatches = kGridSide * kGridSide;

template <class T>
struct EncoderParams {
  struct Block {
    Tensor<T> weight;  // [out × in × 3 × 3]
    Tensor<T> bias;    // [out]
  };
  std::array<Block, 4> blocks;

  std::size_t channels() const { return blocks[3].weight.dim(0); }

  /// He-normal weights, zero biases. Hidden widths default to c/2 and c.
  template <class Rng>
  static EncoderParams make(std::size_t c, Rng& rng, std::array<std::size_t, 3> hidden = {0, 0, 0}) {
    if (hidden[0] == 0) hidden = {std::max<std::size_t>(c / 2, 1), c, c};
    const std::array<std::size_t, 5> widths{3, hidden[0], hidden[1], hidden[2], c};
    EncoderParams p;
    for (std::size_t b = 0; b < 4; ++b) {
      const auto in = widths[b], out = widths[b + 1];
      std::normal_distribution<double> n(0.0, std::sqrt(2.0 / static_cast<double>(in * 9)));
      std::vector<T> w(out * in * 9);
      for (auto& v : w) v = static_cast<T>(n(rng));
      p.blocks[b] = {Tensor<T>(Shape{out, in, 3, 3}, std::move(w), true), Tensor<T>::zeros(Shape{out}, true)};
    }
    return p;
  }

  std::vector<Tensor<T>*> parameters() {
    std::vector<Tensor<T>*> out;
    for (auto& b : blocks) {
      out.push_back(&b.weight);
      out.push_back(&b.bias);
    }
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& b : blocks) n += b.weight.size() + b.bias.size();
    return n;
  }
};

/// Stacks images into a [B × 3 × H × W] batch.
template <class T>
Tensor<T> image_batch(const std::vector<const SynthImage*>& images) {
  if (images.empty()) throw DimensionError("image_batch: no images");
  const auto h = images.front()->height(), w = images.front()->width();
  std::vector<T> data;
  data.reserve(images.size() * 3 * h * w);
  for (const auto* img : images) {
    if (img->height() != h || img->width() != w) throw DimensionError("image_batch: mixed image sizes");
    for (double v : img->pixels.data()) data.push_back(static_cast<T>(v));
  }
  return Tensor<T>(Shape{images.size(), 3, h, w}, std::move(data));
}

/// Activation grid [B × c × 5 × 5] for a batch of images.
template <class T>
Tensor<T> encode_grid(const Tensor<T>& batch, const EncoderParams<T>& params) {
  const auto& b = params.blocks;
  auto x = max_pool2d(relu(conv2d(batch, b[0].weight, b[0].bias, 0)), 2);
  x = relu(conv2d(x, b[1].weight, b[1].bias, 1));
  x = relu(conv2d(x, b[2].weight, b[2].bias, 1));
  x = max_pool2d(conv2d(x, b[3].weight, b[3].bias, 1), 3);
  if (x.dim(2) != kGridSide || x.dim(3) != kGridSide) {
    throw DimensionError("encoder: expected a 5x5 output grid, got " + shape_str(x.shape()));
  }
  return x;
}

template <class T>
std::vector<FeatureMap<T>> encode_batch(const std::vector<const SynthImage*>& images, const EncoderParams<T>& params) {
  auto grid = encode_grid(image_batch<T>(images), params);
  std::vector<FeatureMap<T>> out;
  out.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) out.emplace_back(image_patches(grid, i));
  return out;
}

/// f_θ(x): one image to a [25 × c] feature map.
template <class T>
FeatureMap<T> encode(const SynthImage& img, const EncoderParams<T>& params) {
  return encode_batch<T>({&img}, params).front();
}

}  // namespace cecnet
