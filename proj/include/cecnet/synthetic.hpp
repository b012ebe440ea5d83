#pragma once

// Procedural few-shot imagery: filled shapes with class-specific geometry and
// colour, placed at random positions and scales over textured noise.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "cecnet/tensor.hpp"

namespace cecnet {

enum class Placement { Centered, Uniform };

struct PlacementInfo {
  double center_x = 0;  // pixels, column axis
  double center_y = 0;  // pixels, row axis
  double scale = 0;     // object extent as a fraction of the frame
};

struct SynthImage {
  Tensor<double> pixels;  // [3 × H × W], values in [0, 1]
  std::size_t class_id = 0;
  std::vector<std::uint8_t> mask;  // H × W, 1 on the object
  PlacementInfo placement;

  std::size_t height() const { return pixels.dim(1); }
  std::size_t width() const { return pixels.dim(2); }
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) { return splitmix64(a ^ splitmix64(b + 0x632be59bd9b4e019ULL)); }
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) { return mix_seed(mix_seed(a, b), c); }

/// Shape × colour grid. Class id = shape * kColors + colour.
struct Catalog {
  static constexpr const char* kVersion = "synth-v1";
  static constexpr std::size_t kShapes = 6;
  static constexpr std::size_t kColors = 5;
  static constexpr std::size_t kClasses = kShapes * kColors;

  static constexpr std::array<std::array<double, 3>, kColors> kPalette{{
      {0.90, 0.15, 0.15},
      {0.15, 0.80, 0.20},
      {0.20, 0.30, 0.95},
      {0.95, 0.85, 0.10},
      {0.85, 0.20, 0.85},
  }};

  /// Novel classes are every third id, so each novel shape and colour also occurs among base classes.
  static bool is_novel(std::size_t id) { return id % 3 == 0; }

  static std::vector<std::size_t> base_classes() {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < kClasses; ++i)
      if (!is_novel(i)) out.push_back(i);
    return out;
  }
  static std::vector<std::size_t> novel_classes() {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < kClasses; ++i)
      if (is_novel(i)) out.push_back(i);
    return out;
  }

  /// Point test in object coordinates, (u, v) scaled so the shape fits the unit disk.
  static bool inside(std::size_t shape, double u, double v) {
    const double r2 = u * u + v * v;
    switch (shape) {
      case 0: return r2 <= 1.0;                                          // disk
      case 1: return std::abs(u) <= 0.75 && std::abs(v) <= 0.75;         // square
      case 2: {                                                          // triangle, centroid at origin
        if (v < -1.0 || v > 0.5) return false;
        return std::abs(u) <= 0.8660254 * (v + 1.0) / 1.5;
      }
      case 3: return (std::abs(u) <= 0.3 && std::abs(v) <= 1.0) || (std::abs(v) <= 0.3 && std::abs(u) <= 1.0);  // cross
      case 4: return r2 <= 1.0 && r2 >= 0.3;                             // ring
      case 5: return std::abs(u) + std::abs(v) <= 1.0;                   // diamond
      default: return false;
    }
  }
};

/// Deterministic rendering of one image of `class_id` from `seed`.
inline SynthImage gen_image(std::size_t class_id, std::uint64_t seed, Placement policy = Placement::Uniform,
                            std::size_t size = 32, double min_scale = 0.2, double max_scale = 0.8) {
  if (class_id >= Catalog::kClasses) throw DataError("gen_image: unknown class " + std::to_string(class_id));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  const double side = static_cast<double>(size);

  SynthImage img;
  img.class_id = class_id;
  img.placement.scale = min_scale + (max_scale - min_scale) * unit(rng);
  const double radius = img.placement.scale * side / 2.0;
  if (policy == Placement::Centered) {
    img.placement.center_x = img.placement.center_y = side / 2.0;
  } else {
    img.placement.center_x = radius + (side - 2 * radius) * unit(rng);
    img.placement.center_y = radius + (side - 2 * radius) * unit(rng);
  }

  // low-frequency coloured texture
  struct Wave {
    double fx, fy, phase, amp;
  };
  std::array<std::array<Wave, 3>, 3> waves{};
  for (auto& channel : waves)
    for (auto& w : channel) w = {unit(rng) * 0.5, unit(rng) * 0.5, unit(rng) * 6.283185307, 0.08 + 0.12 * unit(rng)};
  std::array<double, 3> tint{};
  for (auto& t : tint) t = 0.35 + 0.3 * unit(rng);

  const std::size_t shape = class_id / Catalog::kColors;
  std::array<double, 3> colour = Catalog::kPalette[class_id % Catalog::kColors];
  for (auto& c : colour) c = std::clamp(c + 0.05 * (2 * unit(rng) - 1), 0.0, 1.0);

  std::vector<double> px(3 * size * size);
  img.mask.assign(size * size, 0);
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) {
      const double u = (static_cast<double>(x) + 0.5 - img.placement.center_x) / radius;
      const double v = (static_cast<double>(y) + 0.5 - img.placement.center_y) / radius;
      const bool on = Catalog::inside(shape, u, v);
      img.mask[y * size + x] = on ? 1 : 0;
      for (std::size_t c = 0; c < 3; ++c) {
        double val;
        if (on) {
          val = colour[c] + 0.03 * noise(rng);
        } else {
          val = tint[c];
          for (const auto& w : waves[c])
            val += w.amp * std::sin(w.fx * static_cast<double>(x) + w.fy * static_cast<double>(y) + w.phase);
          val += 0.05 * noise(rng);
        }
        px[(c * size + y) * size + x] = std::clamp(val, 0.0, 1.0);
      }
    }
  img.pixels = Tensor<double>(Shape{3, size, size}, std::move(px));
  return img;
}

/// Rotation by quarter_turns × 90° counter-clockwise, pixels and mask alike.
inline SynthImage rotate_image(const SynthImage& img, std::size_t quarter_turns) {
  const auto h = img.height(), w = img.width();
  if (h != w) throw DimensionError("rotate_image: image must be square");
  SynthImage cur = img;
  for (std::size_t t = 0; t < quarter_turns % 4; ++t) {
    std::vector<double> px(3 * h * w);
    std::vector<std::uint8_t> mask(h * w);
    const auto src = cur.pixels.data();
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        // new(y, x) = old(x, w-1-y)
        const std::size_t sy = x, sx = w - 1 - y;
        for (std::size_t c = 0; c < 3; ++c) px[(c * h + y) * w + x] = src[(c * h + sy) * w + sx];
        mask[y * w + x] = cur.mask[sy * w + sx];
      }
    const double side = static_cast<double>(w);
    const PlacementInfo old = cur.placement;
    cur.placement.center_x = old.center_y;
    cur.placement.center_y = side - old.center_x;
    cur.pixels = Tensor<double>(Shape{3, h, w}, std::move(px));
    cur.mask = std::move(mask);
  }
  return cur;
}

/// A reproducible pool of generated images: item i of class k is rendered
/// from a seed derived from (dataset seed, k, i).
struct SyntheticDataset {
  std::uint64_t seed = 0;
  std::size_t images_per_class = 200;
  std::size_t image_size = 32;
  std::vector<std::size_t> classes;  // catalog ids in this split

  static SyntheticDataset base(std::uint64_t seed, std::size_t per_class = 200, std::size_t size = 32) {
    return {seed, per_class, size, Catalog::base_classes()};
  }
  static SyntheticDataset novel(std::uint64_t seed, std::size_t per_class = 200, std::size_t size = 32) {
    return {seed, per_class, size, Catalog::novel_classes()};
  }

  SynthImage item(std::size_t class_id, std::size_t index) const {
    if (index >= images_per_class) throw DataError("dataset item index out of range");
    return gen_image(class_id, mix_seed(seed, class_id, index), Placement::Uniform, image_size);
  }

  /// Catalog version plus seed; enough to regenerate every image.
  std::string descriptor() const {
    return std::string(Catalog::kVersion) + ":seed=" + std::to_string(seed) + ":per_class=" +
           std::to_string(images_per_class) + ":size=" + std::to_string(image_size);
  }
};

}  // namespace cecnet
