#include "test_support.hpp"

namespace cecnet {
namespace {

std::pair<double, double> mask_centroid(const SynthImage& img) {
  double sx = 0, sy = 0, n = 0;
  for (std::size_t y = 0; y < img.height(); ++y)
    for (std::size_t x = 0; x < img.width(); ++x)
      if (img.mask[y * img.width() + x]) {
        sx += static_cast<double>(x) + 0.5;
        sy += static_cast<double>(y) + 0.5;
        n += 1;
      }
  return {sx / n, sy / n};
}

TEST(GenImage, DeterministicPerClassAndSeed) {
  auto a = gen_image(7, 1234), b = gen_image(7, 1234);
  EXPECT_EQ(testing::values(a.pixels), testing::values(b.pixels));
  EXPECT_EQ(a.mask, b.mask);
  auto c = gen_image(7, 1235);
  EXPECT_NE(testing::values(a.pixels), testing::values(c.pixels));
}

TEST(GenImage, ShapeRangeAndLayout) {
  auto img = gen_image(3, 9);
  EXPECT_EQ(img.pixels.shape(), (Shape{3, 32, 32}));
  EXPECT_EQ(img.mask.size(), 32u * 32u);
  EXPECT_EQ(img.class_id, 3u);
  for (double v : img.pixels.data()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(GenImage, UnknownClassIsDataError) { EXPECT_THROW(gen_image(Catalog::kClasses, 1), DataError); }

TEST(GenImage, CenteredPlacementCentroid) {
  for (std::size_t cls = 0; cls < Catalog::kClasses; ++cls)
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      auto img = gen_image(cls, seed, Placement::Centered);
      auto [cx, cy] = mask_centroid(img);
      EXPECT_NEAR(cx, 16.0, 1.0) << "class " << cls;
      EXPECT_NEAR(cy, 16.0, 1.0) << "class " << cls;
    }
}

TEST(GenImage, ObjectInsideFrameAndScaleRange) {
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    auto img = gen_image(seed % Catalog::kClasses, seed);
    const auto& p = img.placement;
    EXPECT_GE(p.scale, 0.2);
    EXPECT_LE(p.scale, 0.8);
    const double r = p.scale * 16.0;
    EXPECT_GE(p.center_x - r, -1e-9);
    EXPECT_LE(p.center_x + r, 32.0 + 1e-9);
    EXPECT_GE(p.center_y - r, -1e-9);
    EXPECT_LE(p.center_y + r, 32.0 + 1e-9);
    EXPECT_GT(std::count(img.mask.begin(), img.mask.end(), 1), 0);
  }
}

TEST(GenImage, UniformPlacementSpreadsOverFrame) {
  double lo_x = 32, hi_x = 0, lo_y = 32, hi_y = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    auto img = gen_image(seed % Catalog::kClasses, 5000 + seed);
    auto [cx, cy] = mask_centroid(img);
    lo_x = std::min(lo_x, cx);
    hi_x = std::max(hi_x, cx);
    lo_y = std::min(lo_y, cy);
    hi_y = std::max(hi_y, cy);
  }
  EXPECT_GE(hi_x - lo_x, 0.6 * 32);
  EXPECT_GE(hi_y - lo_y, 0.6 * 32);
}

TEST(GenImage, ClassesDifferInShapeOrColour) {
  // Same seed, different classes: masks differ across shapes, object colour across colours.
  auto a = gen_image(0, 42, Placement::Centered), b = gen_image(Catalog::kColors, 42, Placement::Centered);
  EXPECT_NE(a.mask, b.mask);
  auto c = gen_image(1, 42, Placement::Centered);
  EXPECT_EQ(a.mask, c.mask);
  EXPECT_NE(testing::values(a.pixels), testing::values(c.pixels));
}

TEST(RotateImage, FourQuarterTurnsAreIdentity) {
  auto img = gen_image(11, 77);
  auto r = img;
  for (int i = 0; i < 4; ++i) r = rotate_image(r, 1);
  EXPECT_EQ(testing::values(r.pixels), testing::values(img.pixels));
  EXPECT_EQ(r.mask, img.mask);
  EXPECT_NEAR(r.placement.center_x, img.placement.center_x, 1e-12);
  EXPECT_NEAR(r.placement.center_y, img.placement.center_y, 1e-12);
}

TEST(RotateImage, TwoTurnsTwiceIsIdentity) {
  auto img = gen_image(20, 3);
  auto r = rotate_image(rotate_image(img, 2), 2);
  EXPECT_EQ(testing::values(r.pixels), testing::values(img.pixels));
}

TEST(RotateImage, MaskFollowsPixelsAndPlacement) {
  auto img = gen_image(2, 5);
  auto r = rotate_image(img, 1);
  // counter-clockwise: new(y, x) = old(x, 31 - y)
  for (std::size_t y = 0; y < 32; ++y)
    for (std::size_t x = 0; x < 32; ++x) EXPECT_EQ(r.mask[y * 32 + x], img.mask[x * 32 + (31 - y)]);
  auto [cx, cy] = mask_centroid(r);
  auto [ox, oy] = mask_centroid(img);
  EXPECT_NEAR(cx, oy, 1e-9);
  EXPECT_NEAR(cy, 32.0 - ox, 1e-9);
}

TEST(RotateImage, NonSquareIsDimensionError) {
  SynthImage img;
  img.pixels = Tensor<>::zeros({3, 4, 6});
  img.mask.assign(24, 0);
  EXPECT_THROW(rotate_image(img, 1), DimensionError);
}

TEST(Catalog, SplitsAreDisjointAndCover) {
  auto base = Catalog::base_classes(), novel = Catalog::novel_classes();
  EXPECT_EQ(base.size(), 20u);
  EXPECT_EQ(novel.size(), 10u);
  for (auto n : novel) EXPECT_EQ(std::count(base.begin(), base.end(), n), 0);
}

TEST(SyntheticDataset, ItemsAreReproducible) {
  auto d = SyntheticDataset::base(7);
  auto a = d.item(d.classes[3], 12), b = d.item(d.classes[3], 12);
  EXPECT_EQ(testing::values(a.pixels), testing::values(b.pixels));
  EXPECT_THROW(d.item(d.classes[0], 200), DataError);
  EXPECT_EQ(d.descriptor(), "synth-v1:seed=7:per_class=200:size=32");
}

TEST(Seeds, MixingSeparatesStreams) {
  EXPECT_NE(mix_seed(1, 2), mix_seed(2, 1));
  EXPECT_NE(mix_seed(1, 2, 3), mix_seed(1, 3, 2));
  EXPECT_EQ(mix_seed(5, 6, 7), mix_seed(mix_seed(5, 6), 7));
}

}  // namespace
}  // namespace cecnet
