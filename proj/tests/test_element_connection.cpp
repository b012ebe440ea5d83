#include "test_support.hpp"

namespace cecnet {
namespace {

using testing::Rng;
using M = FeatureMap<double>;

M map(std::initializer_list<std::initializer_list<double>> rows) { return M(Tensor<>::matrix(rows)); }
ClusteredPatch<double> clustered(const Tensor<>& t) { return {t}; }

TEST(RelationMap, SelfCosineIsOne) {
  Rng rng(1);
  auto q = testing::random_map(5, 4, rng);
  auto r = relation_map(q, clustered(q.values));
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(r.scores[i], 1.0, 1e-14);
}

TEST(RelationMap, OrthogonalPairsScoreZero) {
  auto r = relation_map(map({{1, 0}, {0, 3}}), clustered(Tensor<>::matrix({{0, 2}, {-1, 0}})));
  EXPECT_EQ(r.scores[0], 0.0);
  EXPECT_EQ(r.scores[1], 0.0);
}

TEST(RelationMap, ZeroRowScoresZero) {
  auto r = relation_map(map({{0, 0}, {1, 1}}), clustered(Tensor<>::matrix({{1, 2}, {1, 1}})));
  EXPECT_EQ(r.scores[0], 0.0);
  EXPECT_NEAR(r.scores[1], 1.0, 1e-15);
}

TEST(RelationMap, RandomInstanceMatchesRowDotReference) {
  Rng rng(2);
  auto q = testing::random_map(6, 8, rng);
  auto c = testing::random_tensor({6, 8}, rng);
  auto r = relation_map(q, clustered(c));
  auto expected = oracle::relation(testing::to_mat(q.values), testing::to_mat(c));
  for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(r.scores[i], expected[i], 1e-10);
}

TEST(RelationMap, ShapeMismatchThrows) {
  EXPECT_THROW(relation_map(map({{1, 0}}), clustered(Tensor<>::matrix({{1, 0}, {0, 1}}))), DimensionError);
}

TEST(ElementConnect, UniformRelationScalesByOnePlusInverseCount) {
  Rng rng(3);
  for (std::size_t m : {1u, 2u, 5u, 25u}) {
    auto q = testing::random_map(m, 3, rng);
    auto out = element_connect(q, clustered(q.values)).values;
    const double k = 1.0 + 1.0 / static_cast<double>(m);
    for (std::size_t i = 0; i < out.size(); ++i) EXPECT_DOUBLE_EQ(out[i], k * q.values[i]);
  }
}

TEST(ElementConnect, SinglePatchIsDoubled) {
  auto out = element_connect(map({{0.25, -3}}), clustered(Tensor<>::matrix({{7, 1}}))).values;
  EXPECT_EQ(out(0, 0), 0.5);
  EXPECT_EQ(out(0, 1), -6.0);
}

TEST(ElementConnect, ScaleFactorsInOpenIntervalSummingToOne) {
  Rng rng(4);
  auto q = testing::random_map(7, 5, rng);
  auto out = element_connect(q, clustered(testing::random_tensor({7, 5}, rng))).values;
  double total = 0;
  for (std::size_t n = 0; n < 7; ++n) {
    const double k = out(n, 0) / q.values(n, 0);
    for (std::size_t j = 1; j < 5; ++j) EXPECT_NEAR(out(n, j), k * q.values(n, j), 1e-12);
    EXPECT_GT(k, 1.0);
    EXPECT_LT(k, 2.0);
    total += k - 1.0;
  }
  EXPECT_NEAR(total, 1.0, 1e-9);
}

TEST(ElementConnect, ShapeMismatchThrows) {
  EXPECT_THROW(element_connect(map({{1, 0}}), clustered(Tensor<>::matrix({{1, 0, 0}}))), DimensionError);
  EXPECT_THROW(connect_with(map({{1, 0}}), RelationMap<double>{Tensor<>::vector({0.1, 0.2})}), DimensionError);
}

TEST(Cec, RepeatedSingleSourceRow) {
  auto p = map({{0.6, -0.2, 1.5}});
  auto q = map({{0.6, -0.2, 1.5}, {0.6, -0.2, 1.5}, {0.6, -0.2, 1.5}, {0.6, -0.2, 1.5}});
  for (auto mode : {ClusterMode::MatMul, ClusterMode::Cosine}) {
    ClusterParams<double> params;
    params.mode = mode;
    auto out = cec(q, p, params).values;
    for (std::size_t i = 0; i < out.size(); ++i) EXPECT_NEAR(out[i], 1.25 * q.values[i], 1e-14);
  }
}

TEST(Cec, MatmulEqualsManualComposition) {
  Rng rng(5);
  auto q = testing::random_map(5, 4, rng), p = testing::random_map(6, 4, rng);
  ClusterParams<double> params;
  params.mode = ClusterMode::MatMul;
  auto direct = cec(q, p, params).values;
  auto manual = element_connect(q, pc_matmul(q, p)).values;
  EXPECT_EQ(testing::values(direct), testing::values(manual));
}

TEST(Cec, AllModesMatchEndToEndReference) {
  Rng rng(6);
  for (auto mode : {ClusterMode::MatMul, ClusterMode::Cosine, ClusterMode::MetaGCN, ClusterMode::Transformer}) {
    for (int trial = 0; trial < 10; ++trial) {
      const auto m = testing::pick_size(rng, 1, 6), n = testing::pick_size(rng, 1, 6), c = testing::pick_size(rng, 1, 8);
      auto q = testing::random_map(m, c, rng), p = testing::random_map(n, c, rng);
      auto params = testing::random_params(mode, c, rng);
      oracle::Inputs in;
      in.q = testing::to_mat(q.values);
      in.p = testing::to_mat(p.values);
      testing::fill_oracle_params(in, params);
      auto expected = oracle::cec(in.q, in.p, in);
      auto out = cec(q, p, params).values;
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < c; ++j) EXPECT_NEAR(out(i, j), expected[i][j], 1e-9) << to_string(mode);
    }
  }
}

TEST(Cec, PreservesPatchDirections) {
  Rng rng(7);
  auto q = testing::random_map(6, 5, rng), p = testing::random_map(4, 5, rng);
  auto params = testing::random_params(ClusterMode::Transformer, 5, rng);
  auto out = cec(q, p, params).values;
  auto cos = oracle::relation(testing::to_mat(out), testing::to_mat(q.values));
  for (double v : cos) EXPECT_NEAR(v, 1.0, 1e-10);
}

}  // namespace
}  // namespace cecnet
