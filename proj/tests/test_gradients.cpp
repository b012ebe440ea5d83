#include "checks.hpp"

namespace cecnet {
namespace {

void expect_all(const std::vector<oracle::Comparison>& checks) {
  ASSERT_FALSE(checks.empty());
  for (const auto& c : checks) EXPECT_TRUE(c.pass) << c.name << " relative error " << c.max_rel_err;
}

class ModeGradients : public ::testing::TestWithParam<ClusterMode> {};

TEST_P(ModeGradients, PatchCluster) { expect_all(checks::patch_cluster_gradients(GetParam(), 101)); }
TEST_P(ModeGradients, Cecm) { expect_all(checks::cecm_gradients(GetParam(), 102)); }
TEST_P(ModeGradients, SelfCecm) { expect_all(checks::self_cecm_gradients(GetParam(), 103)); }
TEST_P(ModeGradients, Cecd) { expect_all(checks::cecd_gradients(GetParam(), 104)); }
TEST_P(ModeGradients, FinetuneHead) { expect_all(checks::finetune_head_gradients(GetParam(), 113)); }

INSTANTIATE_TEST_SUITE_P(AllModes, ModeGradients, ::testing::ValuesIn(checks::kModes),
                         [](const auto& info) { return to_string(info.param); });

TEST(Gradients, CeceBank) { expect_all({checks::cece_bank_gradient(105)}); }
TEST(Gradients, CeccClassWeights) { expect_all({checks::cecc_weight_gradient(106)}); }
TEST(Gradients, MetricHead) { expect_all({checks::metric_head_gradient(107)}); }
TEST(Gradients, PatchCrossEntropy) { expect_all({checks::pce_gradient(108)}); }
TEST(Gradients, MultitaskWeights) { expect_all(checks::multitask_gradients(109)); }
TEST(Gradients, FullEpisodeLoss) { expect_all(checks::full_loss_gradients(110, 3)); }

TEST(Gradients, SigmoidMetaGcn) {
  testing::Rng rng(111);
  auto q = testing::random_map(4, 3, rng, true), p = testing::random_map(5, 3, rng, true);
  auto params = testing::random_params(ClusterMode::MetaGCN, 3, rng, 1.0, Activation::Sigmoid);
  auto loss = [&] { return testing::weighted_probe(cec(q, p, params).values); };
  expect_all({checks::grad_check("Q", q.values, loss), checks::grad_check("P", p.values, loss),
              checks::grad_check("W", *params.w, loss)});
}

TEST(Gradients, FixedTaskWeightsEpisode) {
  auto spec = checks::full_loss_spec();
  spec.attention = AttentionKind::Cross;
  spec.metric = MetricKind::Cosine;
  spec.use_cece = false;
  spec.fixed_weights = std::make_pair(0.5, 2.0);
  expect_all(checks::full_loss_gradients(112, 3, spec));
}

TEST(StencilDerivative, KinkAndJumpNextToThePoint) {
  // |x - 3e-6| has a kink inside the first stencil; the step function jumps there
  auto kink = [](long double x) { return std::abs(x - 3e-6L) + x * x; };
  EXPECT_NEAR(static_cast<double>(checks::stencil_derivative<long double>(kink, 0.0L, 1e-5L)), -1.0, 1e-9);
  auto jump = [](long double x) { return (x > 4e-6L ? 1.0L : 0.0L) + 2 * x; };
  EXPECT_NEAR(static_cast<double>(checks::stencil_derivative<long double>(jump, 0.0L, 1e-5L)), 2.0, 1e-9);
  auto smooth = [](long double x) { return std::sin(x); };
  EXPECT_NEAR(static_cast<double>(checks::stencil_derivative<long double>(smooth, 0.3L, 1e-5L)), std::cos(0.3), 1e-10);
  // pseudo-random values at every scale: nothing resolves
  auto noise = [](long double x) { return std::sin(x * 1e15L) * 1e3L; };
  EXPECT_TRUE(std::isnan(checks::stencil_derivative<long double>(noise, 0.1L, 1e-5L)));
}

}  // namespace
}  // namespace cecnet
