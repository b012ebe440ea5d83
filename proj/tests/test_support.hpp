#pragma once

#include <gtest/gtest.h>

#include <functional>
#include <random>
#include <vector>

#include "cecnet/cecnet.hpp"
#include "cecnet/oracle.hpp"

namespace cecnet::testing {

using Rng = std::mt19937_64;

inline std::vector<double> uniform_values(std::size_t n, Rng& rng, double lo = -2.0, double hi = 2.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

inline Tensor<double> random_tensor(Shape shape, Rng& rng, bool requires_grad = false, double lo = -2.0, double hi = 2.0) {
  const auto n = shape_size(shape);
  return Tensor<double>(std::move(shape), uniform_values(n, rng, lo, hi), requires_grad);
}

inline FeatureMap<double> random_map(std::size_t rows, std::size_t c, Rng& rng, bool requires_grad = false) {
  return FeatureMap<double>(random_tensor(Shape{rows, c}, rng, requires_grad));
}

inline std::size_t pick_size(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline std::vector<double> values(const Tensor<double>& t) { return {t.data().begin(), t.data().end()}; }

inline oracle::Mat to_mat(const Tensor<double>& t) {
  oracle::Mat m(t.rows(), oracle::Vec(t.cols()));
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) m[i][j] = t(i, j);
  return m;
}

inline oracle::Mode to_oracle(ClusterMode m) {
  switch (m) {
    case ClusterMode::MatMul: return oracle::Mode::MatMul;
    case ClusterMode::Cosine: return oracle::Mode::Cosine;
    case ClusterMode::MetaGCN: return oracle::Mode::MetaGCN;
    case ClusterMode::Transformer: return oracle::Mode::Transformer;
  }
  return oracle::Mode::Cosine;
}

/// Cluster parameters with every learnable entry drawn at random (not near identity).
inline ClusterParams<double> random_params(ClusterMode mode, std::size_t c, Rng& rng, double temperature = 1.0,
                                           Activation act = Activation::Relu) {
  auto p = ClusterParams<double>::make(mode, c, rng, temperature, act);
  for (auto* t : p.parameters())
    for (auto& v : t->mutable_data()) v = std::uniform_real_distribution<double>(-0.8, 0.8)(rng);
  return p;
}

/// Copies mode, temperature, activation and weights into oracle inputs.
inline void fill_oracle_params(oracle::Inputs& in, const ClusterParams<double>& p) {
  in.mode = to_oracle(p.mode);
  in.temperature = p.temperature;
  in.activation = p.activation == Activation::Relu ? oracle::Act::Relu : oracle::Act::Sigmoid;
  if (p.w) in.w = to_mat(*p.w);
  if (p.wq) in.wq = to_mat(*p.wq);
  if (p.wk) in.wk = to_mat(*p.wk);
  if (p.wv) in.wv = to_mat(*p.wv);
  if (p.ffn) {
    in.w1 = to_mat(p.ffn->w1);
    in.w2 = to_mat(p.ffn->w2);
    in.b1 = values(p.ffn->b1);
    in.b2 = values(p.ffn->b2);
  }
}

/// Autodiff gradient of `loss()` with respect to `leaf`.
inline std::vector<double> autodiff_grad(Tensor<double>& leaf, const std::function<Tensor<double>()>& loss) {
  leaf.zero_grad();
  backward(loss());
  auto g = leaf.grad();
  std::vector<double> out(g.begin(), g.end());
  if (out.empty()) out.assign(leaf.size(), 0.0);
  leaf.zero_grad();
  return out;
}

/// Central-difference gradient of `loss()` with respect to `leaf`, evaluated
/// by perturbing the leaf in place.
inline std::vector<double> numeric_grad(Tensor<double>& leaf, const std::function<Tensor<double>()>& loss, double h = 1e-5) {
  const auto original = values(leaf);
  auto f = [&](const oracle::Vec& x) {
    auto d = leaf.mutable_data();
    for (std::size_t i = 0; i < x.size(); ++i) d[i] = x[i];
    NoGradGuard no_grad;
    return loss().item();
  };
  auto g = oracle::fd_gradient(f, original, h);
  auto d = leaf.mutable_data();
  for (std::size_t i = 0; i < original.size(); ++i) d[i] = original[i];
  return g;
}

/// Relative gradient error of `loss` with respect to `leaf`.
inline double gradient_error(Tensor<double>& leaf, const std::function<Tensor<double>()>& loss) {
  const auto a = autodiff_grad(leaf, loss);
  const auto n = numeric_grad(leaf, loss);
  return oracle::compare_gradients("grad", a, n, 1e-4).max_rel_err;
}

/// A scalar probe that weighs every output entry differently, so gradient
/// checks see all of the Jacobian and not only its row sums.
inline Tensor<double> weighted_probe(const Tensor<double>& out, std::uint64_t seed = 17) {
  Rng rng(seed);
  auto w = random_tensor(out.shape(), rng, false, -1.0, 1.0);
  return sum(mul(out, w));
}

}  // namespace cecnet::testing
