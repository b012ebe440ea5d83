#pragma once

// Brute-force reference implementations written with explicit scalar loops.
// Nothing here uses the tensor library or Eigen, so agreement with the main
// path is evidence rather than tautology. Always 64-bit.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cecnet/errors.hpp"

namespace cecnet::oracle {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;  // row-major rows

enum class Mode { MatMul, Cosine, MetaGCN, Transformer };
enum class Act { Relu, Sigmoid };

/// Operations with a reference implementation.
enum class Op {
  CrossAttention,
  PatchCluster,        // dispatched on inputs.mode
  PatchClusterMatMul,
  PatchClusterCosine,
  PatchClusterMetaGCN,
  PatchClusterTransformer,
  ElementConnection,   // rescaled Q from Q and a clustered patch
  CecLayer,
  Cecm,                // [Q̄; P̄] stacked by rows
  SelfCecm,
  Cecd,
  MetricProbabilities,
  PatchCrossEntropy,
  MetricLoss,
  MultitaskLoss,
  Cece,
  Cecc,
};

inline constexpr Op kAllOps[] = {Op::CrossAttention,      Op::PatchCluster,      Op::PatchClusterMatMul,
                                 Op::PatchClusterCosine,  Op::PatchClusterMetaGCN, Op::PatchClusterTransformer,
                                 Op::ElementConnection,   Op::CecLayer,          Op::Cecm,
                                 Op::SelfCecm,            Op::Cecd,              Op::MetricProbabilities,
                                 Op::PatchCrossEntropy,   Op::MetricLoss,        Op::MultitaskLoss,
                                 Op::Cece,                Op::Cecc};

inline std::string op_name(Op op) {
  switch (op) {
    case Op::CrossAttention: return "cross_attention";
    case Op::PatchCluster: return "patch_cluster";
    case Op::PatchClusterMatMul: return "pc_matmul";
    case Op::PatchClusterCosine: return "pc_cosine";
    case Op::PatchClusterMetaGCN: return "pc_metagcn";
    case Op::PatchClusterTransformer: return "pc_transformer";
    case Op::ElementConnection: return "element_connect";
    case Op::CecLayer: return "cec";
    case Op::Cecm: return "cecm";
    case Op::SelfCecm: return "self_cecm";
    case Op::Cecd: return "cecd";
    case Op::MetricProbabilities: return "metric_probabilities";
    case Op::PatchCrossEntropy: return "pce_loss";
    case Op::MetricLoss: return "metric_loss";
    case Op::MultitaskLoss: return "multitask_loss";
    case Op::Cece: return "cece";
    case Op::Cecc: return "cecc";
  }
  throw ParameterError("oracle: unsupported operation id " + std::to_string(static_cast<int>(op)));
}

inline Op parse_op(std::string_view name) {
  for (Op op : kAllOps)
    if (op_name(op) == name) return op;
  throw ParameterError("oracle: unsupported operation '" + std::string(name) + "'");
}

struct Inputs {
  Mat q, p;              // feature maps; p doubles as W_E (cece) or class weights (cecc)
  Mode mode = Mode::Cosine;
  Act activation = Act::Relu;
  double temperature = 1.0;
  std::optional<Mat> w, wq, wk, wv, w1, w2;
  std::optional<Vec> b1, b2;
  std::vector<Vec> relation_maps;      // metric probabilities
  std::vector<Mat> matrices;           // logits (pce) or probabilities (metric loss)
  std::vector<std::size_t> labels;
  double loss_metric = 0, loss_global = 0, loss_rotation = 0;
  double lambda = 1.0, alpha_global = 1.0, alpha_rotation = 1.0;
};

struct Result {
  std::vector<std::size_t> shape;
  Vec data;
};

// -------------------------------------------------------------- primitives

inline constexpr double kEps = 1e-12;

inline double dot(const Vec& a, const Vec& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double guarded_norm(const Vec& a) { return std::max(std::sqrt(dot(a, a)), kEps); }

inline double cosine(const Vec& a, const Vec& b) { return dot(a, b) / (guarded_norm(a) * guarded_norm(b)); }

inline Vec softmax(const Vec& x, double t = 1.0) {
  double mx = x[0];
  for (double v : x) mx = std::max(mx, v);
  Vec out(x.size());
  double z = 0;
  for (std::size_t i = 0; i < x.size(); ++i) z += out[i] = std::exp((x[i] - mx) / t);
  for (double& v : out) v /= z;
  return out;
}

/// x · Wᵀ for every row x.
inline Mat apply_linear(const Mat& x, const Mat& w, const Vec* bias = nullptr) {
  Mat out(x.size(), Vec(w.size(), 0.0));
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t o = 0; o < w.size(); ++o) {
      double s = bias ? (*bias)[o] : 0.0;
      for (std::size_t k = 0; k < x[i].size(); ++k) s += x[i][k] * w[o][k];
      out[i][o] = s;
    }
  return out;
}

/// Σ_j a_ij · P_j
inline Mat aggregate(const Mat& a, const Mat& p) {
  Mat out(a.size(), Vec(p[0].size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < p.size(); ++j)
      for (std::size_t k = 0; k < p[j].size(); ++k) out[i][k] += a[i][j] * p[j][k];
  return out;
}

inline Mat affinity_dot(const Mat& q, const Mat& p, double t) {
  Mat a(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    Vec logits(p.size());
    for (std::size_t j = 0; j < p.size(); ++j) logits[j] = dot(q[i], p[j]);
    a[i] = softmax(logits, t);
  }
  return a;
}

inline Mat affinity_cosine(const Mat& q, const Mat& p, double t) {
  Mat a(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    Vec logits(p.size());
    for (std::size_t j = 0; j < p.size(); ++j) logits[j] = cosine(q[i], p[j]);
    a[i] = softmax(logits, t);
  }
  return a;
}

// ------------------------------------------------------------- references

inline Vec cross_attention(const Mat& q, const Mat& p) {
  Vec out(q.size(), 0.0);
  for (std::size_t i = 0; i < q.size(); ++i) {
    for (std::size_t j = 0; j < p.size(); ++j) out[i] += cosine(p[j], q[i]);
    out[i] /= static_cast<double>(p.size());
  }
  return out;
}

inline Mat patch_cluster(const Mat& q, const Mat& p, const Inputs& in, Mode mode) {
  switch (mode) {
    case Mode::MatMul: return aggregate(affinity_dot(q, p, in.temperature), p);
    case Mode::Cosine: return aggregate(affinity_cosine(q, p, in.temperature), p);
    case Mode::MetaGCN: {
      if (!in.w) throw ParameterError("oracle: meta-GCN needs W");
      const Mat ap = aggregate(affinity_cosine(q, p, in.temperature), p);
      const Mat& w = *in.w;
      Mat out(ap.size(), Vec(w[0].size(), 0.0));
      for (std::size_t i = 0; i < ap.size(); ++i)
        for (std::size_t l = 0; l < w[0].size(); ++l) {
          double s = 0;
          for (std::size_t k = 0; k < w.size(); ++k) s += ap[i][k] * w[k][l];
          out[i][l] = in.activation == Act::Relu ? std::max(s, 0.0) : 1.0 / (1.0 + std::exp(-s));
        }
      return out;
    }
    case Mode::Transformer: {
      if (!in.wq || !in.wk || !in.wv || !in.w1 || !in.w2 || !in.b1 || !in.b2) {
        throw ParameterError("oracle: transformer mode needs Wq, Wk, Wv and the FFN");
      }
      const Mat qq = apply_linear(q, *in.wq), kk = apply_linear(p, *in.wk), vv = apply_linear(p, *in.wv);
      const Mat pooled = aggregate(affinity_dot(qq, kk, in.temperature), vv);
      Mat hidden = apply_linear(pooled, *in.w1, &*in.b1);
      for (auto& row : hidden)
        for (double& v : row) v = std::max(v, 0.0);
      Mat out = apply_linear(hidden, *in.w2, &*in.b2);
      for (std::size_t i = 0; i < out.size(); ++i)
        for (std::size_t k = 0; k < out[i].size(); ++k) out[i][k] += pooled[i][k];
      return out;
    }
  }
  throw ParameterError("oracle: unknown patch cluster mode");
}

inline Vec relation(const Mat& q, const Mat& c) {
  Vec r(q.size());
  for (std::size_t n = 0; n < q.size(); ++n) r[n] = cosine(q[n], c[n]);
  return r;
}

inline Mat connect(const Mat& q, const Vec& r) {
  const Vec s = softmax(r);
  Mat out = q;
  for (std::size_t n = 0; n < q.size(); ++n)
    for (double& v : out[n]) v *= 1.0 + s[n];
  return out;
}

inline Mat cec(const Mat& q, const Mat& p, const Inputs& in) { return connect(q, relation(q, patch_cluster(q, p, in, in.mode))); }

inline Vec cecd(const Mat& qb, const Mat& pb, const Inputs& in) { return relation(qb, patch_cluster(qb, pb, in, in.mode)); }

inline Mat metric_probabilities(const std::vector<Vec>& maps) {
  const std::size_t m = maps[0].size(), n = maps.size();
  Mat out(m, Vec(n));
  for (std::size_t pos = 0; pos < m; ++pos) {
    double z = 0;
    for (std::size_t k = 0; k < n; ++k) z += std::exp(maps[k][pos]);
    for (std::size_t k = 0; k < n; ++k) out[pos][k] = std::exp(maps[k][pos]) / z;
  }
  return out;
}

inline double pce(const std::vector<Mat>& logits, const std::vector<std::size_t>& labels) {
  double total = 0;
  for (std::size_t i = 0; i < logits.size(); ++i)
    for (const auto& row : logits[i]) {
      double mx = row[0];
      for (double v : row) mx = std::max(mx, v);
      double z = 0;
      for (double v : row) z += std::exp(v - mx);
      total -= row[labels[i]] - mx - std::log(z);
    }
  return total / static_cast<double>(logits.size());
}

inline double metric_loss(const std::vector<Mat>& probs, const std::vector<std::size_t>& labels) {
  double total = 0;
  for (std::size_t i = 0; i < probs.size(); ++i)
    for (const auto& row : probs[i]) total -= std::log(std::max(row[labels[i]], kEps));
  return total / static_cast<double>(probs.size());
}

inline double multitask(const Inputs& in) {
  const double cg = in.lambda + 1.0 / (2.0 * in.alpha_global * in.alpha_global);
  const double cr = in.lambda + 1.0 / (2.0 * in.alpha_rotation * in.alpha_rotation);
  return 0.5 * in.loss_metric + cg * in.loss_global + std::log(1.0 / cg) + cr * in.loss_rotation + std::log(1.0 / cr);
}

inline Result from_mat(const Mat& m) {
  Result r{{m.size(), m.empty() ? 0 : m[0].size()}, {}};
  for (const auto& row : m) r.data.insert(r.data.end(), row.begin(), row.end());
  return r;
}
inline Result from_vec(const Vec& v) { return {{v.size()}, v}; }
inline Result from_scalar(double v) { return {{}, {v}}; }

/// Reference value of `op` on `in`.
inline Result naive_eval(Op op, const Inputs& in) {
  switch (op) {
    case Op::CrossAttention: return from_vec(cross_attention(in.q, in.p));
    case Op::PatchCluster: return from_mat(patch_cluster(in.q, in.p, in, in.mode));
    case Op::PatchClusterMatMul: return from_mat(patch_cluster(in.q, in.p, in, Mode::MatMul));
    case Op::PatchClusterCosine: return from_mat(patch_cluster(in.q, in.p, in, Mode::Cosine));
    case Op::PatchClusterMetaGCN: return from_mat(patch_cluster(in.q, in.p, in, Mode::MetaGCN));
    case Op::PatchClusterTransformer: return from_mat(patch_cluster(in.q, in.p, in, Mode::Transformer));
    case Op::ElementConnection: return from_mat(connect(in.q, relation(in.q, in.p)));
    case Op::CecLayer: return from_mat(cec(in.q, in.p, in));
    case Op::Cecm: {
      Mat out = cec(in.q, in.p, in);
      const Mat pb = cec(in.p, in.q, in);
      out.insert(out.end(), pb.begin(), pb.end());
      return from_mat(out);
    }
    case Op::SelfCecm: return from_mat(cec(in.q, in.q, in));
    case Op::Cecd: return from_vec(cecd(in.q, in.p, in));
    case Op::MetricProbabilities: return from_mat(metric_probabilities(in.relation_maps));
    case Op::PatchCrossEntropy: return from_scalar(pce(in.matrices, in.labels));
    case Op::MetricLoss: return from_scalar(metric_loss(in.matrices, in.labels));
    case Op::MultitaskLoss: return from_scalar(multitask(in));
    case Op::Cece: return from_mat(cec(in.q, in.p, in));
    case Op::Cecc: return from_vec(cecd(in.p, in.q, in));
  }
  throw ParameterError("oracle: unsupported operation id " + std::to_string(static_cast<int>(op)));
}

// ------------------------------------------------------ finite differences

/// Central differences of a scalar function, one coordinate at a time.
inline Vec fd_gradient(const std::function<double(const Vec&)>& f, Vec x, double h = 1e-5) {
  Vec g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double up = f(x);
    x[i] = orig - h;
    const double down = f(x);
    x[i] = orig;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw OracleError("fd_gradient: non-finite evaluation at coordinate " + std::to_string(i));
    }
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// ----------------------------------------------------------------- reports

struct Comparison {
  std::string name;
  double max_abs_err = 0;
  double max_rel_err = 0;
  double tolerance = 0;
  bool pass = false;
};

/// Element-wise comparison against an absolute tolerance.
inline Comparison compare_values(std::string name, const Vec& actual, const Vec& expected, double tol) {
  Comparison c{std::move(name), 0, 0, tol, actual.size() == expected.size()};
  if (!c.pass) {
    c.max_abs_err = c.max_rel_err = INFINITY;
    return c;
  }
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double d = std::abs(actual[i] - expected[i]);
    c.max_abs_err = std::max(c.max_abs_err, std::isnan(d) ? INFINITY : d);
    c.max_rel_err = std::max(c.max_rel_err, d / std::max({std::abs(actual[i]), std::abs(expected[i]), kEps}));
  }
  c.pass = c.max_abs_err <= tol;
  return c;
}

/// Gradient comparison: ‖a − b‖ / max(‖a‖, ‖b‖) against a relative tolerance.
inline Comparison compare_gradients(std::string name, const Vec& autodiff, const Vec& numeric, double tol) {
  Comparison c{std::move(name), 0, 0, tol, autodiff.size() == numeric.size()};
  if (!c.pass) {
    c.max_abs_err = c.max_rel_err = INFINITY;
    return c;
  }
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < autodiff.size(); ++i) {
    const double d = autodiff[i] - numeric[i];
    c.max_abs_err = std::max(c.max_abs_err, std::abs(d));
    diff += d * d;
    na += autodiff[i] * autodiff[i];
    nb += numeric[i] * numeric[i];
  }
  const double scale = std::max({std::sqrt(na), std::sqrt(nb), 1e-8});
  c.max_rel_err = std::sqrt(diff) / scale;
  c.pass = std::isfinite(c.max_rel_err) && c.max_rel_err < tol;
  return c;
}

struct Report {
  std::vector<Comparison> checks;

  void add(Comparison c) { checks.push_back(std::move(c)); }
  bool pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
  double worst_abs() const {
    double w = 0;
    for (const auto& c : checks) w = std::max(w, c.max_abs_err);
    return w;
  }
  double worst_rel() const {
    double w = 0;
    for (const auto& c : checks) w = std::max(w, c.max_rel_err);
    return w;
  }
};

}  // namespace cecnet::oracle
