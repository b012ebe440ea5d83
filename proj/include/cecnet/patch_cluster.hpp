#pragma once

// Patch Cluster: for every reference patch of Q, aggregate the source patches
// of P weighted by a row-softmax affinity. Four modes (MatMul, Cosine,
// meta-GCN, Transformer) plus the dense cross-attention baseline.

#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "cecnet/ops.hpp"

namespace cecnet {

/// Patch features, one row per spatial position (or per bank entry).
template <class T>
struct FeatureMap {
  Tensor<T> values;

  FeatureMap() = default;
  explicit FeatureMap(Tensor<T> v) : values(std::move(v)) {
    if (values.rank() != 2 || values.rows() < 1 || values.cols() < 1) {
      throw DimensionError("FeatureMap needs a non-empty rows x channels matrix, got " + shape_str(values.shape()));
    }
  }

  std::size_t rows() const { return values.rows(); }
  std::size_t channels() const { return values.cols(); }
};

/// Output of Patch Cluster; same row count as the reference map.
template <class T>
struct ClusteredPatch {
  Tensor<T> values;
  std::size_t rows() const { return values.rows(); }
  std::size_t channels() const { return values.cols(); }
};

/// Per-patch cosine scores in [-1, 1].
template <class T>
struct RelationMap {
  Tensor<T> scores;
  std::size_t size() const { return scores.size(); }
};

enum class ClusterMode { MatMul, Cosine, MetaGCN, Transformer };
enum class Activation { Relu, Sigmoid };

inline std::string to_string(ClusterMode m) {
  switch (m) {
    case ClusterMode::MatMul: return "matmul";
    case ClusterMode::Cosine: return "cosine";
    case ClusterMode::MetaGCN: return "metagcn";
    case ClusterMode::Transformer: return "transformer";
  }
  throw ConfigurationError("unknown cluster mode");
}

/// Single-letter tag used in ablation tables: M, C, G, T.
inline char mode_letter(ClusterMode m) {
  switch (m) {
    case ClusterMode::MatMul: return 'M';
    case ClusterMode::Cosine: return 'C';
    case ClusterMode::MetaGCN: return 'G';
    case ClusterMode::Transformer: return 'T';
  }
  throw ConfigurationError("unknown cluster mode");
}

inline ClusterMode parse_cluster_mode(std::string_view s) {
  if (s == "matmul" || s == "M") return ClusterMode::MatMul;
  if (s == "cosine" || s == "C") return ClusterMode::Cosine;
  if (s == "metagcn" || s == "G") return ClusterMode::MetaGCN;
  if (s == "transformer" || s == "T") return ClusterMode::Transformer;
  throw ConfigurationError("unknown cluster mode '" + std::string(s) + "'");
}

inline std::string to_string(Activation a) { return a == Activation::Relu ? "relu" : "sigmoid"; }

inline Activation parse_activation(std::string_view s) {
  if (s == "relu") return Activation::Relu;
  if (s == "sigmoid") return Activation::Sigmoid;
  throw ConfigurationError("unknown activation '" + std::string(s) + "'");
}

/// Two-layer c -> c -> c feed-forward block, relu in between.
template <class T>
struct FeedForward {
  Tensor<T> w1, b1, w2, b2;
};

template <class T>
struct ClusterParams {
  ClusterMode mode = ClusterMode::Cosine;
  T temperature = T(1);
  Activation activation = Activation::Relu;
  std::optional<Tensor<T>> w;  // meta-GCN
  std::optional<Tensor<T>> wq, wk, wv;
  std::optional<FeedForward<T>> ffn;

  /// Fresh parameters for `mode` at channel width c. Weight matrices start at
  /// identity + U(-0.01, 0.01); FFN entries at U(±1/√c).
  template <class Rng>
  static ClusterParams make(ClusterMode mode, std::size_t c, Rng& rng, T temperature = T(1),
                            Activation activation = Activation::Relu) {
    ClusterParams p;
    p.mode = mode;
    p.temperature = temperature;
    p.activation = activation;
    auto near_identity = [&] {
      std::uniform_real_distribution<double> u(-0.01, 0.01);
      std::vector<T> d(c * c);
      for (std::size_t i = 0; i < c; ++i)
        for (std::size_t j = 0; j < c; ++j) d[i * c + j] = static_cast<T>((i == j ? 1.0 : 0.0) + u(rng));
      return Tensor<T>(Shape{c, c}, std::move(d), true);
    };
    auto uniform = [&](Shape s) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(c));
      std::uniform_real_distribution<double> u(-bound, bound);
      std::vector<T> d(shape_size(s));
      for (auto& v : d) v = static_cast<T>(u(rng));
      return Tensor<T>(std::move(s), std::move(d), true);
    };
    if (mode == ClusterMode::MetaGCN) p.w = near_identity();
    if (mode == ClusterMode::Transformer) {
      p.wq = near_identity();
      p.wk = near_identity();
      p.wv = near_identity();
      p.ffn = FeedForward<T>{uniform({c, c}), uniform({c}), uniform({c, c}), uniform({c})};
    }
    return p;
  }

  std::vector<Tensor<T>*> parameters() {
    std::vector<Tensor<T>*> out;
    if (w) out.push_back(&*w);
    if (wq) out.push_back(&*wq);
    if (wk) out.push_back(&*wk);
    if (wv) out.push_back(&*wv);
    if (ffn) {
      out.push_back(&ffn->w1);
      out.push_back(&ffn->b1);
      out.push_back(&ffn->w2);
      out.push_back(&ffn->b2);
    }
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto* t : {&w, &wq, &wk, &wv})
      if (*t) n += (*t)->size();
    if (ffn) n += ffn->w1.size() + ffn->b1.size() + ffn->w2.size() + ffn->b2.size();
    return n;
  }
};

namespace detail {

template <class T>
void require_same_channels(const FeatureMap<T>& q, const FeatureMap<T>& p, const char* op) {
  if (q.channels() != p.channels()) {
    throw DimensionError(std::string(op) + ": channel mismatch " + std::to_string(q.channels()) + " vs " +
                         std::to_string(p.channels()));
  }
}

template <class T>
void require_square(const std::optional<Tensor<T>>& w, std::size_t c, const char* name) {
  if (!w) throw ConfigurationError(std::string("patch cluster: missing ") + name);
  if (w->shape() != Shape{c, c}) throw DimensionError(std::string("patch cluster: ") + name + " must be c x c");
}

/// softmax(Q̂ P̂ᵀ / t): the cosine affinity shared by Cosine and meta-GCN.
template <class T>
Tensor<T> cosine_affinity(const FeatureMap<T>& q, const FeatureMap<T>& p, T temperature) {
  return softmax_rows(matmul_nt(l2_normalize_rows(q.values), l2_normalize_rows(p.values)), temperature);
}

}  // namespace detail

/// C^p = softmax(Q Pᵀ / t) P
template <class T>
ClusteredPatch<T> pc_matmul(const FeatureMap<T>& q, const FeatureMap<T>& p, T temperature = T(1)) {
  detail::require_same_channels(q, p, "pc_matmul");
  auto affinity = softmax_rows(matmul_nt(q.values, p.values), temperature);
  return {matmul(affinity, p.values)};
}

/// C^p = softmax(Q̂ P̂ᵀ / t) P, aggregating the unnormalized source rows.
template <class T>
ClusteredPatch<T> pc_cosine(const FeatureMap<T>& q, const FeatureMap<T>& p, T temperature = T(1)) {
  detail::require_same_channels(q, p, "pc_cosine");
  return {matmul(detail::cosine_affinity(q, p, temperature), p.values)};
}

/// C^p = δ(softmax(Q̂ P̂ᵀ / t) P W): a GCN whose adjacency is the input-dependent affinity.
template <class T>
ClusteredPatch<T> pc_metagcn(const FeatureMap<T>& q, const FeatureMap<T>& p, const ClusterParams<T>& params) {
  detail::require_same_channels(q, p, "pc_metagcn");
  detail::require_square(params.w, q.channels(), "W");
  auto propagated = matmul(matmul(detail::cosine_affinity(q, p, params.temperature), p.values), *params.w);
  return {params.activation == Activation::Relu ? relu(propagated) : sigmoid(propagated)};
}

/// pooled = softmax((Q Wqᵀ)(P Wkᵀ)ᵀ / t) (P Wvᵀ); C^p = pooled + FFN(pooled).
template <class T>
ClusteredPatch<T> pc_transformer(const FeatureMap<T>& q, const FeatureMap<T>& p, const ClusterParams<T>& params) {
  detail::require_same_channels(q, p, "pc_transformer");
  const auto c = q.channels();
  detail::require_square(params.wq, c, "Wq");
  detail::require_square(params.wk, c, "Wk");
  detail::require_square(params.wv, c, "Wv");
  if (!params.ffn) throw ConfigurationError("patch cluster: missing FFN");
  const auto& f = *params.ffn;
  if (f.w1.shape() != Shape{c, c} || f.w2.shape() != Shape{c, c} || f.b1.size() != c || f.b2.size() != c) {
    throw DimensionError("patch cluster: FFN must be c -> c -> c");
  }
  auto attn = softmax_rows(matmul_nt(linear(q.values, *params.wq), linear(p.values, *params.wk)), params.temperature);
  auto pooled = matmul(attn, linear(p.values, *params.wv));
  auto hidden = relu(linear(pooled, f.w1, f.b1));
  return {add(pooled, linear(hidden, f.w2, f.b2))};
}

/// Generic f_PC: dispatch on params.mode.
template <class T>
ClusteredPatch<T> patch_cluster(const FeatureMap<T>& q, const FeatureMap<T>& p, const ClusterParams<T>& params) {
  switch (params.mode) {
    case ClusterMode::MatMul: return pc_matmul(q, p, params.temperature);
    case ClusterMode::Cosine: return pc_cosine(q, p, params.temperature);
    case ClusterMode::MetaGCN: return pc_metagcn(q, p, params);
    case ClusterMode::Transformer: return pc_transformer(q, p, params);
  }
  throw ConfigurationError("patch_cluster: unknown mode");
}

/// The row-stochastic affinity used by a mode (rows index Q, columns index P).
template <class T>
Tensor<T> cluster_affinity(const FeatureMap<T>& q, const FeatureMap<T>& p, const ClusterParams<T>& params) {
  detail::require_same_channels(q, p, "cluster_affinity");
  switch (params.mode) {
    case ClusterMode::MatMul: return softmax_rows(matmul_nt(q.values, p.values), params.temperature);
    case ClusterMode::Cosine:
    case ClusterMode::MetaGCN: return detail::cosine_affinity(q, p, params.temperature);
    case ClusterMode::Transformer:
      detail::require_square(params.wq, q.channels(), "Wq");
      detail::require_square(params.wk, q.channels(), "Wk");
      return softmax_rows(matmul_nt(linear(q.values, *params.wq), linear(p.values, *params.wk)), params.temperature);
  }
  throw ConfigurationError("cluster_affinity: unknown mode");
}

/// Dense cross-attention baseline: the n×m correlation P̂ Q̂ᵀ reduced by
/// averaging over support patches, one score per query patch.
template <class T>
RelationMap<T> cross_attention_baseline(const FeatureMap<T>& q, const FeatureMap<T>& p) {
  detail::require_same_channels(q, p, "cross_attention_baseline");
  auto correlation = matmul_nt(l2_normalize_rows(p.values), l2_normalize_rows(q.values));
  return {reshape(mean_rows(correlation), Shape{q.rows()})};
}

}  // namespace cecnet
