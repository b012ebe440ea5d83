#pragma once

// Classification heads and objectives: the patch-wise metric classifier,
// patch-wise cross-entropy, the metric loss, the global/rotation auxiliary
// losses and the uncertainty-weighted multi-task combination.

#include <cmath>
#include <optional>
#include <vector>

#include "cecnet/cec_blocks.hpp"

namespace cecnet {

/// Labels carried by one (possibly rotated) query.
struct LabelBundle {
  std::size_t fewshot = 0;   // 0 .. N-1
  std::size_t global = 0;    // 0 .. D-1
  std::size_t rotation = 0;  // quarter turns, 0 .. 3
};

template <class T>
struct TaskWeights {
  T lambda = T(1);
  Tensor<T> alpha_global = Tensor<T>::scalar(T(1), true);
  Tensor<T> alpha_rotation = Tensor<T>::scalar(T(1), true);
  // Fixed per-task weights instead of the learned ones (global, rotation).
  std::optional<std::pair<T, T>> fixed;

  static T w_of(T alpha) { return T(1) / (T(2) * alpha * alpha); }
  T coefficient_global() const { return lambda + w_of(alpha_global.item()); }
  T coefficient_rotation() const { return lambda + w_of(alpha_rotation.item()); }
};

/// Cosine between every patch of Q̄ and the spatially pooled P̄.
template <class T>
RelationMap<T> pooled_cosine(const FeatureMap<T>& qb, const FeatureMap<T>& pb) {
  detail::require_same_channels(qb, pb, "pooled_cosine");
  auto proto = l2_normalize_rows(mean_rows(pb.values));
  return {reshape(matmul_nt(l2_normalize_rows(qb.values), proto), Shape{qb.rows()})};
}

/// Per-patch class probabilities from one relation map per class: [m × N].
template <class T>
Tensor<T> metric_probabilities(const std::vector<RelationMap<T>>& maps) {
  if (maps.size() < 2) throw DimensionError("metric classifier needs at least two classes");
  std::vector<Tensor<T>> cols;
  cols.reserve(maps.size());
  for (const auto& r : maps) {
    if (r.size() != maps.front().size()) throw DimensionError("metric classifier: relation maps differ in length");
    cols.push_back(r.scores);
  }
  return softmax_rows(stack_columns(cols));
}

/// Patch-wise metric classifier over N class-conditioned pairs (Q̄^k, P̄^k).
template <class T>
Tensor<T> metric_predict(const std::vector<FeatureMap<T>>& qbars, const std::vector<FeatureMap<T>>& pbars,
                         const ClusterParams<T>& params) {
  if (qbars.size() != pbars.size()) throw DimensionError("metric_predict: need one (Q̄, P̄) pair per class");
  std::vector<RelationMap<T>> maps;
  maps.reserve(qbars.size());
  for (std::size_t k = 0; k < qbars.size(); ++k) {
    if (qbars[k].values.shape() != qbars.front().values.shape()) throw DimensionError("metric_predict: inconsistent shapes");
    maps.push_back(cecd(qbars[k], pbars[k], params));
  }
  return metric_probabilities(maps);
}

/// Patch-wise cross-entropy. logits[i] is [m × C] for query i; every patch of
/// query i carries labels[i]. Summed over patches, averaged over queries.
template <class T>
Tensor<T> pce_loss(const std::vector<Tensor<T>>& logits, const std::vector<std::size_t>& labels) {
  if (logits.empty() || logits.size() != labels.size()) throw DimensionError("pce_loss: one label per query required");
  std::vector<Tensor<T>> terms;
  terms.reserve(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    detail::require_rank(logits[i].shape(), 2, "pce_loss");
    if (labels[i] >= logits[i].cols()) {
      throw DataError("pce_loss: label " + std::to_string(labels[i]) + " outside " + std::to_string(logits[i].cols()) + " classes");
    }
    std::vector<std::size_t> idx(logits[i].rows(), labels[i]);
    terms.push_back(sum(pick(log_softmax_rows(logits[i]), idx)));
  }
  return scale(add_n(terms), T(-1) / static_cast<T>(logits.size()));
}

/// Negative log-likelihood of per-patch probabilities [m × N], summed over
/// patches and averaged over queries. Probabilities below 1e-12 are clamped
/// and counted in `clamped`.
template <class T>
Tensor<T> metric_loss(const std::vector<Tensor<T>>& probs, const std::vector<std::size_t>& labels,
                      std::size_t* clamped = nullptr) {
  if (probs.empty() || probs.size() != labels.size()) throw DimensionError("metric_loss: one label per query required");
  constexpr double kFloor = 1e-12;
  std::vector<Tensor<T>> terms;
  terms.reserve(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    detail::require_rank(probs[i].shape(), 2, "metric_loss");
    if (labels[i] >= probs[i].cols()) throw DataError("metric_loss: label out of range");
    std::vector<std::size_t> idx(probs[i].rows(), labels[i]);
    auto picked = pick(probs[i], idx);
    if (clamped)
      for (T v : picked.data()) *clamped += v < T(kFloor) ? 1 : 0;
    terms.push_back(sum(log(picked, T(kFloor))));
  }
  return scale(add_n(terms), T(-1) / static_cast<T>(probs.size()));
}

/// (L_G, L_R): patch-wise linear global and rotation classifiers under PCE.
template <class T>
std::pair<Tensor<T>, Tensor<T>> aux_losses(const std::vector<FeatureMap<T>>& qbars, const std::vector<LabelBundle>& labels,
                                           const Tensor<T>& w_global, const Tensor<T>& w_rotation) {
  if (qbars.size() != labels.size()) throw DimensionError("aux_losses: one label bundle per query required");
  if (w_rotation.rows() != 4) throw DimensionError("aux_losses: rotation classifier must have 4 rows");
  std::vector<Tensor<T>> global_logits, rotation_logits;
  std::vector<std::size_t> global_labels, rotation_labels;
  for (std::size_t i = 0; i < qbars.size(); ++i) {
    global_logits.push_back(linear(qbars[i].values, w_global));
    rotation_logits.push_back(linear(qbars[i].values, w_rotation));
    global_labels.push_back(labels[i].global);
    rotation_labels.push_back(labels[i].rotation);
  }
  return {pce_loss(global_logits, global_labels), pce_loss(rotation_logits, rotation_labels)};
}

/// ½L_M + Σ_j (λ + w_j) L_j + log(1 / (λ + w_j)), w_j = 1 / (2 α_j²).
template <class T>
Tensor<T> multitask_loss(const Tensor<T>& metric, const Tensor<T>& global, const Tensor<T>& rotation,
                         const TaskWeights<T>& tw) {
  auto half_metric = scale(metric, T(0.5));
  if (tw.fixed) {
    return add_n<T>({half_metric, scale(global, tw.fixed->first), scale(rotation, tw.fixed->second)});
  }
  auto term = [&](const Tensor<T>& loss, const Tensor<T>& alpha) {
    if (alpha.item() == T(0)) throw ParameterError("multitask_loss: alpha must be nonzero");
    auto coef = add_scalar(scale(reciprocal(square(alpha)), T(0.5)), tw.lambda);
    if (!(coef.item() > T(0))) throw ParameterError("multitask_loss: lambda + w must be positive");
    return sub(mul(coef, loss), log(coef));
  };
  return add_n<T>({half_metric, term(global, tw.alpha_global), term(rotation, tw.alpha_rotation)});
}

}  // namespace cecnet
