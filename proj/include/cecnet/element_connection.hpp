#pragma once

// Element Connection: per-patch cosine between Q and its clustered patches
// (the relation map R^Q), then each patch of Q rescaled by softmax(R^Q) + 1.

#include "cecnet/patch_cluster.hpp"

namespace cecnet {

/// R^Q_n = Q̂_n · Ĉ_n. Zero rows score 0.
template <class T>
RelationMap<T> relation_map(const FeatureMap<T>& q, const ClusteredPatch<T>& cp) {
  if (q.values.shape() != cp.values.shape()) {
    throw DimensionError("relation_map: shape mismatch " + shape_str(q.values.shape()) + " vs " +
                         shape_str(cp.values.shape()));
  }
  return {row_dot(l2_normalize_rows(q.values), l2_normalize_rows(cp.values))};
}

/// Softmax of a relation map over its m positions, as a rank-1 tensor.
template <class T>
Tensor<T> spatial_softmax(const RelationMap<T>& r) {
  const auto m = r.size();
  return reshape(softmax_rows(reshape(r.scores, Shape{1, m})), Shape{m});
}

/// Q̄_n = (softmax(R)_n + 1) · Q_n for a precomputed relation map.
template <class T>
FeatureMap<T> connect_with(const FeatureMap<T>& q, const RelationMap<T>& r) {
  if (r.size() != q.rows()) throw DimensionError("element connection: relation map length differs from patch count");
  return FeatureMap<T>(scale_rows(q.values, add_scalar(spatial_softmax(r), T(1))));
}

template <class T>
FeatureMap<T> element_connect(const FeatureMap<T>& q, const ClusteredPatch<T>& cp) {
  return connect_with(q, relation_map(q, cp));
}

/// f_CEC(Q, P) = f_EC(Q, f_PC(Q, P)).
template <class T>
FeatureMap<T> cec(const FeatureMap<T>& q, const FeatureMap<T>& p, const ClusterParams<T>& params) {
  return element_connect(q, patch_cluster(q, p, params));
}

}  // namespace cecnet
