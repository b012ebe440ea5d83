#pragma once

// Modules derived from the CEC layer: the bidirectional attention module
// (CECM), its self-connected variant, the CECD distance, the embedding
// module against a learnable bank (CECE) and the class-weight classifier (CECC).

#include <random>
#include <utility>

#include "cecnet/element_connection.hpp"

namespace cecnet {

/// Learnable group embeddings W_E [n_e × c].
template <class T>
struct EmbeddingBank {
  Tensor<T> weights;

  template <class Rng>
  static EmbeddingBank make(std::size_t groups, std::size_t c, Rng& rng) {
    if (groups < 1) throw ParameterError("EmbeddingBank: need at least one group");
    return {uniform_init<T>(Shape{groups, c}, c, rng)};
  }
  std::size_t groups() const { return weights.rows(); }

  template <class U, class Rng>
  static Tensor<U> uniform_init(Shape s, std::size_t c, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(c));
    std::uniform_real_distribution<double> u(-bound, bound);
    std::vector<U> d(shape_size(s));
    for (auto& v : d) v = static_cast<U>(u(rng));
    return Tensor<U>(std::move(s), std::move(d), true);
  }
};

/// Learnable class weights W [D × c].
template <class T>
struct ClassifierBank {
  Tensor<T> weights;

  template <class Rng>
  static ClassifierBank make(std::size_t classes, std::size_t c, Rng& rng) {
    if (classes < 2) throw ParameterError("ClassifierBank: need at least two classes");
    return {EmbeddingBank<T>::template uniform_init<T>(Shape{classes, c}, c, rng)};
  }
  std::size_t classes() const { return weights.rows(); }
};

/// (Q̄, P̄) = (f_CEC(Q, P), f_CEC(P, Q)) with shared parameters.
template <class T>
std::pair<FeatureMap<T>, FeatureMap<T>> cecm(const FeatureMap<T>& q, const FeatureMap<T>& p,
                                             const ClusterParams<T>& params) {
  detail::require_same_channels(q, p, "cecm");
  return {cec(q, p, params), cec(p, q, params)};
}

template <class T>
FeatureMap<T> self_cecm(const FeatureMap<T>& q, const ClusterParams<T>& params) {
  return cec(q, q, params);
}

/// Relation map between Q̄ and the patches of P̄ clustered onto it.
template <class T>
RelationMap<T> cecd(const FeatureMap<T>& qb, const FeatureMap<T>& pb, const ClusterParams<T>& params) {
  detail::require_same_channels(qb, pb, "cecd");
  return relation_map(qb, patch_cluster(qb, pb, params));
}

template <class T>
FeatureMap<T> cece(const FeatureMap<T>& q, const EmbeddingBank<T>& bank, const ClusterParams<T>& params) {
  if (bank.weights.cols() != q.channels()) throw DimensionError("cece: bank channels differ from features");
  return cec(q, FeatureMap<T>(bank.weights), params);
}

/// One score per class row: CECD with the class weights as reference.
template <class T>
Tensor<T> cecc(const FeatureMap<T>& q, const ClassifierBank<T>& bank, const ClusterParams<T>& params) {
  if (bank.weights.cols() != q.channels()) throw DimensionError("cecc: bank channels differ from features");
  return cecd(FeatureMap<T>(bank.weights), q, params).scores;
}

}  // namespace cecnet
