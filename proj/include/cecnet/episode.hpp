#pragma once

// N-way K-shot episodes over a SyntheticDataset.

#include <numeric>
#include <random>
#include <vector>

#include "cecnet/heads.hpp"
#include "cecnet/synthetic.hpp"

namespace cecnet {

struct Episode {
  std::size_t n_ways = 0;
  std::size_t k_shots = 0;
  std::vector<std::size_t> class_ids;            // catalog id of each way
  std::vector<std::vector<SynthImage>> support;  // [way][shot]
  std::vector<SynthImage> queries;
  std::vector<LabelBundle> labels;  // one per query

  std::size_t support_size() const { return n_ways * k_shots; }
  std::size_t query_size() const { return queries.size(); }
};

namespace detail {

/// First `count` entries of a Fisher-Yates shuffle of 0..n-1.
template <class Rng>
std::vector<std::size_t> draw_without_replacement(std::size_t n, std::size_t count, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(count);
  return idx;
}

}  // namespace detail

/// Uniformly samples N classes, then K support and n_q / N query items per
/// class, all distinct. Global labels index the dataset's class list.
template <class Rng>
Episode sample_episode(const SyntheticDataset& data, std::size_t n_ways, std::size_t k_shots, std::size_t n_queries,
                       Rng& rng) {
  if (n_ways < 1 || k_shots < 1) throw DataError("sample_episode: N and K must be positive");
  if (n_queries % n_ways != 0) throw DataError("sample_episode: query count must be a multiple of N");
  const std::size_t per_class = n_queries / n_ways;
  if (data.classes.size() < n_ways) {
    throw DataError("sample_episode: dataset has " + std::to_string(data.classes.size()) + " classes, need " +
                    std::to_string(n_ways));
  }
  if (data.images_per_class < k_shots + per_class) throw DataError("sample_episode: not enough items per class");

  Episode ep;
  ep.n_ways = n_ways;
  ep.k_shots = k_shots;
  const auto ways = detail::draw_without_replacement(data.classes.size(), n_ways, rng);
  ep.support.resize(n_ways);
  for (std::size_t w = 0; w < n_ways; ++w) {
    const std::size_t cls = data.classes[ways[w]];
    ep.class_ids.push_back(cls);
    const auto items = detail::draw_without_replacement(data.images_per_class, k_shots + per_class, rng);
    for (std::size_t s = 0; s < k_shots; ++s) ep.support[w].push_back(data.item(cls, items[s]));
    for (std::size_t q = 0; q < per_class; ++q) {
      ep.queries.push_back(data.item(cls, items[k_shots + q]));
      ep.labels.push_back({w, ways[w], 0});
    }
  }
  return ep;
}

/// Every query expanded into its four rotations (query-major), rotation label = quarter turns.
inline void rotate_queries(const std::vector<SynthImage>& queries, const std::vector<LabelBundle>& labels,
                           std::vector<SynthImage>& out_images, std::vector<LabelBundle>& out_labels) {
  if (queries.size() != labels.size()) throw DimensionError("rotate_queries: one label per query required");
  out_images.clear();
  out_labels.clear();
  out_images.reserve(queries.size() * 4);
  out_labels.reserve(queries.size() * 4);
  for (std::size_t i = 0; i < queries.size(); ++i)
    for (std::size_t r = 0; r < 4; ++r) {
      out_images.push_back(r == 0 ? queries[i] : rotate_image(queries[i], r));
      LabelBundle b = labels[i];
      b.rotation = r;
      out_labels.push_back(b);
    }
}

/// P^k: arithmetic mean of the support feature maps of each class.
template <class T>
std::vector<FeatureMap<T>> compute_prototypes(const std::vector<std::vector<FeatureMap<T>>>& support) {
  std::vector<FeatureMap<T>> out;
  out.reserve(support.size());
  for (const auto& shots : support) {
    if (shots.empty()) throw DataError("compute_prototypes: class without support items");
    if (shots.size() == 1) {
      out.push_back(shots.front());
      continue;
    }
    std::vector<Tensor<T>> values;
    for (const auto& f : shots) values.push_back(f.values);
    out.emplace_back(scale(add_n(values), T(1) / static_cast<T>(shots.size())));
  }
  return out;
}

}  // namespace cecnet
