#pragma once

// The few-shot pipeline: base training with the multi-task objective, novel
// fine-tuning of a Self-CECM + linear head on the support set, inference that
// sums the metric and fine-tune predictions, and episodic evaluation.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "cecnet/encoder.hpp"
#include "cecnet/episode.hpp"
#include "cecnet/optimizer.hpp"

namespace cecnet {

enum class AttentionKind { None, Cross, Cecm };
enum class MetricKind { Cosine, Cecd };

inline std::string to_string(AttentionKind a) {
  switch (a) {
    case AttentionKind::None: return "none";
    case AttentionKind::Cross: return "cross";
    case AttentionKind::Cecm: return "cecm";
  }
  return "?";
}
inline std::string to_string(MetricKind m) { return m == MetricKind::Cosine ? "cosine" : "cecd"; }

inline AttentionKind parse_attention(std::string_view s) {
  if (s == "none") return AttentionKind::None;
  if (s == "cross") return AttentionKind::Cross;
  if (s == "cecm") return AttentionKind::Cecm;
  throw ConfigurationError("unknown attention '" + std::string(s) + "'");
}
inline MetricKind parse_metric(std::string_view s) {
  if (s == "cosine") return MetricKind::Cosine;
  if (s == "cecd") return MetricKind::Cecd;
  throw ConfigurationError("unknown metric '" + std::string(s) + "'");
}

/// Architecture and objective settings that shape the learnable state.
struct ModelSpec {
  AttentionKind attention = AttentionKind::Cecm;
  ClusterMode cecm_mode = ClusterMode::Transformer;
  MetricKind metric = MetricKind::Cecd;
  ClusterMode cecd_mode = ClusterMode::Cosine;
  ClusterMode self_cecm_mode = ClusterMode::MatMul;
  Activation gcn_activation = Activation::Relu;
  double temperature = 1.0;       // CECM, Self-CECM and CECE affinities
  double cecd_temperature = 1.0;  // affinity inside the CECD metric
  std::size_t channels = 32;
  std::size_t base_classes = 20;
  bool use_cece = false;
  std::size_t cece_groups = 5;
  ClusterMode cece_mode = ClusterMode::MatMul;
  double lambda = 1.0;
  std::optional<std::pair<double, double>> fixed_weights;  // (global, rotation)
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
};

/// Human-readable row labels for ablation tables.
inline std::string attention_label(const ModelSpec& s) {
  switch (s.attention) {
    case AttentionKind::None: return "none";
    case AttentionKind::Cross: return "cross-attention";
    case AttentionKind::Cecm: return std::string("CECM(") + mode_letter(s.cecm_mode) + ")";
  }
  return "?";
}
inline std::string metric_label(const ModelSpec& s) {
  return s.metric == MetricKind::Cosine ? "cosine" : std::string("CECD(") + mode_letter(s.cecd_mode) + ")";
}

struct LossBreakdown {
  double total = 0, metric = 0, global = 0, rotation = 0;
  double alpha_global = 0, alpha_rotation = 0;
};

template <class T>
struct TrainState {
  ModelSpec spec;
  EncoderParams<T> encoder;
  ClusterParams<T> cecm;
  ClusterParams<T> cecd;
  ClusterParams<T> cece_params;
  std::optional<EmbeddingBank<T>> cece_bank;
  Tensor<T> w_global;    // [D × c]
  Tensor<T> w_rotation;  // [4 × c]
  TaskWeights<T> task;
  Adam<T> optimizer;
  std::uint64_t seed = 0;
  std::uint64_t step = 0;

  static TrainState make(const ModelSpec& spec, std::uint64_t seed) {
    std::mt19937_64 rng(mix_seed(seed, 0x11a1));
    TrainState s;
    s.spec = spec;
    s.seed = seed;
    const auto c = spec.channels;
    const T t = static_cast<T>(spec.temperature);
    s.encoder = EncoderParams<T>::make(c, rng);
    s.cecm = ClusterParams<T>::make(spec.cecm_mode, c, rng, t, spec.gcn_activation);
    s.cecd = ClusterParams<T>::make(spec.cecd_mode, c, rng, static_cast<T>(spec.cecd_temperature), spec.gcn_activation);
    s.cece_params = ClusterParams<T>::make(spec.cece_mode, c, rng, t, spec.gcn_activation);
    if (spec.use_cece) s.cece_bank = EmbeddingBank<T>::make(spec.cece_groups, c, rng);
    s.w_global = EmbeddingBank<T>::template uniform_init<T>(Shape{spec.base_classes, c}, c, rng);
    s.w_rotation = EmbeddingBank<T>::template uniform_init<T>(Shape{4, c}, c, rng);
    s.task.lambda = static_cast<T>(spec.lambda);
    if (spec.fixed_weights)
      s.task.fixed = std::pair<T, T>(static_cast<T>(spec.fixed_weights->first), static_cast<T>(spec.fixed_weights->second));
    s.optimizer.lr = spec.lr;
    s.optimizer.beta1 = spec.beta1;
    s.optimizer.beta2 = spec.beta2;
    s.optimizer.eps = spec.adam_eps;
    return s;
  }

  /// Every learnable tensor with a stable name; the order defines optimizer slots.
  std::vector<std::pair<std::string, Tensor<T>*>> named_parameters() {
    std::vector<std::pair<std::string, Tensor<T>*>> out;
    for (std::size_t b = 0; b < 4; ++b) {
      out.emplace_back("encoder.block" + std::to_string(b) + ".weight", &encoder.blocks[b].weight);
      out.emplace_back("encoder.block" + std::to_string(b) + ".bias", &encoder.blocks[b].bias);
    }
    auto cluster = [&](const std::string& prefix, ClusterParams<T>& p) {
      if (p.w) out.emplace_back(prefix + ".w", &*p.w);
      if (p.wq) out.emplace_back(prefix + ".wq", &*p.wq);
      if (p.wk) out.emplace_back(prefix + ".wk", &*p.wk);
      if (p.wv) out.emplace_back(prefix + ".wv", &*p.wv);
      if (p.ffn) {
        out.emplace_back(prefix + ".ffn.w1", &p.ffn->w1);
        out.emplace_back(prefix + ".ffn.b1", &p.ffn->b1);
        out.emplace_back(prefix + ".ffn.w2", &p.ffn->w2);
        out.emplace_back(prefix + ".ffn.b2", &p.ffn->b2);
      }
    };
    if (spec.attention == AttentionKind::Cecm) cluster("cecm", cecm);
    if (spec.metric == MetricKind::Cecd) cluster("cecd", cecd);
    if (cece_bank) {
      cluster("cece", cece_params);
      out.emplace_back("cece.bank", &cece_bank->weights);
    }
    out.emplace_back("head.w_global", &w_global);
    out.emplace_back("head.w_rotation", &w_rotation);
    if (!task.fixed) {
      out.emplace_back("task.alpha_global", &task.alpha_global);
      out.emplace_back("task.alpha_rotation", &task.alpha_rotation);
    }
    return out;
  }

  std::vector<Tensor<T>*> parameters() {
    std::vector<Tensor<T>*> out;
    for (auto& [name, t] : named_parameters()) out.push_back(t);
    return out;
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for (auto* p : parameters()) n += p->size();
    return n;
  }

  /// Deep copy: parameters, moments and counters; nothing is shared.
  TrainState clone() const {
    TrainState out = *this;
    auto src = const_cast<TrainState*>(this)->parameters();
    auto dst = out.parameters();
    for (std::size_t i = 0; i < src.size(); ++i) *dst[i] = src[i]->clone();
    if (task.fixed) {
      out.task.alpha_global = task.alpha_global.clone();
      out.task.alpha_rotation = task.alpha_rotation.clone();
    }
    return out;
  }
};

// ------------------------------------------------------------------ forward

template <class T>
std::vector<FeatureMap<T>> embed(const TrainState<T>& state, const std::vector<const SynthImage*>& images) {
  auto feats = encode_batch(images, state.encoder);
  if (state.cece_bank)
    for (auto& f : feats) f = cece(f, *state.cece_bank, state.cece_params);
  return feats;
}

/// (Q̄, P̄) for one query/prototype pair under the configured attention module.
template <class T>
std::pair<FeatureMap<T>, FeatureMap<T>> attend(const TrainState<T>& state, const FeatureMap<T>& q, const FeatureMap<T>& p) {
  switch (state.spec.attention) {
    case AttentionKind::None: return {q, p};
    case AttentionKind::Cross:
      return {connect_with(q, cross_attention_baseline(q, p)), connect_with(p, cross_attention_baseline(p, q))};
    case AttentionKind::Cecm: return cecm(q, p, state.cecm);
  }
  throw ConfigurationError("unknown attention module");
}

template <class T>
RelationMap<T> similarity_map(const TrainState<T>& state, const FeatureMap<T>& qb, const FeatureMap<T>& pb) {
  return state.spec.metric == MetricKind::Cosine ? pooled_cosine(qb, pb) : cecd(qb, pb, state.cecd);
}

/// Per-patch probabilities [m × N] for one query against all prototypes, and
/// the attended query features per class.
template <class T>
std::pair<Tensor<T>, std::vector<FeatureMap<T>>> classify_query(const TrainState<T>& state, const FeatureMap<T>& q,
                                                                const std::vector<FeatureMap<T>>& prototypes) {
  std::vector<RelationMap<T>> maps;
  std::vector<FeatureMap<T>> qbars;
  maps.reserve(prototypes.size());
  qbars.reserve(prototypes.size());
  for (const auto& p : prototypes) {
    auto [qb, pb] = attend(state, q, p);
    maps.push_back(similarity_map(state, qb, pb));
    qbars.push_back(std::move(qb));
  }
  return {metric_probabilities(maps), std::move(qbars)};
}

template <class T>
std::vector<std::vector<FeatureMap<T>>> group_support(const Episode& ep, const std::vector<FeatureMap<T>>& feats) {
  std::vector<std::vector<FeatureMap<T>>> out(ep.n_ways);
  for (std::size_t w = 0; w < ep.n_ways; ++w)
    for (std::size_t s = 0; s < ep.k_shots; ++s) out[w].push_back(feats[w * ep.k_shots + s]);
  return out;
}

/// Builds the multi-task loss graph for one episode. Returns the scalar loss
/// and the breakdown of its components.
template <class T>
std::pair<Tensor<T>, LossBreakdown> episode_loss(const TrainState<T>& state, const Episode& ep) {
  std::vector<SynthImage> rotated;
  std::vector<LabelBundle> labels;
  rotate_queries(ep.queries, ep.labels, rotated, labels);

  std::vector<const SynthImage*> images;
  for (const auto& shots : ep.support)
    for (const auto& s : shots) images.push_back(&s);
  for (const auto& q : rotated) images.push_back(&q);
  const auto feats = embed(state, images);
  const std::vector<FeatureMap<T>> support_feats(feats.begin(), feats.begin() + static_cast<std::ptrdiff_t>(ep.support_size()));
  const auto prototypes = compute_prototypes(group_support(ep, support_feats));

  std::vector<Tensor<T>> probs;
  std::vector<FeatureMap<T>> conditioned;
  std::vector<std::size_t> fewshot;
  for (std::size_t i = 0; i < rotated.size(); ++i) {
    auto [p, qbars] = classify_query(state, feats[ep.support_size() + i], prototypes);
    probs.push_back(std::move(p));
    conditioned.push_back(qbars[labels[i].fewshot]);
    fewshot.push_back(labels[i].fewshot);
  }
  auto lm = metric_loss(probs, fewshot);
  auto [lg, lr] = aux_losses(conditioned, labels, state.w_global, state.w_rotation);
  auto total = multitask_loss(lm, lg, lr, state.task);
  LossBreakdown b{static_cast<double>(total.item()), static_cast<double>(lm.item()), static_cast<double>(lg.item()),
                  static_cast<double>(lr.item()), static_cast<double>(state.task.alpha_global.item()),
                  static_cast<double>(state.task.alpha_rotation.item())};
  return {total, b};
}

/// One optimization step on `ep`: forward, backward, Adam update.
template <class T>
LossBreakdown base_train_step(TrainState<T>& state, const Episode& ep) {
  auto params = state.parameters();
  Adam<T>::zero_grad(params);
  auto [loss, breakdown] = episode_loss(state, ep);
  if (!std::isfinite(breakdown.total)) {
    throw TrainingError("non-finite loss at step " + std::to_string(state.step));
  }
  backward(loss);
  state.optimizer.step(params);
  Adam<T>::zero_grad(params);
  ++state.step;
  return breakdown;
}

struct EpisodeShape {
  std::size_t n_ways = 5;
  std::size_t k_shots = 1;
  std::size_t queries_per_class = 15;
};

/// Episode for training step `step`; the stream depends only on (seed, step).
inline Episode training_episode(const SyntheticDataset& data, const EpisodeShape& shape, std::uint64_t seed,
                                std::uint64_t step) {
  std::mt19937_64 rng(mix_seed(seed, 0x7a11, step));
  return sample_episode(data, shape.n_ways, shape.k_shots, shape.n_ways * shape.queries_per_class, rng);
}

/// Runs `episodes` further training steps, calling `on_step` after each.
template <class T>
void train(TrainState<T>& state, const SyntheticDataset& data, const EpisodeShape& shape, std::size_t episodes,
           const std::function<void(std::uint64_t, const LossBreakdown&)>& on_step = {}) {
  for (std::size_t e = 0; e < episodes; ++e) {
    const auto ep = training_episode(data, shape, state.seed, state.step);
    const auto b = base_train_step(state, ep);
    if (on_step) on_step(state.step, b);
  }
}

// -------------------------------------------------------------- fine-tuning

template <class T>
struct FinetuneHead {
  ClusterParams<T> self_cecm;
  Tensor<T> w_f;  // [N × c]

  std::vector<Tensor<T>*> parameters() {
    auto out = self_cecm.parameters();
    out.push_back(&w_f);
    return out;
  }
};

struct FinetuneOptions {
  std::size_t steps = 50;
  double lr = 1e-2;
  std::uint64_t seed = 0;
};

template <class T>
Tensor<T> finetune_logits(const FinetuneHead<T>& head, const FeatureMap<T>& f) {
  return linear(self_cecm(f, head.self_cecm).values, head.w_f);
}

/// Trains a fresh Self-CECM + linear head on the episode's support items with
/// patch-wise cross-entropy. The embedding is evaluated without gradients and
/// is left untouched.
template <class T>
FinetuneHead<T> novel_finetune(const TrainState<T>& state, const Episode& ep, const FinetuneOptions& opt) {
  std::mt19937_64 rng(mix_seed(opt.seed, 0xf17e));
  const auto c = state.spec.channels;
  FinetuneHead<T> head{ClusterParams<T>::make(state.spec.self_cecm_mode, c, rng, static_cast<T>(state.spec.temperature),
                                              state.spec.gcn_activation),
                       EmbeddingBank<T>::template uniform_init<T>(Shape{ep.n_ways, c}, c, rng)};
  if (opt.steps == 0) return head;

  std::vector<const SynthImage*> images;
  std::vector<std::size_t> labels;
  for (std::size_t w = 0; w < ep.n_ways; ++w)
    for (const auto& s : ep.support[w]) {
      images.push_back(&s);
      labels.push_back(w);
    }
  std::vector<FeatureMap<T>> feats;
  {
    NoGradGuard frozen;
    feats = embed(state, images);
  }

  Adam<T> adam;
  adam.lr = opt.lr;
  auto params = head.parameters();
  for (std::size_t s = 0; s < opt.steps; ++s) {
    std::vector<Tensor<T>> logits;
    logits.reserve(feats.size());
    for (const auto& f : feats) logits.push_back(finetune_logits(head, f));
    auto loss = pce_loss(logits, labels);
    if (!all_finite(loss)) throw TrainingError("non-finite fine-tune loss");
    Adam<T>::zero_grad(params);
    backward(loss);
    adam.step(params);
  }
  Adam<T>::zero_grad(params);
  return head;
}

// ---------------------------------------------------------------- inference

struct Inference {
  std::vector<std::size_t> predictions;
  std::vector<std::vector<double>> y_metric;    // per query, N probabilities
  std::vector<std::vector<double>> y_finetune;  // empty without a head
  std::vector<std::vector<double>> y_combined;
};

inline std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

/// Y = Y_M + Y_F: patch-averaged metric probabilities plus the softmax of
/// patch-averaged fine-tune logits. Without a head, Y = Y_M.
template <class T>
Inference infer(const TrainState<T>& state, const FinetuneHead<T>* head, const Episode& ep) {
  NoGradGuard no_grad;
  std::vector<const SynthImage*> images;
  for (const auto& shots : ep.support)
    for (const auto& s : shots) images.push_back(&s);
  for (const auto& q : ep.queries) images.push_back(&q);
  const auto feats = embed(state, images);
  const std::vector<FeatureMap<T>> support_feats(feats.begin(), feats.begin() + static_cast<std::ptrdiff_t>(ep.support_size()));
  const auto prototypes = compute_prototypes(group_support(ep, support_feats));

  Inference out;
  for (std::size_t i = 0; i < ep.queries.size(); ++i) {
    const auto& q = feats[ep.support_size() + i];
    auto probs = classify_query(state, q, prototypes).first;
    auto ym = mean_rows(probs);
    std::vector<double> y_m(ym.data().begin(), ym.data().end());
    std::vector<double> y = y_m;
    if (head) {
      auto yf_t = softmax_rows(mean_rows(finetune_logits(*head, q)));
      std::vector<double> y_f(yf_t.data().begin(), yf_t.data().end());
      for (std::size_t k = 0; k < y.size(); ++k) y[k] += y_f[k];
      out.y_finetune.push_back(std::move(y_f));
    }
    out.predictions.push_back(argmax(y));
    out.y_metric.push_back(std::move(y_m));
    out.y_combined.push_back(std::move(y));
  }
  return out;
}

// --------------------------------------------------------------- evaluation

struct AccuracyReport {
  double mean = 0;  // percent
  double ci95 = 0;  // percent, 1.96 · standard error
  std::vector<double> per_episode;
};

inline AccuracyReport summarize(std::vector<double> accs) {
  AccuracyReport r;
  const double n = static_cast<double>(accs.size());
  if (accs.empty()) return r;
  for (double a : accs) r.mean += a;
  r.mean /= n;
  if (accs.size() > 1) {
    double ss = 0;
    for (double a : accs) ss += (a - r.mean) * (a - r.mean);
    r.ci95 = 1.96 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  r.per_episode = std::move(accs);
  return r;
}

struct EvalOptions {
  std::size_t episodes = 500;
  EpisodeShape shape{5, 1, 15};
  std::uint64_t seed = 0;
  bool finetune = false;
  FinetuneOptions finetune_options;
  std::size_t threads = 0;  // 0: hardware concurrency
};

struct EvalReport {
  AccuracyReport metric;
  std::optional<AccuracyReport> combined;
};

/// Episode `i` of an evaluation run; each episode has its own stream.
inline Episode evaluation_episode(const SyntheticDataset& data, const EpisodeShape& shape, std::uint64_t seed, std::size_t i) {
  std::mt19937_64 rng(mix_seed(seed, 0xe7a1, i));
  return sample_episode(data, shape.n_ways, shape.k_shots, shape.n_ways * shape.queries_per_class, rng);
}

/// Runs `fn(i)` for i in [0, n) on a small pool; results land by index.
template <class F>
void parallel_for(std::size_t n, std::size_t threads, F&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, std::max<std::size_t>(n, 1));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (std::size_t t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < n; i += threads) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Generic episodic evaluation: `predict` returns one (metric, combined)
/// prediction pair per query.
using EpisodePredictor = std::function<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>(const Episode&, std::size_t)>;

inline EvalReport evaluate_with(const SyntheticDataset& data, const EvalOptions& opt, const EpisodePredictor& predict) {
  if (opt.episodes < 1) throw ParameterError("evaluate: need at least one episode");
  std::vector<double> metric(opt.episodes), combined(opt.episodes);
  parallel_for(opt.episodes, opt.threads, [&](std::size_t i) {
    const auto ep = evaluation_episode(data, opt.shape, opt.seed, i);
    const auto [pm, pc] = predict(ep, i);
    std::size_t hit_m = 0, hit_c = 0;
    for (std::size_t q = 0; q < ep.queries.size(); ++q) {
      hit_m += pm[q] == ep.labels[q].fewshot;
      hit_c += pc[q] == ep.labels[q].fewshot;
    }
    metric[i] = 100.0 * static_cast<double>(hit_m) / static_cast<double>(ep.queries.size());
    combined[i] = 100.0 * static_cast<double>(hit_c) / static_cast<double>(ep.queries.size());
  });
  EvalReport r;
  r.metric = summarize(std::move(metric));
  if (opt.finetune) r.combined = summarize(std::move(combined));
  return r;
}

template <class T>
EvalReport evaluate(const TrainState<T>& state, const SyntheticDataset& data, const EvalOptions& opt) {
  return evaluate_with(data, opt, [&](const Episode& ep, std::size_t i) {
    std::vector<std::size_t> metric_only, combined;
    if (opt.finetune) {
      auto fo = opt.finetune_options;
      fo.seed = mix_seed(opt.seed, 0xf7, i);
      const auto head = novel_finetune(state, ep, fo);
      const auto res = infer(state, &head, ep);
      combined = res.predictions;
      for (const auto& y : res.y_metric) metric_only.push_back(argmax(y));
    } else {
      metric_only = infer<T>(state, nullptr, ep).predictions;
      combined = metric_only;
    }
    return std::make_pair(metric_only, combined);
  });
}

// ------------------------------------------------------------ relation maps

/// R^Q of a query against a prototype, using the learned patch cluster of the
/// attention module (CECM), else the CECD one, else a parameter-free Cosine
/// cluster at the configured temperature.
template <class T>
RelationMap<T> query_relation_map(const TrainState<T>& state, const FeatureMap<T>& q, const FeatureMap<T>& p) {
  if (state.spec.attention == AttentionKind::Cecm) return relation_map(q, patch_cluster(q, p, state.cecm));
  if (state.spec.metric == MetricKind::Cecd) return relation_map(q, patch_cluster(q, p, state.cecd));
  ClusterParams<T> cosine;
  cosine.mode = ClusterMode::Cosine;
  cosine.temperature = static_cast<T>(state.spec.temperature);
  return relation_map(q, patch_cluster(q, p, cosine));
}

/// Fraction of each 5×5 grid cell covered by the object mask. Cell (i, j)
/// spans pixels [1 + 6i, 7 + 6i) × [1 + 6j, 7 + 6j) of a 32×32 image, the
/// region its max-pool window draws from.
inline std::vector<double> mask_coverage(const SynthImage& img) {
  if (img.height() != 32 || img.width() != 32) throw DimensionError("mask_coverage: expects a 32x32 image");
  std::vector<double> cover(kGridPatches, 0.0);
  for (std::size_t i = 0; i < kGridSide; ++i)
    for (std::size_t j = 0; j < kGridSide; ++j) {
      std::size_t on = 0;
      for (std::size_t y = 1 + 6 * i; y < 7 + 6 * i; ++y)
        for (std::size_t x = 1 + 6 * j; x < 7 + 6 * j; ++x) on += img.mask[y * 32 + x];
      cover[i * kGridSide + j] = static_cast<double>(on) / 36.0;
    }
  return cover;
}

struct LocalizationStats {
  double inside = 0;   // coverage-weighted mean of R^Q over the object
  double outside = 0;  // complement-weighted mean over the background
};

/// Coverage-weighted means of a 25-entry relation map inside and outside the mask.
template <class T>
LocalizationStats localization_contrast(const RelationMap<T>& r, const SynthImage& img) {
  if (r.size() != kGridPatches) throw DimensionError("localization_contrast: expects 25 relation scores");
  const auto cover = mask_coverage(img);
  double wi = 0, wo = 0, si = 0, so = 0;
  for (std::size_t n = 0; n < kGridPatches; ++n) {
    const double v = static_cast<double>(r.scores[n]);
    si += cover[n] * v;
    wi += cover[n];
    so += (1.0 - cover[n]) * v;
    wo += 1.0 - cover[n];
  }
  if (wi == 0 || wo == 0) throw DataError("localization_contrast: mask is empty or fills the frame");
  return {si / wi, so / wo};
}

}  // namespace cecnet
