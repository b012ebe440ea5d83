#pragma once

// Run configuration: one flat JSON object. Every key is optional (defaults
// below); unknown keys and out-of-range values are rejected before any
// computation starts.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "cecnet/harness.hpp"

namespace cecnet {

struct RunConfig {
  // dataset
  std::uint64_t dataset_seed = 7;
  std::string catalog_version = Catalog::kVersion;
  std::size_t images_per_class = 200;
  std::size_t image_size = 32;
  // episodes
  std::size_t n_way = 5;
  std::size_t k_shot = 1;
  std::size_t queries_per_class = 15;
  std::size_t train_queries_per_class = 1;
  std::size_t train_episodes = 3000;
  std::size_t eval_episodes = 500;
  // model
  std::string attention = "cecm";
  std::string cecm_mode = "transformer";
  std::string metric = "cecd";
  std::string cecd_mode = "cosine";
  std::string self_cecm_mode = "matmul";
  std::string gcn_activation = "relu";
  double temperature = 1.0;
  double cecd_temperature = 1.0;
  std::size_t channels = 32;
  bool use_cece = false;
  std::size_t cece_groups = 5;
  std::string cece_mode = "matmul";
  // objective
  double lambda = 1.0;
  std::string loss_weighting = "learned";
  double fixed_global_weight = 1.0;
  double fixed_rotation_weight = 1.0;
  // optimization
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double finetune_lr = 1e-2;
  std::size_t finetune_steps = 50;
  // run
  std::string precision = "f64";
  std::string out_dir = "out";
  std::uint64_t seed = 1;
  std::size_t eval_threads = 0;

  bool operator==(const RunConfig&) const = default;

  void validate() const {
    auto fail = [](const std::string& msg) { throw ConfigurationError(msg); };
    if (catalog_version != Catalog::kVersion) fail("catalog_version must be '" + std::string(Catalog::kVersion) + "'");
    if (image_size != 32) fail("image_size must be 32 (the encoder maps 32x32 inputs to a 5x5 grid)");
    if (n_way < 2) fail("n_way must be at least 2");
    if (n_way > Catalog::novel_classes().size()) fail("n_way exceeds the number of novel classes");
    if (k_shot < 1) fail("k_shot must be at least 1");
    if (queries_per_class < 1 || train_queries_per_class < 1) fail("query counts must be at least 1");
    if (images_per_class < k_shot + std::max(queries_per_class, train_queries_per_class)) {
      fail("images_per_class too small for k_shot + queries_per_class");
    }
    if (eval_episodes < 1) fail("eval_episodes must be at least 1");
    parse_attention(attention);
    parse_metric(metric);
    parse_cluster_mode(cecm_mode);
    parse_cluster_mode(cecd_mode);
    parse_cluster_mode(self_cecm_mode);
    parse_cluster_mode(cece_mode);
    parse_activation(gcn_activation);
    if (!(temperature > 0) || !(cecd_temperature > 0)) fail("temperatures must be positive");
    if (channels < 2) fail("channels must be at least 2");
    if (use_cece && cece_groups < 1) fail("cece_groups must be at least 1");
    if (!(lambda >= 0) || !std::isfinite(lambda)) fail("lambda must be finite and non-negative");
    if (loss_weighting != "learned" && loss_weighting != "fixed") fail("loss_weighting must be 'learned' or 'fixed'");
    if (!(fixed_global_weight >= 0) || !(fixed_rotation_weight >= 0)) fail("fixed weights must be non-negative");
    if (!(lr > 0) || !(finetune_lr > 0)) fail("learning rates must be positive");
    if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) fail("Adam betas must lie in [0, 1)");
    if (!(adam_eps > 0)) fail("adam_eps must be positive");
    if (precision != "f64" && precision != "f32") fail("precision must be 'f32' or 'f64'");
    if (out_dir.empty()) fail("out_dir must not be empty");
  }

  ModelSpec model_spec() const {
    ModelSpec s;
    s.attention = parse_attention(attention);
    s.cecm_mode = parse_cluster_mode(cecm_mode);
    s.metric = parse_metric(metric);
    s.cecd_mode = parse_cluster_mode(cecd_mode);
    s.self_cecm_mode = parse_cluster_mode(self_cecm_mode);
    s.gcn_activation = parse_activation(gcn_activation);
    s.temperature = temperature;
    s.cecd_temperature = cecd_temperature;
    s.channels = channels;
    s.base_classes = Catalog::base_classes().size();
    s.use_cece = use_cece;
    s.cece_groups = cece_groups;
    s.cece_mode = parse_cluster_mode(cece_mode);
    s.lambda = lambda;
    if (loss_weighting == "fixed") s.fixed_weights = std::make_pair(fixed_global_weight, fixed_rotation_weight);
    s.lr = lr;
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.adam_eps = adam_eps;
    return s;
  }

  SyntheticDataset base_data() const { return SyntheticDataset::base(dataset_seed, images_per_class, image_size); }
  SyntheticDataset novel_data() const { return SyntheticDataset::novel(dataset_seed, images_per_class, image_size); }
  EpisodeShape train_shape() const { return {n_way, k_shot, train_queries_per_class}; }

  EvalOptions eval_options(bool finetune) const {
    EvalOptions o;
    o.episodes = eval_episodes;
    o.shape = {n_way, k_shot, queries_per_class};
    o.seed = mix_seed(seed, 0xe7a1);
    o.finetune = finetune;
    o.finetune_options.steps = finetune_steps;
    o.finetune_options.lr = finetune_lr;
    o.threads = eval_threads;
    return o;
  }
};

inline nlohmann::json to_json(const RunConfig& c) {
  return {{"dataset_seed", c.dataset_seed},
          {"catalog_version", c.catalog_version},
          {"images_per_class", c.images_per_class},
          {"image_size", c.image_size},
          {"n_way", c.n_way},
          {"k_shot", c.k_shot},
          {"queries_per_class", c.queries_per_class},
          {"train_queries_per_class", c.train_queries_per_class},
          {"train_episodes", c.train_episodes},
          {"eval_episodes", c.eval_episodes},
          {"attention", c.attention},
          {"cecm_mode", c.cecm_mode},
          {"metric", c.metric},
          {"cecd_mode", c.cecd_mode},
          {"self_cecm_mode", c.self_cecm_mode},
          {"gcn_activation", c.gcn_activation},
          {"temperature", c.temperature},
          {"cecd_temperature", c.cecd_temperature},
          {"channels", c.channels},
          {"use_cece", c.use_cece},
          {"cece_groups", c.cece_groups},
          {"cece_mode", c.cece_mode},
          {"lambda", c.lambda},
          {"loss_weighting", c.loss_weighting},
          {"fixed_global_weight", c.fixed_global_weight},
          {"fixed_rotation_weight", c.fixed_rotation_weight},
          {"lr", c.lr},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"adam_eps", c.adam_eps},
          {"finetune_lr", c.finetune_lr},
          {"finetune_steps", c.finetune_steps},
          {"precision", c.precision},
          {"out_dir", c.out_dir},
          {"seed", c.seed},
          {"eval_threads", c.eval_threads}};
}

/// Parses and validates. Missing keys keep their defaults.
inline RunConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigurationError("config must be a JSON object");
  RunConfig c;
  const auto known = to_json(c);
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigurationError("unknown config key '" + key + "'");
    const auto& ref = known.at(key);
    const bool ok = (ref.is_string() && value.is_string()) || (ref.is_boolean() && value.is_boolean()) ||
                    (ref.is_number_unsigned() && value.is_number_unsigned()) ||
                    (ref.is_number_float() && value.is_number());
    if (!ok) throw ConfigurationError("config key '" + key + "' has the wrong type (expected " + ref.type_name() + ")");
  }
  auto read = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  read("dataset_seed", c.dataset_seed);
  read("catalog_version", c.catalog_version);
  read("images_per_class", c.images_per_class);
  read("image_size", c.image_size);
  read("n_way", c.n_way);
  read("k_shot", c.k_shot);
  read("queries_per_class", c.queries_per_class);
  read("train_queries_per_class", c.train_queries_per_class);
  read("train_episodes", c.train_episodes);
  read("eval_episodes", c.eval_episodes);
  read("attention", c.attention);
  read("cecm_mode", c.cecm_mode);
  read("metric", c.metric);
  read("cecd_mode", c.cecd_mode);
  read("self_cecm_mode", c.self_cecm_mode);
  read("gcn_activation", c.gcn_activation);
  read("temperature", c.temperature);
  read("cecd_temperature", c.cecd_temperature);
  read("channels", c.channels);
  read("use_cece", c.use_cece);
  read("cece_groups", c.cece_groups);
  read("cece_mode", c.cece_mode);
  read("lambda", c.lambda);
  read("loss_weighting", c.loss_weighting);
  read("fixed_global_weight", c.fixed_global_weight);
  read("fixed_rotation_weight", c.fixed_rotation_weight);
  read("lr", c.lr);
  read("beta1", c.beta1);
  read("beta2", c.beta2);
  read("adam_eps", c.adam_eps);
  read("finetune_lr", c.finetune_lr);
  read("finetune_steps", c.finetune_steps);
  read("precision", c.precision);
  read("out_dir", c.out_dir);
  read("seed", c.seed);
  read("eval_threads", c.eval_threads);
  c.validate();
  return c;
}

inline RunConfig parse_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigurationError(std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(j);
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

inline std::string serialize_config(const RunConfig& c) { return to_json(c).dump(2) + "\n"; }

}  // namespace cecnet
