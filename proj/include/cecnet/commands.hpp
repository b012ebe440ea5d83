#pragma once

// The train / eval / ablate / export-relation workflows behind the CLI.
// Commands report problems by throwing; the CLI maps ConfigurationError,
// IoError, DataError and ParameterError to exit code 2 and TrainingError to 3.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cecnet/checkpoint.hpp"
#include "cecnet/config.hpp"
#include "cecnet/image_io.hpp"

namespace cecnet {

namespace fs = std::filesystem;

inline std::string fmt(double v, const char* spec = "%.10g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

/// Calls f.template operator()<T>() with T = float for "f32", double otherwise.
template <class F>
decltype(auto) with_precision(const std::string& precision, F&& f) {
  if (precision == "f32") return f.template operator()<float>();
  return f.template operator()<double>();
}

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

inline std::string metrics_row(std::uint64_t step, const LossBreakdown& b) {
  return std::to_string(step) + "," + fmt(b.total) + "," + fmt(b.metric) + "," + fmt(b.global) + "," + fmt(b.rotation) +
         "," + fmt(b.alpha_global) + "," + fmt(b.alpha_rotation) + "\n";
}

// ------------------------------------------------------------------ train

struct TrainResult {
  std::uint64_t steps = 0;
  std::optional<LossBreakdown> last;
  fs::path checkpoint;
};

template <class T>
TrainResult train_command(const RunConfig& cfg, const std::optional<fs::path>& resume, std::ostream& log) {
  const fs::path out(cfg.out_dir);
  ensure_dir(out);
  auto state = resume ? load_checkpoint<T>(*resume) : TrainState<T>::make(cfg.model_spec(), cfg.seed);
  const auto data = cfg.base_data();
  const auto csv_path = out / "train_metrics.csv";
  const bool append = resume.has_value() && fs::exists(csv_path);
  std::ofstream csv(csv_path, append ? std::ios::app : std::ios::trunc);
  if (!csv) throw IoError("cannot open " + csv_path.string());
  if (!append) csv << "step,loss_total,loss_M,loss_G,loss_R,alpha_G,alpha_R\n";
  {
    std::ofstream(out / "config.json") << serialize_config(cfg);
  }

  TrainResult result;
  const auto start = state.step;
  try {
    train(state, data, cfg.train_shape(), cfg.train_episodes, [&](std::uint64_t step, const LossBreakdown& b) {
      csv << metrics_row(step, b);
      result.last = b;
      if (step % 500 == 0) log << "step " << step << " loss " << fmt(b.total, "%.4f") << "\n";
    });
  } catch (const TrainingError&) {
    csv.flush();
    save_checkpoint(out / "ckpt.diverged.cec1", state);
    throw;
  }
  csv.flush();
  if (!csv) throw IoError("write failed for " + csv_path.string());
  result.steps = state.step - start;
  result.checkpoint = out / "ckpt.cec1";
  save_checkpoint(result.checkpoint, state);
  return result;
}

inline TrainResult cmd_train(const RunConfig& cfg, const std::optional<fs::path>& resume, std::ostream& out,
                             std::ostream& log) {
  auto r = with_precision(cfg.precision, [&]<class T>() { return train_command<T>(cfg, resume, log); });
  out << "trained steps=" << r.steps;
  if (r.last) out << " loss=" << fmt(r.last->total, "%.6f");
  out << " checkpoint=" << r.checkpoint.string() << "\n";
  return r;
}

// ------------------------------------------------------------------- eval

inline std::string accuracy_line(const AccuracyReport& r) {
  return "acc=" + fmt(r.mean, "%.2f") + " ci95=" + fmt(r.ci95, "%.2f") + " episodes=" + std::to_string(r.per_episode.size());
}

inline EvalReport cmd_eval(const RunConfig& cfg, const fs::path& checkpoint, bool finetune, std::ostream& out) {
  if (!fs::exists(checkpoint)) throw IoError("checkpoint not found: " + checkpoint.string());
  const fs::path dir(cfg.out_dir);
  ensure_dir(dir);
  auto report = with_precision(cfg.precision, [&]<class T>() {
    const auto state = load_checkpoint<T>(checkpoint);
    return evaluate(state, cfg.novel_data(), cfg.eval_options(finetune));
  });
  std::ofstream csv(dir / "eval_episodes.csv", std::ios::trunc);
  if (!csv) throw IoError("cannot open " + (dir / "eval_episodes.csv").string());
  const auto& primary = report.combined ? *report.combined : report.metric;
  csv << "episode,acc\n";
  for (std::size_t i = 0; i < primary.per_episode.size(); ++i) csv << i << "," << fmt(primary.per_episode[i]) << "\n";
  if (report.combined) {
    out << "metric_only " << accuracy_line(report.metric) << "\n";
    out << "combined " << accuracy_line(*report.combined) << "\n";
  } else {
    out << accuracy_line(report.metric) << "\n";
  }
  return report;
}

// ----------------------------------------------------------------- ablate

struct AblationCell {
  std::string attn, metric;
  double acc = 0, ci95 = 0;
  std::size_t params = 0;
};

template <class T>
AblationCell run_cell(const RunConfig& cfg) {
  auto state = TrainState<T>::make(cfg.model_spec(), cfg.seed);
  train(state, cfg.base_data(), cfg.train_shape(), cfg.train_episodes);
  const auto r = evaluate(state, cfg.novel_data(), cfg.eval_options(false));
  return {attention_label(state.spec), metric_label(state.spec), r.metric.mean, r.metric.ci95, state.parameter_count()};
}

/// The 6 × 5 grid of attention modules × distance metrics.
inline std::vector<RunConfig> module_grid(const RunConfig& base) {
  std::vector<std::pair<std::string, std::string>> rows{{"none", ""}, {"cross", ""}};
  std::vector<std::pair<std::string, std::string>> cols{{"cosine", ""}};
  for (const char* m : {"matmul", "cosine", "metagcn", "transformer"}) {
    rows.emplace_back("cecm", m);
    cols.emplace_back("cecd", m);
  }
  std::vector<RunConfig> out;
  for (const auto& [attn, attn_mode] : rows)
    for (const auto& [metric, metric_mode] : cols) {
      RunConfig c = base;
      c.attention = attn;
      if (!attn_mode.empty()) c.cecm_mode = attn_mode;
      c.metric = metric;
      if (!metric_mode.empty()) c.cecd_mode = metric_mode;
      out.push_back(c);
    }
  return out;
}

/// Fixed-weight rows (metric 0.5; global, rotation ∈ {0, 1}) and learned rows λ ∈ {0.5, 1, 1.5, 2}.
inline std::vector<RunConfig> loss_grid(const RunConfig& base) {
  std::vector<RunConfig> out;
  for (auto [g, r] : {std::pair{0.0, 0.0}, {0.0, 1.0}, {1.0, 0.0}, {1.0, 1.0}}) {
    RunConfig c = base;
    c.loss_weighting = "fixed";
    c.fixed_global_weight = g;
    c.fixed_rotation_weight = r;
    out.push_back(c);
  }
  for (double lambda : {0.5, 1.0, 1.5, 2.0}) {
    RunConfig c = base;
    c.loss_weighting = "learned";
    c.lambda = lambda;
    out.push_back(c);
  }
  return out;
}

inline void cmd_ablate(const RunConfig& cfg, bool include_loss_grid, std::ostream& out, std::ostream& log) {
  const fs::path dir(cfg.out_dir);
  ensure_dir(dir);
  auto run = [&](const RunConfig& c) { return with_precision(c.precision, [&]<class T>() { return run_cell<T>(c); }); };

  std::ofstream csv(dir / "ablation.csv", std::ios::trunc);
  if (!csv) throw IoError("cannot open " + (dir / "ablation.csv").string());
  csv << "attn,metric,acc,ci95,params\n";
  for (const auto& c : module_grid(cfg)) {
    const auto cell = run(c);
    csv << cell.attn << "," << cell.metric << "," << fmt(cell.acc, "%.2f") << "," << fmt(cell.ci95, "%.2f") << ","
        << cell.params << "\n";
    csv.flush();
    log << cell.attn << " + " << cell.metric << ": " << fmt(cell.acc, "%.2f") << "\n";
  }
  out << "wrote " << (dir / "ablation.csv").string() << "\n";
  if (!include_loss_grid) return;

  std::ofstream loss_csv(dir / "ablation_loss.csv", std::ios::trunc);
  if (!loss_csv) throw IoError("cannot open " + (dir / "ablation_loss.csv").string());
  loss_csv << "lambda,metric_weight,global_weight,rotation_weight,acc,ci95\n";
  for (const auto& c : loss_grid(cfg)) {
    const auto cell = run(c);
    const bool fixed = c.loss_weighting == "fixed";
    loss_csv << (fixed ? "-" : fmt(c.lambda, "%.1f")) << ",0.5," << (fixed ? fmt(c.fixed_global_weight, "%.1f") : "w_G")
             << "," << (fixed ? fmt(c.fixed_rotation_weight, "%.1f") : "w_R") << "," << fmt(cell.acc, "%.2f") << ","
             << fmt(cell.ci95, "%.2f") << "\n";
    loss_csv.flush();
  }
  out << "wrote " << (dir / "ablation_loss.csv").string() << "\n";
}

// ---------------------------------------------------------- export-relation

struct RelationExport {
  std::vector<double> scores;  // 25 entries, row-major over the 5×5 grid
  std::size_t query_class = 0;
};

inline Image8 image_from_synth(const SynthImage& img) {
  Image8 out{img.width(), img.height(), 3, {}};
  out.pixels.resize(out.width * out.height * 3);
  const auto px = img.pixels.data();
  const auto hw = out.width * out.height;
  for (std::size_t p = 0; p < hw; ++p)
    for (std::size_t c = 0; c < 3; ++c) out.pixels[p * 3 + c] = unit_to_byte(px[c * hw + p]);
  return out;
}

inline Image8 mask_image(const SynthImage& img) {
  Image8 out{img.width(), img.height(), 1, {}};
  for (auto m : img.mask) out.pixels.push_back(m ? 255 : 0);
  return out;
}

/// Samples a novel episode from `episode_seed`, takes its first query and
/// writes R^Q against the query's own-class prototype.
inline RelationExport cmd_export_relation(const RunConfig& cfg, const fs::path& checkpoint, std::uint64_t episode_seed,
                                          std::ostream& out) {
  if (!fs::exists(checkpoint)) throw IoError("checkpoint not found: " + checkpoint.string());
  const fs::path dir(cfg.out_dir);
  ensure_dir(dir);
  std::mt19937_64 rng(episode_seed);
  const auto ep = sample_episode(cfg.novel_data(), cfg.n_way, cfg.k_shot, cfg.n_way, rng);
  const auto& query = ep.queries.front();
  RelationExport result;
  result.query_class = query.class_id;
  result.scores = with_precision(cfg.precision, [&]<class T>() {
    NoGradGuard no_grad;
    const auto state = load_checkpoint<T>(checkpoint);
    const std::size_t k = ep.labels.front().fewshot;
    std::vector<const SynthImage*> images;
    for (const auto& s : ep.support[k]) images.push_back(&s);
    images.push_back(&query);
    const auto feats = embed(state, images);
    std::vector<std::vector<FeatureMap<T>>> support{std::vector<FeatureMap<T>>(feats.begin(), feats.end() - 1)};
    const auto proto = compute_prototypes(support).front();
    const auto r = query_relation_map(state, feats.back(), proto);
    return std::vector<double>(r.scores.data().begin(), r.scores.data().end());
  });

  Image8 grid{kGridSide, kGridSide, 1, {}};
  for (double v : result.scores) grid.pixels.push_back(signed_unit_to_byte(v));
  write_pgm(dir / "relation.pgm", upsample_nearest(grid, 6));
  std::ofstream csv(dir / "relation.csv", std::ios::trunc);
  if (!csv) throw IoError("cannot open " + (dir / "relation.csv").string());
  for (std::size_t i = 0; i < kGridSide; ++i) {
    for (std::size_t j = 0; j < kGridSide; ++j) csv << (j ? "," : "") << fmt(result.scores[i * kGridSide + j]);
    csv << "\n";
  }
  write_png(dir / "query.png", image_from_synth(query));
  write_png(dir / "query_mask.png", mask_image(query));
  out << "exported relation map for class " << result.query_class << " to " << dir.string() << "\n";
  return result;
}

}  // namespace cecnet
