// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "checks.hpp"
#include "cecnet/commands.hpp"

namespace cecnet {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

constexpr std::uint64_t kSeeds[] = {1, 2, 3};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  if (!pass) ++failures;
  std::printf("[%d] %-22s %s  %s\n", id, name.c_str(), pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
}

void oracle_criterion() {
  const auto t0 = Clock::now();
  bool pass = true;
  double worst = 0;
  for (auto op : oracle::kAllOps) {
    const auto c = checks::oracle_equivalence(op, 200, 0x0a11 + static_cast<std::uint64_t>(op));
    pass = pass && c.pass;
    worst = std::max(worst, c.max_abs_err);
    if (!c.pass) std::printf("    %s max_abs_err=%.3g\n", c.name.c_str(), c.max_abs_err);
  }
  const double secs = seconds_since(t0);
  report(1, "oracle-equivalence", pass && secs < 60,
         "ops=" + std::to_string(std::size(oracle::kAllOps)) + " instances=200 worst_abs=" + fmt(worst, "%.3g") +
             " time=" + fmt(secs, "%.1f") + "s");
}

void gradient_criterion() {
  const auto t0 = Clock::now();
  const auto results = checks::gradient_suite(20, 2024);
  bool pass = !results.empty();
  double worst = 0;
  for (const auto& c : results) {
    pass = pass && c.pass;
    worst = std::max(worst, c.max_rel_err);
    if (!c.pass) std::printf("    %s max_rel_err=%.3g\n", c.name.c_str(), c.max_rel_err);
  }
  const double secs = seconds_since(t0);
  report(2, "gradient-suite", pass && secs < 120,
         "checks=" + std::to_string(results.size()) + " worst_rel=" + fmt(worst, "%.3g") + " time=" + fmt(secs, "%.1f") +
             "s");
}

void invariant_criterion() {
  const auto results = checks::invariant_suite(200, 77);
  bool pass = !results.empty();
  for (const auto& c : results) {
    pass = pass && c.pass;
    if (!c.pass) std::printf("    %s violated (err=%.3g)\n", c.name.c_str(), c.max_abs_err);
  }
  report(3, "invariants", pass, "properties=" + std::to_string(results.size()) + " cases=200 each");
}

RunConfig ablation_config(const std::string& attention, const std::string& metric, std::uint64_t seed) {
  RunConfig c;
  c.attention = attention;
  c.metric = metric;
  c.cecm_mode = "matmul";
  c.cecd_mode = "cosine";
  c.cecd_temperature = 0.1;
  c.seed = seed;
  return c;
}

struct Trained {
  RunConfig cfg;
  TrainState<double> state;
  double acc = 0;
};

Trained train_and_eval(const RunConfig& cfg) {
  auto state = TrainState<double>::make(cfg.model_spec(), cfg.seed);
  train(state, cfg.base_data(), cfg.train_shape(), cfg.train_episodes);
  const double acc = evaluate(state, cfg.novel_data(), cfg.eval_options(false)).metric.mean;
  return {cfg, std::move(state), acc};
}

double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0 : s / static_cast<double>(v.size());
}

std::string joined(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : "/") + fmt(x, "%.2f");
  return s;
}

/// Returns the trained CEC models, one per seed.
std::vector<Trained> ablation_criterion() {
  const auto t0 = Clock::now();
  std::vector<double> base, cross, cec;
  std::vector<Trained> models;
  for (auto seed : kSeeds) {
    base.push_back(train_and_eval(ablation_config("none", "cosine", seed)).acc);
    cross.push_back(train_and_eval(ablation_config("cross", "cosine", seed)).acc);
    models.push_back(train_and_eval(ablation_config("cecm", "cecd", seed)));
    cec.push_back(models.back().acc);
    std::printf("    seed %llu: none+cosine %.2f  cross+cosine %.2f  CECM(M)+CECD(C) %.2f\n",
                static_cast<unsigned long long>(seed), base.back(), cross.back(), cec.back());
    std::fflush(stdout);
  }
  const double b = mean(base), x = mean(cross), c = mean(cec);
  const double secs = seconds_since(t0);
  report(4, "directional-ablation", b + 2.0 <= c && x <= c && secs < 20 * 60,
         "none+cosine=" + fmt(b, "%.2f") + " cross+cosine=" + fmt(x, "%.2f") + " CECM(M)+CECD(C)=" + fmt(c, "%.2f") +
             " time=" + fmt(secs / 60, "%.1f") + "min");
  return models;
}

void finetune_criterion(const std::vector<Trained>& models) {
  std::vector<double> metric, combined;
  for (const auto& m : models) {
    RunConfig cfg = m.cfg;
    cfg.k_shot = 5;
    const auto r = evaluate(m.state, cfg.novel_data(), cfg.eval_options(true));
    metric.push_back(r.metric.mean);
    combined.push_back(r.combined->mean);
  }
  const double ym = mean(metric), yc = mean(combined);
  report(5, "finetune-5shot", yc >= ym - 0.5,
         "Y_M=" + fmt(ym, "%.2f") + " (" + joined(metric) + ") Y_M+Y_F=" + fmt(yc, "%.2f") + " (" + joined(combined) +
             ")");
}

/// Episodes where mean R^Q inside the object mask beats the outside mean.
/// Episode i is the one `export-relation --episode-seed i` draws.
std::size_t localization_wins(const Trained& m, std::size_t episodes) {
  const auto novel = m.cfg.novel_data();
  NoGradGuard no_grad;
  std::size_t wins = 0;
  for (std::uint64_t i = 0; i < episodes; ++i) {
    std::mt19937_64 rng(i);
    const auto ep = sample_episode(novel, m.cfg.n_way, m.cfg.k_shot, m.cfg.n_way, rng);
    const auto& query = ep.queries.front();
    std::vector<const SynthImage*> images;
    for (const auto& s : ep.support[ep.labels.front().fewshot]) images.push_back(&s);
    images.push_back(&query);
    const auto feats = embed(m.state, images);
    std::vector<std::vector<FeatureMap<double>>> support{std::vector<FeatureMap<double>>(feats.begin(), feats.end() - 1)};
    const auto proto = compute_prototypes(support).front();
    const auto s = localization_contrast(query_relation_map(m.state, feats.back(), proto), query);
    if (s.inside > s.outside) ++wins;
  }
  return wins;
}

// Measured on the default-seed checkpoint; the other seeds are reported alongside.
void localization_criterion(const std::vector<Trained>& models) {
  std::string detail;
  std::size_t primary = 0;
  for (const auto& m : models) {
    const auto wins = localization_wins(m, 100);
    if (m.cfg.seed == RunConfig{}.seed) primary = wins;
    detail += " seed" + std::to_string(m.cfg.seed) + "=" + std::to_string(wins) + "/100";
  }
  report(6, "localization", primary >= 80, "default-seed wins=" + std::to_string(primary) + "/100;" + detail);
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void determinism_criterion() {
  const auto root = fs::temp_directory_path() / "cecnet_acceptance";
  fs::remove_all(root);
  std::ostringstream sink;
  auto run = [&](const std::string& sub, std::size_t episodes, const std::optional<fs::path>& resume) {
    RunConfig c;
    c.out_dir = (root / sub).string();
    c.train_episodes = episodes;
    return train_command<double>(c, resume, sink);
  };

  run("a", 100, std::nullopt);
  run("b", 100, std::nullopt);
  const bool same_runs = read_bytes(root / "a" / "train_metrics.csv") == read_bytes(root / "b" / "train_metrics.csv") &&
                         read_bytes(root / "a" / "ckpt.cec1") == read_bytes(root / "b" / "ckpt.cec1");

  run("r", 50, std::nullopt);
  run("r", 50, root / "r" / "ckpt.cec1");
  const bool resumed = read_bytes(root / "a" / "train_metrics.csv") == read_bytes(root / "r" / "train_metrics.csv") &&
                       read_bytes(root / "a" / "ckpt.cec1") == read_bytes(root / "r" / "ckpt.cec1");
  fs::remove_all(root);
  report(7, "determinism", same_runs && resumed,
         std::string("repeat_run=") + (same_runs ? "identical" : "differs") + " save@50+50=" +
             (resumed ? "identical" : "differs"));
}

}  // namespace
}  // namespace cecnet

int main() {
  using namespace cecnet;
  try {
    oracle_criterion();
    gradient_criterion();
    invariant_criterion();
    determinism_criterion();
    const auto models = ablation_criterion();
    finetune_criterion(models);
    localization_criterion(models);
  } catch (const std::exception& e) {
    std::printf("acceptance aborted: %s\n", e.what());
    return 2;
  }
  std::printf("%s (%d failing)\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
