// cecnet: train, evaluate, ablate and inspect CEC few-shot models on the
// synthetic benchmark.
//
//   cecnet train   --config base.json [--seed N] [--out DIR] [--episodes N] [--resume CKPT]
//   cecnet eval    --config base.json --checkpoint DIR/ckpt.cec1 [--finetune]
//   cecnet ablate  --config base.json [--no-loss-grid]
//   cecnet export-relation --checkpoint CKPT [--episode-seed N]
//
// Exit codes: 0 success, 2 configuration or I/O problem, 3 numeric failure.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cecnet/commands.hpp"

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> episodes;
  std::optional<std::string> precision;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "override the run seed");
  cmd->add_option("--out", c.out, "override the output directory");
  cmd->add_option("--episodes", c.episodes, "override the episode count (training for train/ablate, evaluation for eval)");
  cmd->add_option("--precision", c.precision, "f32 or f64")->check(CLI::IsMember({"f32", "f64"}));
}

cecnet::RunConfig resolve(const Common& c, bool eval_episodes) {
  cecnet::RunConfig cfg = c.config_path.empty() ? cecnet::RunConfig{} : cecnet::load_config(c.config_path);
  if (c.seed) cfg.seed = *c.seed;
  if (c.out) cfg.out_dir = *c.out;
  if (c.precision) cfg.precision = *c.precision;
  if (c.episodes) (eval_episodes ? cfg.eval_episodes : cfg.train_episodes) = *c.episodes;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Clustered-patch element connection few-shot toolkit"};
  app.require_subcommand(1);

  Common train_opts, eval_opts, ablate_opts, export_opts;
  std::optional<std::string> resume, eval_ckpt, export_ckpt;
  bool finetune = false, no_loss_grid = false;
  std::uint64_t episode_seed = 0;

  auto* train = app.add_subcommand("train", "base training; writes ckpt.cec1 and train_metrics.csv");
  add_common(train, train_opts);
  train->add_option("--resume", resume, "continue from a checkpoint")->check(CLI::ExistingFile);

  auto* eval = app.add_subcommand("eval", "episodic evaluation on the novel classes");
  add_common(eval, eval_opts);
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint to evaluate")->required();
  eval->add_flag("--finetune", finetune, "fine-tune a Self-CECM head per episode and report Y_M and Y_M + Y_F");

  auto* ablate = app.add_subcommand("ablate", "attention x metric grid and loss-weight grid");
  add_common(ablate, ablate_opts);
  ablate->add_flag("--no-loss-grid", no_loss_grid, "skip the loss-weight rows");

  auto* exp = app.add_subcommand("export-relation", "write R^Q of one query as PGM/CSV plus the query and its mask");
  add_common(exp, export_opts);
  exp->add_option("--checkpoint", export_ckpt, "trained checkpoint")->required();
  exp->add_option("--episode-seed", episode_seed, "seed of the sampled novel episode");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*train) {
      cecnet::cmd_train(resolve(train_opts, false), resume ? std::optional<cecnet::fs::path>(*resume) : std::nullopt,
                        std::cout, std::cerr);
    } else if (*eval) {
      cecnet::cmd_eval(resolve(eval_opts, true), *eval_ckpt, finetune, std::cout);
    } else if (*ablate) {
      cecnet::cmd_ablate(resolve(ablate_opts, false), !no_loss_grid, std::cout, std::cerr);
    } else if (*exp) {
      cecnet::cmd_export_relation(resolve(export_opts, false), *export_ckpt, episode_seed, std::cout);
    }
  } catch (const cecnet::TrainingError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const cecnet::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
