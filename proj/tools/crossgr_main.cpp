#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "crossgr/cli.hpp"

#include "CLI11.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::int64_t seed = -1;
  std::string model;
  int latent_dim = 0;
  int num_negative = 0;
  std::string out_dir;
};

void add_common(CLI::App* sub, CommonFlags& flags) {
  sub->add_option("--config", flags.config_path, "run configuration file (JSON)")
      ->required();
  sub->add_option("--seed", flags.seed, "override the config seed");
  sub->add_option("--model", flags.model, "model kind");
  sub->add_option("--latent-dim", flags.latent_dim, "override latent dimension");
  sub->add_option("--num-negative", flags.num_negative,
                  "override negatives per positive");
  sub->add_option("--out", flags.out_dir, "override output directory");
}

crossgr::RunConfig load_with_overrides(const CommonFlags& flags) {
  crossgr::RunConfig cfg = crossgr::load_run_config(flags.config_path, &std::cerr);
  if (flags.seed >= 0) {
    cfg.seed = static_cast<std::uint64_t>(flags.seed);
    cfg.train.seed = cfg.seed;
  }
  if (!flags.model.empty()) cfg.train.model = flags.model;
  if (flags.latent_dim > 0) cfg.model.latent_dim = flags.latent_dim;
  if (flags.num_negative > 0) cfg.train.negatives_per_positive = flags.num_negative;
  if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cross-market recommender: stats, training, evaluation, comparison"};
  app.require_subcommand(1);

  CommonFlags stats_flags, train_flags, eval_flags, compare_flags;
  std::vector<std::string> eval_models;
  std::vector<std::string> compare_kinds;

  CLI::App* stats = app.add_subcommand("stats", "dataset statistics and item overlaps");
  add_common(stats, stats_flags);

  CLI::App* train = app.add_subcommand("train", "train one model, checkpoint the best state");
  add_common(train, train_flags);

  CLI::App* eval = app.add_subcommand("eval", "evaluate checkpoints or parameter-free kinds");
  add_common(eval, eval_flags);
  eval->add_option("models", eval_models,
                   "checkpoint paths and/or kinds (itemcf, usercf, random)");

  CLI::App* compare = app.add_subcommand("compare", "train and compare several model kinds");
  add_common(compare, compare_flags);
  compare->add_option("kinds", compare_kinds,
                      "model kinds (crossgr, gmf, mlp, nmf, itemcf, usercf)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : crossgr::kExitConfig;
  }

  try {
    if (stats->parsed()) return crossgr::cmd_stats(load_with_overrides(stats_flags));
    if (train->parsed()) {
      crossgr::RunConfig cfg = load_with_overrides(train_flags);
      return crossgr::cmd_train(cfg, cfg.train.model);
    }
    if (eval->parsed())
      return crossgr::cmd_eval(load_with_overrides(eval_flags), eval_models);
    if (compare->parsed())
      return crossgr::cmd_compare(load_with_overrides(compare_flags), compare_kinds);
  } catch (const crossgr::ConfigError& e) {
    std::cerr << e.what() << '\n';
    return crossgr::kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return crossgr::kExitConfig;
  }
  return crossgr::kExitConfig;
}
