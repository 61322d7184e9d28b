#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "crossgr/baselines.hpp"
#include "crossgr/checkpoint.hpp"
#include "crossgr/evaluation.hpp"
#include "crossgr/graph.hpp"
#include "crossgr/interactions.hpp"
#include "crossgr/model.hpp"
#include "crossgr/training.hpp"

#include "json.hpp"

namespace crossgr {

// Stable exit codes for scripting.
enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,     // config or parse errors
  kExitTraining = 3,   // training aborted
  kExitMismatch = 4,   // checkpoint/data mismatch
  kExitPartial = 5,    // comparison finished with failures
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

struct RunConfig {
  std::string name = "run";
  std::vector<std::pair<std::string, std::string>> data;  // (market, path), sorted
  std::string target_market;
  std::vector<std::string> source_markets;
  TrainConfig train;
  CrossGRConfig model;
  std::vector<int> eval_ks = {10};
  int eval_negatives = 99;
  bool eval_full_catalog = false;
  std::string out_dir = "runs/run";
  std::uint64_t seed = 42;

  int effective_eval_negatives() const {
    return eval_full_catalog ? kFullCatalog : eval_negatives;
  }

  const std::string& path_for(const std::string& market) const {
    for (const auto& [m, p] : data)
      if (m == market) return p;
    throw ConfigError("market not found in data map: " + market);
  }

  void validate() const {
    if (data.empty()) throw ConfigError("config: data map is empty");
    if (target_market.empty()) throw ConfigError("config: target_market is required");
    path_for(target_market);
    int target_mentions = 1;
    for (const auto& s : source_markets) {
      if (s == target_market) ++target_mentions;
      path_for(s);
    }
    if (target_mentions != 1)
      throw ConfigError("config: target market must appear exactly once");
    for (const auto& [market, path] : data)
      if (!std::filesystem::exists(path))
        throw ConfigError("config: data file for market " + market +
                          " does not exist: " + path);
    train.validate();
    model.validate();
    if (eval_negatives < 1) throw ConfigError("config: eval negatives must be >= 1");
    for (int k : eval_ks)
      if (k < 1) throw ConfigError("config: eval K must be >= 1");
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["name"] = name;
    for (const auto& [market, path] : data) j["data"][market] = path;
    j["target_market"] = target_market;
    j["source_markets"] = source_markets;
    j["seed"] = seed;
    j["out_dir"] = out_dir;
    j["train"] = {{"learning_rate", train.learning_rate},
                  {"batch_size", train.batch_size},
                  {"weight_decay", train.weight_decay},
                  {"negatives_per_positive", train.negatives_per_positive},
                  {"max_epochs", train.max_epochs},
                  {"patience", train.patience},
                  {"eval_every", train.eval_every},
                  {"model", train.model}};
    j["model"] = {{"latent_dim", model.latent_dim},
                  {"num_gin_layers", model.num_gin_layers},
                  {"gin_mlp_hidden", model.gin_mlp_hidden},
                  {"epsilon_init", model.epsilon_init},
                  {"aggregation", to_string(model.aggregation)},
                  {"scorer_hidden", model.scorer_hidden},
                  {"dropout", model.dropout}};
    j["eval"] = {{"k", eval_ks},
                 {"num_negatives", eval_negatives},
                 {"full_catalog", eval_full_catalog}};
    return j;
  }

  // Fingerprint of everything that shapes results; where outputs land and
  // what the run is called do not change the experiment.
  std::string digest() const {
    nlohmann::json j = to_json();
    j.erase("out_dir");
    j.erase("name");
    Fnv1a64 h;
    h.update(j.dump());
    return h.hex();
  }
};

inline RunConfig run_config_from_json(const nlohmann::json& j,
                                      std::ostream* warn = nullptr) {
  RunConfig cfg;
  try {
    cfg.name = j.value("name", cfg.name);
    if (!j.contains("data") || !j["data"].is_object())
      throw ConfigError("config: 'data' must map market labels to file paths");
    for (const auto& [market, path] : j["data"].items())
      cfg.data.push_back({market, path.get<std::string>()});
    std::sort(cfg.data.begin(), cfg.data.end());

    cfg.target_market = j.value("target_market", std::string{});
    if (j.contains("source_markets"))
      cfg.source_markets = j["source_markets"].get<std::vector<std::string>>();
    cfg.seed = j.value("seed", cfg.seed);
    cfg.out_dir = j.value("out_dir", cfg.out_dir);

    if (j.contains("train")) {
      const auto& t = j["train"];
      cfg.train.learning_rate = t.value("learning_rate", cfg.train.learning_rate);
      cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
      cfg.train.weight_decay = t.value("weight_decay", cfg.train.weight_decay);
      cfg.train.negatives_per_positive =
          t.value("negatives_per_positive", cfg.train.negatives_per_positive);
      cfg.train.max_epochs = t.value("max_epochs", cfg.train.max_epochs);
      cfg.train.patience = t.value("patience", cfg.train.patience);
      cfg.train.eval_every = t.value("eval_every", cfg.train.eval_every);
      cfg.train.model = t.value("model", cfg.train.model);
    }
    if (j.contains("model")) {
      const auto& m = j["model"];
      cfg.model.latent_dim = m.value("latent_dim", cfg.model.latent_dim);
      cfg.model.num_gin_layers = m.value("num_gin_layers", cfg.model.num_gin_layers);
      cfg.model.gin_mlp_hidden = m.value("gin_mlp_hidden", cfg.model.gin_mlp_hidden);
      cfg.model.epsilon_init = m.value("epsilon_init", cfg.model.epsilon_init);
      if (m.contains("aggregation"))
        cfg.model.aggregation = aggregation_from_string(m["aggregation"].get<std::string>());
      cfg.model.scorer_hidden = m.value("scorer_hidden", cfg.model.scorer_hidden);
      cfg.model.dropout = m.value("dropout", cfg.model.dropout);
      // accepted for config compatibility; pre-trained embedding import is
      // not part of this artifact
      for (const char* stub : {"embedding_user", "embedding_item"})
        if (m.contains(stub) && warn != nullptr)
          *warn << "warning: config key '" << stub << "' is a stub and is ignored\n";
    }
    if (j.contains("eval")) {
      const auto& e = j["eval"];
      if (e.contains("k")) cfg.eval_ks = e["k"].get<std::vector<int>>();
      cfg.eval_negatives = e.value("num_negatives", cfg.eval_negatives);
      cfg.eval_full_catalog = e.value("full_catalog", cfg.eval_full_catalog);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: malformed value: ") + e.what());
  }
  cfg.train.seed = cfg.seed;
  return cfg;
}

inline RunConfig load_run_config(const std::string& path, std::ostream* warn = nullptr) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: invalid JSON in " + path + ": " + e.what());
  }
  return run_config_from_json(j, warn);
}

// ---------------------------------------------------------------------------
// Shared pipeline: parse -> vocab -> merge -> split -> train graph
// ---------------------------------------------------------------------------

struct PreparedData {
  std::vector<InteractionSet> sets;  // target first, then sources in config order
  Vocab vocab;
  std::vector<MergedInteraction> merged;
  SplitDataset split;
  InteractionGraph graph;
};

inline PreparedData prepare_data(const RunConfig& cfg, std::ostream* warn = nullptr) {
  PreparedData d;
  d.sets.push_back(parse_interactions(cfg.path_for(cfg.target_market),
                                      cfg.target_market, warn));
  for (const auto& s : cfg.source_markets)
    d.sets.push_back(parse_interactions(cfg.path_for(s), s, warn));
  d.vocab = build_vocab(d.sets);
  std::vector<InteractionSet> sources(d.sets.begin() + 1, d.sets.end());
  d.merged = merge_markets(d.sets.front(), sources, d.vocab);
  d.split = split_leave_one_out(d.merged, cfg.target_market, d.vocab, cfg.seed);
  d.graph = build_graph(d.split.train, d.vocab.num_users(), d.vocab.num_items());
  return d;
}

// ---------------------------------------------------------------------------
// Stats serialization (Tables 1-2 shape)
// ---------------------------------------------------------------------------

inline nlohmann::json stats_to_json(const StatsReport& report) {
  nlohmann::json j;
  j["markets"] = nlohmann::json::array();
  for (const auto& m : report.markets) {
    nlohmann::json jm;
    jm["market"] = m.market;
    jm["users"] = m.users;
    jm["items"] = m.items;
    jm["interactions"] = m.interactions;
    jm["rating_mean"] = m.rating_mean;
    for (int b = 0; b < 5; ++b)
      jm["rating_histogram"][std::to_string(b + 1)] = m.rating_histogram[b];
    j["markets"].push_back(std::move(jm));
  }
  for (std::size_t a = 0; a < report.markets.size(); ++a) {
    nlohmann::json row;
    row["total"] = report.markets[a].items;
    for (std::size_t b = 0; b < report.markets.size(); ++b) {
      if (a == b) continue;
      row[report.markets[b].market] = report.overlap[a][b];
    }
    j["overlap"][report.markets[a].market] = std::move(row);
  }
  return j;
}

inline std::string stats_to_table(const StatsReport& report) {
  std::ostringstream out;
  out << std::left << std::setw(10) << "Dataset" << std::right << std::setw(10)
      << "Users" << std::setw(10) << "Items" << std::setw(15) << "Interactions"
      << std::setw(12) << "MeanRating" << '\n';
  for (const auto& m : report.markets) {
    out << std::left << std::setw(10) << m.market << std::right << std::setw(10)
        << m.users << std::setw(10) << m.items << std::setw(15) << m.interactions
        << std::setw(12) << std::fixed << std::setprecision(2) << m.rating_mean
        << '\n';
  }
  out << '\n';
  out << std::left << std::setw(10) << "Market" << std::right << std::setw(8) << "Total";
  for (const auto& m : report.markets) out << std::setw(8) << m.market;
  out << '\n';
  for (std::size_t a = 0; a < report.markets.size(); ++a) {
    out << std::left << std::setw(10) << report.markets[a].market << std::right
        << std::setw(8) << report.markets[a].items;
    for (std::size_t b = 0; b < report.markets.size(); ++b) {
      if (a == b)
        out << std::setw(8) << "-";
      else
        out << std::setw(8) << report.overlap[a][b];
    }
    out << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

namespace detail {

inline void ensure_out_dir(const RunConfig& cfg) {
  std::filesystem::create_directories(cfg.out_dir);
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << content;
}

inline std::string format_epoch_line(const EpochStats& s) {
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "epoch=%d\tloss=%.10f\tvalid_hr10=%.10f\tvalid_ndcg10=%.10f\n",
                s.epoch, s.loss, s.valid_hr10, s.valid_ndcg10);
  return std::string(buf);
}

// Similarity and debug scorers for kinds without trainable parameters.
inline BatchScorer make_untrained_scorer(const std::string& kind,
                                         const InteractionGraph& graph,
                                         std::uint64_t seed,
                                         std::vector<std::shared_ptr<SimilarityModel>>& keep) {
  if (kind == "itemcf") {
    auto m = std::make_shared<SimilarityModel>(SimilarityModel::Kind::Item, graph);
    keep.push_back(m);
    return [m](int u, const std::vector<int>& items) { return m->score_batch(u, items); };
  }
  if (kind == "usercf") {
    auto m = std::make_shared<SimilarityModel>(SimilarityModel::Kind::User, graph);
    keep.push_back(m);
    return [m](int u, const std::vector<int>& items) { return m->score_batch(u, items); };
  }
  if (kind == "random") return make_random_scorer(seed);
  throw ConfigError("unknown model kind: " + kind);
}

}  // namespace detail

// `stats`: parse every configured market, print and persist Tables 1-2.
inline int cmd_stats(const RunConfig& cfg, std::ostream& out = std::cout,
                     std::ostream& err = std::cerr) {
  try {
    std::vector<InteractionSet> sets;
    for (const auto& [market, path] : cfg.data)
      sets.push_back(parse_interactions(path, market, &err));
    const StatsReport report = compute_stats(sets);
    detail::ensure_out_dir(cfg);
    detail::write_text_file(cfg.out_dir + "/stats.json",
                            stats_to_json(report).dump(2) + "\n");
    out << stats_to_table(report);
    return kExitOk;
  } catch (const std::exception& e) {
    err << "stats: " << e.what() << '\n';
    return kExitConfig;
  }
}

// `train`: ingest -> graph -> fit; persists config snapshot, best checkpoint
// and the epoch log.
inline int cmd_train(const RunConfig& cfg, const std::string& model_kind,
                     std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  try {
    cfg.validate();
    if (!is_neural_kind(model_kind)) {
      err << "train: model kind '" << model_kind
          << "' has no trainable parameters (use compare or eval)\n";
      return kExitConfig;
    }

    PreparedData data = prepare_data(cfg, &err);
    auto model = make_neural_model(model_kind, data.graph, cfg.model, cfg.seed);

    detail::ensure_out_dir(cfg);
    detail::write_text_file(cfg.out_dir + "/config.json", cfg.to_json().dump(2) + "\n");

    std::ofstream epochs_log(cfg.out_dir + "/epochs.log");
    if (!epochs_log) throw std::runtime_error("cannot open epochs.log for writing");

    TrainConfig train_cfg = cfg.train;
    train_cfg.model = model_kind;
    const TrainState state =
        fit(*model, data.split, data.graph, train_cfg, [&](const EpochStats& s) {
          epochs_log << detail::format_epoch_line(s);
          char line[200];
          std::snprintf(line, sizeof(line),
                        "epoch %3d  loss %.6f  valid hr@10 %.4f  ndcg@10 %.4f  (%.0f ms)\n",
                        s.epoch, s.loss, s.valid_hr10, s.valid_ndcg10, s.wall_ms);
          out << line;
        });
    epochs_log.close();

    CheckpointMeta meta;
    meta.model_kind = model_kind;
    meta.vocab_digest = data.vocab.digest();
    meta.seed = cfg.seed;
    meta.config = cfg.to_json();
    save_checkpoint(cfg.out_dir + "/checkpoint.bin", state.best_params, meta);

    char summary[160];
    std::snprintf(summary, sizeof(summary),
                  "best epoch %d  valid ndcg@10 %.4f  hr@10 %.4f%s\n", state.best_epoch,
                  state.best_ndcg, state.best_hr,
                  state.stopped_early ? "  (early stop)" : "");
    out << summary;
    return kExitOk;
  } catch (const TrainingAbort& e) {
    err << "train: " << e.what() << '\n';
    return kExitTraining;
  } catch (const CheckpointMismatch& e) {
    err << "train: " << e.what() << '\n';
    return kExitMismatch;
  } catch (const std::exception& e) {
    err << "train: " << e.what() << '\n';
    return kExitConfig;
  }
}

// Rebuild a neural model from a checkpoint; refuses vocab mismatches.
inline std::unique_ptr<NeuralModel> model_from_checkpoint(const std::string& path,
                                                          const PreparedData& data) {
  CheckpointMeta meta;
  ParamStore params = load_checkpoint(path, &meta);
  require_matching_vocab(meta, data.vocab.digest(), path);

  CrossGRConfig model_cfg;
  if (meta.config.contains("model")) {
    RunConfig tmp = run_config_from_json(meta.config, nullptr);
    model_cfg = tmp.model;
  }
  auto model = make_neural_model(meta.model_kind, data.graph, model_cfg, meta.seed);
  load_params(*model, params);
  return model;
}

// `eval`: score checkpoints and/or parameter-free kinds on the test split.
inline int cmd_eval(const RunConfig& cfg, const std::vector<std::string>& models,
                    std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  try {
    cfg.validate();
    if (models.empty()) {
      err << "eval: no checkpoints or model kinds given\n";
      return kExitConfig;
    }
    PreparedData data = prepare_data(cfg, &err);
    const CandidateList candidates = build_candidates(
        data.split, HoldoutSplit::Test, cfg.effective_eval_negatives(),
        derive_seed(cfg.seed, 22));

    std::vector<std::shared_ptr<SimilarityModel>> keep_alive;
    std::vector<std::unique_ptr<NeuralModel>> keep_models;
    std::vector<std::pair<std::string, BatchScorer>> scorers;
    for (const auto& arg : models) {
      if (is_known_model_kind(arg) && !is_neural_kind(arg)) {
        scorers.push_back(
            {arg, detail::make_untrained_scorer(arg, data.graph, cfg.seed, keep_alive)});
      } else if (is_neural_kind(arg)) {
        err << "eval: neural kind '" << arg << "' needs a checkpoint path\n";
        return kExitConfig;
      } else {
        auto model = model_from_checkpoint(arg, data);
        scorers.push_back({model->kind(), model->scorer()});
        keep_models.push_back(std::move(model));
      }
    }

    const auto started = std::chrono::steady_clock::now();
    EvalReport report =
        compare_models(scorers, cfg.target_market, candidates, cfg.eval_ks);
    const double ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - started)
                          .count();
    for (auto& e : report.entries) {
      e.excluded_users = static_cast<int>(data.split.excluded_users.size());
      e.config_digest = cfg.digest();
      e.wall_ms = ms;
    }
    detail::ensure_out_dir(cfg);
    detail::write_text_file(cfg.out_dir + "/report.json", report.to_json().dump(2) + "\n");
    out << report.to_table();
    return kExitOk;
  } catch (const CheckpointMismatch& e) {
    err << "eval: " << e.what() << '\n';
    return kExitMismatch;
  } catch (const std::exception& e) {
    err << "eval: " << e.what() << '\n';
    return kExitConfig;
  }
}

// `compare`: train (or build) every requested kind on the identical split and
// candidate sets, then emit one table. Failures keep the survivors' table.
inline int cmd_compare(const RunConfig& cfg, const std::vector<std::string>& kinds,
                       std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  try {
    cfg.validate();
    if (kinds.empty()) {
      err << "compare: no model kinds given\n";
      return kExitConfig;
    }
    for (const auto& kind : kinds)
      if (!is_known_model_kind(kind)) {
        err << "compare: unknown model kind '" << kind << "'\n";
        return kExitConfig;
      }

    PreparedData data = prepare_data(cfg, &err);
    const CandidateList candidates = build_candidates(
        data.split, HoldoutSplit::Test, cfg.effective_eval_negatives(),
        derive_seed(cfg.seed, 22));

    std::vector<std::shared_ptr<SimilarityModel>> keep_alive;
    std::vector<std::pair<std::string, BatchScorer>> scorers;
    bool any_failed = false;
    for (const auto& kind : kinds) {
      try {
        if (is_neural_kind(kind)) {
          auto model = make_neural_model(kind, data.graph, cfg.model, cfg.seed);
          TrainConfig train_cfg = cfg.train;
          train_cfg.model = kind;
          TrainState state = fit(*model, data.split, data.graph, train_cfg);
          load_params(*model, state.best_params);
          out << "fitted " << kind << " (best epoch " << state.best_epoch << ")\n";
          scorers.push_back({kind, model->scorer()});
        } else {
          scorers.push_back(
              {kind, detail::make_untrained_scorer(kind, data.graph, cfg.seed, keep_alive)});
        }
      } catch (const std::exception& e) {
        err << "compare: model '" << kind << "' failed: " << e.what() << '\n';
        any_failed = true;
      }
    }

    EvalReport report =
        compare_models(scorers, cfg.target_market, candidates, cfg.eval_ks);
    for (auto& e : report.entries) {
      e.excluded_users = static_cast<int>(data.split.excluded_users.size());
      e.config_digest = cfg.digest();
    }
    detail::ensure_out_dir(cfg);
    detail::write_text_file(cfg.out_dir + "/report.json", report.to_json().dump(2) + "\n");
    out << report.to_table();
    return any_failed ? kExitPartial : kExitOk;
  } catch (const std::exception& e) {
    err << "compare: " << e.what() << '\n';
    return kExitConfig;
  }
}

}  // namespace crossgr
