#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "crossgr/evaluation.hpp"
#include "crossgr/graph.hpp"
#include "crossgr/model.hpp"
#include "crossgr/tape.hpp"

namespace crossgr {

struct TrainingAbort : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  double learning_rate = 0.01;
  int batch_size = 1024;
  double weight_decay = 1e-7;
  int negatives_per_positive = 4;
  int max_epochs = 100;
  int patience = 10;  // evaluations without improvement before stopping
  std::uint64_t seed = 42;
  int eval_every = 1;  // epochs between validation evaluations
  std::string model = "crossgr";

  void validate() const {
    if (learning_rate < 0.0) throw std::invalid_argument("learning_rate must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (weight_decay < 0.0) throw std::invalid_argument("weight_decay must be >= 0");
    if (negatives_per_positive < 1)
      throw std::invalid_argument("negatives_per_positive must be >= 1");
    if (max_epochs < 1) throw std::invalid_argument("max_epochs must be >= 1");
    if (patience < 1) throw std::invalid_argument("patience must be >= 1");
    if (patience > max_epochs) throw std::invalid_argument("patience must be <= max_epochs");
    if (eval_every < 1) throw std::invalid_argument("eval_every must be >= 1");
  }

  AdamConfig adam() const {
    AdamConfig a;
    a.learning_rate = learning_rate;
    a.weight_decay = weight_decay;
    return a;
  }
};

struct Batch {
  std::vector<int> users;
  std::vector<int> items;
  std::vector<double> labels;

  std::size_t size() const { return users.size(); }
};

struct EpochStats {
  int epoch = 0;
  double loss = 0.0;
  double valid_hr10 = 0.0;
  double valid_ndcg10 = 0.0;
  bool evaluated = false;
  double wall_ms = 0.0;
};

struct TrainState {
  int best_epoch = -1;
  double best_ndcg = -1.0;
  double best_hr = 0.0;
  ParamStore best_params;  // snapshot (values + optimizer state) at best_epoch
  std::vector<EpochStats> history;
  bool stopped_early = false;
};

// One epoch of label-1 positives interleaved with freshly sampled label-0
// negatives: positives are shuffled, each contributes itself plus
// negatives_per_positive draws from outside the user's training adjacency.
inline std::vector<Batch> make_batches(const std::vector<std::pair<int, int>>& train,
                                       const InteractionGraph& graph,
                                       const TrainConfig& cfg, Rng& rng) {
  if (train.empty()) throw std::invalid_argument("make_batches: no training pairs");

  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);

  std::vector<Batch> batches;
  Batch current;
  auto flush_if_full = [&]() {
    if (static_cast<int>(current.size()) >= cfg.batch_size) {
      batches.push_back(std::move(current));
      current = Batch{};
    }
  };
  for (std::size_t idx : order) {
    const auto& [u, i] = train[idx];
    current.users.push_back(u);
    current.items.push_back(i);
    current.labels.push_back(1.0);
    flush_if_full();
    const NegativeSample neg =
        sample_negatives(graph, u, cfg.negatives_per_positive, rng);
    for (int j : neg.items) {
      current.users.push_back(u);
      current.items.push_back(j);
      current.labels.push_back(0.0);
      flush_if_full();
    }
  }
  if (current.size() > 0) batches.push_back(std::move(current));
  return batches;
}

// Forward, backward, Adam per batch; returns the interaction-weighted mean
// loss. Aborts on a non-finite loss with enough context to find the batch.
inline double train_epoch(NeuralModel& model, const std::vector<Batch>& batches,
                          const AdamConfig& adam, int epoch = 0) {
  double weighted_loss = 0.0;
  std::size_t total_rows = 0;
  for (std::size_t b = 0; b < batches.size(); ++b) {
    const Batch& batch = batches[b];
    Tape tape;
    Var loss = loss_on_batch(tape, model, batch.users, batch.items, batch.labels);
    const double loss_value = tape.value(loss).values[0];
    if (!std::isfinite(loss_value))
      throw TrainingAbort("non-finite loss " + std::to_string(loss_value) +
                          " at epoch " + std::to_string(epoch) + ", batch " +
                          std::to_string(b));
    tape.backward(loss);
    model.store().adam_step(adam);
    weighted_loss += loss_value * static_cast<double>(batch.size());
    total_rows += batch.size();
  }
  return weighted_loss / static_cast<double>(total_rows);
}

using EpochCallback = std::function<void(const EpochStats&)>;

// Full optimization loop: epochs of negative-sampled batches, validation
// NDCG@10 monitoring, early stopping, best-state checkpointing.
inline TrainState fit(NeuralModel& model, const SplitDataset& split,
                      const InteractionGraph& graph, const TrainConfig& cfg,
                      const EpochCallback& on_epoch = nullptr) {
  cfg.validate();
  bool has_valid = false;
  for (int v : split.valid_item)
    if (v >= 0) has_valid = true;
  if (!has_valid) throw std::invalid_argument("fit: validation split is empty");

  const CandidateList valid_candidates =
      build_candidates(split, HoldoutSplit::Valid, 99, derive_seed(cfg.seed, 21));

  TrainState state;
  int evals_since_best = 0;
  const AdamConfig adam = cfg.adam();

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    Rng epoch_rng(derive_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(epoch)));
    const auto batches = make_batches(split.train, graph, cfg, epoch_rng);
    EpochStats stats;
    stats.epoch = epoch;
    stats.loss = train_epoch(model, batches, adam, epoch);

    if (epoch % cfg.eval_every == 0) {
      stats.evaluated = true;
      const std::vector<int> ranks = ranks_for_scorer(model.scorer(), valid_candidates);
      stats.valid_hr10 = hr_at_k(ranks, 10);
      stats.valid_ndcg10 = ndcg_at_k(ranks, 10);
      if (stats.valid_ndcg10 > state.best_ndcg) {
        state.best_ndcg = stats.valid_ndcg10;
        state.best_hr = stats.valid_hr10;
        state.best_epoch = epoch;
        state.best_params = model.store();
        evals_since_best = 0;
      } else {
        ++evals_since_best;
      }
    }
    stats.wall_ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - started)
                        .count();
    state.history.push_back(stats);
    if (on_epoch) on_epoch(stats);

    if (stats.evaluated && evals_since_best >= cfg.patience) {
      state.stopped_early = true;
      break;
    }
  }
  if (state.best_epoch < 0) {
    // eval_every never divided an epoch index; keep the final state
    state.best_epoch = cfg.max_epochs;
    state.best_params = model.store();
  }
  return state;
}

// Restore a snapshot into a live model (same architecture assumed).
inline void load_params(NeuralModel& model, const ParamStore& snapshot) {
  ParamStore& store = model.store();
  for (const Param& p : snapshot) {
    Param& dst = store.at(p.name);
    check_shape(dst.value.same_shape(p.value), "load_params: " + p.name);
    dst.value = p.value;
    dst.adam_m = p.adam_m;
    dst.adam_v = p.adam_v;
    dst.grad.fill(0.0);
  }
  store.set_step_count(snapshot.step_count());
}

}  // namespace crossgr
