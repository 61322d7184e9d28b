#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "crossgr/evaluation.hpp"
#include "crossgr/graph.hpp"
#include "crossgr/tape.hpp"

namespace crossgr {

enum class Aggregation { Sum, RowNormalized };

inline std::string to_string(Aggregation a) {
  return a == Aggregation::Sum ? "sum" : "row-normalized";
}
inline Aggregation aggregation_from_string(const std::string& s) {
  if (s == "sum") return Aggregation::Sum;
  if (s == "row-normalized" || s == "row_normalized") return Aggregation::RowNormalized;
  throw std::invalid_argument("unknown aggregation mode: " + s);
}

struct CrossGRConfig {
  int latent_dim = 8;
  int num_gin_layers = 2;
  int gin_mlp_hidden = 0;   // 0 means latent_dim
  double epsilon_init = 0.0;
  Aggregation aggregation = Aggregation::Sum;
  int scorer_hidden = 0;    // 0 means 4 * latent_dim (double the concatenated width)
  double dropout = 0.0;

  int resolved_gin_hidden() const { return gin_mlp_hidden > 0 ? gin_mlp_hidden : latent_dim; }
  int resolved_scorer_hidden() const {
    return scorer_hidden > 0 ? scorer_hidden : 4 * latent_dim;
  }

  void validate() const {
    if (latent_dim < 1) throw std::invalid_argument("latent_dim must be >= 1");
    if (num_gin_layers < 0) throw std::invalid_argument("num_gin_layers must be >= 0");
    if (dropout < 0.0 || dropout >= 1.0)
      throw std::invalid_argument("dropout must be in [0, 1)");
  }
};

// Gaussian N(0, 0.1^2) everywhere; epsilon values start at epsilon_init.
// Creation order is fixed, so a seed fully determines the parameter store.
inline ParamStore init_crossgr_params(const CrossGRConfig& cfg, int num_users,
                                      int num_items, std::uint64_t seed) {
  cfg.validate();
  if (num_users < 1 || num_items < 1)
    throw std::invalid_argument("init_crossgr_params: empty vocabulary");

  Rng rng(derive_seed(seed, /*stream=*/1));
  auto gaussian = [&](int r, int c) {
    Matrix m(r, c);
    for (double& v : m.values) v = rng.gaussian(0.0, 0.1);
    return m;
  };

  const int d = cfg.latent_dim;
  const int hidden = cfg.resolved_gin_hidden();
  const int scorer_hidden = cfg.resolved_scorer_hidden();

  ParamStore store;
  store.add("user_embedding", gaussian(num_users, d));
  store.add("item_embedding", gaussian(num_items, d));
  for (int k = 0; k < cfg.num_gin_layers; ++k) {
    const std::string prefix = "gin" + std::to_string(k) + ".";
    store.add(prefix + "w1", gaussian(d, hidden));
    store.add(prefix + "b1", gaussian(1, hidden));
    store.add(prefix + "w2", gaussian(hidden, d));
    store.add(prefix + "b2", gaussian(1, d));
    store.add(prefix + "eps", Matrix(1, 1, cfg.epsilon_init));
  }
  store.add("scorer.w1", gaussian(2 * d, scorer_hidden));
  store.add("scorer.b1", gaussian(1, scorer_hidden));
  store.add("scorer.w2", gaussian(scorer_hidden, 1));
  store.add("scorer.b2", gaussian(1, 1));
  return store;
}

struct GinLayerParams {
  Param* w1;
  Param* b1;
  Param* w2;
  Param* b2;
  Param* eps;
};

// One GIN layer: (1 + eps) * H + neighbor aggregate, then the two-affine MLP
// with a ReLU in between.
inline Var gin_layer(Tape& t, Var h, const NodeAdjacency& adj,
                     const GinLayerParams& layer, double dropout_p = 0.0,
                     Rng* dropout_rng = nullptr) {
  Var agg = neighbor_sum(t, h, adj);
  Var z = gin_combine(t, h, agg, *layer.eps);
  Var a1 = relu(t, affine(t, z, *layer.w1, *layer.b1));
  if (dropout_p > 0.0 && dropout_rng != nullptr) a1 = dropout(t, a1, dropout_p, *dropout_rng);
  return affine(t, a1, *layer.w2, *layer.b2);
}

// Interface the trainer and evaluator consume. CrossGR and the neural
// baselines all sit behind it.
class NeuralModel {
 public:
  virtual ~NeuralModel() = default;
  virtual std::string kind() const = 0;
  virtual ParamStore& store() = 0;
  virtual const ParamStore& store() const = 0;
  // Training-mode forward for a batch of (user, item) pairs; returns n x 1 logits.
  virtual Var logits(Tape& t, const std::vector<int>& users,
                     const std::vector<int>& items) = 0;
  // Inference scorer over a frozen snapshot of the current parameters.
  virtual BatchScorer scorer() const = 0;
};

class CrossGRModel final : public NeuralModel {
 public:
  CrossGRModel(const InteractionGraph& graph, CrossGRConfig cfg, std::uint64_t seed)
      : graph_(&graph),
        cfg_(cfg),
        store_(init_crossgr_params(cfg, graph.num_users, graph.num_items, seed)),
        dropout_rng_(derive_seed(seed, /*stream=*/2)) {
    if (cfg_.aggregation == Aggregation::RowNormalized) {
      const EdgeWeights normalized = normalize_rows(graph);
      adj_ = unified_adjacency(graph, &normalized);
    } else {
      adj_ = unified_adjacency(graph);
    }
  }

  std::string kind() const override { return "crossgr"; }
  ParamStore& store() override { return store_; }
  const ParamStore& store() const override { return store_; }
  const CrossGRConfig& config() const { return cfg_; }
  const NodeAdjacency& adjacency() const { return adj_; }

  GinLayerParams layer_params(int k) {
    const std::string prefix = "gin" + std::to_string(k) + ".";
    return {&store_.at(prefix + "w1"), &store_.at(prefix + "b1"),
            &store_.at(prefix + "w2"), &store_.at(prefix + "b2"),
            &store_.at(prefix + "eps")};
  }

  // Stacked [user; item] embeddings through the GIN stack, a ReLU after every
  // layer. training=true enables dropout draws.
  Var encode(Tape& t, bool training = false) {
    Var h = stack_params(t, store_.at("user_embedding"), store_.at("item_embedding"));
    const double p = training ? cfg_.dropout : 0.0;
    for (int k = 0; k < cfg_.num_gin_layers; ++k) {
      h = relu(t, gin_layer(t, h, adj_, layer_params(k), p,
                            p > 0.0 ? &dropout_rng_ : nullptr));
      if (p > 0.0) h = dropout(t, h, p, dropout_rng_);
    }
    return h;
  }

  // concat(H[user], H[item + num_users]) -> affine -> ReLU -> affine -> logit.
  Var score_pairs(Tape& t, Var h, const std::vector<int>& users,
                  const std::vector<int>& items, bool training = false) {
    if (users.size() != items.size())
      throw std::invalid_argument("score_pairs: id list lengths differ");
    std::vector<int> item_nodes(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (items[i] < 0 || items[i] >= graph_->num_items)
        throw std::invalid_argument("score_pairs: item id out of range");
      item_nodes[i] = graph_->num_users + items[i];
    }
    for (int u : users)
      if (u < 0 || u >= graph_->num_users)
        throw std::invalid_argument("score_pairs: user id out of range");

    Var hu = gather_rows(t, h, users);
    Var hi = gather_rows(t, h, item_nodes);
    Var x = concat_cols(t, hu, hi);
    Var a = relu(t, affine(t, x, store_.at("scorer.w1"), store_.at("scorer.b1")));
    const double p = training ? cfg_.dropout : 0.0;
    if (p > 0.0) a = dropout(t, a, p, dropout_rng_);
    return affine(t, a, store_.at("scorer.w2"), store_.at("scorer.b2"));
  }

  Var logits(Tape& t, const std::vector<int>& users,
             const std::vector<int>& items) override {
    Var h = encode(t, /*training=*/true);
    return score_pairs(t, h, users, items, /*training=*/true);
  }

  // Single-pair inference probability; dropout disabled, nothing mutated.
  double predict(int user, int item) {
    Tape t;
    Var h = encode(t, /*training=*/false);
    Var z = score_pairs(t, h, {user}, {item}, /*training=*/false);
    return stable_sigmoid(t.value(z).values[0]);
  }

  // Encodes once up front; the returned closure owns value snapshots of the
  // node representations and the scorer head, so later training steps cannot
  // leak into an evaluation in flight.
  BatchScorer scorer() const override {
    auto* self = const_cast<CrossGRModel*>(this);
    Tape t;
    Var h = self->encode(t, /*training=*/false);
    Matrix hv = t.value(h);
    Matrix w1 = store_.at("scorer.w1").value;
    Matrix b1 = store_.at("scorer.b1").value;
    Matrix w2 = store_.at("scorer.w2").value;
    Matrix b2 = store_.at("scorer.b2").value;
    const int num_users = graph_->num_users;
    const int num_items = graph_->num_items;
    const int d = cfg_.latent_dim;

    return [hv = std::move(hv), w1 = std::move(w1), b1 = std::move(b1),
            w2 = std::move(w2), b2 = std::move(b2), num_users, num_items,
            d](int user, const std::vector<int>& items) {
      if (user < 0 || user >= num_users)
        throw std::invalid_argument("scorer: user id out of range");
      std::vector<double> scores;
      scores.reserve(items.size());
      std::vector<double> hidden(static_cast<std::size_t>(w1.cols));
      for (int item : items) {
        if (item < 0 || item >= num_items)
          throw std::invalid_argument("scorer: item id out of range");
        const double* hu = hv.row(user);
        const double* hi = hv.row(num_users + item);
        for (int c = 0; c < w1.cols; ++c) {
          double acc = b1.at(0, c);
          for (int k = 0; k < d; ++k) {
            acc += hu[k] * w1.at(k, c);
            acc += hi[k] * w1.at(d + k, c);
          }
          hidden[c] = acc > 0.0 ? acc : 0.0;
        }
        double z = b2.at(0, 0);
        for (int c = 0; c < w1.cols; ++c) z += hidden[c] * w2.at(c, 0);
        scores.push_back(z);
      }
      return scores;
    };
  }

 private:
  const InteractionGraph* graph_;
  CrossGRConfig cfg_;
  ParamStore store_;
  NodeAdjacency adj_;
  Rng dropout_rng_;
};

// Loss over a training batch: encode once, score every pair, mean BCE.
inline Var loss_on_batch(Tape& t, NeuralModel& model, const std::vector<int>& users,
                         const std::vector<int>& items,
                         const std::vector<double>& labels) {
  if (users.empty()) throw std::invalid_argument("loss_on_batch: empty batch");
  Var z = model.logits(t, users, items);
  return bce_mean(t, z, labels);
}

}  // namespace crossgr
