#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "crossgr/graph.hpp"
#include "crossgr/model.hpp"

namespace crossgr {

// ---------------------------------------------------------------------------
// Neighborhood models
// ---------------------------------------------------------------------------

// Cosine similarity between two sorted id lists viewed as binary vectors:
// |x ∩ y| / (sqrt(|x|) * sqrt(|y|)), 0 when either is empty.
inline double cosine_similarity(const std::vector<int>& x, const std::vector<int>& y) {
  if (x.empty() || y.empty()) return 0.0;
  long long shared = 0;
  std::size_t i = 0, j = 0;
  while (i < x.size() && j < y.size()) {
    if (x[i] == y[j]) {
      ++shared;
      ++i;
      ++j;
    } else if (x[i] < y[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return static_cast<double>(shared) /
         (std::sqrt(static_cast<double>(x.size())) * std::sqrt(static_cast<double>(y.size())));
}

// ItemCF / UserCF over the binarized training graph. Immutable once built;
// scoring is pure.
class SimilarityModel {
 public:
  enum class Kind { Item, User };

  SimilarityModel(Kind kind, const InteractionGraph& graph, int k_nn = 50)
      : kind_(kind), graph_(&graph), k_nn_(k_nn) {
    if (k_nn_ < 1) throw std::invalid_argument("SimilarityModel: k_nn must be >= 1");
  }

  Kind kind() const { return kind_; }
  std::string name() const { return kind_ == Kind::Item ? "itemcf" : "usercf"; }

  // item-item or user-user depending on kind
  double similarity(int a, int b) const {
    if (kind_ == Kind::Item) return cosine_similarity(graph_->item_adj[a], graph_->item_adj[b]);
    return cosine_similarity(graph_->user_adj[a], graph_->user_adj[b]);
  }

  double score(int user, int item) const {
    return score_batch(user, {item})[0];
  }

  std::vector<double> score_batch(int user, const std::vector<int>& items) const {
    if (user < 0 || user >= graph_->num_users)
      throw std::invalid_argument("SimilarityModel: user out of range");
    for (int i : items)
      if (i < 0 || i >= graph_->num_items)
        throw std::invalid_argument("SimilarityModel: item out of range");
    return kind_ == Kind::Item ? itemcf_batch(user, items) : usercf_batch(user, items);
  }

  BatchScorer scorer() const {
    const SimilarityModel* self = this;
    return [self](int user, const std::vector<int>& items) {
      return self->score_batch(user, items);
    };
  }

  // The k_nn most similar users to `user` (self excluded), ordered by
  // similarity descending with ties broken by ascending user id. Only users
  // sharing at least one item can have nonzero similarity, so the zero-sim
  // rest never changes a score.
  std::vector<std::pair<int, double>> top_neighbors(int user) const {
    std::unordered_map<int, long long> co;
    for (int item : graph_->user_adj[user])
      for (int v : graph_->item_adj[item])
        if (v != user) ++co[v];

    std::vector<std::pair<int, double>> sims;
    sims.reserve(co.size());
    const double du = std::sqrt(static_cast<double>(graph_->user_adj[user].size()));
    for (const auto& [v, c] : co) {
      const double dv = std::sqrt(static_cast<double>(graph_->user_adj[v].size()));
      sims.push_back({v, static_cast<double>(c) / (du * dv)});
    }
    std::sort(sims.begin(), sims.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    if (static_cast<int>(sims.size()) > k_nn_) sims.resize(static_cast<std::size_t>(k_nn_));
    return sims;
  }

 private:
  std::vector<double> itemcf_batch(int user, const std::vector<int>& items) const {
    std::vector<double> scores;
    scores.reserve(items.size());
    const auto& rated = graph_->user_adj[user];
    for (int item : items) {
      double s = 0.0;
      for (int j : rated) s += similarity(item, j);
      scores.push_back(s);
    }
    return scores;
  }

  std::vector<double> usercf_batch(int user, const std::vector<int>& items) const {
    const auto neighbors = top_neighbors(user);
    std::vector<double> scores;
    scores.reserve(items.size());
    for (int item : items) {
      double s = 0.0;
      for (const auto& [v, sim] : neighbors)
        if (graph_->user_has_item(v, item)) s += sim;
      scores.push_back(s);
    }
    return scores;
  }

  Kind kind_;
  const InteractionGraph* graph_;
  int k_nn_;
};

inline double itemcf_score(const SimilarityModel& model, int user, int item) {
  return model.score(user, item);
}
inline double usercf_score(const SimilarityModel& model, int user, int item) {
  return model.score(user, item);
}

// ---------------------------------------------------------------------------
// Neural baselines, sharing the kernel and the trainer with CrossGR
// ---------------------------------------------------------------------------

namespace detail {

inline ParamStore init_baseline_embeddings(int num_users, int num_items, int d,
                                           std::uint64_t seed,
                                           std::vector<std::pair<std::string, std::pair<int, int>>> extra) {
  Rng rng(derive_seed(seed, /*stream=*/1));
  auto gaussian = [&](int r, int c) {
    Matrix m(r, c);
    for (double& v : m.values) v = rng.gaussian(0.0, 0.1);
    return m;
  };
  ParamStore store;
  store.add("user_embedding", gaussian(num_users, d));
  store.add("item_embedding", gaussian(num_items, d));
  for (const auto& [name, shape] : extra)
    store.add(name, gaussian(shape.first, shape.second));
  return store;
}

inline void check_pair_ids(int num_users, int num_items, const std::vector<int>& users,
                           const std::vector<int>& items) {
  if (users.size() != items.size())
    throw std::invalid_argument("baseline forward: id list lengths differ");
  for (int u : users)
    if (u < 0 || u >= num_users) throw std::invalid_argument("baseline: user out of range");
  for (int i : items)
    if (i < 0 || i >= num_items) throw std::invalid_argument("baseline: item out of range");
}

}  // namespace detail

// GMF: logit = h . (p_u ⊙ q_i), a linear kernel over the elementwise product.
class GmfModel final : public NeuralModel {
 public:
  GmfModel(int num_users, int num_items, int d, std::uint64_t seed)
      : num_users_(num_users), num_items_(num_items), d_(d),
        store_(detail::init_baseline_embeddings(num_users, num_items, d, seed,
                                                {{"gmf.h", {d, 1}}})) {}

  std::string kind() const override { return "gmf"; }
  ParamStore& store() override { return store_; }
  const ParamStore& store() const override { return store_; }

  Var logits(Tape& t, const std::vector<int>& users,
             const std::vector<int>& items) override {
    detail::check_pair_ids(num_users_, num_items_, users, items);
    Var p = embedding_rows(t, store_.at("user_embedding"), users);
    Var q = embedding_rows(t, store_.at("item_embedding"), items);
    return linear(t, mul_elem(t, p, q), store_.at("gmf.h"));
  }

  BatchScorer scorer() const override {
    Matrix users = store_.at("user_embedding").value;
    Matrix items = store_.at("item_embedding").value;
    Matrix h = store_.at("gmf.h").value;
    const int d = d_;
    return [users = std::move(users), items = std::move(items), h = std::move(h),
            d](int user, const std::vector<int>& ids) {
      if (user < 0 || user >= users.rows)
        throw std::invalid_argument("gmf scorer: user out of range");
      std::vector<double> scores;
      scores.reserve(ids.size());
      for (int item : ids) {
        if (item < 0 || item >= items.rows)
          throw std::invalid_argument("gmf scorer: item out of range");
        double z = 0.0;
        for (int k = 0; k < d; ++k)
          z += users.at(user, k) * items.at(item, k) * h.at(k, 0);
        scores.push_back(z);
      }
      return scores;
    };
  }

 private:
  int num_users_, num_items_, d_;
  ParamStore store_;
};

// MLP: concat(p_u, q_i) -> affine(2d -> 4d) -> ReLU -> affine(4d -> 1).
class MlpModel final : public NeuralModel {
 public:
  MlpModel(int num_users, int num_items, int d, std::uint64_t seed)
      : num_users_(num_users), num_items_(num_items), d_(d),
        store_(detail::init_baseline_embeddings(
            num_users, num_items, d, seed,
            {{"mlp.w1", {2 * d, 4 * d}}, {"mlp.b1", {1, 4 * d}},
             {"mlp.w2", {4 * d, 1}}, {"mlp.b2", {1, 1}}})) {}

  std::string kind() const override { return "mlp"; }
  ParamStore& store() override { return store_; }
  const ParamStore& store() const override { return store_; }

  Var logits(Tape& t, const std::vector<int>& users,
             const std::vector<int>& items) override {
    detail::check_pair_ids(num_users_, num_items_, users, items);
    Var p = embedding_rows(t, store_.at("user_embedding"), users);
    Var q = embedding_rows(t, store_.at("item_embedding"), items);
    Var x = concat_cols(t, p, q);
    Var a = relu(t, affine(t, x, store_.at("mlp.w1"), store_.at("mlp.b1")));
    return affine(t, a, store_.at("mlp.w2"), store_.at("mlp.b2"));
  }

  BatchScorer scorer() const override { return snapshot_scorer(*this); }

  // Shared by MlpModel and NmfModel. The closure must be a snapshot, so it
  // deep-copies the store instead of borrowing the live model.
  template <typename Model>
  static BatchScorer snapshot_scorer(const Model& m) {
    auto frozen = std::make_shared<Model>(m);
    return [frozen](int user, const std::vector<int>& ids) {
      Tape t;
      std::vector<int> u(ids.size(), user);
      Var z = frozen->logits(t, u, ids);
      const Matrix& zv = t.value(z);
      return std::vector<double>(zv.values.begin(), zv.values.end());
    };
  }

 private:
  int num_users_, num_items_, d_;
  ParamStore store_;
};

// NMF: fuses the GMF product path (d) with the MLP hidden activations (4d)
// through one affine(5d -> 1) head.
class NmfModel final : public NeuralModel {
 public:
  NmfModel(int num_users, int num_items, int d, std::uint64_t seed)
      : num_users_(num_users), num_items_(num_items), d_(d),
        store_(detail::init_baseline_embeddings(
            num_users, num_items, d, seed,
            {{"nmf.w1", {2 * d, 4 * d}}, {"nmf.b1", {1, 4 * d}},
             {"nmf.fuse_w", {5 * d, 1}}, {"nmf.fuse_b", {1, 1}}})) {}

  std::string kind() const override { return "nmf"; }
  ParamStore& store() override { return store_; }
  const ParamStore& store() const override { return store_; }

  Var logits(Tape& t, const std::vector<int>& users,
             const std::vector<int>& items) override {
    detail::check_pair_ids(num_users_, num_items_, users, items);
    Var p = embedding_rows(t, store_.at("user_embedding"), users);
    Var q = embedding_rows(t, store_.at("item_embedding"), items);
    Var product = mul_elem(t, p, q);
    Var x = concat_cols(t, p, q);
    Var hidden = relu(t, affine(t, x, store_.at("nmf.w1"), store_.at("nmf.b1")));
    Var fused = concat_cols(t, product, hidden);
    return affine(t, fused, store_.at("nmf.fuse_w"), store_.at("nmf.fuse_b"));
  }

  BatchScorer scorer() const override { return MlpModel::snapshot_scorer(*this); }

 private:
  int num_users_, num_items_, d_;
  ParamStore store_;
};

// ---------------------------------------------------------------------------
// Model registry
// ---------------------------------------------------------------------------

inline bool is_neural_kind(const std::string& kind) {
  return kind == "crossgr" || kind == "gmf" || kind == "mlp" || kind == "nmf";
}
inline bool is_similarity_kind(const std::string& kind) {
  return kind == "itemcf" || kind == "usercf";
}
inline bool is_known_model_kind(const std::string& kind) {
  return is_neural_kind(kind) || is_similarity_kind(kind) || kind == "random";
}

inline std::unique_ptr<NeuralModel> make_neural_model(const std::string& kind,
                                                      const InteractionGraph& graph,
                                                      const CrossGRConfig& cfg,
                                                      std::uint64_t seed) {
  if (kind == "crossgr") return std::make_unique<CrossGRModel>(graph, cfg, seed);
  if (kind == "gmf")
    return std::make_unique<GmfModel>(graph.num_users, graph.num_items, cfg.latent_dim, seed);
  if (kind == "mlp")
    return std::make_unique<MlpModel>(graph.num_users, graph.num_items, cfg.latent_dim, seed);
  if (kind == "nmf")
    return std::make_unique<NmfModel>(graph.num_users, graph.num_items, cfg.latent_dim, seed);
  throw std::invalid_argument("unknown neural model kind: " + kind);
}

// Seeded uniform scorer, useful as a calibration reference for the 1+99
// protocol (expected HR@10 is 0.10).
inline BatchScorer make_random_scorer(std::uint64_t seed) {
  return [seed](int user, const std::vector<int>& items) {
    std::vector<double> scores;
    scores.reserve(items.size());
    for (int item : items) {
      Rng rng(derive_seed(derive_seed(seed, static_cast<std::uint64_t>(user)),
                          static_cast<std::uint64_t>(item)));
      scores.push_back(rng.uniform());
    }
    return scores;
  };
}

}  // namespace crossgr
