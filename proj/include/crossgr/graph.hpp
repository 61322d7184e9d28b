#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "crossgr/rng.hpp"
#include "crossgr/tape.hpp"

namespace crossgr {

// Sparse bipartite interaction graph built from TRAIN pairs only. Stored as
// compressed adjacency lists from both sides; user_adj and item_adj are exact
// transposes of each other. Edge weights default to 1.0 (binarized).
struct InteractionGraph {
  int num_users = 0;
  int num_items = 0;
  std::vector<std::vector<int>> user_adj;       // per user: sorted item ids
  std::vector<std::vector<double>> user_weight; // parallel to user_adj
  std::vector<std::vector<int>> item_adj;       // per item: sorted user ids
  std::vector<std::vector<double>> item_weight; // parallel to item_adj

  int num_nodes() const { return num_users + num_items; }

  long long num_edges() const {
    long long n = 0;
    for (const auto& a : user_adj) n += static_cast<long long>(a.size());
    return n;
  }

  double user_degree(int u) const {
    double d = 0.0;
    for (double w : user_weight[u]) d += w;
    return d;
  }
  double item_degree(int i) const {
    double d = 0.0;
    for (double w : item_weight[i]) d += w;
    return d;
  }

  bool user_has_item(int u, int i) const {
    const auto& a = user_adj[u];
    return std::binary_search(a.begin(), a.end(), i);
  }
};

// Sum of incident edge weights per node, users and items separately.
struct DegreeVector {
  std::vector<double> user_degree;
  std::vector<double> item_degree;
};

// Per-edge normalized weights (weight / degree from that side), parallel to
// the graph's adjacency lists. The graph itself is never mutated.
struct EdgeWeights {
  std::vector<std::vector<double>> user_weight;
  std::vector<std::vector<double>> item_weight;
};

inline InteractionGraph build_graph(const std::vector<std::pair<int, int>>& train,
                                    int num_users, int num_items,
                                    const std::vector<double>* weights = nullptr) {
  if (weights != nullptr && weights->size() != train.size())
    throw std::invalid_argument("build_graph: weights length mismatch");

  InteractionGraph g;
  g.num_users = num_users;
  g.num_items = num_items;
  g.user_adj.assign(num_users, {});
  g.user_weight.assign(num_users, {});
  g.item_adj.assign(num_items, {});
  g.item_weight.assign(num_items, {});

  std::vector<std::vector<std::pair<int, double>>> per_user(num_users);
  for (std::size_t k = 0; k < train.size(); ++k) {
    const auto& [u, i] = train[k];
    if (u < 0 || u >= num_users || i < 0 || i >= num_items)
      throw std::invalid_argument("build_graph: id out of range (user " +
                                  std::to_string(u) + ", item " + std::to_string(i) + ")");
    per_user[u].push_back({i, weights ? (*weights)[k] : 1.0});
  }
  for (int u = 0; u < num_users; ++u) {
    auto& edges = per_user[u];
    std::sort(edges.begin(), edges.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t k = 1; k < edges.size(); ++k)
      if (edges[k].first == edges[k - 1].first)
        throw std::invalid_argument("build_graph: duplicate pair (user " +
                                    std::to_string(u) + ", item " +
                                    std::to_string(edges[k].first) + ")");
    for (const auto& [i, w] : edges) {
      g.user_adj[u].push_back(i);
      g.user_weight[u].push_back(w);
    }
  }
  // transpose side; iterating users in order keeps item lists sorted
  for (int u = 0; u < num_users; ++u)
    for (std::size_t k = 0; k < g.user_adj[u].size(); ++k) {
      g.item_adj[g.user_adj[u][k]].push_back(u);
      g.item_weight[g.user_adj[u][k]].push_back(g.user_weight[u][k]);
    }
  return g;
}

inline DegreeVector compute_degrees(const InteractionGraph& g) {
  DegreeVector d;
  d.user_degree.resize(g.num_users);
  d.item_degree.resize(g.num_items);
  for (int u = 0; u < g.num_users; ++u) d.user_degree[u] = g.user_degree(u);
  for (int i = 0; i < g.num_items; ++i) d.item_degree[i] = g.item_degree(i);
  return d;
}

// Row normalization from each node's own side: weight / degree. Isolated
// nodes simply emit no weights, so there is no division by zero.
inline EdgeWeights normalize_rows(const InteractionGraph& g) {
  EdgeWeights w;
  w.user_weight.assign(g.num_users, {});
  w.item_weight.assign(g.num_items, {});
  for (int u = 0; u < g.num_users; ++u) {
    const double d = g.user_degree(u);
    for (double ew : g.user_weight[u]) w.user_weight[u].push_back(ew / d);
  }
  for (int i = 0; i < g.num_items; ++i) {
    const double d = g.item_degree(i);
    for (double ew : g.item_weight[i]) w.item_weight[i].push_back(ew / d);
  }
  return w;
}

// Unified node space for the aggregation kernel: users occupy [0, num_users),
// items occupy [num_users, num_users + num_items).
inline NodeAdjacency unified_adjacency(const InteractionGraph& g,
                                       const EdgeWeights* normalized = nullptr) {
  NodeAdjacency adj(static_cast<std::size_t>(g.num_nodes()));
  for (int u = 0; u < g.num_users; ++u)
    for (std::size_t k = 0; k < g.user_adj[u].size(); ++k)
      adj[u].push_back({g.num_users + g.user_adj[u][k],
                        normalized ? normalized->user_weight[u][k] : g.user_weight[u][k]});
  for (int i = 0; i < g.num_items; ++i)
    for (std::size_t k = 0; k < g.item_adj[i].size(); ++k)
      adj[g.num_users + i].push_back(
          {g.item_adj[i][k],
           normalized ? normalized->item_weight[i][k] : g.item_weight[i][k]});
  return adj;
}

struct NegativeSample {
  std::vector<int> items;
  bool truncated = false;
};

// k items the user has no training edge to, uniform without replacement
// within one call. If fewer than k such items exist the whole pool comes
// back (ascending) with the truncation flag set.
inline NegativeSample sample_negatives(const InteractionGraph& g, int user, int k,
                                       Rng& rng) {
  if (k < 1) throw std::invalid_argument("sample_negatives: k must be >= 1");
  if (user < 0 || user >= g.num_users)
    throw std::invalid_argument("sample_negatives: user out of range");

  NegativeSample out;
  const auto& pos = g.user_adj[user];
  const int pool = g.num_items - static_cast<int>(pos.size());
  if (pool <= k) {
    out.truncated = true;
    out.items.reserve(static_cast<std::size_t>(std::max(pool, 0)));
    std::size_t p = 0;
    for (int i = 0; i < g.num_items; ++i) {
      while (p < pos.size() && pos[p] < i) ++p;
      if (p < pos.size() && pos[p] == i) continue;
      out.items.push_back(i);
    }
    return out;
  }

  if (2 * k >= pool) {
    // dense regime: materialize the complement and take a partial shuffle
    std::vector<int> complement;
    complement.reserve(static_cast<std::size_t>(pool));
    std::size_t p = 0;
    for (int i = 0; i < g.num_items; ++i) {
      while (p < pos.size() && pos[p] < i) ++p;
      if (p < pos.size() && pos[p] == i) continue;
      complement.push_back(i);
    }
    for (int j = 0; j < k; ++j) {
      const std::size_t pick = j + rng.below(complement.size() - j);
      std::swap(complement[j], complement[pick]);
      out.items.push_back(complement[j]);
    }
    return out;
  }

  std::vector<int> drawn;
  while (static_cast<int>(out.items.size()) < k) {
    const int candidate = rng.below_int(g.num_items);
    if (std::binary_search(pos.begin(), pos.end(), candidate)) continue;
    if (std::find(drawn.begin(), drawn.end(), candidate) != drawn.end()) continue;
    drawn.push_back(candidate);
    out.items.push_back(candidate);
  }
  return out;
}

// Debug dump: one `user<TAB>item<TAB>weight` line per edge.
inline void dump_edges(const InteractionGraph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("dump_edges: cannot open " + path);
  for (int u = 0; u < g.num_users; ++u)
    for (std::size_t k = 0; k < g.user_adj[u].size(); ++k)
      out << u << '\t' << g.user_adj[u][k] << '\t' << g.user_weight[u][k] << '\n';
}

}  // namespace crossgr
