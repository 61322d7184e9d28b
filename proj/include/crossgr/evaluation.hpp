#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "crossgr/interactions.hpp"
#include "crossgr/rng.hpp"

#include "json.hpp"

namespace crossgr {

// Scores a batch of candidate items for one user on frozen model state.
using BatchScorer = std::function<std::vector<double>(int user, const std::vector<int>& items)>;

// One ranking instance: the held-out positive plus sampled negatives drawn
// from items the user never interacted with in any split.
struct CandidateSet {
  int user = -1;
  int positive = -1;
  std::vector<int> negatives;
  bool truncated = false;
};

struct CandidateList {
  std::uint64_t seed = 0;
  int requested_negatives = 99;
  std::vector<CandidateSet> sets;
};

enum class HoldoutSplit { Valid, Test };

// full-catalog mode: rank the positive against every non-interacted item
constexpr int kFullCatalog = -1;

inline CandidateList build_candidates(const SplitDataset& split, HoldoutSplit which,
                                      int num_negatives, std::uint64_t seed) {
  if (num_negatives == kFullCatalog) num_negatives = split.vocab.num_items();
  const auto& holdout =
      which == HoldoutSplit::Valid ? split.valid_item : split.test_item;

  CandidateList list;
  list.seed = seed;
  list.requested_negatives = num_negatives;
  Rng rng(derive_seed(seed, which == HoldoutSplit::Valid ? 11 : 12));

  const int num_items = split.vocab.num_items();
  for (int u = 0; u < split.vocab.num_users(); ++u) {
    if (holdout[u] < 0) continue;
    CandidateSet cs;
    cs.user = u;
    cs.positive = holdout[u];

    // every item the user touched in any split is off-limits as a negative
    std::vector<int> interacted = split.train_items_by_user[u];
    if (split.valid_item[u] >= 0) interacted.push_back(split.valid_item[u]);
    if (split.test_item[u] >= 0) interacted.push_back(split.test_item[u]);
    std::sort(interacted.begin(), interacted.end());

    const int pool = num_items - static_cast<int>(interacted.size());
    auto is_interacted = [&](int item) {
      return std::binary_search(interacted.begin(), interacted.end(), item);
    };

    if (pool <= num_negatives) {
      cs.truncated = true;
      for (int i = 0; i < num_items; ++i)
        if (!is_interacted(i)) cs.negatives.push_back(i);
    } else if (2 * num_negatives >= pool) {
      std::vector<int> complement;
      complement.reserve(static_cast<std::size_t>(pool));
      for (int i = 0; i < num_items; ++i)
        if (!is_interacted(i)) complement.push_back(i);
      for (int j = 0; j < num_negatives; ++j) {
        const std::size_t pick = j + rng.below(complement.size() - j);
        std::swap(complement[j], complement[pick]);
        cs.negatives.push_back(complement[j]);
      }
    } else {
      std::unordered_set<int> drawn;
      while (static_cast<int>(cs.negatives.size()) < num_negatives) {
        const int candidate = rng.below_int(num_items);
        if (is_interacted(candidate) || !drawn.insert(candidate).second) continue;
        cs.negatives.push_back(candidate);
      }
    }
    list.sets.push_back(std::move(cs));
  }
  if (list.sets.empty())
    throw std::runtime_error("build_candidates: holdout split is empty");
  return list;
}

// 1-indexed rank of the positive among scored candidates. Ties break by
// ascending item id, so equal-score items with a smaller id precede.
inline int rank_of_positive(const std::vector<std::pair<int, double>>& scored,
                            int positive) {
  double positive_score = 0.0;
  bool found = false;
  for (const auto& [item, score] : scored)
    if (item == positive) {
      positive_score = score;
      found = true;
      break;
    }
  if (!found)
    throw std::invalid_argument("rank_of_positive: positive item not among candidates");

  int rank = 1;
  for (const auto& [item, score] : scored) {
    if (item == positive) continue;
    if (score > positive_score || (score == positive_score && item < positive)) ++rank;
  }
  return rank;
}

inline double hr_at_k(const std::vector<int>& ranks, int k = 10) {
  if (ranks.empty()) throw std::invalid_argument("hr_at_k: empty rank list");
  long long hits = 0;
  for (int r : ranks) {
    if (r < 1) throw std::invalid_argument("hr_at_k: ranks are 1-indexed");
    if (r <= k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

// Single-relevant-item NDCG: a hit at rank p contributes 1 / log2(p + 1).
inline double ndcg_at_k(const std::vector<int>& ranks, int k = 10) {
  if (ranks.empty()) throw std::invalid_argument("ndcg_at_k: empty rank list");
  double total = 0.0;
  for (int r : ranks) {
    if (r < 1) throw std::invalid_argument("ndcg_at_k: ranks are 1-indexed");
    if (r <= k) total += 1.0 / std::log2(static_cast<double>(r) + 1.0);
  }
  return total / static_cast<double>(ranks.size());
}

// Scores every candidate set and returns the per-user rank of the positive.
inline std::vector<int> ranks_for_scorer(const BatchScorer& scorer,
                                         const CandidateList& candidates) {
  std::vector<int> ranks;
  ranks.reserve(candidates.sets.size());
  for (const auto& cs : candidates.sets) {
    std::vector<int> items;
    items.reserve(cs.negatives.size() + 1);
    items.push_back(cs.positive);
    items.insert(items.end(), cs.negatives.begin(), cs.negatives.end());
    std::vector<double> scores;
    try {
      scores = scorer(cs.user, items);
    } catch (const std::exception& e) {
      throw std::runtime_error("scoring failed for user " + std::to_string(cs.user) +
                               ": " + e.what());
    }
    if (scores.size() != items.size())
      throw std::runtime_error("scorer returned wrong count for user " +
                               std::to_string(cs.user));
    std::vector<std::pair<int, double>> scored(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) scored[i] = {items[i], scores[i]};
    ranks.push_back(rank_of_positive(scored, cs.positive));
  }
  return ranks;
}

struct MetricsAtK {
  int k = 10;
  double hr = 0.0;
  double ndcg = 0.0;
};

struct EvalEntry {
  std::string model;
  std::string market;
  std::vector<MetricsAtK> metrics;
  int users = 0;
  int excluded_users = 0;
  std::uint64_t seed = 0;
  std::string config_digest;
  double wall_ms = 0.0;
};

struct EvalReport {
  std::vector<EvalEntry> entries;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["entries"] = nlohmann::json::array();
    for (const auto& e : entries) {
      nlohmann::json je;
      je["model"] = e.model;
      je["market"] = e.market;
      je["users"] = e.users;
      je["excluded_users"] = e.excluded_users;
      je["seed"] = e.seed;
      je["config_digest"] = e.config_digest;
      je["wall_ms"] = e.wall_ms;
      for (const auto& m : e.metrics) {
        je["metrics"]["hr@" + std::to_string(m.k)] = m.hr;
        je["metrics"]["ndcg@" + std::to_string(m.k)] = m.ndcg;
      }
      j["entries"].push_back(std::move(je));
    }
    j["best"] = best_by_column();
    return j;
  }

  // model name holding the best value per (market, metric) column
  nlohmann::json best_by_column() const {
    nlohmann::json best;
    for (const auto& e : entries)
      for (const auto& m : e.metrics) {
        for (const char* kind : {"ndcg", "hr"}) {
          const double v = std::string(kind) == "ndcg" ? m.ndcg : m.hr;
          const std::string key =
              e.market + "/" + kind + "@" + std::to_string(m.k);
          if (!best.contains(key) || v > best[key]["value"].get<double>())
            best[key] = {{"model", e.model}, {"value", v}};
        }
      }
    return best;
  }

  // Aligned text table, one row per (model, market), best value per column
  // marked with '*'.
  std::string to_table() const {
    std::vector<int> ks;
    for (const auto& e : entries)
      for (const auto& m : e.metrics)
        if (std::find(ks.begin(), ks.end(), m.k) == ks.end()) ks.push_back(m.k);
    std::sort(ks.begin(), ks.end());

    const auto best = best_by_column();
    std::ostringstream out;
    out << std::left << std::setw(10) << "Method" << std::setw(8) << "Market";
    for (int k : ks)
      out << std::right << std::setw(12) << ("NDCG@" + std::to_string(k))
          << std::setw(12) << ("HR@" + std::to_string(k));
    out << std::right << std::setw(8) << "Users" << '\n';

    for (const auto& e : entries) {
      out << std::left << std::setw(10) << e.model << std::setw(8) << e.market;
      for (int k : ks) {
        const MetricsAtK* m = nullptr;
        for (const auto& cand : e.metrics)
          if (cand.k == k) m = &cand;
        for (const char* kind : {"ndcg", "hr"}) {
          std::ostringstream cell;
          if (m != nullptr) {
            const double v = std::string(kind) == "ndcg" ? m->ndcg : m->hr;
            const std::string key = e.market + "/" + kind + "@" + std::to_string(k);
            const bool is_best = best.contains(key) &&
                                 best[key]["model"].get<std::string>() == e.model;
            cell << std::fixed << std::setprecision(4) << v << (is_best ? "*" : " ");
          } else {
            cell << "-";
          }
          out << std::right << std::setw(12) << cell.str();
        }
      }
      out << std::right << std::setw(8) << e.users << '\n';
    }
    return out.str();
  }
};

// Evaluate one scorer over prepared candidates at each requested cutoff.
inline EvalEntry evaluate_model(const std::string& model_name, const BatchScorer& scorer,
                                const CandidateList& candidates,
                                const std::vector<int>& ks) {
  EvalEntry entry;
  entry.model = model_name;
  entry.seed = candidates.seed;
  entry.users = static_cast<int>(candidates.sets.size());
  const std::vector<int> ranks = ranks_for_scorer(scorer, candidates);
  for (int k : ks) entry.metrics.push_back({k, hr_at_k(ranks, k), ndcg_at_k(ranks, k)});
  return entry;
}

// Evaluate several fitted models over the identical candidate sets.
inline EvalReport compare_models(
    const std::vector<std::pair<std::string, BatchScorer>>& models,
    const std::string& market, const CandidateList& candidates,
    const std::vector<int>& ks) {
  EvalReport report;
  for (const auto& [name, scorer] : models) {
    EvalEntry e = evaluate_model(name, scorer, candidates, ks);
    e.market = market;
    report.entries.push_back(std::move(e));
  }
  return report;
}

}  // namespace crossgr
