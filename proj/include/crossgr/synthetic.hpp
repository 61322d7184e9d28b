#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "crossgr/interactions.hpp"
#include "crossgr/rng.hpp"

namespace crossgr {

// Two-cluster synthetic market: each user cluster interacts only with its own
// disjoint item block, and within a block item popularity decays
// geometrically by rank. The skew is what gives a learner signal beyond bare
// cluster membership, so trained models can clearly separate from a random
// scorer on the 1+99 protocol.
struct BlockDatasetSpec {
  int clusters = 2;
  int users_per_cluster = 100;
  int items_per_cluster = 50;
  int interactions_per_user = 20;
  double popularity_decay = 0.82;  // weight of item at in-block rank r is decay^r
  std::uint64_t seed = 7;
  std::string market = "t1";
};

inline std::vector<InteractionRecord> make_block_interactions(const BlockDatasetSpec& spec) {
  if (spec.interactions_per_user > spec.items_per_cluster)
    throw std::invalid_argument("block dataset: more interactions than items per cluster");

  Rng rng(derive_seed(spec.seed, /*stream=*/3));
  std::vector<InteractionRecord> records;
  records.reserve(static_cast<std::size_t>(spec.clusters) * spec.users_per_cluster *
                  spec.interactions_per_user);

  auto user_token = [](int u) { return "u" + std::to_string(u); };
  auto item_token = [](int i) { return "i" + std::to_string(i); };

  for (int c = 0; c < spec.clusters; ++c) {
    for (int uc = 0; uc < spec.users_per_cluster; ++uc) {
      const int user = c * spec.users_per_cluster + uc;

      // weighted sampling without replacement within the user's block
      std::vector<double> weight(static_cast<std::size_t>(spec.items_per_cluster));
      double w = 1.0;
      for (int r = 0; r < spec.items_per_cluster; ++r) {
        weight[r] = w;
        w *= spec.popularity_decay;
      }
      // coverage pick: spreading one deterministic item per user over the
      // block keeps the whole catalog observed despite the skew
      {
        const int forced = uc % spec.items_per_cluster;
        weight[forced] = 0.0;
        const int item = c * spec.items_per_cluster + forced;
        const double rating = rng.uniform() < 0.6 ? 5.0 : 4.0;
        records.push_back({user_token(user), item_token(item), rating, spec.market});
      }
      for (int pick = 1; pick < spec.interactions_per_user; ++pick) {
        double total = 0.0;
        for (double wv : weight) total += wv;
        double target = rng.uniform() * total;
        int chosen = -1;
        for (int r = 0; r < spec.items_per_cluster; ++r) {
          if (weight[r] <= 0.0) continue;
          target -= weight[r];
          if (target <= 0.0) {
            chosen = r;
            break;
          }
        }
        if (chosen < 0) {
          for (int r = spec.items_per_cluster - 1; r >= 0; --r)
            if (weight[r] > 0.0) {
              chosen = r;
              break;
            }
        }
        weight[chosen] = 0.0;
        const int item = c * spec.items_per_cluster + chosen;
        // ratings cluster high, mean 4.6
        const double rating = rng.uniform() < 0.6 ? 5.0 : 4.0;
        records.push_back({user_token(user), item_token(item), rating, spec.market});
      }
    }
  }
  return records;
}

inline void write_interactions_tsv(const std::string& path,
                                   const std::vector<InteractionRecord>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  for (const auto& r : records) {
    out << r.user_id << '\t' << r.item_id << '\t';
    if (r.rating == static_cast<long long>(r.rating))
      out << static_cast<long long>(r.rating);
    else
      out << r.rating;
    out << '\n';
  }
}

// Small companion source market sharing the item catalog: different users,
// same block preferences. Handy for exercising the cross-market merge.
inline std::vector<InteractionRecord> make_block_source_market(const BlockDatasetSpec& spec,
                                                               const std::string& market,
                                                               int users_per_cluster,
                                                               std::uint64_t seed) {
  BlockDatasetSpec src = spec;
  src.market = market;
  src.users_per_cluster = users_per_cluster;
  src.seed = seed;
  auto records = make_block_interactions(src);
  for (auto& r : records) r.user_id = market + "_" + r.user_id;
  return records;
}

}  // namespace crossgr
