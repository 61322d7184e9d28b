#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "crossgr/hash.hpp"
#include "crossgr/rng.hpp"

namespace crossgr {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One (user, item, rating) interaction tagged with the market it came from.
struct InteractionRecord {
  std::string user_id;
  std::string item_id;
  double rating = 0.0;
  std::string market;
};

// All interactions of one market, deduplicated on (user, item) keeping the
// last rating seen.
struct InteractionSet {
  std::string market;
  std::vector<InteractionRecord> records;

  bool empty() const { return records.empty(); }
};

// Dense id spaces. User tokens are namespaced by market before indexing
// (markets never share users), item tokens are shared across markets.
struct Vocab {
  std::vector<std::string> users;  // index -> market-qualified user token
  std::vector<std::string> items;  // index -> item token
  std::unordered_map<std::string, int> user_index;
  std::unordered_map<std::string, int> item_index;

  int num_users() const { return static_cast<int>(users.size()); }
  int num_items() const { return static_cast<int>(items.size()); }

  static std::string qualify(const std::string& market, const std::string& user) {
    return market + "::" + user;
  }

  int user_id(const std::string& market, const std::string& user) const {
    auto it = user_index.find(qualify(market, user));
    if (it == user_index.end())
      throw std::invalid_argument("vocab: unknown user " + qualify(market, user));
    return it->second;
  }
  int item_id(const std::string& item) const {
    auto it = item_index.find(item);
    if (it == item_index.end())
      throw std::invalid_argument("vocab: unknown item " + item);
    return it->second;
  }

  std::string digest() const {
    Fnv1a64 h;
    h.update(static_cast<std::uint64_t>(users.size()));
    h.update(static_cast<std::uint64_t>(items.size()));
    for (const auto& u : users) h.update(u);
    for (const auto& i : items) h.update(i);
    return h.hex();
  }
};

// Interaction mapped onto dense ids; the market tag survives the merge so the
// splitter can tell target pairs from source pairs.
struct MergedInteraction {
  int user = 0;
  int item = 0;
  double rating = 0.0;
  std::string market;
};

// Leave-one-out split over the target market. Source-market pairs are train
// only; target users that cannot supply both a validation and a test item
// keep everything in train and are excluded from evaluation.
struct SplitDataset {
  std::vector<std::pair<int, int>> train;  // (user, item)
  std::vector<int> valid_item;             // per user, -1 when absent
  std::vector<int> test_item;              // per user, -1 when absent
  std::vector<std::vector<int>> train_items_by_user;  // sorted per user
  std::vector<int> excluded_users;
  Vocab vocab;

  int num_eval_users() const {
    int n = 0;
    for (int t : test_item)
      if (t >= 0) ++n;
    return n;
  }
};

struct MarketStats {
  std::string market;
  int users = 0;
  int items = 0;
  long long interactions = 0;
  double rating_mean = 0.0;
  std::array<long long, 5> rating_histogram{};  // buckets for ratings 1..5
};

struct StatsReport {
  std::vector<MarketStats> markets;
  // overlap[a][b] = number of shared item tokens between markets a and b
  std::vector<std::vector<long long>> overlap;
};

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find('\t', start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

inline bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  try {
    std::size_t consumed = 0;
    out = std::stod(s, &consumed);
    return consumed == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace detail

// Reads a `user<TAB>item<TAB>rating[<TAB>extra...]` file. A first line whose
// third field is not numeric is treated as a header and skipped. Duplicate
// (user, item) pairs keep the last rating.
inline InteractionSet parse_interactions(const std::string& path,
                                         const std::string& market,
                                         std::ostream* warnings = nullptr) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open interaction file: " + path);

  InteractionSet set;
  set.market = market;
  std::unordered_map<std::string, std::size_t> seen;  // "user\titem" -> record slot

  std::string line;
  long long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    auto fields = detail::split_tabs(line);
    if (fields.size() < 3)
      throw ParseError(path + ": line " + std::to_string(line_no) +
                       ": expected 3 fields, got " + std::to_string(fields.size()));

    double rating = 0.0;
    if (!detail::parse_double(fields[2], rating)) {
      if (line_no == 1) continue;  // header row
      throw ParseError(path + ": line " + std::to_string(line_no) +
                       ": non-numeric rating '" + fields[2] + "'");
    }
    if (!(rating >= 1.0 && rating <= 5.0))
      throw ParseError(path + ": line " + std::to_string(line_no) +
                       ": rating " + fields[2] + " outside [1, 5]");
    if (fields[0].empty() || fields[1].empty())
      throw ParseError(path + ": line " + std::to_string(line_no) +
                       ": empty user or item id");

    const std::string key = fields[0] + '\t' + fields[1];
    auto it = seen.find(key);
    if (it != seen.end()) {
      set.records[it->second].rating = rating;  // keep last
    } else {
      seen[key] = set.records.size();
      set.records.push_back({fields[0], fields[1], rating, market});
    }
  }
  if (set.records.empty() && warnings != nullptr)
    *warnings << "warning: no interactions parsed from " << path << " (market "
              << market << ")\n";
  return set;
}

// ---------------------------------------------------------------------------
// Vocabulary and merge
// ---------------------------------------------------------------------------

inline Vocab build_vocab(const std::vector<InteractionSet>& sets) {
  std::set<std::string> user_tokens;
  std::set<std::string> item_tokens;
  for (const auto& s : sets)
    for (const auto& r : s.records) {
      user_tokens.insert(Vocab::qualify(s.market, r.user_id));
      item_tokens.insert(r.item_id);
    }
  if (user_tokens.empty()) throw std::invalid_argument("build_vocab: no interactions");

  Vocab v;
  v.users.assign(user_tokens.begin(), user_tokens.end());
  v.items.assign(item_tokens.begin(), item_tokens.end());
  for (int i = 0; i < v.num_users(); ++i) v.user_index[v.users[i]] = i;
  for (int i = 0; i < v.num_items(); ++i) v.item_index[v.items[i]] = i;
  return v;
}

inline std::vector<MergedInteraction> merge_markets(
    const InteractionSet& target, const std::vector<InteractionSet>& sources,
    const Vocab& vocab) {
  std::vector<MergedInteraction> merged;
  auto append = [&](const InteractionSet& s) {
    for (const auto& r : s.records)
      merged.push_back({vocab.user_id(s.market, r.user_id),
                        vocab.item_id(r.item_id), r.rating, s.market});
  };
  append(target);
  for (const auto& s : sources) append(s);
  return merged;
}

// ---------------------------------------------------------------------------
// Leave-one-out split
// ---------------------------------------------------------------------------

inline SplitDataset split_leave_one_out(const std::vector<MergedInteraction>& merged,
                                        const std::string& target_market,
                                        const Vocab& vocab, std::uint64_t seed) {
  {
    std::unordered_set<long long> keys;
    for (const auto& m : merged) {
      const long long key =
          static_cast<long long>(m.user) * (vocab.num_items() + 1LL) + m.item;
      if (!keys.insert(key).second)
        throw std::invalid_argument("split_leave_one_out: duplicate (user, item) pair");
    }
  }

  SplitDataset split;
  split.vocab = vocab;
  split.valid_item.assign(vocab.num_users(), -1);
  split.test_item.assign(vocab.num_users(), -1);
  split.train_items_by_user.assign(vocab.num_users(), {});

  std::vector<std::vector<int>> target_items(vocab.num_users());
  for (const auto& m : merged) {
    if (m.market == target_market) {
      target_items[m.user].push_back(m.item);
    } else {
      split.train.push_back({m.user, m.item});
    }
  }

  Rng rng(derive_seed(seed, /*stream=*/5));
  bool any_evaluable = false;
  for (int u = 0; u < vocab.num_users(); ++u) {
    auto& items = target_items[u];
    if (items.empty()) continue;
    std::sort(items.begin(), items.end());
    if (items.size() < 3) {
      for (int it : items) split.train.push_back({u, it});
      split.excluded_users.push_back(u);
      continue;
    }
    any_evaluable = true;
    const std::size_t test_pos = rng.below(items.size());
    split.test_item[u] = items[test_pos];
    items.erase(items.begin() + static_cast<long>(test_pos));
    const std::size_t valid_pos = rng.below(items.size());
    split.valid_item[u] = items[valid_pos];
    items.erase(items.begin() + static_cast<long>(valid_pos));
    for (int it : items) split.train.push_back({u, it});
  }
  if (!any_evaluable)
    throw std::runtime_error("split_leave_one_out: no evaluable users in target market " +
                             target_market);

  for (const auto& [u, i] : split.train) split.train_items_by_user[u].push_back(i);
  for (auto& items : split.train_items_by_user) std::sort(items.begin(), items.end());
  return split;
}

// ---------------------------------------------------------------------------
// Dataset statistics
// ---------------------------------------------------------------------------

inline StatsReport compute_stats(const std::vector<InteractionSet>& sets) {
  StatsReport report;
  std::vector<std::set<std::string>> item_sets;
  for (const auto& s : sets) {
    MarketStats ms;
    ms.market = s.market;
    std::set<std::string> users;
    std::set<std::string> items;
    double rating_sum = 0.0;
    for (const auto& r : s.records) {
      users.insert(r.user_id);
      items.insert(r.item_id);
      rating_sum += r.rating;
      int bucket = static_cast<int>(std::llround(r.rating));
      bucket = std::min(5, std::max(1, bucket));
      ++ms.rating_histogram[bucket - 1];
    }
    ms.users = static_cast<int>(users.size());
    ms.items = static_cast<int>(items.size());
    ms.interactions = static_cast<long long>(s.records.size());
    ms.rating_mean = s.records.empty() ? 0.0 : rating_sum / s.records.size();
    report.markets.push_back(std::move(ms));
    item_sets.push_back(std::move(items));
  }

  const std::size_t n = sets.size();
  report.overlap.assign(n, std::vector<long long>(n, 0));
  for (std::size_t a = 0; a < n; ++a) {
    report.overlap[a][a] = report.markets[a].items;
    for (std::size_t b = a + 1; b < n; ++b) {
      long long shared = 0;
      const auto& small = item_sets[a].size() <= item_sets[b].size() ? item_sets[a] : item_sets[b];
      const auto& large = item_sets[a].size() <= item_sets[b].size() ? item_sets[b] : item_sets[a];
      for (const auto& item : small)
        if (large.count(item)) ++shared;
      report.overlap[a][b] = shared;
      report.overlap[b][a] = shared;
    }
  }
  return report;
}

}  // namespace crossgr
