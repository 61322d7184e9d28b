#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "crossgr/baselines.hpp"
#include "crossgr/evaluation.hpp"
#include "crossgr/synthetic.hpp"

#include "doctest.h"

using namespace crossgr;

namespace {

// Straight-line reference implementations of the two ranking metrics,
// independent of the library's code path.
namespace oracle {

double hr(const std::vector<int>& ranks, int k) {
  double total = 0.0;
  for (int r : ranks)
    if (r <= k) total += 1.0;
  return total / static_cast<double>(ranks.size());
}

double ndcg(const std::vector<int>& ranks, int k) {
  double total = 0.0;
  for (int r : ranks)
    if (r <= k) total += 1.0 / std::log2(static_cast<double>(r) + 1.0);
  return total / static_cast<double>(ranks.size());
}

}  // namespace oracle

SplitDataset small_split(std::uint64_t seed = 3) {
  BlockDatasetSpec spec;
  spec.users_per_cluster = 12;
  spec.items_per_cluster = 20;
  spec.interactions_per_user = 8;
  spec.seed = seed;
  InteractionSet set;
  set.market = "t1";
  set.records = make_block_interactions(spec);
  const Vocab v = build_vocab({set});
  return split_leave_one_out(merge_markets(set, {}, v), "t1", v, seed);
}

}  // namespace

TEST_CASE("rank_of_positive with strict scores and ties") {
  // clear winner
  CHECK(rank_of_positive({{7, 0.9}, {1, 0.5}, {2, 0.3}}, 7) == 1);
  // positive tied with one lower-id item: the tie goes against it
  CHECK(rank_of_positive({{5, 0.5}, {3, 0.5}, {9, 0.1}}, 5) == 2);
  // tied with a higher-id item: positive wins the tie
  CHECK(rank_of_positive({{5, 0.5}, {8, 0.5}, {9, 0.1}}, 5) == 1);
  // positive dead last among 100
  std::vector<std::pair<int, double>> scored;
  for (int i = 0; i < 100; ++i) scored.push_back({i, i == 42 ? -1.0 : double(i)});
  CHECK(rank_of_positive(scored, 42) == 100);

  CHECK_THROWS_AS(rank_of_positive({{1, 0.2}}, 7), std::invalid_argument);
}

TEST_CASE("hr and ndcg closed forms") {
  CHECK(hr_at_k({1}, 10) == 1.0);
  CHECK(hr_at_k({11}, 10) == 0.0);
  CHECK(hr_at_k({2, 12}, 10) == 0.5);
  CHECK(ndcg_at_k({1}, 10) == 1.0);             // 1 / log2(2)
  CHECK(ndcg_at_k({3}, 10) == doctest::Approx(0.5));  // 1 / log2(4)
  CHECK(ndcg_at_k({11}, 10) == 0.0);
  CHECK_THROWS_AS(hr_at_k({}, 10), std::invalid_argument);
  CHECK_THROWS_AS(ndcg_at_k({}, 10), std::invalid_argument);
  CHECK_THROWS_AS(hr_at_k({0}, 10), std::invalid_argument);
}

TEST_CASE("metrics match the brute-force oracle bitwise on 1000 random lists") {
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + rng.below_int(40);
    std::vector<int> ranks(n);
    for (int& r : ranks) r = 1 + rng.below_int(120);
    const int k = 1 + rng.below_int(20);
    CHECK(hr_at_k(ranks, k) == oracle::hr(ranks, k));
    CHECK(ndcg_at_k(ranks, k) == oracle::ndcg(ranks, k));
  }
}

TEST_CASE("metric invariants: bounds, ordering, permutation, monotonicity") {
  Rng rng(55);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + rng.below_int(30);
    std::vector<int> ranks(n);
    for (int& r : ranks) r = 1 + rng.below_int(50);
    const double hr = hr_at_k(ranks, 10);
    const double ndcg = ndcg_at_k(ranks, 10);
    CHECK(ndcg >= 0.0);
    CHECK(ndcg <= hr);
    CHECK(hr <= 1.0);

    // permutation invariance over users
    std::vector<int> shuffled = ranks;
    rng.shuffle(shuffled);
    CHECK(hr_at_k(shuffled, 10) == hr);
    CHECK(ndcg_at_k(shuffled, 10) == doctest::Approx(ndcg_at_k(ranks, 10)).epsilon(1e-15));

    // improving one user's rank never lowers either metric
    std::vector<int> improved = ranks;
    const int pick = rng.below_int(n);
    if (improved[pick] > 1) {
      improved[pick] -= 1;
      CHECK(hr_at_k(improved, 10) >= hr);
      CHECK(ndcg_at_k(improved, 10) >= ndcg);
    }
  }
}

TEST_CASE("build_candidates construction, truncation, determinism") {
  const SplitDataset split = small_split();
  const CandidateList full = build_candidates(split, HoldoutSplit::Test, 5, 77);
  CHECK_FALSE(full.sets.empty());

  std::set<int> eval_users;
  for (const auto& cs : full.sets) {
    CHECK(eval_users.insert(cs.user).second);  // one set per user
    CHECK(cs.positive == split.test_item[cs.user]);
    CHECK(cs.negatives.size() == 5);
    std::set<int> seen;
    for (int n : cs.negatives) {
      CHECK(seen.insert(n).second);  // no duplicates
      CHECK(n != cs.positive);
      // never a positive of any split
      CHECK_FALSE(std::binary_search(split.train_items_by_user[cs.user].begin(),
                                     split.train_items_by_user[cs.user].end(), n));
      CHECK(n != split.valid_item[cs.user]);
    }
  }

  // pool smaller than requested: whole pool, flag set
  const CandidateList trunc = build_candidates(split, HoldoutSplit::Test, 99, 77);
  const std::size_t catalog = static_cast<std::size_t>(split.vocab.num_items());
  for (const auto& cs : trunc.sets) {
    CHECK(cs.truncated);
    const auto interacted = split.train_items_by_user[cs.user].size() + 2;
    CHECK(cs.negatives.size() == catalog - interacted);
  }

  const CandidateList again = build_candidates(split, HoldoutSplit::Test, 5, 77);
  for (std::size_t i = 0; i < full.sets.size(); ++i)
    CHECK(full.sets[i].negatives == again.sets[i].negatives);

  const CandidateList other_seed = build_candidates(split, HoldoutSplit::Test, 5, 78);
  bool any_differs = false;
  for (std::size_t i = 0; i < full.sets.size(); ++i)
    if (full.sets[i].negatives != other_seed.sets[i].negatives) any_differs = true;
  CHECK(any_differs);
}

TEST_CASE("valid and test candidates target their own holdout") {
  const SplitDataset split = small_split();
  const CandidateList valid = build_candidates(split, HoldoutSplit::Valid, 5, 1);
  for (const auto& cs : valid.sets) CHECK(cs.positive == split.valid_item[cs.user]);
}

TEST_CASE("full-catalog mode ranks against every non-interacted item") {
  const SplitDataset split = small_split();
  const CandidateList full = build_candidates(split, HoldoutSplit::Test, kFullCatalog, 1);
  for (const auto& cs : full.sets) {
    const std::size_t interacted = split.train_items_by_user[cs.user].size() + 2;
    CHECK(cs.negatives.size() ==
          static_cast<std::size_t>(split.vocab.num_items()) - interacted);
  }
}

TEST_CASE("evaluate_model with an oracle scorer is perfect") {
  const SplitDataset split = small_split();
  const CandidateList candidates = build_candidates(split, HoldoutSplit::Test, 20, 4);

  // scores 1 on the held-out item, 0 elsewhere
  BatchScorer oracle_scorer = [&](int user, const std::vector<int>& items) {
    std::vector<double> s;
    for (int i : items) s.push_back(i == split.test_item[user] ? 1.0 : 0.0);
    return s;
  };
  const EvalEntry e = evaluate_model("oracle", oracle_scorer, candidates, {10});
  CHECK(e.metrics[0].hr == 1.0);
  CHECK(e.metrics[0].ndcg == 1.0);
  CHECK(e.users == static_cast<int>(candidates.sets.size()));
}

TEST_CASE("constant scorer degrades to the declared tie-break ordering") {
  const SplitDataset split = small_split();
  const CandidateList candidates = build_candidates(split, HoldoutSplit::Test, 10, 4);
  BatchScorer constant = [](int, const std::vector<int>& items) {
    return std::vector<double>(items.size(), 0.5);
  };
  // brute-force expectation: rank = 1 + #candidates with smaller id
  std::vector<int> expected;
  for (const auto& cs : candidates.sets) {
    int rank = 1;
    for (int n : cs.negatives)
      if (n < cs.positive) ++rank;
    expected.push_back(rank);
  }
  const std::vector<int> got = ranks_for_scorer(constant, candidates);
  CHECK(got == expected);
}

TEST_CASE("evaluate_model matches a brute-force evaluator on tiny instances") {
  // 4 users x 8 items, hand-run end to end
  const SplitDataset split = small_split(9);
  const CandidateList candidates = build_candidates(split, HoldoutSplit::Test, 8, 2);
  const BatchScorer scorer = make_random_scorer(5);

  std::vector<int> expected_ranks;
  for (const auto& cs : candidates.sets) {
    std::vector<int> items = {cs.positive};
    items.insert(items.end(), cs.negatives.begin(), cs.negatives.end());
    const std::vector<double> scores = scorer(cs.user, items);
    int rank = 1;
    for (std::size_t i = 1; i < items.size(); ++i) {
      if (scores[i] > scores[0]) ++rank;
      if (scores[i] == scores[0] && items[i] < items[0]) ++rank;
    }
    expected_ranks.push_back(rank);
  }
  const EvalEntry e = evaluate_model("random", scorer, candidates, {5, 10});
  CHECK(e.metrics[0].hr == oracle::hr(expected_ranks, 5));
  CHECK(e.metrics[0].ndcg == oracle::ndcg(expected_ranks, 5));
  CHECK(e.metrics[1].hr == oracle::hr(expected_ranks, 10));
}

TEST_CASE("uniform random scorer calibrates to HR@10 = 0.10 on the 1+99 protocol") {
  // 2500 simulated users, 100 candidates each
  Rng rng(31337);
  std::vector<int> ranks;
  for (int user = 0; user < 2500; ++user) {
    std::vector<double> scores(100);
    for (double& s : scores) s = rng.uniform();
    // positive is candidate 0
    int rank = 1;
    for (int i = 1; i < 100; ++i)
      if (scores[i] > scores[0]) ++rank;
    ranks.push_back(rank);
  }
  CHECK(hr_at_k(ranks, 10) == doctest::Approx(0.10).epsilon(0.2));
  CHECK(std::fabs(hr_at_k(ranks, 10) - 0.10) < 0.02);
}

TEST_CASE("compare_models emits one row per model with shared candidates") {
  const SplitDataset split = small_split();
  const CandidateList candidates = build_candidates(split, HoldoutSplit::Test, 10, 4);
  const BatchScorer r1 = make_random_scorer(1);
  const EvalReport report =
      compare_models({{"a", r1}, {"b", r1}}, "t1", candidates, {10});
  REQUIRE(report.entries.size() == 2);
  // identical scorers, identical rows
  CHECK(report.entries[0].metrics[0].hr == report.entries[1].metrics[0].hr);
  CHECK(report.entries[0].metrics[0].ndcg == report.entries[1].metrics[0].ndcg);
  CHECK(report.entries[0].market == "t1");
}

TEST_CASE("report shape: 6 methods x 2 markets x 2 metrics = 24 cells") {
  EvalReport report;
  const std::vector<std::string> methods = {"gmf", "mlp", "nmf", "itemcf", "usercf", "crossgr"};
  for (const auto& market : {"t1", "t2"})
    for (const auto& m : methods) {
      EvalEntry e;
      e.model = m;
      e.market = market;
      e.metrics.push_back({10, 0.5, 0.4});
      report.entries.push_back(e);
    }
  int cells = 0;
  for (const auto& e : report.entries) cells += static_cast<int>(e.metrics.size()) * 2;
  CHECK(cells == 24);
  CHECK(report.entries.size() == 12);
}

TEST_CASE("report table and json mark the best per column") {
  EvalReport report;
  EvalEntry weak;
  weak.model = "itemcf";
  weak.market = "t1";
  weak.metrics.push_back({10, 0.5622, 0.4838});
  EvalEntry strong;
  strong.model = "crossgr";
  strong.market = "t1";
  strong.metrics.push_back({10, 0.7609, 0.6524});
  report.entries = {weak, strong};

  const auto j = report.to_json();
  CHECK(j["best"]["t1/ndcg@10"]["model"] == "crossgr");
  CHECK(j["best"]["t1/hr@10"]["model"] == "crossgr");
  const std::string table = report.to_table();
  CHECK(table.find("0.6524*") != std::string::npos);
  CHECK(table.find("0.7609*") != std::string::npos);
  CHECK(table.find("0.4838 ") != std::string::npos);
}
