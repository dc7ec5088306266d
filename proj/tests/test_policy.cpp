#include <doctest.h>

#include <cmath>
#include <map>
#include <vector>

#include "fairsite/policy.hpp"

using namespace fairsite;

namespace {

Vec vec(std::initializer_list<double> v) {
  Vec q(static_cast<Eigen::Index>(v.size()));
  int i = 0;
  for (double x : v) q[i++] = x;
  return q;
}

}  // namespace

TEST_CASE("exact combination probability matches frozen enumeration") {
  // Frozen oracle (independent brute force over both orderings):
  // q = [0.3, -0.5, 1.2, 0.1], combo {0, 2} -> 0.368951225684532.
  const Vec q = vec({0.3, -0.5, 1.2, 0.1});
  CHECK(exact_combination_probability(q, {0, 2}) ==
        doctest::Approx(0.368951225684532).epsilon(1e-12));
}

TEST_CASE("combination probabilities form a distribution") {
  Rng rng(11);
  for (auto [M, K] : std::vector<std::pair<int, int>>{{3, 1}, {4, 2}, {5, 3}}) {
    for (int t = 0; t < 5; ++t) {
      Vec q(M);
      for (int i = 0; i < M; ++i) q[i] = rng.normal(0, 1.5);
      double total = 0.0;
      for (const auto& combo : all_combinations(M, K))
        total += exact_combination_probability(q, combo);
      CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("sample_ranking frequencies match the exact distribution") {
  const Vec q = vec({0.4, -0.2, 0.9, 0.0, -1.1});
  const int K = 2, draws = 40000;
  Rng rng(7);
  std::map<std::vector<int>, int> counts;
  for (int t = 0; t < draws; ++t) {
    const SampledRanking r = sample_ranking(q, K, rng);
    std::vector<int> combo(r.top_k.begin(), r.top_k.end());
    ++counts[combo];
  }
  for (const auto& combo : all_combinations(5, K)) {
    const double expect = exact_combination_probability(q, combo);
    const double got = counts[combo] / static_cast<double>(draws);
    CHECK(std::abs(got - expect) < 0.012);
  }
}

TEST_CASE("sample_ranking structure") {
  const Vec q = vec({0.5, 2.0, -1.0, 0.7, 0.7});
  Rng rng(3);
  const SampledRanking r = sample_ranking(q, 2, rng);
  CHECK(r.order.size() == 5);
  CHECK(r.top_k.size() == 2);
  // Order is a permutation of 0..M-1.
  std::vector<int> sorted = r.order;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<int>{0, 1, 2, 3, 4});
  // Tail is descending by score, ties by lower index.
  for (std::size_t i = 3; i < r.order.size(); ++i) {
    const int a = r.order[i - 1], b = r.order[i];
    CHECK((q[a] > q[b] || (q[a] == q[b] && a < b)));
  }
  CHECK_THROWS(sample_ranking(vec({1.0}), 2, rng));
}

TEST_CASE("estimator is unbiased for the combination probability") {
  const Vec q = vec({0.3, -0.5, 1.2, 0.1, 0.8, -0.4});
  const int K = 3, draws = 60000;
  Rng rng(19);
  // Condition on one fixed combo: mean of the estimate over draws that
  // landed on it, weighted by the sampling distribution, must equal the
  // exact probability. Equivalent global check: for every draw the
  // estimate is an unbiased estimate of its own combo's probability, so
  // E[estimate | combo] = P(combo).
  std::map<std::vector<int>, std::pair<double, int>> acc;
  for (int t = 0; t < draws; ++t) {
    const SampledRanking r = sample_ranking(q, K, rng);
    std::vector<int> combo(r.top_k.begin(), r.top_k.end());
    auto& [sum, n] = acc[combo];
    sum += std::exp(r.log_prob_estimate);
    ++n;
  }
  for (const auto& combo : all_combinations(6, K)) {
    const double exact = exact_combination_probability(q, combo);
    if (exact < 0.02) continue;  // too few conditional samples
    const auto& [sum, n] = acc[combo];
    REQUIRE(n > 200);
    CHECK(std::abs(sum / n - exact) / exact < 0.03);
  }
}

TEST_CASE("policy gradient matches enumeration finite differences") {
  // J(q) = sum_combos P(combo) R(combo) with a fixed arbitrary reward per
  // combo; the REINFORCE estimate averaged over many draws must match the
  // finite-difference gradient of the exact J.
  const Vec q = vec({0.2, -0.3, 0.6, 0.0, -0.8});
  const int M = 5, K = 2;
  auto reward_of = [](const std::vector<int>& combo) {
    double r = 0.0;
    for (int i : combo) r += 1.0 + 0.7 * i;  // distinct, positive
    return r;
  };
  auto J = [&](const Vec& qq) {
    double v = 0.0;
    for (const auto& combo : all_combinations(M, K))
      v += exact_combination_probability(qq, combo) * reward_of(combo);
    return v;
  };

  Rng rng(29);
  const int draws = 200000;
  Vec mc = Vec::Zero(M);
  for (int t = 0; t < draws; ++t) {
    SampledRanking r = sample_ranking(q, K, rng);
    std::vector<int> combo(r.top_k.begin(), r.top_k.end());
    mc += policy_gradient(q, {{r, reward_of(combo)}});
  }
  mc /= static_cast<double>(draws);

  for (int i = 0; i < M; ++i) {
    Vec qp = q, qm = q;
    qp[i] += 1e-5;
    qm[i] -= 1e-5;
    const double fd = (J(qp) - J(qm)) / 2e-5;
    CHECK(std::abs(mc[i] - fd) < 0.05 * std::max(1.0, std::abs(fd)));
  }
}

TEST_CASE("deterministic top-K selection") {
  CHECK(select_topk_deterministic(vec({0.1, 0.9, 0.5, 0.9}), 2) ==
        std::vector<int>{1, 3});  // tie broken by lower index
  CHECK(select_topk_deterministic(vec({3, 1, 2}), 3) ==
        std::vector<int>{0, 2, 1});
}

TEST_CASE("all_combinations counts") {
  CHECK(all_combinations(5, 2).size() == 10);
  CHECK(all_combinations(6, 3).size() == 20);
  CHECK(all_combinations(3, 3).size() == 1);
}
