#pragma once

#include <set>
#include <vector>

#include "fairsite/rng.hpp"
#include "fairsite/types.hpp"

namespace fairsite {

// One draw from the stochastic top-K ranking policy. The first K positions
// are sampled sequentially by softmax without replacement; positions K+1..M
// are filled deterministically in descending score order (tail order does
// not affect the reward partition or the probability estimator).
struct SampledRanking {
  std::vector<int> order;        // permutation of 0..M-1
  std::set<int> top_k;           // first K entries as a set
  double log_prob_estimate = 0;  // log of the unbiased combination estimate
  std::vector<int> perm_draw;    // random K-permutation used by the estimator
};

SampledRanking sample_ranking(const Vec& q, int K, Rng& rng);

// Brute-force oracle: sums the Plackett-Luce product over all K! orderings
// of the combination. Enforces K <= 8.
double exact_combination_probability(const Vec& q, const std::vector<int>& combo);

// One-permutation unbiased estimator of the combination probability; the
// permutation of the sampled top-K is drawn from rng and recorded into the
// ranking's perm_draw / log_prob_estimate fields.
double estimate_combination_probability(const Vec& q, SampledRanking& ranking,
                                        Rng& rng);

// Gradient with respect to q of (1/N) sum_n reward_n * log pi_hat(R_n),
// using each ranking's recorded perm_draw. Ascending this maximizes the
// expected reward.
Vec policy_gradient(const Vec& q,
                    const std::vector<std::pair<SampledRanking, double>>& samples);

std::vector<int> select_topk_deterministic(const Vec& q, int K);

// All C(M,K) combinations, for enumeration oracles.
std::vector<std::vector<int>> all_combinations(int M, int K);

}  // namespace fairsite
