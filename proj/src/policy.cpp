#include "fairsite/policy.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace fairsite {

namespace {

double log_sum_exp(const Vec& q, const std::vector<int>& idx) {
  double mx = -std::numeric_limits<double>::infinity();
  for (int i : idx) mx = std::max(mx, q[i]);
  double s = 0.0;
  for (int i : idx) s += std::exp(q[i] - mx);
  return mx + std::log(s);
}

double log_factorial(int k) {
  double v = 0.0;
  for (int i = 2; i <= k; ++i) v += std::log(static_cast<double>(i));
  return v;
}

// log Plackett-Luce probability of drawing `prefix` in order, with the
// remaining candidates listed in `rest`.
double log_prefix_probability(const Vec& q, const std::vector<int>& prefix,
                              const std::vector<int>& rest) {
  std::vector<int> pool;
  pool.reserve(prefix.size() + rest.size());
  pool.insert(pool.end(), prefix.begin(), prefix.end());
  pool.insert(pool.end(), rest.begin(), rest.end());
  double lp = 0.0;
  std::vector<int> remaining = pool;
  for (int chosen : prefix) {
    lp += q[chosen] - log_sum_exp(q, remaining);
    remaining.erase(std::find(remaining.begin(), remaining.end(), chosen));
  }
  return lp;
}

std::vector<int> descending_by_score(const Vec& q, std::vector<int> idx) {
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (q[a] != q[b]) return q[a] > q[b];
    return a < b;  // tie-break by lower index
  });
  return idx;
}

}  // namespace

SampledRanking sample_ranking(const Vec& q, int K, Rng& rng) {
  const int M = static_cast<int>(q.size());
  if (K > M) throw std::invalid_argument("sample_ranking: K > M");
  if (!q.allFinite()) throw std::invalid_argument("sample_ranking: non-finite scores");

  SampledRanking out;
  std::vector<int> pool(M);
  std::iota(pool.begin(), pool.end(), 0);
  for (int j = 0; j < K; ++j) {
    // Softmax over the remaining pool, in log domain.
    const double lse = log_sum_exp(q, pool);
    std::vector<double> w(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) w[i] = std::exp(q[pool[i]] - lse);
    const std::size_t pick = rng.categorical(w);
    out.order.push_back(pool[pick]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  out.top_k.insert(out.order.begin(), out.order.end());
  const std::vector<int> tail = descending_by_score(q, pool);
  out.order.insert(out.order.end(), tail.begin(), tail.end());
  estimate_combination_probability(q, out, rng);
  return out;
}

double exact_combination_probability(const Vec& q, const std::vector<int>& combo) {
  const int K = static_cast<int>(combo.size());
  if (K > 8)
    throw std::invalid_argument(
        "exact_combination_probability: K too large for enumeration");
  std::vector<int> rest;
  for (int i = 0; i < q.size(); ++i)
    if (std::find(combo.begin(), combo.end(), i) == combo.end()) rest.push_back(i);

  std::vector<int> perm = combo;
  std::sort(perm.begin(), perm.end());
  double total = 0.0;
  do {
    total += std::exp(log_prefix_probability(q, perm, rest));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return total;
}

double estimate_combination_probability(const Vec& q, SampledRanking& ranking,
                                        Rng& rng) {
  const int K = static_cast<int>(ranking.top_k.size());
  std::vector<int> perm(ranking.order.begin(), ranking.order.begin() + K);
  rng.shuffle(perm);
  std::vector<int> tail(ranking.order.begin() + K, ranking.order.end());
  ranking.perm_draw = perm;
  ranking.log_prob_estimate =
      log_factorial(K) + log_prefix_probability(q, perm, tail);
  return std::exp(ranking.log_prob_estimate);
}

Vec policy_gradient(const Vec& q,
                    const std::vector<std::pair<SampledRanking, double>>& samples) {
  if (samples.empty()) throw std::invalid_argument("policy_gradient: no samples");
  Vec grad = Vec::Zero(q.size());
  for (const auto& [ranking, reward] : samples) {
    if (reward == 0.0) continue;
    const int K = static_cast<int>(ranking.top_k.size());
    // The score function must be evaluated at the permutation the sampler
    // actually drew (the first K of `order`): E[R d log PL(drawn order)]
    // equals the gradient of the expected reward, whereas the re-shuffled
    // estimator permutation is uniform given the combination and would
    // bias the gradient.
    const std::vector<int>& remaining = ranking.order;
    // d log pi / dq: +1 at each drawn index, minus the softmax weights
    // over the candidates still in the pool at that step.
    for (int j = 0; j < K; ++j) {
      grad[ranking.order[static_cast<std::size_t>(j)]] += reward;
      std::vector<int> pool(remaining.begin() + j, remaining.end());
      const double lse = log_sum_exp(q, pool);
      for (int k : pool) grad[k] -= reward * std::exp(q[k] - lse);
    }
  }
  return grad / static_cast<double>(samples.size());
}

std::vector<int> select_topk_deterministic(const Vec& q, int K) {
  std::vector<int> idx(static_cast<std::size_t>(q.size()));
  std::iota(idx.begin(), idx.end(), 0);
  idx = descending_by_score(q, std::move(idx));
  idx.resize(static_cast<std::size_t>(K));
  return idx;
}

std::vector<std::vector<int>> all_combinations(int M, int K) {
  std::vector<std::vector<int>> out;
  std::vector<int> combo;
  std::function<void(int)> rec = [&](int start) {
    if (static_cast<int>(combo.size()) == K) {
      out.push_back(combo);
      return;
    }
    for (int i = start; i <= M - (K - static_cast<int>(combo.size())); ++i) {
      combo.push_back(i);
      rec(i + 1);
      combo.pop_back();
    }
  };
  rec(0);
  return out;
}

}  // namespace fairsite
