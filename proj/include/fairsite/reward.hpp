#pragma once

#include <vector>

#include "fairsite/types.hpp"

namespace fairsite {

struct RewardConfig {
  double lambda = 0.0;  // weighting of the fairness component
};

struct RewardBreakdown {
  double U = 0.0;  // enrollment utility, in [-1, 1]
  double F = 0.0;  // entropy fairness, in [0, ln 6]
  double R = 0.0;  // U + lambda * F
};

// Natural-log entropy with the 0 * ln 0 := 0 convention.
double entropy(const Eigen::Matrix<double, kNumRaceGroups, 1>& p);

// (sum of top-K - sum of rest) / total; 0 when total enrollment is 0.
// `e_ordered` holds all M enrollments in ranking order.
double utility(const std::vector<double>& e_ordered, int K);

// Entropy of the enrollment-weighted mean racial distribution of the
// top-K; 0 when the top-K total enrollment is 0.
double fairness_entropy(
    const std::vector<double>& e_ordered,
    const std::vector<Eigen::Matrix<double, kNumRaceGroups, 1>>& race_ordered,
    int K);

RewardBreakdown reward(
    const std::vector<double>& e_ordered,
    const std::vector<Eigen::Matrix<double, kNumRaceGroups, 1>>& race_ordered,
    int K, const RewardConfig& config);

// (max enrollment - model enrollment) / max enrollment, where the ceiling
// is the sum of the K largest labels; 0 when the ceiling is 0.
double relative_error(const std::vector<int>& selected,
                      const RankingInstance& instance);

// Gains 2^e - 1 with an exponent cap at 64 to stay finite.
double ndcg(const std::vector<double>& model_order_enrollments, int K);

// Same computation as fairness_entropy over the selected set, exposed as
// the test-time diversity metric.
double population_entropy(const std::vector<int>& selected,
                          const RankingInstance& instance);

// Enrollment-weighted mean racial distribution of a selected set.
Eigen::Matrix<double, kNumRaceGroups, 1> selected_race_distribution(
    const std::vector<int>& selected, const RankingInstance& instance);

}  // namespace fairsite
