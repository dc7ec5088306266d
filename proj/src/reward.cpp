#include "fairsite/reward.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fairsite {

namespace {

constexpr double kGainExponentCap = 64.0;

double gain(double e) {
  if (e > kGainExponentCap) e = kGainExponentCap;
  return std::exp2(e) - 1.0;
}

}  // namespace

double entropy(const Eigen::Matrix<double, kNumRaceGroups, 1>& p) {
  double h = 0.0;
  for (int k = 0; k < kNumRaceGroups; ++k) {
    if (p[k] > 0.0) h -= p[k] * std::log(p[k]);
  }
  return h;
}

double utility(const std::vector<double>& e_ordered, int K) {
  double top = 0.0, rest = 0.0;
  for (std::size_t j = 0; j < e_ordered.size(); ++j) {
    if (e_ordered[j] < 0.0)
      throw std::invalid_argument("utility: negative enrollment");
    (static_cast<int>(j) < K ? top : rest) += e_ordered[j];
  }
  const double total = top + rest;
  if (total == 0.0) return 0.0;
  return (top - rest) / total;
}

double fairness_entropy(
    const std::vector<double>& e_ordered,
    const std::vector<Eigen::Matrix<double, kNumRaceGroups, 1>>& race_ordered,
    int K) {
  Eigen::Matrix<double, kNumRaceGroups, 1> pooled =
      Eigen::Matrix<double, kNumRaceGroups, 1>::Zero();
  double total = 0.0;
  for (int j = 0; j < K && j < static_cast<int>(e_ordered.size()); ++j) {
    const auto& r = race_ordered[static_cast<std::size_t>(j)];
    if (std::abs(r.sum() - 1.0) > 1e-6)
      throw std::invalid_argument("fairness_entropy: race row is not a distribution");
    if (e_ordered[static_cast<std::size_t>(j)] < 0.0)
      throw std::invalid_argument("fairness_entropy: negative enrollment");
    pooled += e_ordered[static_cast<std::size_t>(j)] * r;
    total += e_ordered[static_cast<std::size_t>(j)];
  }
  if (total == 0.0) return 0.0;
  pooled /= total;
  return entropy(pooled);
}

RewardBreakdown reward(
    const std::vector<double>& e_ordered,
    const std::vector<Eigen::Matrix<double, kNumRaceGroups, 1>>& race_ordered,
    int K, const RewardConfig& config) {
  RewardBreakdown out;
  out.U = utility(e_ordered, K);
  out.F = fairness_entropy(e_ordered, race_ordered, K);
  out.R = out.U + config.lambda * out.F;
  return out;
}

double relative_error(const std::vector<int>& selected,
                      const RankingInstance& instance) {
  std::vector<double> labels;
  labels.reserve(instance.sites.size());
  for (const SiteRecord& s : instance.sites) labels.push_back(s.enrollment_label);
  std::sort(labels.begin(), labels.end(), std::greater<>());
  double ceiling = 0.0;
  for (std::size_t j = 0; j < selected.size() && j < labels.size(); ++j)
    ceiling += labels[j];
  if (ceiling == 0.0) return 0.0;
  double achieved = 0.0;
  for (int i : selected) achieved += instance.sites[static_cast<std::size_t>(i)].enrollment_label;
  return (ceiling - achieved) / ceiling;
}

double ndcg(const std::vector<double>& model_order_enrollments, int K) {
  std::vector<double> optimal = model_order_enrollments;
  std::sort(optimal.begin(), optimal.end(), std::greater<>());
  double dcg = 0.0, idcg = 0.0;
  for (int j = 0; j < K && j < static_cast<int>(model_order_enrollments.size()); ++j) {
    const double discount = std::log2(static_cast<double>(j) + 2.0);
    dcg += gain(model_order_enrollments[static_cast<std::size_t>(j)]) / discount;
    idcg += gain(optimal[static_cast<std::size_t>(j)]) / discount;
  }
  if (idcg == 0.0) return 1.0;  // all-zero enrollments: any order is optimal
  return dcg / idcg;
}

Eigen::Matrix<double, kNumRaceGroups, 1> selected_race_distribution(
    const std::vector<int>& selected, const RankingInstance& instance) {
  Eigen::Matrix<double, kNumRaceGroups, 1> pooled =
      Eigen::Matrix<double, kNumRaceGroups, 1>::Zero();
  double total = 0.0;
  for (int i : selected) {
    const SiteRecord& s = instance.sites[static_cast<std::size_t>(i)];
    pooled += s.enrollment_label * s.race_label;
    total += s.enrollment_label;
  }
  if (total > 0.0) pooled /= total;
  return pooled;
}

double population_entropy(const std::vector<int>& selected,
                          const RankingInstance& instance) {
  double total = 0.0;
  for (int i : selected) total += instance.sites[static_cast<std::size_t>(i)].enrollment_label;
  if (total == 0.0) return 0.0;
  return entropy(selected_race_distribution(selected, instance));
}

}  // namespace fairsite
