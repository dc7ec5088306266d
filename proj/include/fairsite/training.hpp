#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fairsite/model.hpp"
#include "fairsite/reward.hpp"
#include "fairsite/types.hpp"

namespace fairsite {

enum class Objective { kReinforce, kRegression };
enum class DatasetVariant { kMissing, kFull };

struct TrainConfig {
  int epochs = 35;
  double learning_rate = 1e-5;
  double lambda = 0.0;
  int samples_per_trial = 4;  // N sampled rankings per gradient step
  double test_fraction = 0.2;
  double val_fraction = 0.1;  // of the remaining training set
  long long seed = 0;
  ModelConfig model;
  Objective objective = Objective::kReinforce;
  DatasetVariant variant = DatasetVariant::kMissing;
  bool use_baseline = false;  // moving-average reward baseline

  void validate() const;
};

struct Checkpoint {
  Model model;
  TrainConfig config;
  std::string manifest_hash;
  double val_reward = 0.0;
  int epoch = 0;
};

struct MetricReport {
  double lambda = 0.0;
  double relative_error_mean = 0.0;
  double relative_error_ci = 0.0;  // 95% half-width
  double ndcg_mean = 0.0;
  double ndcg_ci = 0.0;
  double entropy_mean = 0.0;
  // Aggregate racial distribution of the selected cohorts.
  Eigen::Matrix<double, kNumRaceGroups, 1> race_mean =
      Eigen::Matrix<double, kNumRaceGroups, 1>::Zero();
};

struct TradeoffPoint {
  double lambda = 0.0;
  MetricReport report;
};

struct DatasetSplit {
  std::vector<RankingInstance> train, val, test;
};

// Split by base trial id (the part before '#'), so all missingness copies
// of one trial land in the same split.
DatasetSplit split_dataset(const std::vector<RankingInstance>& instances,
                           const TrainConfig& config, Rng& rng);

std::string base_trial_id(const std::string& trial_id);

// The full-data variant: one copy per base trial with every available
// modality visible.
std::vector<RankingInstance> to_full_variant(
    const std::vector<RankingInstance>& instances);

Checkpoint train(const std::vector<RankingInstance>& train_set,
                 const std::vector<RankingInstance>& val_set,
                 const DatasetManifest& manifest, const TrainConfig& config);

MetricReport evaluate(const Checkpoint& checkpoint,
                      const std::vector<RankingInstance>& test_set,
                      const DatasetManifest& manifest);

// Evaluate an arbitrary scoring rule (random/oracle baselines and tests).
MetricReport evaluate_scores(
    const std::vector<RankingInstance>& test_set, double lambda,
    const std::function<Vec(const RankingInstance&)>& score);

std::vector<TradeoffPoint> sweep_lambda(
    const std::vector<RankingInstance>& instances, const DatasetManifest& manifest,
    const TrainConfig& base_config, const std::vector<double>& lambdas,
    const std::function<void(double, const Checkpoint&)>& on_model = {});

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint load_checkpoint(const std::string& path,
                           const DatasetManifest& manifest, bool force = false);

}  // namespace fairsite
