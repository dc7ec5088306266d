#include "fairsite/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "fairsite/adam.hpp"
#include "fairsite/dataset_io.hpp"
#include "fairsite/policy.hpp"
#include "fairsite/validate.hpp"

namespace fairsite {

using nlohmann::json;

void TrainConfig::validate() const {
  if (epochs < 1) throw ValidationError("train config: epochs must be >= 1");
  if (learning_rate <= 0.0)
    throw ValidationError("train config: learning_rate must be positive");
  if (lambda < 0.0) throw ValidationError("train config: lambda must be >= 0");
  if (samples_per_trial < 1)
    throw ValidationError("train config: samples_per_trial must be >= 1");
  if (!(test_fraction > 0.0 && test_fraction < 1.0) ||
      !(val_fraction > 0.0 && val_fraction < 1.0))
    throw ValidationError("train config: split fractions must be in (0, 1)");
}

std::string base_trial_id(const std::string& trial_id) {
  const std::size_t pos = trial_id.find('#');
  return pos == std::string::npos ? trial_id : trial_id.substr(0, pos);
}

DatasetSplit split_dataset(const std::vector<RankingInstance>& instances,
                           const TrainConfig& config, Rng& rng) {
  if (instances.empty()) throw ValidationError("split_dataset: empty dataset");
  std::map<std::string, std::vector<const RankingInstance*>> by_trial;
  for (const RankingInstance& inst : instances)
    by_trial[base_trial_id(inst.trial.trial_id)].push_back(&inst);

  std::vector<std::string> ids;
  ids.reserve(by_trial.size());
  for (const auto& [id, group] : by_trial) ids.push_back(id);
  rng.shuffle(ids);

  const std::size_t n = ids.size();
  const std::size_t n_test =
      static_cast<std::size_t>(std::lround(config.test_fraction * static_cast<double>(n)));
  const std::size_t n_val = static_cast<std::size_t>(
      std::lround(config.val_fraction * static_cast<double>(n - n_test)));
  if (n_test == 0 || n_val == 0 || n_test + n_val >= n)
    throw ValidationError("split_dataset: too few trials to populate all splits");

  DatasetSplit split;
  for (std::size_t i = 0; i < n; ++i) {
    auto& dest = i < n_test          ? split.test
                 : i < n_test + n_val ? split.val
                                      : split.train;
    for (const RankingInstance* inst : by_trial[ids[i]]) dest.push_back(*inst);
  }
  return split;
}

std::vector<RankingInstance> to_full_variant(
    const std::vector<RankingInstance>& instances) {
  std::vector<RankingInstance> out;
  for (const RankingInstance& inst : instances) {
    const std::string& id = inst.trial.trial_id;
    const std::size_t pos = id.find('#');
    if (pos != std::string::npos && id.substr(pos) != "#0") continue;
    RankingInstance copy = inst;
    copy.trial.trial_id = base_trial_id(id);
    for (SiteRecord& site : copy.sites) {
      site.mask = {site.static_features.has_value(), site.diagnoses.has_value(),
                   site.prescriptions.has_value(),
                   site.history.has_value() && !site.history->empty()};
    }
    out.push_back(std::move(copy));
  }
  return out;
}

namespace {

struct OrderedLabels {
  std::vector<double> e;
  std::vector<Eigen::Matrix<double, kNumRaceGroups, 1>> race;
};

OrderedLabels labels_in_order(const RankingInstance& inst,
                              const std::vector<int>& order) {
  OrderedLabels out;
  out.e.reserve(order.size());
  out.race.reserve(order.size());
  for (int i : order) {
    const SiteRecord& s = inst.sites[static_cast<std::size_t>(i)];
    out.e.push_back(s.enrollment_label);
    out.race.push_back(s.race_label);
  }
  return out;
}

double instance_reward_topk(const Model& model, const RankingInstance& inst,
                            double lambda) {
  const Vec q = model.score(inst);
  std::vector<int> order(static_cast<std::size_t>(inst.M()));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (q[a] != q[b]) return q[a] > q[b];
    return a < b;
  });
  const OrderedLabels labels = labels_in_order(inst, order);
  return reward(labels.e, labels.race, inst.K, RewardConfig{lambda}).R;
}

std::vector<Mat> collect_grads(const ad::Tape& tape, const TapeBinding& binding,
                               int count) {
  std::vector<Mat> grads;
  grads.reserve(static_cast<std::size_t>(count));
  for (int h = 0; h < count; ++h) grads.push_back(tape.grad(binding(h)));
  return grads;
}

}  // namespace

Checkpoint train(const std::vector<RankingInstance>& train_set,
                 const std::vector<RankingInstance>& val_set,
                 const DatasetManifest& manifest, const TrainConfig& config) {
  config.validate();
  if (train_set.empty()) throw ValidationError("train: empty training set");

  Rng rng(static_cast<std::uint64_t>(config.seed));
  Model model = Model::create(manifest, config.model,
                              config.seed ^ 0x6d6f64656cLL);
  Adam optimizer(model.store, config.learning_rate);

  Checkpoint best;
  best.config = config;
  best.manifest_hash = manifest_hash(manifest);
  best.val_reward = -std::numeric_limits<double>::infinity();

  double baseline = 0.0;
  bool baseline_init = false;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t idx : order) {
      const RankingInstance& inst = train_set[idx];
      ad::Tape tape;
      Model::Forward f = model.forward(tape, inst);
      const Vec q = tape.value(f.q_node).col(0);
      if (!q.allFinite())
        throw std::runtime_error("train: non-finite scores at epoch " +
                                 std::to_string(epoch) + ", trial " +
                                 inst.trial.trial_id);

      Vec dq;  // gradient of the maximized objective w.r.t. q
      if (config.objective == Objective::kReinforce) {
        std::vector<std::pair<SampledRanking, double>> samples;
        samples.reserve(static_cast<std::size_t>(config.samples_per_trial));
        double mean_reward = 0.0;
        for (int n = 0; n < config.samples_per_trial; ++n) {
          SampledRanking ranking = sample_ranking(q, inst.K, rng);
          const OrderedLabels labels = labels_in_order(inst, ranking.order);
          const double r =
              reward(labels.e, labels.race, inst.K, RewardConfig{config.lambda}).R;
          mean_reward += r;
          samples.emplace_back(std::move(ranking), r);
        }
        mean_reward /= config.samples_per_trial;
        if (config.use_baseline) {
          if (!baseline_init) {
            baseline = mean_reward;
            baseline_init = true;
          }
          for (auto& [ranking, r] : samples) r -= baseline;
          baseline = 0.95 * baseline + 0.05 * mean_reward;
        }
        dq = policy_gradient(q, samples);
      } else {
        // Squared-error regression of scores onto enrollment labels.
        dq = Vec(q.size());
        for (int i = 0; i < inst.M(); ++i)
          dq[i] = -2.0 *
                  (q[i] - inst.sites[static_cast<std::size_t>(i)].enrollment_label) /
                  inst.M();
      }

      // Minimize the negative objective.
      const Mat seed = -dq;
      tape.backward(f.q_node, seed);
      std::vector<Mat> grads =
          collect_grads(tape, f.binding, model.store.count());
      for (const Mat& g : grads)
        if (!g.allFinite())
          throw std::runtime_error("train: non-finite gradient at epoch " +
                                   std::to_string(epoch) + ", trial " +
                                   inst.trial.trial_id);
      optimizer.step(model.store, grads);
    }

    // Validation-based model selection: mean reward with deterministic
    // top-K at the training lambda.
    double val = 0.0;
    if (!val_set.empty()) {
      for (const RankingInstance& inst : val_set)
        val += instance_reward_topk(model, inst, config.lambda);
      val /= static_cast<double>(val_set.size());
    }
    if (val > best.val_reward) {
      best.model = model;  // parameter snapshot
      best.val_reward = val;
      best.epoch = epoch;
    }
  }
  if (!std::isfinite(best.val_reward)) {
    best.model = model;
    best.val_reward = 0.0;
    best.epoch = config.epochs;
  }
  return best;
}

MetricReport evaluate_scores(
    const std::vector<RankingInstance>& test_set, double lambda,
    const std::function<Vec(const RankingInstance&)>& score) {
  std::vector<double> rel, nd, ent;
  Eigen::Matrix<double, kNumRaceGroups, 1> race_sum =
      Eigen::Matrix<double, kNumRaceGroups, 1>::Zero();
  for (const RankingInstance& inst : test_set) {
    const Vec q = score(inst);
    std::vector<int> order(static_cast<std::size_t>(inst.M()));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (q[a] != q[b]) return q[a] > q[b];
      return a < b;
    });
    std::vector<int> selected(order.begin(), order.begin() + inst.K);
    const OrderedLabels labels = labels_in_order(inst, order);
    rel.push_back(relative_error(selected, inst));
    nd.push_back(ndcg(labels.e, inst.K));
    ent.push_back(population_entropy(selected, inst));
    race_sum += selected_race_distribution(selected, inst);
  }
  auto mean_ci = [](const std::vector<double>& xs) {
    const double n = static_cast<double>(xs.size());
    double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var = n > 1 ? var / (n - 1) : 0.0;
    return std::pair<double, double>{mean, 1.96 * std::sqrt(var / n)};
  };
  MetricReport report;
  report.lambda = lambda;
  std::tie(report.relative_error_mean, report.relative_error_ci) = mean_ci(rel);
  std::tie(report.ndcg_mean, report.ndcg_ci) = mean_ci(nd);
  report.entropy_mean = mean_ci(ent).first;
  if (!test_set.empty())
    report.race_mean = race_sum / static_cast<double>(test_set.size());
  return report;
}

MetricReport evaluate(const Checkpoint& checkpoint,
                      const std::vector<RankingInstance>& test_set,
                      const DatasetManifest& manifest) {
  if (checkpoint.manifest_hash != manifest_hash(manifest))
    throw ValidationError("evaluate: checkpoint manifest hash mismatch");
  return evaluate_scores(
      test_set, checkpoint.config.lambda,
      [&](const RankingInstance& inst) { return checkpoint.model.score(inst); });
}

std::vector<TradeoffPoint> sweep_lambda(
    const std::vector<RankingInstance>& instances, const DatasetManifest& manifest,
    const TrainConfig& base_config, const std::vector<double>& lambdas,
    const std::function<void(double, const Checkpoint&)>& on_model) {
  if (lambdas.empty()) throw ValidationError("sweep_lambda: no lambda values");
  std::vector<double> sorted = lambdas;
  std::sort(sorted.begin(), sorted.end());
  std::vector<TradeoffPoint> out;
  for (double lambda : sorted) {
    TrainConfig config = base_config;
    config.lambda = lambda;
    Rng split_rng(static_cast<std::uint64_t>(config.seed));  // shared splits
    DatasetSplit split = split_dataset(instances, config, split_rng);
    if (config.variant == DatasetVariant::kFull) {
      split.train = to_full_variant(split.train);
      split.val = to_full_variant(split.val);
      split.test = to_full_variant(split.test);
    }
    Checkpoint ckpt = train(split.train, split.val, manifest, config);
    TradeoffPoint point;
    point.lambda = lambda;
    point.report = evaluate(ckpt, split.test, manifest);
    out.push_back(point);
    if (on_model) on_model(lambda, ckpt);
  }
  return out;
}

namespace {

json mat_to_json(const Mat& m) {
  json data = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Mat mat_from_json(const json& j) {
  Mat m(j.at("rows").get<Eigen::Index>(), j.at("cols").get<Eigen::Index>());
  const json& data = j.at("data");
  std::size_t i = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = data[i++].get<double>();
  return m;
}

json train_config_to_json(const TrainConfig& c) {
  return json{{"epochs", c.epochs},
              {"learning_rate", c.learning_rate},
              {"lambda", c.lambda},
              {"samples_per_trial", c.samples_per_trial},
              {"test_fraction", c.test_fraction},
              {"val_fraction", c.val_fraction},
              {"seed", c.seed},
              {"n_emb", c.model.n_emb},
              {"n_head", c.model.n_head},
              {"n_layers", c.model.n_layers},
              {"head_hidden", c.model.head_hidden},
              {"fusion", c.model.fusion == FusionKind::kMcat ? "mcat" : "fc"},
              {"objective",
               c.objective == Objective::kReinforce ? "reinforce" : "regression"},
              {"variant",
               c.variant == DatasetVariant::kMissing ? "missing" : "full"},
              {"use_baseline", c.use_baseline}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  c.epochs = j.at("epochs").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.lambda = j.at("lambda").get<double>();
  c.samples_per_trial = j.at("samples_per_trial").get<int>();
  c.test_fraction = j.at("test_fraction").get<double>();
  c.val_fraction = j.at("val_fraction").get<double>();
  c.seed = j.at("seed").get<long long>();
  c.model.n_emb = j.at("n_emb").get<int>();
  c.model.n_head = j.at("n_head").get<int>();
  c.model.n_layers = j.at("n_layers").get<int>();
  c.model.head_hidden = j.at("head_hidden").get<int>();
  c.model.fusion = j.at("fusion").get<std::string>() == "fc" ? FusionKind::kFc
                                                             : FusionKind::kMcat;
  c.objective = j.at("objective").get<std::string>() == "regression"
                    ? Objective::kRegression
                    : Objective::kReinforce;
  c.variant = j.at("variant").get<std::string>() == "full"
                  ? DatasetVariant::kFull
                  : DatasetVariant::kMissing;
  c.use_baseline = j.at("use_baseline").get<bool>();
  return c;
}

json manifest_to_json_ckpt(const DatasetManifest& m) {
  return json{{"n_t", m.n_t},       {"n_t_prime", m.n_t_prime},
              {"n_s", m.n_s},       {"n_c", m.n_c},
              {"n_d", m.n_d},       {"n_p", m.n_p},
              {"n_h", m.n_h},       {"M", m.M},
              {"K", m.K},           {"schema_version", m.schema_version},
              {"record_count", m.record_count}, {"seed", m.seed}};
}

DatasetManifest manifest_from_json_ckpt(const json& j) {
  DatasetManifest m;
  m.n_t = j.at("n_t").get<int>();
  m.n_t_prime = j.at("n_t_prime").get<int>();
  m.n_s = j.at("n_s").get<int>();
  m.n_c = j.at("n_c").get<int>();
  m.n_d = j.at("n_d").get<int>();
  m.n_p = j.at("n_p").get<int>();
  m.n_h = j.at("n_h").get<int>();
  m.M = j.at("M").get<int>();
  m.K = j.at("K").get<int>();
  m.schema_version = j.at("schema_version").get<std::string>();
  m.record_count = j.at("record_count").get<long long>();
  m.seed = j.at("seed").get<long long>();
  return m;
}

}  // namespace

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
  json j;
  j["format"] = "fairsite-checkpoint-1";
  j["manifest_hash"] = checkpoint.manifest_hash;
  j["manifest"] = manifest_to_json_ckpt(checkpoint.model.dims);
  j["train_config"] = train_config_to_json(checkpoint.config);
  j["val_reward"] = checkpoint.val_reward;
  j["epoch"] = checkpoint.epoch;
  json params = json::object();
  for (int h = 0; h < checkpoint.model.store.count(); ++h)
    params[checkpoint.model.store.name(h)] = mat_to_json(checkpoint.model.store[h]);
  j["params"] = params;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DatasetError("cannot write checkpoint " + path);
  out << j.dump() << "\n";
}

Checkpoint load_checkpoint(const std::string& path,
                           const DatasetManifest& manifest, bool force) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open checkpoint " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DatasetError("checkpoint " + path + ": " + e.what());
  }
  if (j.value("format", "") != "fairsite-checkpoint-1")
    throw DatasetError("checkpoint " + path + ": unknown format");

  Checkpoint ckpt;
  ckpt.manifest_hash = j.at("manifest_hash").get<std::string>();
  ckpt.config = train_config_from_json(j.at("train_config"));
  ckpt.val_reward = j.at("val_reward").get<double>();
  ckpt.epoch = j.at("epoch").get<int>();
  const DatasetManifest dims = manifest_from_json_ckpt(j.at("manifest"));
  ckpt.model = Model::create(dims, ckpt.config.model, 0);
  for (int h = 0; h < ckpt.model.store.count(); ++h) {
    const std::string& name = ckpt.model.store.name(h);
    if (!j.at("params").contains(name))
      throw DatasetError("checkpoint " + path + ": missing tensor " + name);
    Mat value = mat_from_json(j.at("params").at(name));
    if (value.rows() != ckpt.model.store[h].rows() ||
        value.cols() != ckpt.model.store[h].cols())
      throw DatasetError("checkpoint " + path + ": shape mismatch for " + name);
    ckpt.model.store[h] = std::move(value);
  }
  if (!force && ckpt.manifest_hash != manifest_hash(manifest))
    throw DatasetError("checkpoint " + path +
                       ": manifest hash mismatch (use --force to override)");
  return ckpt;
}

}  // namespace fairsite
