#include "fairsite/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "fairsite/validate.hpp"

namespace fairsite {

using nlohmann::json;

void GeneratorConfig::validate() const {
  validate_manifest(dimensions);
  if (!(p_present > 0.0 && p_present <= 1.0))
    throw ValidationError("config: p_present must be in (0, 1]");
  if (copies_per_trial < 1)
    throw ValidationError("config: copies_per_trial must be >= 1");
  if (pool_size < dimensions.M)
    throw ValidationError("config: pool smaller than M");
  if (n_trials < 1) throw ValidationError("config: n_trials must be >= 1");
  if (specialty_count < 1 || specialty_count > dimensions.n_s)
    throw ValidationError("config: specialty_count must be in [1, n_s]");
  if (specialty_count > dimensions.n_t)
    throw ValidationError("config: specialty_count must be <= n_t");
  if (bigram_concentration <= 0.0)
    throw ValidationError("config: bigram_concentration must be positive");
  for (double m : race_prior_means)
    if (m < 0.0) throw ValidationError("config: race prior means must be >= 0");
  for (double s : race_prior_stddevs)
    if (s < 0.0) throw ValidationError("config: race prior stddevs must be >= 0");
}

namespace {

// Dirichlet(alpha) row via normalized Gamma draws (Marsaglia-Tsang).
double gamma_draw(double alpha, Rng& rng) {
  if (alpha < 1.0) {
    const double u = std::max(rng.uniform(), 1e-300);
    return gamma_draw(alpha + 1.0, rng) * std::pow(u, 1.0 / alpha);
  }
  const double d = alpha - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = rng.normal();
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    const double u = rng.uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
      return d * v;
  }
}

Eigen::RowVectorXd dirichlet_row(int n, double concentration, Rng& rng) {
  Eigen::RowVectorXd row(n);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    row[i] = gamma_draw(concentration, rng);
    total += row[i];
  }
  if (total <= 0.0) return Eigen::RowVectorXd::Constant(n, 1.0 / n);
  return row / total;
}

double softplus(double x) {
  if (x > 30.0) return x;
  return std::log1p(std::exp(x));
}

}  // namespace

BigramTable BigramTable::sample(int specialty_count, int n_codes,
                                double concentration, Rng& rng) {
  BigramTable t;
  t.initial = Mat(specialty_count, n_codes);
  for (int s = 0; s < specialty_count; ++s)
    t.initial.row(s) = dirichlet_row(n_codes, concentration, rng);
  t.transition = Mat(n_codes, n_codes);
  for (int c = 0; c < n_codes; ++c)
    t.transition.row(c) = dirichlet_row(n_codes, concentration, rng);
  t.check();
  return t;
}

void BigramTable::check() const {
  auto check_rows = [](const Mat& m, const char* what) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      if (m.row(r).minCoeff() < 0.0)
        throw ValidationError(std::string(what) + ": negative entry");
      const double s = m.row(r).sum();
      if (s <= 0.0) throw ValidationError(std::string(what) + ": degenerate row");
      if (std::abs(s - 1.0) > 1e-9)
        throw ValidationError(std::string(what) + ": row not stochastic");
    }
  };
  check_rows(initial, "bigram initial");
  check_rows(transition, "bigram transition");
}

std::vector<int> sample_code_sequence(const BigramTable& table, int specialty,
                                      int length, Rng& rng) {
  std::vector<int> seq;
  if (length == 0) return seq;
  seq.reserve(static_cast<std::size_t>(length));
  const int n_codes = static_cast<int>(table.transition.rows());
  auto draw_row = [&](const Eigen::RowVectorXd& row) {
    std::vector<double> w(row.data(), row.data() + n_codes);
    return static_cast<int>(rng.categorical(w));
  };
  int code = draw_row(table.initial.row(specialty));
  seq.push_back(code);
  for (int i = 1; i < length; ++i) {
    code = draw_row(table.transition.row(code));
    seq.push_back(code);
  }
  return seq;
}

int site_specialty(const SiteRecord& site, int specialty_count) {
  int best = 0;
  for (int s = 1; s < specialty_count; ++s)
    if ((*site.static_features)[s] > (*site.static_features)[best]) best = s;
  return best;
}

namespace {

int trial_specialty(const TrialRecord& trial, int specialty_count) {
  int best = 0;
  for (int s = 1; s < specialty_count; ++s)
    if (trial.features[s] > trial.features[best]) best = s;
  return best;
}

}  // namespace

std::vector<SiteRecord> build_site_pool(const GeneratorConfig& config,
                                        const BigramTable& diagnosis_table,
                                        const BigramTable& prescription_table,
                                        Rng& rng) {
  config.validate();
  const DatasetManifest& d = config.dimensions;
  std::vector<SiteRecord> pool;
  pool.reserve(static_cast<std::size_t>(config.pool_size));
  for (int i = 0; i < config.pool_size; ++i) {
    SiteRecord site;
    char buf[16];
    std::snprintf(buf, sizeof buf, "site%05d", i);
    site.site_id = buf;

    const int specialty = static_cast<int>(rng.below(
        static_cast<std::uint64_t>(config.specialty_count)));
    Vec stat = Vec::Zero(d.n_s);
    stat[specialty] = 1.0;
    for (int k = config.specialty_count; k < d.n_s; ++k) stat[k] = rng.normal();
    site.static_features = stat;

    // Race distribution: clipped normal draws around the priors,
    // renormalized to a probability vector.
    Eigen::Matrix<double, kNumRaceGroups, 1> race;
    double total = 0.0;
    for (int g = 0; g < kNumRaceGroups; ++g) {
      race[g] = std::max(0.0, rng.normal(config.race_prior_means[g],
                                         config.race_prior_stddevs[g]));
      total += race[g];
    }
    if (total <= 0.0) {
      race.setConstant(1.0 / kNumRaceGroups);
    } else {
      race /= total;
    }
    site.race_label = race;

    site.diagnoses = sample_code_sequence(diagnosis_table, specialty, d.n_c, rng);
    site.prescriptions =
        sample_code_sequence(prescription_table, specialty, d.n_c, rng);

    site.history = std::vector<HistoryEntry>{};
    site.mask = {true, true, true, false};  // history empty until simulated
    site.enrollment_label = 0.0;
    pool.push_back(std::move(site));
  }
  return pool;
}

std::vector<TrialRecord> build_trials(const GeneratorConfig& config, Rng& rng) {
  const DatasetManifest& d = config.dimensions;
  std::vector<TrialRecord> trials;
  trials.reserve(static_cast<std::size_t>(config.n_trials));
  for (int i = 0; i < config.n_trials; ++i) {
    TrialRecord t;
    char buf[16];
    std::snprintf(buf, sizeof buf, "trial%06d", i);
    t.trial_id = buf;
    const int specialty = static_cast<int>(rng.below(
        static_cast<std::uint64_t>(config.specialty_count)));
    t.features = Vec::Zero(d.n_t);
    t.features[specialty] = 1.0;
    for (int k = config.specialty_count; k < d.n_t; ++k) t.features[k] = rng.normal();
    t.reduced_features = t.features.head(d.n_t_prime);
    trials.push_back(std::move(t));
  }
  return trials;
}

EnrollmentLabeler::EnrollmentLabeler(const LabelerConfig& config,
                                     const DatasetManifest& dims,
                                     int specialty_count)
    : config_(config), specialty_count_(specialty_count) {
  Rng proj_rng(static_cast<std::uint64_t>(config.projection_seed));
  projection_ = Mat(dims.n_s, dims.n_t);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dims.n_s));
  for (int r = 0; r < dims.n_s; ++r)
    for (int c = 0; c < dims.n_t; ++c) projection_(r, c) = scale * proj_rng.normal();
  quality_ = Vec(dims.n_s);
  for (int r = 0; r < dims.n_s; ++r) quality_[r] = scale * proj_rng.normal();
}

double EnrollmentLabeler::mean_response(const TrialRecord& trial,
                                        const SiteRecord& site) const {
  const Vec projected = projection_.transpose() * (*site.static_features);
  const double aligned =
      trial.features.dot(projected) / std::sqrt(static_cast<double>(trial.features.size()));

  double momentum = 0.0;
  if (site.history && !site.history->empty()) {
    const auto& h = *site.history;
    const std::size_t n = std::min<std::size_t>(3, h.size());
    for (std::size_t j = h.size() - n; j < h.size(); ++j) momentum += h[j].enrollment;
    momentum /= static_cast<double>(n);
  }

  const bool match = trial_specialty(trial, specialty_count_) ==
                     site_specialty(site, specialty_count_);

  const double score = config_.intercept +
                       config_.projection_weight * aligned +
                       config_.quality_weight * quality_.dot(*site.static_features) +
                       config_.history_weight * momentum +
                       (match ? config_.specialty_bonus : 0.0);
  return softplus(score);
}

long long EnrollmentLabeler::operator()(const TrialRecord& trial,
                                        const SiteRecord& site, Rng& rng) const {
  const double noisy =
      mean_response(trial, site) + config_.noise_stddev * rng.normal();
  return std::max(0LL, static_cast<long long>(std::llround(noisy)));
}

EnrollmentLabeler default_labeler(const GeneratorConfig& config) {
  return EnrollmentLabeler(config.labeler, config.dimensions,
                           config.specialty_count);
}

std::vector<RankingInstance> simulate_trials(std::vector<SiteRecord>& pool,
                                             const std::vector<TrialRecord>& trials,
                                             const EnrollmentLabeler& labeler,
                                             const GeneratorConfig& config,
                                             Rng& rng) {
  const DatasetManifest& d = config.dimensions;
  if (static_cast<int>(pool.size()) < d.M)
    throw ValidationError("simulate_trials: pool smaller than M");
  std::vector<RankingInstance> out;
  out.reserve(trials.size());
  std::vector<int> indices(pool.size());
  std::iota(indices.begin(), indices.end(), 0);

  for (const TrialRecord& trial : trials) {
    // Sample M distinct pool positions.
    for (int j = 0; j < d.M; ++j) {
      const std::size_t pick =
          static_cast<std::size_t>(j) +
          static_cast<std::size_t>(rng.below(indices.size() - static_cast<std::size_t>(j)));
      std::swap(indices[static_cast<std::size_t>(j)], indices[pick]);
    }

    RankingInstance inst;
    inst.trial = trial;
    inst.K = d.K;
    for (int j = 0; j < d.M; ++j) {
      SiteRecord& live = pool[static_cast<std::size_t>(indices[static_cast<std::size_t>(j)])];
      SiteRecord snapshot = live;  // current history state
      snapshot.mask = {true, true, true, !snapshot.history->empty()};
      snapshot.enrollment_label =
          static_cast<double>(labeler(trial, snapshot, rng));
      inst.sites.push_back(snapshot);

      // Update the live site's history with this trial's outcome.
      live.history->push_back(
          {trial.reduced_features, inst.sites.back().enrollment_label});
      if (static_cast<int>(live.history->size()) > d.n_h)
        live.history->erase(live.history->begin(),
                            live.history->end() - d.n_h);
    }
    out.push_back(std::move(inst));
  }
  return out;
}

std::vector<SiteRecord> topm_with_padding(std::vector<SiteRecord> candidates,
                                          const std::vector<SiteRecord>& pool,
                                          int M, Rng& rng) {
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const SiteRecord& a, const SiteRecord& b) {
                     return a.enrollment_label > b.enrollment_label;
                   });
  if (static_cast<int>(candidates.size()) > M) candidates.resize(static_cast<std::size_t>(M));
  while (static_cast<int>(candidates.size()) < M) {
    SiteRecord filler = pool[static_cast<std::size_t>(rng.below(pool.size()))];
    const bool taken = std::any_of(
        candidates.begin(), candidates.end(),
        [&](const SiteRecord& s) { return s.site_id == filler.site_id; });
    if (taken) continue;
    filler.enrollment_label = 0.0;
    candidates.push_back(std::move(filler));
  }
  return candidates;
}

std::vector<RankingInstance> apply_missingness(
    const std::vector<RankingInstance>& instances, double p_present,
    int copies_per_trial, Rng& rng) {
  std::vector<RankingInstance> out;
  out.reserve(instances.size() * static_cast<std::size_t>(copies_per_trial));
  for (const RankingInstance& base : instances) {
    for (int c = 0; c < copies_per_trial; ++c) {
      RankingInstance copy = base;
      copy.trial.trial_id = base.trial.trial_id + "#" + std::to_string(c);
      for (SiteRecord& site : copy.sites) {
        // Rejection-sample over the available modalities until at least one
        // stays present; unavailable modalities keep their bit off.
        std::array<bool, kNumModalities> available = site.mask;
        std::array<bool, kNumModalities> mask{};
        bool any = false;
        do {
          any = false;
          for (int k = 0; k < kNumModalities; ++k) {
            mask[static_cast<std::size_t>(k)] =
                available[static_cast<std::size_t>(k)] && rng.uniform() < p_present;
            any = any || mask[static_cast<std::size_t>(k)];
          }
        } while (!any);
        site.mask = mask;  // hidden content is retained in the record
      }
      out.push_back(std::move(copy));
    }
  }
  return out;
}

std::pair<DatasetManifest, std::vector<RankingInstance>> generate_dataset(
    const GeneratorConfig& config) {
  config.validate();
  Rng rng(static_cast<std::uint64_t>(config.seed));
  Rng table_rng = rng.substream(1);
  Rng pool_rng = rng.substream(2);
  Rng trial_rng = rng.substream(3);
  Rng sim_rng = rng.substream(4);
  Rng miss_rng = rng.substream(5);

  const BigramTable diagnosis_table = BigramTable::sample(
      config.specialty_count, config.dimensions.n_d, config.bigram_concentration,
      table_rng);
  const BigramTable prescription_table = BigramTable::sample(
      config.specialty_count, config.dimensions.n_p, config.bigram_concentration,
      table_rng);
  std::vector<SiteRecord> pool =
      build_site_pool(config, diagnosis_table, prescription_table, pool_rng);
  const std::vector<TrialRecord> trials = build_trials(config, trial_rng);
  const EnrollmentLabeler labeler = default_labeler(config);
  std::vector<RankingInstance> instances =
      simulate_trials(pool, trials, labeler, config, sim_rng);
  instances = apply_missingness(instances, config.p_present,
                                config.copies_per_trial, miss_rng);

  DatasetManifest manifest = config.dimensions;
  manifest.seed = config.seed;
  manifest.record_count = static_cast<long long>(instances.size());
  return {manifest, std::move(instances)};
}

GeneratorConfig load_generator_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError("config " + path + ": " + e.what());
  }
  GeneratorConfig c;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).template get<std::decay_t<decltype(field)>>();
  };
  get("pool_size", c.pool_size);
  get("n_trials", c.n_trials);
  get("p_present", c.p_present);
  get("copies_per_trial", c.copies_per_trial);
  get("seed", c.seed);
  get("specialty_count", c.specialty_count);
  get("bigram_concentration", c.bigram_concentration);
  if (j.contains("race_prior_means")) {
    auto v = j.at("race_prior_means").get<std::vector<double>>();
    if (v.size() != kNumRaceGroups)
      throw ValidationError("config: race_prior_means needs 6 entries");
    std::copy(v.begin(), v.end(), c.race_prior_means.begin());
  }
  if (j.contains("race_prior_stddevs")) {
    auto v = j.at("race_prior_stddevs").get<std::vector<double>>();
    if (v.size() != kNumRaceGroups)
      throw ValidationError("config: race_prior_stddevs needs 6 entries");
    std::copy(v.begin(), v.end(), c.race_prior_stddevs.begin());
  }
  if (j.contains("dimensions")) {
    const json& d = j.at("dimensions");
    auto dim = [&](const char* key, int& field) {
      if (d.contains(key)) field = d.at(key).get<int>();
    };
    dim("n_t", c.dimensions.n_t);
    dim("n_t_prime", c.dimensions.n_t_prime);
    dim("n_s", c.dimensions.n_s);
    dim("n_c", c.dimensions.n_c);
    dim("n_d", c.dimensions.n_d);
    dim("n_p", c.dimensions.n_p);
    dim("n_h", c.dimensions.n_h);
    dim("M", c.dimensions.M);
    dim("K", c.dimensions.K);
  }
  if (j.contains("labeler")) {
    const json& l = j.at("labeler");
    auto lab = [&](const char* key, auto& field) {
      if (l.contains(key)) field = l.at(key).template get<std::decay_t<decltype(field)>>();
    };
    lab("intercept", c.labeler.intercept);
    lab("projection_weight", c.labeler.projection_weight);
    lab("quality_weight", c.labeler.quality_weight);
    lab("history_weight", c.labeler.history_weight);
    lab("specialty_bonus", c.labeler.specialty_bonus);
    lab("noise_stddev", c.labeler.noise_stddev);
    lab("projection_seed", c.labeler.projection_seed);
  }
  c.validate();
  return c;
}

void save_generator_config(const GeneratorConfig& c, const std::string& path) {
  json j;
  j["pool_size"] = c.pool_size;
  j["n_trials"] = c.n_trials;
  j["p_present"] = c.p_present;
  j["copies_per_trial"] = c.copies_per_trial;
  j["seed"] = c.seed;
  j["specialty_count"] = c.specialty_count;
  j["bigram_concentration"] = c.bigram_concentration;
  j["race_prior_means"] = c.race_prior_means;
  j["race_prior_stddevs"] = c.race_prior_stddevs;
  j["dimensions"] = {{"n_t", c.dimensions.n_t},
                     {"n_t_prime", c.dimensions.n_t_prime},
                     {"n_s", c.dimensions.n_s},
                     {"n_c", c.dimensions.n_c},
                     {"n_d", c.dimensions.n_d},
                     {"n_p", c.dimensions.n_p},
                     {"n_h", c.dimensions.n_h},
                     {"M", c.dimensions.M},
                     {"K", c.dimensions.K}};
  j["labeler"] = {{"intercept", c.labeler.intercept},
                  {"projection_weight", c.labeler.projection_weight},
                  {"quality_weight", c.labeler.quality_weight},
                  {"history_weight", c.labeler.history_weight},
                  {"specialty_bonus", c.labeler.specialty_bonus},
                  {"noise_stddev", c.labeler.noise_stddev},
                  {"projection_seed", c.labeler.projection_seed}};
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write config " + path);
  out << j.dump(2) << "\n";
}

}  // namespace fairsite
