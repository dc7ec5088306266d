#pragma once

#include <array>
#include <string>
#include <vector>

#include "fairsite/rng.hpp"
#include "fairsite/types.hpp"

namespace fairsite {

struct LabelerConfig {
  double intercept = 2.0;
  double projection_weight = 2.0;   // trial . (P site_static) term
  double quality_weight = 2.0;      // fixed linear site-quality term u . s
  double history_weight = 0.08;     // mean of the last 3 history enrollments
  double specialty_bonus = 1.5;     // trial and site share a specialty
  double noise_stddev = 0.4;
  long long projection_seed = 7;    // seeds the fixed projection matrix
};

struct GeneratorConfig {
  int pool_size = 500;
  int n_trials = 300;
  DatasetManifest dimensions;  // defaults to desk scale
  double p_present = 0.8;
  int copies_per_trial = 10;
  long long seed = 0;
  int specialty_count = 5;
  std::array<double, kNumRaceGroups> race_prior_means{0.561, 0.158, 0.181,
                                                      0.065, 0.028, 0.007};
  std::array<double, kNumRaceGroups> race_prior_stddevs{0.25, 0.10, 0.15,
                                                        0.05, 0.03, 0.01};
  double bigram_concentration = 0.5;  // Dirichlet concentration per row
  LabelerConfig labeler;

  GeneratorConfig() { dimensions = desk_scale_manifest(); }

  void validate() const;
};

// Specialty-conditioned initial distributions plus a shared row-stochastic
// transition matrix over code categories.
struct BigramTable {
  Mat initial;     // specialty_count x n_codes, rows sum to 1
  Mat transition;  // n_codes x n_codes, rows sum to 1

  // Dirichlet-sampled rows, seeded.
  static BigramTable sample(int specialty_count, int n_codes,
                            double concentration, Rng& rng);
  void check() const;  // throws on degenerate rows
};

// Deterministic parametric labeler with a recoverable signal: a softplus
// of a fixed projection of site statics against the trial, a history
// momentum term, and a specialty-match bonus, plus seeded noise.
class EnrollmentLabeler {
 public:
  EnrollmentLabeler(const LabelerConfig& config, const DatasetManifest& dims,
                    int specialty_count);

  // Pre-round, noise-free response; strictly increasing in the history
  // momentum.
  double mean_response(const TrialRecord& trial, const SiteRecord& site) const;

  long long operator()(const TrialRecord& trial, const SiteRecord& site,
                       Rng& rng) const;

 private:
  LabelerConfig config_;
  Mat projection_;  // n_s x n_t
  Vec quality_;     // n_s, fixed site-quality direction
  int specialty_count_;
};

EnrollmentLabeler default_labeler(const GeneratorConfig& config);

// Sites with specialty-tagged statics, sampled race priors, bigram code
// histories, and empty enrollment histories.
std::vector<SiteRecord> build_site_pool(const GeneratorConfig& config,
                                        const BigramTable& diagnosis_table,
                                        const BigramTable& prescription_table,
                                        Rng& rng);

std::vector<int> sample_code_sequence(const BigramTable& table, int specialty,
                                      int length, Rng& rng);

std::vector<TrialRecord> build_trials(const GeneratorConfig& config, Rng& rng);

// Sequential simulation: per trial, sample M pool sites without
// replacement, label them with their current histories, then append
// (reduced trial vector, enrollment) to each selected site's history,
// truncated to the most recent n_h entries.
std::vector<RankingInstance> simulate_trials(std::vector<SiteRecord>& pool,
                                             const std::vector<TrialRecord>& trials,
                                             const EnrollmentLabeler& labeler,
                                             const GeneratorConfig& config,
                                             Rng& rng);

// Real-data style selection: top M candidates by enrollment label, padded
// with random zero-enrollment pool sites when there are fewer than M.
std::vector<SiteRecord> topm_with_padding(std::vector<SiteRecord> candidates,
                                          const std::vector<SiteRecord>& pool,
                                          int M, Rng& rng);

// Duplicates every instance copies_per_trial times with independent
// per-site masks, each bit Bernoulli(p_present) conditioned on at least
// one available modality staying present. Hidden content is retained.
std::vector<RankingInstance> apply_missingness(
    const std::vector<RankingInstance>& instances, double p_present,
    int copies_per_trial, Rng& rng);

// Whole pipeline: pool, trials, simulation, missingness augmentation.
std::pair<DatasetManifest, std::vector<RankingInstance>> generate_dataset(
    const GeneratorConfig& config);

// Config file (JSON) round trip for the CLI.
GeneratorConfig load_generator_config(const std::string& path);
void save_generator_config(const GeneratorConfig& config, const std::string& path);

}  // namespace fairsite
