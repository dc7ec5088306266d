#pragma once

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <string>
#include <vector>

namespace fairsite {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr int kNumModalities = 4;
inline constexpr int kNumRaceGroups = 6;

// Modality slot order, fixed everywhere: static, diagnoses, prescriptions,
// enrollment history.
enum Modality : int {
  kStatic = 0,
  kDiagnosis = 1,
  kPrescription = 2,
  kHistory = 3,
};

struct TrialRecord {
  std::string trial_id;
  Vec features;          // length n_t
  Vec reduced_features;  // length n_t_prime
};

// One past trial seen by a site: the reduced trial vector plus the
// enrollment the site achieved for it.
struct HistoryEntry {
  Vec trial;  // length n_t_prime
  double enrollment = 0.0;
};

struct SiteRecord {
  std::string site_id;
  std::optional<Vec> static_features;                 // length n_s
  std::optional<std::vector<int>> diagnoses;          // n_c indices in [0, n_d)
  std::optional<std::vector<int>> prescriptions;      // n_c indices in [0, n_p)
  std::optional<std::vector<HistoryEntry>> history;   // up to n_h entries
  std::array<bool, kNumModalities> mask{};            // model visibility
  double enrollment_label = 0.0;                      // e_i >= 0
  Eigen::Matrix<double, kNumRaceGroups, 1> race_label;  // fractions, sum 1
};

struct RankingInstance {
  TrialRecord trial;
  std::vector<SiteRecord> sites;  // exactly M
  int K = 0;

  int M() const { return static_cast<int>(sites.size()); }
};

struct DatasetManifest {
  int n_t = 0;
  int n_t_prime = 0;
  int n_s = 0;
  int n_c = 0;
  int n_d = 0;
  int n_p = 0;
  int n_h = 0;
  int M = 0;
  int K = 0;
  std::string schema_version = "1";
  long long record_count = 0;
  long long seed = 0;
};

// Desk-scale defaults: minutes-scale CPU runs.
inline DatasetManifest desk_scale_manifest() {
  DatasetManifest m;
  m.n_t = 32;
  m.n_t_prime = 24;
  m.n_s = 16;
  m.n_c = 50;
  m.n_d = 20;
  m.n_p = 12;
  m.n_h = 8;
  m.M = 20;
  m.K = 10;
  return m;
}

// Full-scale dimensions from the source data description.
inline DatasetManifest full_scale_manifest() {
  DatasetManifest m;
  m.n_t = 1827;
  m.n_t_prime = 512;  // trial vector without the eligibility block; configurable
  m.n_s = 669;
  m.n_c = 500;
  m.n_d = 260;
  m.n_p = 100;
  m.n_h = 50;
  m.M = 20;
  m.K = 10;
  return m;
}

}  // namespace fairsite
