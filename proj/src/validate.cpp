#include "fairsite/validate.hpp"

#include <cmath>
#include <unordered_set>

namespace fairsite {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

void require_finite(const Vec& v, const std::string& name) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    require(std::isfinite(v[i]), name + " contains a non-finite entry");
  }
}

}  // namespace

void validate_manifest(const DatasetManifest& m) {
  require(m.n_t > 0 && m.n_t_prime > 0 && m.n_s > 0 && m.n_c > 0 && m.n_d > 0 &&
              m.n_p > 0 && m.n_h > 0 && m.M > 0 && m.K > 0,
          "manifest: all dimensions must be positive");
  require(m.K <= m.M, "manifest: K must not exceed M");
}

void validate_trial(const TrialRecord& trial, const DatasetManifest& manifest) {
  require(trial.features.size() == manifest.n_t,
          "trial " + trial.trial_id + ": features length " +
              std::to_string(trial.features.size()) + " != n_t " +
              std::to_string(manifest.n_t));
  require(trial.reduced_features.size() == manifest.n_t_prime,
          "trial " + trial.trial_id + ": reduced_features length mismatch");
  require_finite(trial.features, "trial " + trial.trial_id + " features");
  require_finite(trial.reduced_features,
                 "trial " + trial.trial_id + " reduced_features");
}

SiteRecord validate_site(SiteRecord site, const DatasetManifest& manifest) {
  const std::string who = "site " + site.site_id;

  bool any = false;
  for (bool b : site.mask) any = any || b;
  require(any, who + ": no modality present");

  // A visible modality must have data behind it. The converse does not
  // hold: augmented records retain hidden content with the mask bit off.
  require(!site.mask[kStatic] || site.static_features.has_value(),
          who + ": mask marks static present but field is null");
  require(!site.mask[kDiagnosis] || site.diagnoses.has_value(),
          who + ": mask marks diagnoses present but field is null");
  require(!site.mask[kPrescription] || site.prescriptions.has_value(),
          who + ": mask marks prescriptions present but field is null");
  require(!site.mask[kHistory] ||
              (site.history.has_value() && !site.history->empty()),
          who + ": mask marks enrollment_history present but it is null or empty");

  if (site.static_features) {
    require(site.static_features->size() == manifest.n_s,
            who + ": static length != n_s");
    require_finite(*site.static_features, who + " static");
  }
  if (site.diagnoses) {
    require(static_cast<int>(site.diagnoses->size()) == manifest.n_c,
            who + ": diagnoses length != n_c");
    for (int code : *site.diagnoses)
      require(code >= 0 && code < manifest.n_d,
              who + ": diagnosis code out of range");
  }
  if (site.prescriptions) {
    require(static_cast<int>(site.prescriptions->size()) == manifest.n_c,
            who + ": prescriptions length != n_c");
    for (int code : *site.prescriptions)
      require(code >= 0 && code < manifest.n_p,
              who + ": prescription code out of range");
  }
  if (site.history) {
    require(static_cast<int>(site.history->size()) <= manifest.n_h,
            who + ": enrollment_history longer than n_h");
    for (const HistoryEntry& h : *site.history) {
      require(h.trial.size() == manifest.n_t_prime,
              who + ": history trial vector length != n_t_prime");
      require(std::isfinite(h.enrollment) && h.enrollment >= 0.0,
              who + ": history enrollment negative or non-finite");
      require_finite(h.trial, who + " history trial vector");
    }
  }

  require(std::isfinite(site.enrollment_label) && site.enrollment_label >= 0.0,
          who + ": negative enrollment");

  double sum = site.race_label.sum();
  require(std::isfinite(sum), who + ": race_label non-finite");
  if (std::abs(sum - 100.0) <= 0.5) {
    site.race_label /= 100.0;  // percentage input convention
    sum = site.race_label.sum();
  }
  require(std::abs(sum - 1.0) <= 1e-6,
          who + ": race_label sums to " + std::to_string(sum) +
              ", outside both fraction and percentage conventions");
  for (int g = 0; g < kNumRaceGroups; ++g) {
    require(site.race_label[g] >= 0.0 && site.race_label[g] <= 1.0 + 1e-12,
            who + ": race_label component outside [0, 1]");
  }
  return site;
}

RankingInstance validate_instance(RankingInstance instance,
                                  const DatasetManifest& manifest) {
  validate_trial(instance.trial, manifest);
  require(instance.M() == manifest.M,
          "instance " + instance.trial.trial_id + ": expected " +
              std::to_string(manifest.M) + " sites, got " +
              std::to_string(instance.M()));
  require(instance.K == manifest.K,
          "instance " + instance.trial.trial_id + ": K mismatch with manifest");
  std::unordered_set<std::string> ids;
  for (SiteRecord& site : instance.sites) {
    require(ids.insert(site.site_id).second,
            "instance " + instance.trial.trial_id + ": duplicate site id " +
                site.site_id);
    site = validate_site(std::move(site), manifest);
  }
  return instance;
}

}  // namespace fairsite
