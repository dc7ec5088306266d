#pragma once

#include <stdexcept>
#include <string>

#include "fairsite/types.hpp"

namespace fairsite {

class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Checks a site against the manifest dimensions and normalizes the race
// label. Percentage-convention race labels (sum 100 +- 0.5) are divided by
// 100. Throws ValidationError; otherwise returns the (possibly
// renormalized) record. Idempotent.
SiteRecord validate_site(SiteRecord site, const DatasetManifest& manifest);

void validate_trial(const TrialRecord& trial, const DatasetManifest& manifest);

// Validates the trial and every site, plus instance-level invariants
// (site count, unique site ids, K <= M).
RankingInstance validate_instance(RankingInstance instance,
                                  const DatasetManifest& manifest);

void validate_manifest(const DatasetManifest& manifest);

}  // namespace fairsite
