#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>

#include "fairsite/datagen.hpp"
#include "fairsite/validate.hpp"

using namespace fairsite;

namespace {

GeneratorConfig small_config() {
  GeneratorConfig c;
  c.pool_size = 40;
  c.n_trials = 20;
  c.copies_per_trial = 4;
  c.seed = 9;
  c.dimensions.n_t = 10;
  c.dimensions.n_t_prime = 6;
  c.dimensions.n_s = 8;
  c.dimensions.n_c = 12;
  c.dimensions.n_d = 9;
  c.dimensions.n_p = 6;
  c.dimensions.n_h = 3;
  c.dimensions.M = 6;
  c.dimensions.K = 3;
  return c;
}

}  // namespace

TEST_CASE("bigram table rows are distributions") {
  Rng rng(4);
  const BigramTable t = BigramTable::sample(5, 9, 0.5, rng);
  REQUIRE(t.initial.rows() == 5);
  REQUIRE(t.transition.rows() == 9);
  for (int r = 0; r < t.initial.rows(); ++r)
    CHECK(t.initial.row(r).sum() == doctest::Approx(1.0).epsilon(1e-9));
  for (int r = 0; r < t.transition.rows(); ++r)
    CHECK(t.transition.row(r).sum() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(t.initial.minCoeff() >= 0.0);
  CHECK_NOTHROW(t.check());
}

TEST_CASE("code sequences come from the table support") {
  Rng rng(8);
  const BigramTable t = BigramTable::sample(3, 7, 0.5, rng);
  for (int s = 0; s < 3; ++s) {
    const std::vector<int> seq = sample_code_sequence(t, s, 15, rng);
    CHECK(seq.size() == 15);
    for (int code : seq) CHECK((code >= 0 && code < 7));
  }
}

TEST_CASE("labeler mean response rises with history enrollments") {
  const GeneratorConfig config = small_config();
  const EnrollmentLabeler labeler = default_labeler(config);
  Rng rng(2);
  const std::vector<TrialRecord> trials = build_trials(config, rng);
  const BigramTable td = BigramTable::sample(config.specialty_count,
                                             config.dimensions.n_d, 0.5, rng);
  const BigramTable tp = BigramTable::sample(config.specialty_count,
                                             config.dimensions.n_p, 0.5, rng);
  std::vector<SiteRecord> pool = build_site_pool(config, td, tp, rng);

  SiteRecord lo = pool[0], hi = pool[0];
  HistoryEntry h;
  h.trial = trials[0].reduced_features;
  h.enrollment = 0;
  lo.history = std::vector<HistoryEntry>{h};
  h.enrollment = 30;
  hi.history = std::vector<HistoryEntry>{h};
  CHECK(labeler.mean_response(trials[0], hi) >
        labeler.mean_response(trials[0], lo));

  // Labels are nonnegative integers.
  Rng noise(3);
  for (int i = 0; i < 10; ++i) {
    const long long e = labeler(trials[0], pool[static_cast<std::size_t>(i)], noise);
    CHECK(e >= 0);
  }
}

TEST_CASE("simulation appends history and respects the cap") {
  GeneratorConfig config = small_config();
  Rng rng(15);
  const BigramTable td = BigramTable::sample(config.specialty_count,
                                             config.dimensions.n_d, 0.5, rng);
  const BigramTable tp = BigramTable::sample(config.specialty_count,
                                             config.dimensions.n_p, 0.5, rng);
  std::vector<SiteRecord> pool = build_site_pool(config, td, tp, rng);
  const std::vector<TrialRecord> trials = build_trials(config, rng);
  const EnrollmentLabeler labeler = default_labeler(config);
  const std::vector<RankingInstance> sim =
      simulate_trials(pool, trials, labeler, config, rng);

  CHECK(sim.size() == trials.size());
  bool some_history = false;
  for (const RankingInstance& inst : sim) {
    CHECK(inst.M() == config.dimensions.M);
    CHECK(inst.K == config.dimensions.K);
    for (const SiteRecord& s : inst.sites) {
      if (s.history) {
        CHECK(static_cast<int>(s.history->size()) <= config.dimensions.n_h);
        some_history = some_history || !s.history->empty();
      }
      // Pre-missingness instances expose every available modality.
      CHECK(s.mask[kStatic]);
      CHECK(s.mask[kDiagnosis]);
      CHECK(s.mask[kPrescription]);
      CHECK(s.mask[kHistory] == (s.history && !s.history->empty()));
    }
  }
  CHECK(some_history);
  // Pool sites accumulate history over the sequential pass.
  int with_history = 0;
  for (const SiteRecord& s : pool) with_history += s.history && !s.history->empty();
  CHECK(with_history > 0);
}

TEST_CASE("missingness augmentation: copies, invariants, distribution") {
  GeneratorConfig config = small_config();
  config.n_trials = 40;
  config.copies_per_trial = 25;
  auto [manifest, instances] = generate_dataset(config);
  CHECK(instances.size() ==
        static_cast<std::size_t>(config.n_trials * config.copies_per_trial));

  // Copies share the base trial and differ only in masks.
  std::map<std::string, int> copies;
  long long hidden_retained = 0;
  std::map<int, long long> mask_counts;  // 4-bit pattern -> count
  long long full_sites = 0;
  for (const RankingInstance& inst : instances) {
    const std::string base =
        inst.trial.trial_id.substr(0, inst.trial.trial_id.find('#'));
    ++copies[base];
    for (const SiteRecord& s : inst.sites) {
      int any = 0, pattern = 0;
      for (int k = 0; k < kNumModalities; ++k) {
        any += s.mask[static_cast<std::size_t>(k)];
        pattern |= s.mask[static_cast<std::size_t>(k)] << k;
      }
      CHECK(any >= 1);  // conditioning: never fully masked
      // Hidden content is retained in the record.
      if (!s.mask[kStatic] && s.static_features) ++hidden_retained;
      if (s.history && !s.history->empty()) {
        ++full_sites;  // all four modalities available
        ++mask_counts[pattern];
      }
    }
  }
  for (const auto& [base, n] : copies) CHECK(n == config.copies_per_trial);
  CHECK(hidden_retained > 0);

  // For sites with all 4 modalities available, masks follow
  // Bernoulli(p)^4 conditioned on >= 1 bit set. With p = 0.8 the
  // all-present pattern has probability .8^4/(1-.2^4) ~ 0.4102.
  const double p = config.p_present;
  const double denom = 1.0 - std::pow(1.0 - p, 4);
  for (int pattern = 1; pattern < 16; ++pattern) {
    int bits = 0;
    for (int k = 0; k < 4; ++k) bits += (pattern >> k) & 1;
    const double expect =
        std::pow(p, bits) * std::pow(1.0 - p, 4 - bits) / denom;
    const double got =
        mask_counts[pattern] / static_cast<double>(full_sites);
    CHECK(std::abs(got - expect) < 0.02 + 3.0 * std::sqrt(expect / full_sites));
  }
}

TEST_CASE("generate_dataset is seed-deterministic and validates") {
  GeneratorConfig config = small_config();
  auto [m1, a] = generate_dataset(config);
  auto [m2, b] = generate_dataset(config);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].trial.trial_id == b[i].trial.trial_id);
    CHECK((a[i].trial.features - b[i].trial.features).cwiseAbs().maxCoeff() ==
          0.0);
    for (std::size_t j = 0; j < a[i].sites.size(); ++j) {
      CHECK(a[i].sites[j].site_id == b[i].sites[j].site_id);
      CHECK(a[i].sites[j].mask == b[i].sites[j].mask);
      CHECK(a[i].sites[j].enrollment_label == b[i].sites[j].enrollment_label);
    }
  }

  config.seed = 1234;
  auto [m3, c] = generate_dataset(config);
  bool differs = false;
  for (std::size_t i = 0; i < a.size() && !differs; ++i)
    for (std::size_t j = 0; j < a[i].sites.size() && !differs; ++j)
      differs = a[i].sites[j].enrollment_label != c[i].sites[j].enrollment_label ||
                a[i].sites[j].mask != c[i].sites[j].mask;
  CHECK(differs);

  for (const RankingInstance& inst : a)
    CHECK_NOTHROW(validate_instance(inst, m1));
}

TEST_CASE("trial ids and copy suffixes") {
  GeneratorConfig config = small_config();
  config.n_trials = 3;
  config.copies_per_trial = 2;
  auto [manifest, instances] = generate_dataset(config);
  std::set<std::string> ids;
  for (const RankingInstance& inst : instances) ids.insert(inst.trial.trial_id);
  CHECK(ids.count("trial000000#0"));
  CHECK(ids.count("trial000000#1"));
  CHECK(ids.count("trial000002#1"));
  CHECK(ids.size() == 6);
}

TEST_CASE("generator config round trip and validation") {
  const std::string path =
      (std::filesystem::temp_directory_path() / "fairsite_genconf.json").string();
  GeneratorConfig config = small_config();
  config.p_present = 0.65;
  config.labeler.specialty_bonus = 2.5;
  save_generator_config(config, path);
  const GeneratorConfig back = load_generator_config(path);
  CHECK(back.pool_size == config.pool_size);
  CHECK(back.p_present == config.p_present);
  CHECK(back.labeler.specialty_bonus == config.labeler.specialty_bonus);
  CHECK(back.dimensions.M == config.dimensions.M);
  std::remove(path.c_str());

  GeneratorConfig bad = small_config();
  bad.p_present = 1.5;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = small_config();
  bad.pool_size = bad.dimensions.M - 1;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}
