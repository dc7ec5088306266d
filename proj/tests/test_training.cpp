#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "fairsite/adam.hpp"
#include "fairsite/datagen.hpp"
#include "fairsite/dataset_io.hpp"
#include "fairsite/report.hpp"
#include "fairsite/training.hpp"

using namespace fairsite;

namespace {

GeneratorConfig tiny_data_config() {
  GeneratorConfig c;
  c.pool_size = 30;
  c.n_trials = 20;
  c.copies_per_trial = 3;
  c.seed = 77;
  c.dimensions.n_t = 8;
  c.dimensions.n_t_prime = 5;
  c.dimensions.n_s = 6;
  c.dimensions.n_c = 8;
  c.dimensions.n_d = 6;
  c.dimensions.n_p = 5;
  c.dimensions.n_h = 3;
  c.dimensions.M = 5;
  c.dimensions.K = 2;
  return c;
}

TrainConfig tiny_train_config() {
  TrainConfig t;
  t.epochs = 2;
  t.learning_rate = 1e-3;
  t.samples_per_trial = 2;
  t.seed = 5;
  t.model.n_emb = 4;
  t.model.n_head = 2;
  t.model.n_layers = 1;
  t.model.head_hidden = 4;
  return t;
}

std::string base_of(const std::string& id) { return base_trial_id(id); }

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) {
    path = (std::filesystem::temp_directory_path() / name).string();
  }
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("adam matches the frozen scalar trajectory") {
  // Minimizing 0.5*(x-3)^2 from 0 at lr 0.1: independently recomputed
  // first three iterates.
  ParamStore store;
  const int x = store.add("x", Mat::Zero(1, 1));
  Adam opt(store, 0.1);
  const double expect[] = {0.09999999966666669, 0.19989729224944813,
                           0.2996184760421757};
  for (double e : expect) {
    std::vector<Mat> grads = {Mat::Constant(1, 1, store[x](0, 0) - 3.0)};
    opt.step(store, grads);
    CHECK(store[x](0, 0) == doctest::Approx(e).epsilon(1e-12));
  }
}

TEST_CASE("split is by base trial id, disjoint, and seed-stable") {
  auto [manifest, instances] = generate_dataset(tiny_data_config());
  TrainConfig config = tiny_train_config();

  Rng rng1(9), rng2(9), rng3(10);
  const DatasetSplit s1 = split_dataset(instances, config, rng1);
  const DatasetSplit s2 = split_dataset(instances, config, rng2);
  const DatasetSplit s3 = split_dataset(instances, config, rng3);

  CHECK(s1.train.size() + s1.val.size() + s1.test.size() == instances.size());
  CHECK(!s1.train.empty());
  CHECK(!s1.val.empty());
  CHECK(!s1.test.empty());

  auto bases = [&](const std::vector<RankingInstance>& v) {
    std::set<std::string> out;
    for (const RankingInstance& i : v) out.insert(base_of(i.trial.trial_id));
    return out;
  };
  const auto btr = bases(s1.train), bva = bases(s1.val), bte = bases(s1.test);
  for (const std::string& b : btr) {
    CHECK(!bva.count(b));
    CHECK(!bte.count(b));
  }
  for (const std::string& b : bva) CHECK(!bte.count(b));

  // 20 base trials, 3 copies: test = 4 bases (12), val = round(.1*16) = 2
  // bases (6), train = 14 bases (42).
  CHECK(s1.test.size() == 12);
  CHECK(s1.val.size() == 6);
  CHECK(s1.train.size() == 42);

  CHECK(bases(s2.train) == btr);  // same seed, same split
  CHECK(bases(s3.train) != btr);  // different seed, different split

  CHECK_THROWS(split_dataset({}, config, rng1));
}

TEST_CASE("to_full_variant keeps one copy with availability masks") {
  auto [manifest, instances] = generate_dataset(tiny_data_config());
  const std::vector<RankingInstance> full = to_full_variant(instances);
  CHECK(full.size() * 3 == instances.size());
  std::set<std::string> seen;
  for (const RankingInstance& inst : full) {
    CHECK(seen.insert(base_of(inst.trial.trial_id)).second);
    for (const SiteRecord& s : inst.sites) {
      CHECK(s.mask[kStatic] == s.static_features.has_value());
      CHECK(s.mask[kDiagnosis] == s.diagnoses.has_value());
      CHECK(s.mask[kPrescription] == s.prescriptions.has_value());
      CHECK(s.mask[kHistory] == (s.history.has_value() && !s.history->empty()));
    }
  }
}

TEST_CASE("train produces a finite checkpoint and is deterministic") {
  auto [manifest, instances] = generate_dataset(tiny_data_config());
  TrainConfig config = tiny_train_config();
  Rng rng(3);
  const DatasetSplit split = split_dataset(instances, config, rng);

  const Checkpoint a = train(split.train, split.val, manifest, config);
  const Checkpoint b = train(split.train, split.val, manifest, config);
  CHECK(a.epoch >= 1);
  CHECK(std::isfinite(a.val_reward));
  CHECK(a.val_reward == b.val_reward);
  REQUIRE(a.model.store.count() == b.model.store.count());
  for (int h = 0; h < a.model.store.count(); ++h)
    CHECK((a.model.store[h] - b.model.store[h]).cwiseAbs().maxCoeff() == 0.0);

  TrainConfig bad = config;
  bad.epochs = 0;
  CHECK_THROWS(train(split.train, split.val, manifest, bad));
}

TEST_CASE("regression objective and fc fusion also train") {
  auto [manifest, instances] = generate_dataset(tiny_data_config());
  TrainConfig config = tiny_train_config();
  config.objective = Objective::kRegression;
  config.model.fusion = FusionKind::kFc;
  config.epochs = 1;
  Rng rng(3);
  const DatasetSplit split = split_dataset(instances, config, rng);
  const Checkpoint ckpt = train(split.train, split.val, manifest, config);
  CHECK(std::isfinite(ckpt.val_reward));
}

TEST_CASE("evaluate: oracle perfection, determinism, report round trip") {
  auto [manifest, instances] = generate_dataset(tiny_data_config());
  TrainConfig config = tiny_train_config();
  Rng rng(3);
  const DatasetSplit split = split_dataset(instances, config, rng);

  const MetricReport oracle =
      evaluate_scores(split.test, 0.0, [](const RankingInstance& inst) {
        Vec q(inst.M());
        for (int i = 0; i < inst.M(); ++i)
          q[i] = inst.sites[static_cast<std::size_t>(i)].enrollment_label;
        return q;
      });
  CHECK(oracle.relative_error_mean == 0.0);
  CHECK(oracle.ndcg_mean == 1.0);

  const Checkpoint ckpt = train(split.train, split.val, manifest, config);
  const MetricReport r1 = evaluate(ckpt, split.test, manifest);
  const MetricReport r2 = evaluate(ckpt, split.test, manifest);
  CHECK(r1.relative_error_mean == r2.relative_error_mean);
  CHECK(r1.entropy_mean == r2.entropy_mean);
  CHECK(r1.race_mean.sum() == doctest::Approx(1.0).epsilon(1e-9));

  TempFile rf("fairsite_report.json");
  save_report(r1, rf.path);
  const MetricReport back = load_report(rf.path);
  CHECK(back.relative_error_mean == r1.relative_error_mean);
  CHECK(back.ndcg_ci == r1.ndcg_ci);
  CHECK((back.race_mean - r1.race_mean).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("checkpoint round trip and manifest hash guard") {
  auto [manifest, instances] = generate_dataset(tiny_data_config());
  TrainConfig config = tiny_train_config();
  config.epochs = 1;
  Rng rng(3);
  const DatasetSplit split = split_dataset(instances, config, rng);
  const Checkpoint ckpt = train(split.train, split.val, manifest, config);

  TempFile f("fairsite_ckpt.json");
  save_checkpoint(ckpt, f.path);
  const Checkpoint back = load_checkpoint(f.path, manifest);
  const MetricReport r1 = evaluate(ckpt, split.test, manifest);
  const MetricReport r2 = evaluate(back, split.test, manifest);
  CHECK(r1.relative_error_mean == r2.relative_error_mean);
  CHECK(r1.ndcg_mean == r2.ndcg_mean);

  // Save twice: byte-identical.
  TempFile f2("fairsite_ckpt2.json");
  save_checkpoint(back, f2.path);
  CHECK(read_file(f.path) == read_file(f2.path));

  DatasetManifest other = manifest;
  other.seed = manifest.seed + 1;
  CHECK_THROWS_AS(load_checkpoint(f.path, other), DatasetError);
  CHECK_NOTHROW(load_checkpoint(f.path, other, /*force=*/true));
}

TEST_CASE("sweep produces sorted points and honors the callback") {
  auto [manifest, instances] = generate_dataset(tiny_data_config());
  TrainConfig config = tiny_train_config();
  config.epochs = 1;
  std::vector<double> seen;
  const std::vector<TradeoffPoint> points =
      sweep_lambda(instances, manifest, config, {2.0, 0.0},
                   [&](double lambda, const Checkpoint& c) {
                     seen.push_back(lambda);
                     CHECK(c.config.lambda == lambda);
                   });
  REQUIRE(points.size() == 2);
  CHECK(points[0].lambda == 0.0);
  CHECK(points[1].lambda == 2.0);
  CHECK(seen.size() == 2);

  // Single lambda equals plain train + evaluate on the same shared split.
  const std::vector<TradeoffPoint> single =
      sweep_lambda(instances, manifest, config, {0.0});
  Rng rng(static_cast<std::uint64_t>(config.seed));
  DatasetSplit split = split_dataset(instances, config, rng);
  const Checkpoint ckpt = train(split.train, split.val, manifest, config);
  const MetricReport direct = evaluate(ckpt, split.test, manifest);
  CHECK(single[0].report.relative_error_mean == direct.relative_error_mean);
  CHECK(single[0].report.entropy_mean == direct.entropy_mean);
}

TEST_CASE("tradeoff table round trip and plotting") {
  std::vector<TradeoffPoint> points(2);
  points[0].lambda = points[0].report.lambda = 0.0;
  points[0].report.relative_error_mean = 0.3;
  points[0].report.entropy_mean = 1.2;
  points[0].report.race_mean.setConstant(1.0 / 6);
  points[1].lambda = points[1].report.lambda = 4.0;
  points[1].report.relative_error_mean = 0.4;
  points[1].report.entropy_mean = 1.5;
  points[1].report.race_mean.setConstant(1.0 / 6);

  TempFile table("fairsite_table.jsonl");
  save_tradeoff_table(points, table.path);
  const std::vector<TradeoffPoint> back = load_tradeoff_table(table.path);
  REQUIRE(back.size() == 2);
  CHECK(back[1].report.entropy_mean == 1.5);

  TempFile svg("fairsite_plot.svg");
  TempFile bars("fairsite_bars.svg");
  TempFile txt("fairsite_bars.txt");
  plot_tradeoff_svg({{"model", back}}, svg.path);
  plot_race_bars({{"model", back}}, bars.path, txt.path);
  CHECK(read_file(svg.path).find("<svg") != std::string::npos);
  CHECK(read_file(txt.path).find("lambda") != std::string::npos);

  // Empty table is an error, not an empty artifact.
  TempFile empty("fairsite_empty.jsonl");
  std::ofstream(empty.path).close();
  CHECK_THROWS_AS(load_tradeoff_table(empty.path), DatasetError);
}

TEST_CASE("train config validation") {
  TrainConfig t = tiny_train_config();
  CHECK_NOTHROW(t.validate());
  t.epochs = 0;
  CHECK_THROWS(t.validate());
  t = tiny_train_config();
  t.test_fraction = 1.2;
  CHECK_THROWS(t.validate());
  t = tiny_train_config();
  t.lambda = -1;
  CHECK_THROWS(t.validate());
}
