#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "fairsite/datagen.hpp"
#include "fairsite/dataset_io.hpp"
#include "fairsite/report.hpp"
#include "fairsite/training.hpp"
#include "fairsite/validate.hpp"

namespace {

using namespace fairsite;
using nlohmann::json;

constexpr const char* kVersion = "fairsite 1.0.0";

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

// Every artifact on disk traces back to exactly one of these.
struct RunRecord {
  std::string command;
  std::vector<std::string> argv;
  json config;
  long long seed = 0;
  std::string started;
  std::vector<std::string> outputs;

  void write(const std::string& primary_output) const {
    json j;
    j["command"] = command;
    j["argv"] = argv;
    j["config"] = config;
    j["seed"] = seed;
    j["version"] = kVersion;
    j["started"] = started;
    j["finished"] = iso_timestamp();
    j["outputs"] = outputs;
    std::ofstream out(primary_output + ".run.json");
    out << j.dump(2) << "\n";
  }
};

std::string cache_dir_or(const std::string& fallback) {
  const char* env = std::getenv("FAIRSITE_CACHE_DIR");
  if (env && *env) {
    std::filesystem::create_directories(env);
    return env;
  }
  return fallback;
}

TrainConfig parse_train_flags(CLI::App* cmd, TrainConfig& config,
                              std::string& fusion, std::string& variant,
                              std::string& objective) {
  cmd->add_option("--epochs", config.epochs, "Training epochs");
  cmd->add_option("--lr", config.learning_rate, "Learning rate");
  cmd->add_option("--lambda", config.lambda, "Fairness weight");
  cmd->add_option("--samples", config.samples_per_trial,
                  "Sampled rankings per trial per step");
  cmd->add_option("--seed", config.seed, "Seed for splits, init, and sampling");
  cmd->add_option("--n-emb", config.model.n_emb, "Embedding width");
  cmd->add_option("--n-layers", config.model.n_layers, "Scorer encoder layers");
  cmd->add_option("--fusion", fusion, "Fusion kind: mcat or fc")
      ->check(CLI::IsMember({"mcat", "fc"}));
  cmd->add_option("--variant", variant, "Dataset variant: missing or full")
      ->check(CLI::IsMember({"missing", "full"}));
  cmd->add_option("--objective", objective, "reinforce or regression")
      ->check(CLI::IsMember({"reinforce", "regression"}));
  cmd->add_flag("--baseline", config.use_baseline,
                "Subtract a moving-average reward baseline");
  return config;
}

void apply_train_strings(TrainConfig& config, const std::string& fusion,
                         const std::string& variant, const std::string& objective) {
  config.model.fusion = fusion == "fc" ? FusionKind::kFc : FusionKind::kMcat;
  config.variant =
      variant == "full" ? DatasetVariant::kFull : DatasetVariant::kMissing;
  config.objective = objective == "regression" ? Objective::kRegression
                                               : Objective::kReinforce;
}

json train_config_snapshot(const TrainConfig& c) {
  return json{{"epochs", c.epochs},
              {"learning_rate", c.learning_rate},
              {"lambda", c.lambda},
              {"samples_per_trial", c.samples_per_trial},
              {"seed", c.seed},
              {"n_emb", c.model.n_emb},
              {"n_layers", c.model.n_layers},
              {"fusion", c.model.fusion == FusionKind::kMcat ? "mcat" : "fc"},
              {"variant", c.variant == DatasetVariant::kMissing ? "missing" : "full"},
              {"objective", c.objective == Objective::kReinforce ? "reinforce"
                                                                 : "regression"},
              {"use_baseline", c.use_baseline}};
}

int cmd_gen_data(const std::string& config_path, const std::string& out,
                 std::optional<long long> seed, const RunRecord& base) {
  GeneratorConfig config = config_path.empty() ? GeneratorConfig{}
                                               : load_generator_config(config_path);
  if (seed) config.seed = *seed;
  config.validate();
  auto [manifest, instances] = generate_dataset(config);
  save_dataset(manifest, instances, out);

  RunRecord record = base;
  record.seed = config.seed;
  {
    std::ostringstream snapshot;
    const std::string tmp = out + ".config.tmp";
    save_generator_config(config, tmp);
    std::ifstream in(tmp);
    snapshot << in.rdbuf();
    std::filesystem::remove(tmp);
    record.config = json::parse(snapshot.str());
  }
  record.outputs = {out};
  record.write(out);
  std::cout << "wrote " << instances.size() << " instances to " << out << "\n";
  return 0;
}

int cmd_train(const std::string& data, const std::string& out,
              TrainConfig config, const RunRecord& base) {
  auto [manifest, instances] = load_dataset(data);
  Rng split_rng(static_cast<std::uint64_t>(config.seed));
  DatasetSplit split = split_dataset(instances, config, split_rng);
  if (config.variant == DatasetVariant::kFull) {
    split.train = to_full_variant(split.train);
    split.val = to_full_variant(split.val);
  }
  Checkpoint ckpt = train(split.train, split.val, manifest, config);
  save_checkpoint(ckpt, out);

  RunRecord record = base;
  record.seed = config.seed;
  record.config = train_config_snapshot(config);
  record.outputs = {out};
  record.write(out);
  std::cout << "best epoch " << ckpt.epoch << ", validation reward "
            << ckpt.val_reward << ", checkpoint " << out << "\n";
  return 0;
}

int cmd_eval(const std::string& data, const std::string& ckpt_path,
             const std::string& out, bool force, const std::string& scorer_kind,
             long long seed, const RunRecord& base) {
  auto [manifest, instances] = load_dataset(data);
  TrainConfig split_config;
  split_config.seed = seed;
  Rng split_rng(static_cast<std::uint64_t>(seed));
  DatasetSplit split = split_dataset(instances, split_config, split_rng);

  MetricReport report;
  if (scorer_kind == "oracle") {
    report = evaluate_scores(split.test, 0.0, [](const RankingInstance& inst) {
      Vec q(inst.M());
      for (int i = 0; i < inst.M(); ++i)
        q[i] = inst.sites[static_cast<std::size_t>(i)].enrollment_label;
      return q;
    });
  } else if (scorer_kind == "random") {
    Rng rng(static_cast<std::uint64_t>(seed) ^ 0x72616e646fULL);
    report = evaluate_scores(split.test, 0.0, [&](const RankingInstance& inst) {
      Vec q(inst.M());
      for (int i = 0; i < inst.M(); ++i) q[i] = rng.uniform();
      return q;
    });
  } else {
    Checkpoint ckpt = load_checkpoint(ckpt_path, manifest, force);
    if (ckpt.config.variant == DatasetVariant::kFull)
      split.test = to_full_variant(split.test);
    if (force) {
      report = evaluate_scores(
          split.test, ckpt.config.lambda,
          [&](const RankingInstance& inst) { return ckpt.model.score(inst); });
    } else {
      report = evaluate(ckpt, split.test, manifest);
    }
  }
  save_report(report, out);

  RunRecord record = base;
  record.seed = seed;
  record.config = {{"checkpoint", ckpt_path}, {"scorer", scorer_kind}};
  record.outputs = {out};
  record.write(out);
  std::cout << "relative error " << report.relative_error_mean << " +- "
            << report.relative_error_ci << ", nDCG " << report.ndcg_mean
            << " +- " << report.ndcg_ci << ", entropy " << report.entropy_mean
            << "\n";
  return 0;
}

int cmd_sweep(const std::string& data, const std::string& out,
              TrainConfig config, const std::vector<double>& lambdas,
              const RunRecord& base) {
  auto [manifest, instances] = load_dataset(data);
  const std::string ckpt_dir =
      cache_dir_or(std::filesystem::path(out).parent_path().string());
  std::vector<std::string> outputs = {out};
  std::vector<TradeoffPoint> points = sweep_lambda(
      instances, manifest, config, lambdas,
      [&](double lambda, const Checkpoint& ckpt) {
        std::ostringstream name;
        name << "sweep_lambda_" << lambda << ".ckpt.json";
        const std::string path =
            (std::filesystem::path(ckpt_dir) / name.str()).string();
        save_checkpoint(ckpt, path);
        outputs.push_back(path);
      });
  save_tradeoff_table(points, out);

  RunRecord record = base;
  record.seed = config.seed;
  record.config = train_config_snapshot(config);
  record.config["lambdas"] = lambdas;
  record.outputs = outputs;
  record.write(out);
  for (const TradeoffPoint& p : points)
    std::cout << "lambda " << p.lambda << ": relative error "
              << p.report.relative_error_mean << ", entropy "
              << p.report.entropy_mean << "\n";
  return 0;
}

int cmd_plot(const std::vector<std::string>& tables, const std::string& out,
             const RunRecord& base) {
  std::vector<std::pair<std::string, std::vector<TradeoffPoint>>> series;
  for (const std::string& path : tables) {
    series.emplace_back(std::filesystem::path(path).stem().string(),
                        load_tradeoff_table(path));
  }
  const std::string curve = out + ".tradeoff.svg";
  const std::string bars = out + ".race.svg";
  const std::string table = out + ".race.txt";
  plot_tradeoff_svg(series, curve);
  plot_race_bars(series, bars, table);

  RunRecord record = base;
  record.config = {{"tables", tables}};
  record.outputs = {curve, bars, table};
  record.write(out);
  std::cout << "wrote " << curve << ", " << bars << ", " << table << "\n";
  return 0;
}

int cmd_inspect(const std::string& data) {
  std::size_t count = 0;
  std::array<long long, kNumModalities> present{};
  double total_enrollment = 0.0;
  long long sites = 0;
  DatasetManifest manifest = load_dataset(data, [&](RankingInstance&& inst) {
    ++count;
    for (const SiteRecord& s : inst.sites) {
      ++sites;
      total_enrollment += s.enrollment_label;
      for (int k = 0; k < kNumModalities; ++k)
        if (s.mask[static_cast<std::size_t>(k)]) ++present[static_cast<std::size_t>(k)];
    }
  });
  std::cout << "manifest: n_t=" << manifest.n_t << " n_t'=" << manifest.n_t_prime
            << " n_s=" << manifest.n_s << " n_c=" << manifest.n_c
            << " n_d=" << manifest.n_d << " n_p=" << manifest.n_p
            << " n_h=" << manifest.n_h << " M=" << manifest.M
            << " K=" << manifest.K << " seed=" << manifest.seed << "\n"
            << "instances: " << count << " (manifest declares "
            << manifest.record_count << ")\n"
            << "mean enrollment label: "
            << (sites ? total_enrollment / static_cast<double>(sites) : 0.0) << "\n";
  const char* names[] = {"static", "diagnoses", "prescriptions", "history"};
  for (int k = 0; k < kNumModalities; ++k)
    std::cout << "present " << names[k] << ": "
              << (sites ? static_cast<double>(present[static_cast<std::size_t>(k)]) /
                              static_cast<double>(sites)
                        : 0.0)
              << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fairness-aware trial-site selection toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  long long global_seed = 0;
  bool have_seed = false;
  int threads = 1;
  bool deterministic = true;
  app.add_option("--threads", threads,
                 "Worker threads (evaluation only; 1 = fully sequential)");
  app.add_flag("--deterministic", deterministic,
               "Fixed execution mode (default; kept for interface stability)");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  std::string gen_config, gen_out;
  gen->add_option("--config", gen_config, "Generator config (JSON)");
  gen->add_option("--out", gen_out, "Output dataset path")->required();
  gen->add_option("--seed", global_seed, "Generation seed")
      ->each([&](const std::string&) { have_seed = true; });

  // train
  auto* tr = app.add_subcommand("train", "Train a model");
  std::string tr_data, tr_out;
  TrainConfig tr_config;
  std::string tr_fusion = "mcat", tr_variant = "missing", tr_objective = "reinforce";
  tr->add_option("--data", tr_data, "Dataset path")->required();
  tr->add_option("--out", tr_out, "Checkpoint output path")->required();
  parse_train_flags(tr, tr_config, tr_fusion, tr_variant, tr_objective);

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
  std::string ev_data, ev_ckpt, ev_out, ev_scorer = "checkpoint";
  long long ev_seed = 0;
  bool ev_force = false;
  ev->add_option("--data", ev_data, "Dataset path")->required();
  ev->add_option("--ckpt", ev_ckpt, "Checkpoint path");
  ev->add_option("--out", ev_out, "Report output path")->required();
  ev->add_option("--seed", ev_seed, "Split seed (must match training)");
  ev->add_option("--scorer", ev_scorer, "checkpoint, oracle, or random")
      ->check(CLI::IsMember({"checkpoint", "oracle", "random"}));
  ev->add_flag("--force", ev_force, "Ignore manifest hash mismatch");

  // sweep
  auto* sw = app.add_subcommand("sweep", "Train and evaluate across lambdas");
  std::string sw_data, sw_out, sw_lambdas = "0,0.5,1,2,4,8";
  TrainConfig sw_config;
  std::string sw_fusion = "mcat", sw_variant = "missing", sw_objective = "reinforce";
  sw->add_option("--data", sw_data, "Dataset path")->required();
  sw->add_option("--out", sw_out, "Trade-off table output path")->required();
  sw->add_option("--lambdas", sw_lambdas, "Comma-separated lambda values");
  parse_train_flags(sw, sw_config, sw_fusion, sw_variant, sw_objective);

  // plot
  auto* pl = app.add_subcommand("plot", "Render trade-off curves and race bars");
  std::vector<std::string> pl_tables;
  std::string pl_out;
  pl->add_option("tables", pl_tables, "Trade-off table paths")->required();
  pl->add_option("--out", pl_out, "Output path prefix")->required();

  // inspect
  auto* in = app.add_subcommand("inspect", "Summarize a dataset");
  std::string in_data;
  in->add_option("--data", in_data, "Dataset path")->required();

  CLI11_PARSE(app, argc, argv);

  RunRecord base;
  base.started = iso_timestamp();
  for (int i = 0; i < argc; ++i) base.argv.emplace_back(argv[i]);

  try {
    if (gen->parsed()) {
      base.command = "gen-data";
      return cmd_gen_data(gen_config, gen_out,
                          have_seed ? std::optional<long long>(global_seed)
                                    : std::nullopt,
                          base);
    }
    if (tr->parsed()) {
      base.command = "train";
      apply_train_strings(tr_config, tr_fusion, tr_variant, tr_objective);
      tr_config.validate();
      return cmd_train(tr_data, tr_out, tr_config, base);
    }
    if (ev->parsed()) {
      base.command = "eval";
      if (ev_scorer == "checkpoint" && ev_ckpt.empty())
        throw ValidationError("eval: --ckpt is required unless --scorer is oracle/random");
      return cmd_eval(ev_data, ev_ckpt, ev_out, ev_force, ev_scorer, ev_seed, base);
    }
    if (sw->parsed()) {
      base.command = "sweep";
      apply_train_strings(sw_config, sw_fusion, sw_variant, sw_objective);
      sw_config.validate();
      std::vector<double> lambdas;
      std::stringstream ss(sw_lambdas);
      std::string item;
      while (std::getline(ss, item, ',')) lambdas.push_back(std::stod(item));
      return cmd_sweep(sw_data, sw_out, sw_config, lambdas, base);
    }
    if (pl->parsed()) {
      base.command = "plot";
      return cmd_plot(pl_tables, pl_out, base);
    }
    if (in->parsed()) return cmd_inspect(in_data);
  } catch (const ValidationError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DatasetError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
