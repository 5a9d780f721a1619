// pairq command-line driver. Exit codes: 0 ok, 1 validation error, 2 numeric
// failure (non-finite training state or failed gradient check).

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "pairq/errors.hpp"
#include "pairq/gmad.hpp"
#include "pairq/io.hpp"
#include "pairq/metrics.hpp"
#include "pairq/seeding.hpp"
#include "pairq/session.hpp"
#include "pairq/synth.hpp"
#include "pairq/trainer.hpp"

namespace fs = std::filesystem;
using namespace pairq;

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kNumeric = 2;

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

// ---- synth ------------------------------------------------------------------

struct SynthArgs {
  std::string config;
  std::string out = "synth";
  std::optional<std::uint64_t> seed;
};

int cmd_synth(const SynthArgs& a) {
  std::uint64_t seed = 0;
  BenchmarkOptions opts;
  std::vector<SynthDbConfig> custom;
  if (!a.config.empty()) {
    const auto j = read_json(a.config);
    try {
      seed = j.value("seed", seed);
      opts.n_items = j.value("n_items", opts.n_items);
      opts.n_groups = j.value("n_groups", opts.n_groups);
      opts.noise = j.value("noise", opts.noise);
      const auto kind = j.value("feature_kind", std::string("vector"));
      if (kind != "vector" && kind != "map") throw ValidationError("feature_kind must be vector or map");
      opts.feature_kind = kind == "map" ? FeatureKind::map : FeatureKind::vector;
      opts.dim = j.value("dim", opts.dim);
      opts.map_rows = j.value("map_rows", opts.map_rows);
      if (j.contains("databases")) {
        for (const auto& d : j.at("databases")) custom.push_back(synth_config_from_json(d));
      }
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(std::string("bad synth config: ") + e.what());
    }
  }
  if (a.seed) seed = *a.seed;

  Benchmark bench;
  bench.seed = seed;
  if (custom.empty()) {
    bench = gen_benchmark(seed, opts);
  } else {
    for (auto& c : custom) {
      if (a.seed) c.seed = derive_seed(seed, c.name);
      bench.configs.push_back(c);
      bench.dbs.push_back(gen_database(c));
    }
  }
  const auto files = write_benchmark(bench, a.out);
  for (const auto& p : files.databases) std::cout << "wrote " << p.string() << '\n';
  std::printf("manifest %s hash %016llx\n", files.manifest.string().c_str(),
              static_cast<unsigned long long>(files.manifest_hash));
  return kOk;
}

// ---- sample-pairs -----------------------------------------------------------

struct SampleArgs {
  std::string config;
  std::string out = "pairs";
  std::uint64_t seed = 0;
};

int cmd_sample_pairs(const SampleArgs& a) {
  const SessionConfig cfg = load_session_config(a.config);
  const SessionDatabases loaded = load_session_databases(cfg);
  const SessionInputs s = prepare_session(cfg, loaded, a.seed);
  write_session_inputs(s, loaded.dbs, a.out);
  for (std::size_t k = 0; k < loaded.dbs.size(); ++k) {
    std::cout << loaded.dbs[k].name << ": " << s.train_pairs[k].size() << " train pairs, "
              << s.test_pairs.at(loaded.dbs[k].name).size() << " test pairs\n";
  }
  return kOk;
}

// ---- train ------------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string pairs;
  std::string out = "model";
  std::optional<std::uint64_t> seed;
};

int cmd_train(const TrainArgs& a) {
  SessionConfig cfg = load_session_config(a.config);
  if (a.seed) cfg.train.seed = *a.seed;
  cfg.train.validate();
  const SessionDatabases loaded = load_session_databases(cfg);
  const ItemIndex items = index_items(loaded.dbs);
  const auto pairs = load_pairs(a.pairs);
  if (pairs.empty()) throw ValidationError(a.pairs + ": no pairs");

  std::map<std::string, std::vector<PairSample>> by_db;
  for (const auto& p : pairs) by_db[p.db].push_back(p);
  std::vector<std::vector<PairSample>> lists;
  for (auto& [db, l] : by_db) lists.push_back(std::move(l));

  const Architecture arch =
      arch_for_features(cfg.arch_kind, cfg.hidden_sizes, loaded.dbs.front().items.front().features);
  const TrainReport report = train(combine(lists), items, arch, cfg.train);
  fs::create_directories(a.out);
  save_checkpoint(report.checkpoint, fs::path(a.out) / "checkpoint.json");
  write_epoch_log_csv(report, fs::path(a.out) / "train_log.csv");
  for (const auto& e : report.epochs) {
    std::printf("epoch %zu lr %.3g loss %.6f\n", e.epoch, e.lr, e.mean_loss);
  }
  return kOk;
}

// ---- eval -------------------------------------------------------------------

struct EvalArgs {
  std::string config;
  std::string checkpoint;
  std::string pairs;
  std::string out = "report.csv";
  std::uint64_t seed = 0;
};

int cmd_eval(const EvalArgs& a) {
  const SessionConfig cfg = load_session_config(a.config);
  const SessionDatabases loaded = load_session_databases(cfg);
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);

  EvalInputs in;
  in.dbs = &loaded.dbs;
  in.latent = loaded.have_latent ? &loaded.latent : nullptr;
  in.p_clamp = cfg.train.loss.p_clamp;
  if (ckpt.meta.contains("train_ids")) {
    for (const auto& id : ckpt.meta.at("train_ids")) in.train_ids.insert(id.get<std::string>());
  }
  // Everything the checkpoint did not train on is test data.
  for (const auto& db : loaded.dbs) {
    auto& ids = in.test_ids[db.name];
    for (const auto& it : db.items) {
      if (!in.train_ids.count(it.id)) ids.insert(it.id);
    }
  }
  if (!a.pairs.empty()) {
    for (const auto& p : load_pairs(a.pairs)) in.test_pairs[p.db].push_back(p);
  } else {
    for (const auto& db : loaded.dbs) {
      in.test_pairs[db.name] = sample_pairs(db, in.test_ids[db.name], cfg.test_pairs_per_db,
                                            derive_seed(a.seed, "test-pairs/" + db.name));
    }
  }
  ModelSet models;
  models.models.push_back(&ckpt.params);
  const EvalReport report = evaluate_models(models, in, fs::path(a.checkpoint).stem().string());
  save_report_csv(report, a.out);
  std::cout << report_to_csv(report);
  if (report.has_pooled_latent) std::printf("pooled latent srcc %.6f\n", report.pooled_latent_srcc);
  return kOk;
}

// ---- run-sessions -----------------------------------------------------------

struct RunArgs {
  std::string config;
  std::string out;
  std::vector<std::uint64_t> seeds;
};

int cmd_run_sessions(const RunArgs& a) {
  SessionConfig cfg = load_session_config(a.config);
  if (!a.out.empty()) cfg.output_dir = a.out;
  if (!a.seeds.empty()) cfg.session_seeds = a.seeds;
  const RunSummary s = run_sessions(cfg);

  std::ifstream cmp(cfg.output_dir / "comparison.csv");
  std::cout << cmp.rdbuf();
  bool numeric = false;
  for (const auto& f : s.failures) {
    std::cerr << "session failure: " << f.variant << " session " << f.session << ": " << f.message << '\n';
    numeric = numeric || f.numeric;
  }
  if (s.failures.empty()) return kOk;
  return numeric ? kNumeric : kValidation;
}

// ---- gmad -------------------------------------------------------------------

struct GmadArgs {
  std::string attacker;
  std::string defender;
  std::vector<std::string> corpus;
  std::string out = "gmad.csv";
  std::size_t levels = 2;
  double tolerance = 0.0;
};

ScoreMap score_corpus(const ScorerParams& w, const std::vector<Database>& dbs) {
  ScoreMap m;
  for (const auto& db : dbs) {
    for (const auto& it : db.items) {
      if (!w.arch.accepts(it.features)) {
        throw ValidationError("item '" + it.id + "' does not fit the checkpoint architecture");
      }
      m[it.id] = forward(w, it.features).f;
    }
  }
  return m;
}

int cmd_gmad(const GmadArgs& a) {
  const Checkpoint att = load_checkpoint(a.attacker);
  const Checkpoint def = load_checkpoint(a.defender);
  std::vector<Database> dbs;
  std::vector<std::string> ids;
  for (const auto& p : a.corpus) {
    dbs.push_back(load_database(p));
    for (const auto& it : dbs.back().items) ids.push_back(it.id);
  }
  index_items(dbs);  // rejects ids shared across corpus files
  const ScoreMap sa = score_corpus(att.params, dbs);
  const ScoreMap sd = score_corpus(def.params, dbs);

  GmadConfig gc;
  gc.n_levels = a.levels;
  gc.level_tolerance = a.tolerance;
  std::vector<std::pair<std::string, GmadResult>> runs;
  runs.emplace_back("A_attacks_D", gmad_search(sa, sd, ids, gc));
  runs.emplace_back("D_attacks_A", gmad_search(sd, sa, ids, gc));
  for (const auto& [label, r] : runs) {
    for (const auto& w : r.warnings) std::cerr << "warning: " << label << ' ' << w << '\n';
  }
  write_gmad_csv(runs, a.out);
  std::ifstream back(a.out);
  std::cout << back.rdbuf();
  return kOk;
}

// ---- gradcheck --------------------------------------------------------------

struct GradArgs {
  std::vector<std::string> archs{"linear", "mlp", "bilinear_mlp"};
  std::size_t seeds = 20;
  std::uint64_t base_seed = 7;
  bool corrupt = false;
};

Architecture gradcheck_arch(std::string_view name) {
  Architecture a;
  a.kind = parse_arch_kind(name);
  switch (a.kind) {
    case ArchKind::linear: a.input_dim = 6; break;
    case ArchKind::mlp:
      a.input_dim = 6;
      a.hidden_sizes = {8, 5};
      break;
    case ArchKind::bilinear_mlp:
      a.map_rows = 4;
      a.map_cols = 3;
      a.hidden_sizes = {6};
      break;
  }
  a.validate();
  return a;
}

int cmd_gradcheck(const GradArgs& a) {
  bool ok = true;
  std::printf("arch,seeds,params_checked,max_rel_error,tolerance,result\n");
  for (const auto& name : a.archs) {
    const Architecture arch = gradcheck_arch(name);
    const double tol = arch.kind == ArchKind::linear ? 1e-6 : 1e-4;
    GradCheckOptions opts;
    opts.corrupt_analytic = a.corrupt;
    double worst = 0.0;
    std::size_t checked = 0;
    for (std::size_t s = 0; s < a.seeds; ++s) {
      const auto r = grad_check(arch, derive_seed(a.base_seed, name + "/" + std::to_string(s)), 1, opts);
      worst = std::max(worst, r.max_rel_error);
      checked += r.params_checked;
    }
    const bool pass = worst <= tol;
    ok = ok && pass;
    std::printf("%s,%zu,%zu,%.3e,%.0e,%s\n", name.c_str(), a.seeds, checked, worst, tol,
                pass ? "PASS" : "FAIL");
  }
  return ok ? kOk : kNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pairq: pairwise uncertainty-aware quality model training"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "generate the synthetic three-database benchmark");
  c_synth->add_option("--config", synth.config, "synth config (JSON)")->check(CLI::ExistingFile);
  c_synth->add_option("--out", synth.out, "output directory");
  c_synth->add_option("--seed", synth.seed, "seed override");

  SampleArgs sample;
  auto* c_sample = app.add_subcommand("sample-pairs", "split databases and draw train/test pairs");
  c_sample->add_option("--config", sample.config, "session config (JSON)")->required()->check(CLI::ExistingFile);
  c_sample->add_option("--out", sample.out, "output directory");
  c_sample->add_option("--seed", sample.seed, "session seed");

  TrainArgs trainA;
  auto* c_train = app.add_subcommand("train", "train a scorer on a pair file");
  c_train->add_option("--config", trainA.config, "session config (JSON)")->required()->check(CLI::ExistingFile);
  c_train->add_option("--pairs", trainA.pairs, "training pairs CSV")->required()->check(CLI::ExistingFile);
  c_train->add_option("--out", trainA.out, "output directory");
  c_train->add_option("--seed", trainA.seed, "training seed override");

  EvalArgs evalA;
  auto* c_eval = app.add_subcommand("eval", "evaluate a checkpoint on the items it did not train on");
  c_eval->add_option("--config", evalA.config, "session config (JSON)")->required()->check(CLI::ExistingFile);
  c_eval->add_option("--checkpoint", evalA.checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  c_eval->add_option("--pairs", evalA.pairs, "test pairs CSV (sampled when omitted)")->check(CLI::ExistingFile);
  c_eval->add_option("--out", evalA.out, "report CSV");
  c_eval->add_option("--seed", evalA.seed, "seed for sampled test pairs");

  RunArgs run;
  auto* c_run = app.add_subcommand("run-sessions", "run the full session protocol over all loss variants");
  c_run->add_option("--config", run.config, "session config (JSON)")->required()->check(CLI::ExistingFile);
  c_run->add_option("--out", run.out, "output directory override");
  c_run->add_option("--seeds", run.seeds, "session seed override");

  GmadArgs gm;
  auto* c_gmad = app.add_subcommand("gmad", "gMAD competition between two checkpoints");
  c_gmad->add_option("--attacker", gm.attacker, "attacker checkpoint")->required()->check(CLI::ExistingFile);
  c_gmad->add_option("--defender", gm.defender, "defender checkpoint")->required()->check(CLI::ExistingFile);
  c_gmad->add_option("--corpus", gm.corpus, "database file(s) forming the corpus")->required()->check(CLI::ExistingFile);
  c_gmad->add_option("--out", gm.out, "output CSV");
  c_gmad->add_option("--levels", gm.levels, "quality levels of the defender");
  c_gmad->add_option("--tolerance", gm.tolerance, "defender score tolerance (0: 1% of range)");

  GradArgs grad;
  bool no_archs = false;
  auto* c_grad = app.add_subcommand("gradcheck", "finite-difference check of the training gradient");
  c_grad->add_option("--arch", grad.archs, "architectures to check")->delimiter(',');
  c_grad->add_flag("--none", no_archs, "check no architectures");
  c_grad->add_option("--seeds", grad.seeds, "random seeds per architecture");
  c_grad->add_option("--seed", grad.base_seed, "base seed");
  c_grad->add_flag("--corrupt-analytic", grad.corrupt, "perturb the analytic gradient (negative control)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (*c_synth) return cmd_synth(synth);
    if (*c_sample) return cmd_sample_pairs(sample);
    if (*c_train) return cmd_train(trainA);
    if (*c_eval) return cmd_eval(evalA);
    if (*c_run) return cmd_run_sessions(run);
    if (*c_gmad) return cmd_gmad(gm);
    if (*c_grad) {
      if (no_archs) grad.archs.clear();
      return cmd_gradcheck(grad);
    }
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  }
  return kOk;
}
