#include "pairq/synth.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "pairq/errors.hpp"
#include "pairq/seeding.hpp"

namespace pairq {

void SynthDbConfig::validate() const {
  if (name.empty()) throw ValidationError("synth: database name must not be empty");
  if (n_items < 1 || n_groups < 1 || n_groups > n_items) {
    throw ValidationError("synth: need 1 <= n_groups <= n_items");
  }
  if (!(q_hi > q_lo)) throw ValidationError("synth: need q_hi > q_lo");
  if (a == 0.0 || !std::isfinite(a) || !std::isfinite(b)) throw ValidationError("synth: a must be nonzero");
  if (!(sigma_max >= 0.0) || !(sigma_0 >= 0.0) || !(gamma > 0.0)) {
    throw ValidationError("synth: need sigma_max, sigma_0 >= 0 and gamma > 0");
  }
  if (!(noise >= 0.0)) throw ValidationError("synth: noise must be >= 0");
  if (dim == 0 || (feature_kind == FeatureKind::map && map_rows == 0)) {
    throw ValidationError("synth: feature dimensions must be >= 1");
  }
}

nlohmann::json synth_config_to_json(const SynthDbConfig& c) {
  return {{"name", c.name},
          {"scenario", std::string(to_string(c.scenario))},
          {"polarity", std::string(to_string(c.polarity))},
          {"n_items", c.n_items},
          {"n_groups", c.n_groups},
          {"q_lo", c.q_lo},
          {"q_hi", c.q_hi},
          {"a", c.a},
          {"b", c.b},
          {"sigma_max", c.sigma_max},
          {"sigma_0", c.sigma_0},
          {"gamma", c.gamma},
          {"feature_kind", c.feature_kind == FeatureKind::vector ? "vector" : "map"},
          {"dim", c.dim},
          {"map_rows", c.map_rows},
          {"noise", c.noise},
          {"seed", c.seed}};
}

SynthDbConfig synth_config_from_json(const nlohmann::json& j) {
  SynthDbConfig c;
  try {
    c.name = j.at("name").get<std::string>();
    c.scenario = parse_scenario(j.value("scenario", std::string("synthetic")));
    c.polarity = parse_polarity(j.value("polarity", std::string("MOS")));
    c.n_items = j.value("n_items", c.n_items);
    c.n_groups = j.value("n_groups", c.n_groups);
    c.q_lo = j.value("q_lo", c.q_lo);
    c.q_hi = j.value("q_hi", c.q_hi);
    c.a = j.value("a", c.a);
    c.b = j.value("b", c.b);
    c.sigma_max = j.value("sigma_max", c.sigma_max);
    c.sigma_0 = j.value("sigma_0", c.sigma_0);
    c.gamma = j.value("gamma", c.gamma);
    const auto kind = j.value("feature_kind", std::string("vector"));
    if (kind != "vector" && kind != "map") throw ValidationError("synth: feature_kind must be vector or map");
    c.feature_kind = kind == "vector" ? FeatureKind::vector : FeatureKind::map;
    c.dim = j.value("dim", c.dim);
    c.map_rows = j.value("map_rows", c.map_rows);
    c.noise = j.value("noise", c.noise);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad synth config: ") + e.what());
  }
  c.validate();
  return c;
}

double arch_sigma(double q, double q_lo, double q_hi, double sigma_max, double sigma_0,
                  double gamma) {
  if (!(q >= q_lo && q <= q_hi)) throw ValidationError("arch_sigma: q outside [q_lo, q_hi]");
  const double u = 2.0 * (q - q_lo) / (q_hi - q_lo) - 1.0;
  const double base = std::max(0.0, 1.0 - u * u);
  return sigma_0 + sigma_max * std::pow(base, gamma);
}

std::vector<double> latent_embedding(double q, std::size_t dim) {
  const double basis[] = {q,
                          q * q,
                          std::sin(q),
                          std::tanh(0.5 * q),
                          std::cos(q),
                          0.25 * q * q * q,
                          std::exp(-0.5 * q * q),
                          std::sin(2.0 * q)};
  constexpr std::size_t kBasis = sizeof(basis) / sizeof(basis[0]);
  std::vector<double> g(dim, 0.0);
  for (std::size_t k = 0; k < dim && k < kBasis; ++k) g[k] = basis[k];
  return g;
}

SynthDatabase gen_database(const SynthDbConfig& cfg) {
  cfg.validate();
  SynthDatabase out;
  Database& db = out.db;
  db.name = cfg.name;
  db.scenario = cfg.scenario;
  db.polarity = cfg.polarity;
  db.items.reserve(cfg.n_items);

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> latent(cfg.q_lo, cfg.q_hi);
  std::normal_distribution<double> noise(0.0, 1.0);

  const int width = static_cast<int>(std::to_string(cfg.n_items).size());
  for (std::size_t i = 0; i < cfg.n_items; ++i) {
    const double q = latent(rng);
    AnnotatedItem it;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%0*zu", cfg.name.c_str(), width, i);
    it.id = buf;
    it.db = cfg.name;
    // Groups are contiguous runs of items, like distortions of one reference.
    std::snprintf(buf, sizeof(buf), "%s_ref%0*zu", cfg.name.c_str(), width, i * cfg.n_groups / cfg.n_items);
    it.content = buf;
    it.mu = cfg.a * q + cfg.b;
    it.sigma = arch_sigma(q, cfg.q_lo, cfg.q_hi, cfg.sigma_max, cfg.sigma_0, cfg.gamma);

    const std::vector<double> g = latent_embedding(q, cfg.dim);
    if (cfg.feature_kind == FeatureKind::vector) {
      std::vector<double> v = g;
      for (double& x : v) x += cfg.noise * noise(rng);
      it.features = Features::make_vector(std::move(v));
    } else {
      // Row r carries the embedding scaled by (r + 1) / s.
      std::vector<double> v(cfg.map_rows * cfg.dim);
      for (std::size_t r = 0; r < cfg.map_rows; ++r) {
        const double w = static_cast<double>(r + 1) / static_cast<double>(cfg.map_rows);
        for (std::size_t k = 0; k < cfg.dim; ++k) v[r * cfg.dim + k] = w * g[k] + cfg.noise * noise(rng);
      }
      it.features = Features::make_map(cfg.map_rows, cfg.dim, std::move(v));
    }
    out.latent.emplace(it.id, q);
    db.items.push_back(std::move(it));
  }
  validate_database(db);
  return out;
}

std::vector<SynthDbConfig> benchmark_configs(std::uint64_t seed, const BenchmarkOptions& opts) {
  auto base = [&](std::string name) {
    SynthDbConfig c;
    c.name = std::move(name);
    c.n_items = opts.n_items;
    c.n_groups = opts.n_groups;
    c.feature_kind = opts.feature_kind;
    c.dim = opts.dim;
    c.map_rows = opts.map_rows;
    c.noise = opts.noise;
    c.seed = derive_seed(seed, c.name);
    return c;
  };

  // Lab set: DMOS on [0, 1] over q in [-2.0, 1.6].
  SynthDbConfig lab = base("lab");
  lab.scenario = Scenario::synthetic;
  lab.polarity = Polarity::DMOS;
  lab.q_lo = -2.0;
  lab.q_hi = 1.6;
  lab.a = -1.0 / 3.6;
  lab.b = 1.6 / 3.6;
  lab.sigma_max = 0.06;
  lab.sigma_0 = 0.01;
  lab.gamma = 1.0;

  // Crowdsourced set: MOS on [0, 100] over q in [-1.6, 2.0].
  SynthDbConfig wild100 = base("wild100");
  wild100.scenario = Scenario::realistic;
  wild100.polarity = Polarity::MOS;
  wild100.q_lo = -1.6;
  wild100.q_hi = 2.0;
  wild100.a = 100.0 / 3.6;
  wild100.b = 160.0 / 3.6;
  wild100.sigma_max = 10.0;
  wild100.sigma_0 = 2.0;
  wild100.gamma = 1.5;

  // Crowdsourced set: MOS on [1, 5] over q in [-1.8, 1.8].
  SynthDbConfig wild5 = base("wild5");
  wild5.scenario = Scenario::realistic;
  wild5.polarity = Polarity::MOS;
  wild5.q_lo = -1.8;
  wild5.q_hi = 1.8;
  wild5.a = 4.0 / 3.6;
  wild5.b = 3.0;
  wild5.sigma_max = 0.6;
  wild5.sigma_0 = 0.1;
  wild5.gamma = 1.0;

  return {lab, wild100, wild5};
}

Benchmark gen_benchmark(std::uint64_t seed, const BenchmarkOptions& opts) {
  Benchmark b;
  b.seed = seed;
  b.configs = benchmark_configs(seed, opts);
  for (const auto& c : b.configs) b.dbs.push_back(gen_database(c));
  return b;
}

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string hex64(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

BenchmarkFiles write_benchmark(const Benchmark& bench, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  BenchmarkFiles files;
  nlohmann::ordered_json manifest;
  manifest["format"] = "pairq-synth-manifest/1";
  manifest["seed"] = bench.seed;
  manifest["databases"] = nlohmann::ordered_json::array();
  std::uint64_t combined = fnv1a64("");
  for (std::size_t k = 0; k < bench.dbs.size(); ++k) {
    const auto& sd = bench.dbs[k];
    const auto db_path = dir / (sd.db.name + ".jsonl");
    const auto latent_path = dir / (sd.db.name + ".latent.csv");
    save_database(sd.db, db_path);
    save_scores(sd.latent, latent_path, "q");
    const std::string db_bytes = slurp(db_path);
    const std::string latent_bytes = slurp(latent_path);
    combined = fnv1a64(db_bytes, combined);
    combined = fnv1a64(latent_bytes, combined);
    nlohmann::ordered_json entry;
    entry["config"] = synth_config_to_json(bench.configs[k]);
    entry["file"] = db_path.filename().string();
    entry["latent_file"] = latent_path.filename().string();
    entry["file_hash"] = hex64(fnv1a64(db_bytes));
    entry["latent_hash"] = hex64(fnv1a64(latent_bytes));
    manifest["databases"].push_back(std::move(entry));
    files.databases.push_back(db_path);
    files.latents.push_back(latent_path);
  }
  manifest["content_hash"] = hex64(combined);
  files.manifest = dir / "manifest.json";
  files.manifest_hash = combined;
  std::ofstream out(files.manifest, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + files.manifest.string());
  out << manifest.dump(2) << '\n';
  return files;
}

}  // namespace pairq
