#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "pairq/io.hpp"
#include "pairq/types.hpp"

namespace pairq {

/// One synthetic database over the shared latent quality axis. Opinions are
/// mu = a * q + b with an arch-shaped std; features are a fixed nonlinear
/// embedding of q plus Gaussian noise of std `noise`.
struct SynthDbConfig {
  std::string name;
  Scenario scenario = Scenario::synthetic;
  Polarity polarity = Polarity::MOS;
  std::size_t n_items = 600;
  std::size_t n_groups = 200;
  double q_lo = -2.0;
  double q_hi = 2.0;
  double a = 1.0;
  double b = 0.0;
  double sigma_max = 0.3;
  double sigma_0 = 0.05;
  double gamma = 1.0;
  FeatureKind feature_kind = FeatureKind::vector;
  std::size_t dim = 8;       // d for vectors, c for maps
  std::size_t map_rows = 4;  // s for maps
  double noise = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json synth_config_to_json(const SynthDbConfig& c);
SynthDbConfig synth_config_from_json(const nlohmann::json& j);

// sigma_0 + sigma_max * (1 - u^2)^gamma with u = 2 (q - q_lo) / (q_hi - q_lo) - 1.
double arch_sigma(double q, double q_lo, double q_hi, double sigma_max, double sigma_0, double gamma);

// Noise-free embedding g(q) of length `dim`: q, q^2, sin q, tanh(q/2), cos q,
// q^3 / 4, exp(-q^2 / 2), sin 2q, then zeros.
std::vector<double> latent_embedding(double q, std::size_t dim);

struct SynthDatabase {
  Database db;
  ScoreMap latent;  // id -> q, kept out of the database records
};

SynthDatabase gen_database(const SynthDbConfig& cfg);

inline constexpr double kDefaultFeatureNoise = 0.5;

struct BenchmarkOptions {
  std::size_t n_items = 600;
  std::size_t n_groups = 200;
  double noise = kDefaultFeatureNoise;
  FeatureKind feature_kind = FeatureKind::vector;
  std::size_t dim = 8;
  std::size_t map_rows = 4;
};

struct Benchmark {
  std::uint64_t seed = 0;
  std::vector<SynthDbConfig> configs;
  std::vector<SynthDatabase> dbs;
};

// Three databases on incommensurable scales over overlapping latent ranges:
// a [0, 1] DMOS-like lab set, a [0, 100] MOS in-the-wild set, and a [1, 5]
// MOS in-the-wild set.
std::vector<SynthDbConfig> benchmark_configs(std::uint64_t seed, const BenchmarkOptions& opts = {});
Benchmark gen_benchmark(std::uint64_t seed, const BenchmarkOptions& opts = {});

struct BenchmarkFiles {
  std::vector<std::filesystem::path> databases;
  std::vector<std::filesystem::path> latents;
  std::filesystem::path manifest;
  std::uint64_t manifest_hash = 0;
};

// Writes <name>.jsonl, <name>.latent.csv and manifest.json into `dir`
// (created if missing). The manifest carries the configs, seed, and an
// FNV-1a hash of every emitted file.
BenchmarkFiles write_benchmark(const Benchmark& bench, const std::filesystem::path& dir);

}  // namespace pairq
