#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "pairq/io.hpp"
#include "pairq/metrics.hpp"
#include "pairq/scorer.hpp"
#include "pairq/trainer.hpp"

namespace pairq {

// Training strategies compared by run_sessions.
enum class Variant { fidelity_hinge, fidelity_only, mse, rescale_mse, binary_ce, continuous_ce };

std::string_view to_string(Variant v);  // "fidelity+hinge", "fidelity-only", ...
Variant parse_variant(std::string_view s);
const std::vector<Variant>& all_variants();

struct DbSource {
  std::filesystem::path path;
  std::filesystem::path latent;  // optional ground-truth sidecar
  std::size_t pairs = 0;         // 0: share of total_pairs proportional to size
};

struct SessionConfig {
  std::vector<DbSource> databases;
  std::size_t total_pairs = 6000;
  double train_fraction = 0.8;
  std::vector<std::uint64_t> session_seeds;
  std::size_t test_pairs_per_db = 1000;
  ArchKind arch_kind = ArchKind::mlp;
  std::vector<std::size_t> hidden_sizes{16};
  TrainConfig train;
  std::vector<Variant> variants;
  double rescale_lo = 0.0;
  double rescale_hi = 1.0;
  std::filesystem::path output_dir = "sessions";

  void validate() const;
};

// Relative paths inside the config resolve against `base_dir`.
SessionConfig session_config_from_json(const nlohmann::json& j,
                                       const std::filesystem::path& base_dir = {});
SessionConfig load_session_config(const std::filesystem::path& path);
nlohmann::json session_config_to_json(const SessionConfig& c);

// Fills the input dimensions of an architecture from a feature sample.
Architecture arch_for_features(ArchKind kind, const std::vector<std::size_t>& hidden,
                               const Features& sample);

// Per-db pair counts: explicit counts win, the rest split total_pairs in
// proportion to database size (largest remainder, ties by db order).
std::vector<std::size_t> pair_budget(const std::vector<std::size_t>& db_sizes,
                                     const std::vector<std::size_t>& explicit_counts,
                                     std::size_t total);

/// Scorers used for one evaluation: either one shared model or one model per
/// database (the per-database regression baseline).
struct ModelSet {
  std::vector<const ScorerParams*> models;
  std::map<std::string, std::size_t> route;  // db -> index into models; absent -> 0

  const ScorerParams& for_db(const std::string& db) const;
};

struct EvalInputs {
  const std::vector<Database>* dbs = nullptr;  // MOS polarity
  std::map<std::string, std::set<std::string>> test_ids;
  std::map<std::string, std::vector<PairSample>> test_pairs;
  std::set<std::string> train_ids;
  const ScoreMap* latent = nullptr;  // merged ground truth, may be null
  double p_clamp = 1e-6;
};

// Scores every test item, then fills per-db SRCC/PLCC against mu, the
// fidelity metric and sigma-order accuracy on the test pairs, the weighted
// row, and the pooled SRCC against latent quality when available.
EvalReport evaluate_models(const ModelSet& models, const EvalInputs& in, const std::string& session);

struct SessionDatabases {
  std::vector<Database> dbs;  // MOS polarity, config order
  ScoreMap latent;            // merged sidecars
  bool have_latent = false;   // every database had a sidecar
  std::vector<std::size_t> budget;  // training pairs per database
};

SessionDatabases load_session_databases(const SessionConfig& cfg);

/// Everything a session draws before training: per-db content splits, the
/// training pairs (train side only), and fresh test-side pairs.
struct SessionInputs {
  std::uint64_t seed = 0;
  std::string name;
  std::map<std::string, Split> splits;
  std::set<std::string> train_ids;
  std::vector<std::vector<PairSample>> train_pairs;  // per db, config order
  std::vector<std::uint64_t> pair_seeds;
  std::map<std::string, std::vector<PairSample>> test_pairs;
};

SessionInputs prepare_session(const SessionConfig& cfg, const SessionDatabases& loaded,
                              std::uint64_t seed);

// split.csv, train_pairs.csv and test_pairs.csv.
void write_session_inputs(const SessionInputs& s, const std::vector<Database>& dbs,
                          const std::filesystem::path& dir);

struct SessionFailure {
  std::string variant;
  std::string session;
  std::string message;
  bool numeric = false;
};

struct RunSummary {
  std::map<std::string, std::vector<EvalReport>> reports;  // variant -> per-session
  std::map<std::string, SessionAggregate> aggregates;
  std::vector<SessionFailure> failures;
};

// Runs every (session seed, variant) cell, writes all artifacts below
// cfg.output_dir, and returns what was computed. A failing cell is recorded
// and skipped; the other cells still run.
RunSummary run_sessions(const SessionConfig& cfg);

// Paired one-sided t-tests of `reference` against each other variant on
// per-session SRCC, per database and for the weighted row.
struct TTestRow {
  std::string db;
  std::string variant_a;
  std::string variant_b;
  std::size_t n = 0;
  int result = 0;
};
std::vector<TTestRow> ttest_table(const RunSummary& s, const std::string& reference);

}  // namespace pairq
