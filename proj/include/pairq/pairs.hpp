#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "pairq/types.hpp"

namespace pairq {

/// One training or test pair from a single database. `p` is the probability
/// that `x_id` is of higher quality than `y_id`, `t` is +1 when the human
/// opinion std of x is at least that of y and -1 otherwise.
struct PairSample {
  std::string x_id;
  std::string y_id;
  std::string db;
  double p = 0.5;
  int t = 1;

  bool operator==(const PairSample&) const = default;
};

struct PairProvenance {
  std::string db;
  std::size_t count = 0;
  std::uint64_t seed = 0;

  bool operator==(const PairProvenance&) const = default;
};

struct TrainingSet {
  std::vector<PairSample> pairs;
  std::vector<PairProvenance> provenance;
};

// Pr(q(x) >= q(y)) under independent Gaussian opinions. With both sigmas zero
// the step-function limit is used: 1, 0, or 0.5 on equal means.
double thurstone_probability(double mu_x, double sigma_x, double mu_y, double sigma_y);

int uncertainty_label(double sigma_x, double sigma_y);

// Draws `n` pairs of distinct items uniformly with replacement over unordered
// pairs of `id_pool`, in random order. The database must already be in MOS
// polarity (see normalize_polarity).
std::vector<PairSample> sample_pairs(const Database& db, const std::set<std::string>& id_pool,
                                     std::size_t n, std::uint64_t seed);

// Concatenates per-database pair lists. Provenance counts and seeds are taken
// from `seeds` when given (one per list), otherwise seeds are recorded as 0.
TrainingSet combine(const std::vector<std::vector<PairSample>>& per_db_pairs,
                    const std::vector<std::uint64_t>& seeds = {});

// Pair files are CSV with header "x_id,y_id,db,p,t".
void save_pairs(const std::vector<PairSample>& pairs, const std::filesystem::path& path);
std::vector<PairSample> load_pairs(const std::filesystem::path& path);

}  // namespace pairq
