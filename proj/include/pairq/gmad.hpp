#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pairq/io.hpp"

namespace pairq {

struct GmadConfig {
  std::size_t n_levels = 2;
  // Max defender-score gap for a pair to count as "same quality". Zero or
  // negative selects the default: 1% of the defender's corpus score range.
  double level_tolerance = 0.0;
};

struct GmadPair {
  std::size_t level = 0;
  std::string x_id;
  std::string y_id;
  double defender_x = 0.0;
  double defender_y = 0.0;
  double attacker_x = 0.0;
  double attacker_y = 0.0;

  double attacker_gap() const { return attacker_x - attacker_y; }
  bool operator==(const GmadPair&) const = default;
};

struct GmadResult {
  double tolerance = 0.0;
  std::vector<GmadPair> pairs;
  std::vector<std::string> warnings;  // one line per skipped level
};

// Splits the corpus into n_levels quantile bins of defender score (sorted by
// score then id; item of rank r goes to bin floor(r * n_levels / n)). In each
// bin, returns the pair with the largest attacker gap among pairs whose
// defender scores differ by at most the tolerance; ties go to the
// lexicographically smallest (x_id, y_id). Bins with fewer than two items or
// no admissible pair are skipped with a warning.
GmadResult gmad_search(const ScoreMap& attacker, const ScoreMap& defender,
                       const std::vector<std::string>& corpus, const GmadConfig& cfg);

double default_gmad_tolerance(const ScoreMap& defender, const std::vector<std::string>& corpus);

// CSV rows tagged with a direction label (e.g. "A_attacks_B").
void write_gmad_csv(const std::vector<std::pair<std::string, GmadResult>>& runs,
                    const std::filesystem::path& path);

}  // namespace pairq
