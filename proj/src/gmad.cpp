#include "pairq/gmad.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <tuple>

#include "pairq/errors.hpp"

namespace pairq {

namespace {

struct Entry {
  std::string id;
  double attacker;
  double defender;
};

double score_of(const ScoreMap& m, const std::string& id, const char* role) {
  const auto it = m.find(id);
  if (it == m.end()) {
    throw ValidationError(std::string("gmad: ") + role + " scores miss corpus item '" + id + "'");
  }
  return it->second;
}

}  // namespace

double default_gmad_tolerance(const ScoreMap& defender, const std::vector<std::string>& corpus) {
  double lo = 0.0, hi = 0.0;
  bool first = true;
  for (const auto& id : corpus) {
    const double d = score_of(defender, id, "defender");
    if (first) {
      lo = hi = d;
      first = false;
    }
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  const double range = hi - lo;
  return range > 0.0 ? 0.01 * range : 0.01;
}

GmadResult gmad_search(const ScoreMap& attacker, const ScoreMap& defender,
                       const std::vector<std::string>& corpus, const GmadConfig& cfg) {
  if (corpus.size() < 2) throw ValidationError("gmad: corpus needs at least 2 items");
  if (cfg.n_levels == 0) throw ValidationError("gmad: n_levels must be >= 1");

  std::vector<Entry> entries;
  entries.reserve(corpus.size());
  for (const auto& id : corpus) {
    entries.push_back({id, score_of(attacker, id, "attacker"), score_of(defender, id, "defender")});
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return std::tie(a.defender, a.id) < std::tie(b.defender, b.id);
  });

  GmadResult result;
  result.tolerance = cfg.level_tolerance > 0.0 ? cfg.level_tolerance
                                               : default_gmad_tolerance(defender, corpus);
  const std::size_t n = entries.size();
  const std::size_t levels = cfg.n_levels;

  std::size_t begin = 0;
  for (std::size_t level = 0; level < levels; ++level) {
    std::size_t end = begin;
    while (end < n && (end * levels) / n == level) ++end;
    const std::size_t count = end - begin;
    if (count < 2) {
      result.warnings.push_back("level " + std::to_string(level) + ": " + std::to_string(count) +
                                " item(s) in bin, skipped");
      begin = end;
      continue;
    }

    bool found = false;
    GmadPair best;
    for (std::size_t i = begin; i < end; ++i) {
      for (std::size_t j = i + 1; j < end; ++j) {
        const Entry& a = entries[i];
        const Entry& b = entries[j];
        if (std::abs(a.defender - b.defender) > result.tolerance) continue;
        const bool a_first = a.attacker > b.attacker || (a.attacker == b.attacker && a.id < b.id);
        const Entry& x = a_first ? a : b;
        const Entry& y = a_first ? b : a;
        const double gap = x.attacker - y.attacker;
        const bool better = !found || gap > best.attacker_gap() ||
                            (gap == best.attacker_gap() &&
                             std::tie(x.id, y.id) < std::tie(best.x_id, best.y_id));
        if (better) {
          best = {level, x.id, y.id, x.defender, y.defender, x.attacker, y.attacker};
          found = true;
        }
      }
    }
    if (found) {
      result.pairs.push_back(best);
    } else {
      result.warnings.push_back("level " + std::to_string(level) +
                                ": no pair within the defender tolerance, skipped");
    }
    begin = end;
  }
  return result;
}

void write_gmad_csv(const std::vector<std::pair<std::string, GmadResult>>& runs,
                    const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << "direction,level,x_id,y_id,defender_x,defender_y,attacker_x,attacker_y,tolerance\n";
  for (const auto& [label, res] : runs) {
    for (const auto& p : res.pairs) {
      out << label << ',' << p.level << ',' << p.x_id << ',' << p.y_id << ','
          << format_double(p.defender_x) << ',' << format_double(p.defender_y) << ','
          << format_double(p.attacker_x) << ',' << format_double(p.attacker_y) << ','
          << format_double(res.tolerance) << '\n';
    }
  }
}

}  // namespace pairq
