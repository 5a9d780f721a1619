#include "pairq/pairs.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "pairq/errors.hpp"
#include "pairq/io.hpp"
#include "pairq/normal.hpp"

namespace pairq {

double thurstone_probability(double mu_x, double sigma_x, double mu_y, double sigma_y) {
  if (!std::isfinite(mu_x) || !std::isfinite(mu_y) || !std::isfinite(sigma_x) ||
      !std::isfinite(sigma_y)) {
    throw ValidationError("thurstone_probability: non-finite input");
  }
  if (sigma_x < 0.0 || sigma_y < 0.0) {
    throw ValidationError("thurstone_probability: negative sigma");
  }
  const double spread = std::sqrt(sigma_x * sigma_x + sigma_y * sigma_y);
  if (spread == 0.0) {
    if (mu_x > mu_y) return 1.0;
    if (mu_x < mu_y) return 0.0;
    return 0.5;
  }
  return std_normal_cdf((mu_x - mu_y) / spread);
}

int uncertainty_label(double sigma_x, double sigma_y) { return sigma_x >= sigma_y ? 1 : -1; }

std::vector<PairSample> sample_pairs(const Database& db, const std::set<std::string>& id_pool,
                                     std::size_t n, std::uint64_t seed) {
  if (db.polarity != Polarity::MOS) {
    throw ValidationError("sample_pairs: database '" + db.name +
                          "' must be polarity-normalized first");
  }
  if (id_pool.size() < 2) throw ValidationError("sample_pairs: id pool needs at least 2 items");
  if (n == 0) throw ValidationError("sample_pairs: n must be >= 1");

  std::vector<const AnnotatedItem*> pool;
  pool.reserve(id_pool.size());
  for (const auto& id : id_pool) {
    const AnnotatedItem* it = db.find(id);
    if (it == nullptr) {
      throw ValidationError("sample_pairs: id '" + id + "' not in database '" + db.name + "'");
    }
    pool.push_back(it);
  }

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> first(0, pool.size() - 1);
  std::uniform_int_distribution<std::size_t> second(0, pool.size() - 2);
  std::vector<PairSample> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    // Uniform over ordered pairs of distinct items, hence uniform over
    // unordered pairs with a uniformly random orientation.
    const std::size_t i = first(rng);
    std::size_t j = second(rng);
    if (j >= i) ++j;
    const AnnotatedItem& x = *pool[i];
    const AnnotatedItem& y = *pool[j];
    out.push_back({x.id, y.id, db.name, thurstone_probability(x.mu, x.sigma, y.mu, y.sigma),
                   uncertainty_label(x.sigma, y.sigma)});
  }
  return out;
}

TrainingSet combine(const std::vector<std::vector<PairSample>>& per_db_pairs,
                    const std::vector<std::uint64_t>& seeds) {
  if (!seeds.empty() && seeds.size() != per_db_pairs.size()) {
    throw ValidationError("combine: one seed per pair list expected");
  }
  TrainingSet ts;
  for (std::size_t k = 0; k < per_db_pairs.size(); ++k) {
    const auto& list = per_db_pairs[k];
    PairProvenance prov;
    prov.count = list.size();
    prov.seed = seeds.empty() ? 0 : seeds[k];
    if (!list.empty()) prov.db = list.front().db;
    for (const auto& p : list) {
      if (p.db != prov.db) throw ValidationError("combine: pair list mixes databases");
      ts.pairs.push_back(p);
    }
    ts.provenance.push_back(std::move(prov));
  }
  return ts;
}

void save_pairs(const std::vector<PairSample>& pairs, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write pair file " + path.string());
  out << "x_id,y_id,db,p,t\n";
  for (const auto& p : pairs) {
    out << p.x_id << ',' << p.y_id << ',' << p.db << ',' << format_double(p.p) << ',' << p.t
        << '\n';
  }
}

std::vector<PairSample> load_pairs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open pair file " + path.string());
  std::vector<PairSample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 || line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cols.push_back(cell);
    const std::string where = path.string() + ":" + std::to_string(lineno) + ": ";
    if (cols.size() != 5) throw ValidationError(where + "expected 5 columns");
    PairSample ps;
    ps.x_id = cols[0];
    ps.y_id = cols[1];
    ps.db = cols[2];
    try {
      ps.p = std::stod(cols[3]);
      ps.t = std::stoi(cols[4]);
    } catch (const std::exception&) {
      throw ValidationError(where + "bad numeric field");
    }
    if (ps.x_id == ps.y_id) throw ValidationError(where + "pair of identical items");
    if (!(ps.p >= 0.0 && ps.p <= 1.0)) throw ValidationError(where + "p outside [0, 1]");
    if (ps.t != 1 && ps.t != -1) throw ValidationError(where + "t must be +1 or -1");
    out.push_back(std::move(ps));
  }
  return out;
}

}  // namespace pairq
