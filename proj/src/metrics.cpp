#include "pairq/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

#include "pairq/errors.hpp"
#include "pairq/io.hpp"
#include "pairq/losses.hpp"

namespace pairq {

std::vector<double> average_ranks(std::span<const double> v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && v[idx[j]] == v[idx[i]]) ++j;
    // positions i..j-1 share the mean of ranks i+1..j
    const double r = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[idx[k]] = r;
    i = j;
  }
  return ranks;
}

namespace {

void check_inputs(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size()) throw ValidationError(std::string(what) + ": length mismatch");
  if (a.size() < 3) throw ValidationError(std::string(what) + ": need at least 3 values");
}

}  // namespace

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) throw ValidationError("pearson: bad lengths");
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) throw ValidationError("correlation undefined for constant input");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double srcc(std::span<const double> pred, std::span<const double> truth) {
  check_inputs(pred, truth, "srcc");
  const auto rp = average_ranks(pred);
  const auto rt = average_ranks(truth);
  return pearson(rp, rt);
}

double plcc(std::span<const double> pred, std::span<const double> truth) {
  check_inputs(pred, truth, "plcc");
  return pearson(pred, truth);
}

double fidelity_metric(const ScorerParams& model, const std::vector<PairSample>& test_pairs,
                       const ItemIndex& items, const std::set<std::string>& train_ids,
                       double p_clamp) {
  if (test_pairs.empty()) throw ValidationError("fidelity_metric: no pairs");
  double sum = 0.0;
  for (const auto& p : test_pairs) {
    for (const auto* id : {&p.x_id, &p.y_id}) {
      if (train_ids.count(*id)) {
        throw ValidationError("fidelity_metric: pair references training item '" + *id + "'");
      }
    }
    const auto ix = items.find(p.x_id);
    const auto iy = items.find(p.y_id);
    if (ix == items.end() || iy == items.end()) {
      throw ValidationError("fidelity_metric: unknown item in pair (" + p.x_id + ", " + p.y_id + ")");
    }
    const ModelOutput ox = forward(model, ix->second->features);
    const ModelOutput oy = forward(model, iy->second->features);
    sum += fidelity_loss(p.p, model_probability(ox, oy, p_clamp));
  }
  return sum / static_cast<double>(test_pairs.size());
}

double sigma_order_accuracy(const ScorerParams& model, const std::vector<PairSample>& pairs,
                            const ItemIndex& items) {
  if (pairs.empty()) throw ValidationError("sigma_order_accuracy: no pairs");
  std::size_t hits = 0;
  for (const auto& p : pairs) {
    const double sx = forward(model, items.at(p.x_id)->features).sigma;
    const double sy = forward(model, items.at(p.y_id)->features).sigma;
    if (uncertainty_label(sx, sy) == p.t) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(pairs.size());
}

double weighted_aggregate(const std::map<std::string, WeightedValue>& per_db) {
  if (per_db.empty()) throw ValidationError("weighted_aggregate: no inputs");
  double num = 0.0, den = 0.0;
  for (const auto& [name, wv] : per_db) {
    num += wv.value * wv.n;
    den += wv.n;
  }
  if (!(den > 0.0)) throw ValidationError("weighted_aggregate: weights must sum to a positive value");
  return num / den;
}

double median(std::vector<double> v) {
  if (v.empty()) throw ValidationError("median of an empty list");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean_abs_deviation(std::span<const double> v, double center) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += std::abs(x - center);
  return s / static_cast<double>(v.size());
}

double student_t_quantile(double prob, double df) {
  boost::math::students_t dist(df);
  return boost::math::quantile(dist, prob);
}

int one_sided_t_test(std::span<const double> a, std::span<const double> b, double alpha) {
  if (a.size() != b.size()) throw ValidationError("t-test: samples must be paired");
  if (a.size() < 2) throw ValidationError("t-test: need at least 2 paired samples");
  if (!(alpha > 0.0 && alpha < 0.5)) throw ValidationError("t-test: alpha must lie in (0, 0.5)");
  const std::size_t n = a.size();
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double x : d) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (sd == 0.0) {
    if (mean == 0.0) return 0;
    return mean > 0.0 ? 1 : -1;
  }
  const double t = mean / (sd / std::sqrt(static_cast<double>(n)));
  const double crit = student_t_quantile(1.0 - alpha, static_cast<double>(n - 1));
  if (t > crit) return 1;
  if (t < -crit) return -1;
  return 0;
}

const DbMetrics& EvalReport::at(const std::string& db) const {
  for (const auto& m : per_db) {
    if (m.db == db) return m;
  }
  throw ValidationError("report has no database '" + db + "'");
}

void finalize_weighted(EvalReport& r) {
  std::map<std::string, WeightedValue> s, p, f, a;
  for (const auto& m : r.per_db) {
    s[m.db] = {m.srcc, m.n_images};
    p[m.db] = {m.plcc, m.n_images};
    f[m.db] = {m.fidelity, m.n_images};
    a[m.db] = {m.sigma_order_acc, m.n_images};
  }
  r.weighted.db = "weighted";
  r.weighted.n_images = 0.0;
  r.weighted.n_pairs = 0.0;
  for (const auto& m : r.per_db) {
    r.weighted.n_images += m.n_images;
    r.weighted.n_pairs += m.n_pairs;
  }
  r.weighted.srcc = weighted_aggregate(s);
  r.weighted.plcc = weighted_aggregate(p);
  r.weighted.fidelity = weighted_aggregate(f);
  r.weighted.sigma_order_acc = weighted_aggregate(a);
}

SessionAggregate median_across_sessions(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw ValidationError("median_across_sessions: no reports");
  SessionAggregate agg;
  agg.median.session = "median";
  agg.mad.session = "mad";

  auto reduce = [&](auto get, double& med, double& mad) {
    std::vector<double> v;
    v.reserve(reports.size());
    for (const auto& r : reports) v.push_back(get(r));
    med = median(v);
    mad = mean_abs_deviation(v, med);
  };
  auto reduce_row = [&](auto row_of, DbMetrics& med, DbMetrics& mad) {
    reduce([&](const EvalReport& r) { return row_of(r).n_images; }, med.n_images, mad.n_images);
    reduce([&](const EvalReport& r) { return row_of(r).n_pairs; }, med.n_pairs, mad.n_pairs);
    reduce([&](const EvalReport& r) { return row_of(r).srcc; }, med.srcc, mad.srcc);
    reduce([&](const EvalReport& r) { return row_of(r).plcc; }, med.plcc, mad.plcc);
    reduce([&](const EvalReport& r) { return row_of(r).fidelity; }, med.fidelity, mad.fidelity);
    reduce([&](const EvalReport& r) { return row_of(r).sigma_order_acc; }, med.sigma_order_acc,
           mad.sigma_order_acc);
  };

  for (const auto& m : reports.front().per_db) {
    DbMetrics med, mad;
    med.db = mad.db = m.db;
    reduce_row([&](const EvalReport& r) -> const DbMetrics& { return r.at(m.db); }, med, mad);
    agg.median.per_db.push_back(med);
    agg.mad.per_db.push_back(mad);
  }
  agg.median.weighted.db = agg.mad.weighted.db = "weighted";
  reduce_row([](const EvalReport& r) -> const DbMetrics& { return r.weighted; }, agg.median.weighted,
             agg.mad.weighted);

  const bool pooled = std::all_of(reports.begin(), reports.end(),
                                  [](const EvalReport& r) { return r.has_pooled_latent; });
  if (pooled) {
    agg.median.has_pooled_latent = agg.mad.has_pooled_latent = true;
    reduce([](const EvalReport& r) { return r.pooled_latent_srcc; }, agg.median.pooled_latent_srcc,
           agg.mad.pooled_latent_srcc);
  }
  return agg;
}

namespace {

void csv_row(std::ostringstream& out, const DbMetrics& m) {
  out << m.db << ',' << format_double(m.n_images) << ',' << format_double(m.n_pairs) << ','
      << format_double(m.srcc) << ',' << format_double(m.plcc) << ',' << format_double(m.fidelity)
      << ',' << format_double(m.sigma_order_acc) << '\n';
}

nlohmann::json row_json(const DbMetrics& m) {
  return {{"db", m.db},     {"n_images", m.n_images}, {"n_pairs", m.n_pairs},
          {"srcc", m.srcc}, {"plcc", m.plcc},         {"fidelity", m.fidelity},
          {"sigma_order_acc", m.sigma_order_acc}};
}

DbMetrics row_from_json(const nlohmann::json& j) {
  DbMetrics m;
  m.db = j.at("db").get<std::string>();
  m.n_images = j.at("n_images").get<double>();
  m.n_pairs = j.at("n_pairs").get<double>();
  m.srcc = j.at("srcc").get<double>();
  m.plcc = j.at("plcc").get<double>();
  m.fidelity = j.at("fidelity").get<double>();
  m.sigma_order_acc = j.at("sigma_order_acc").get<double>();
  return m;
}

}  // namespace

std::string report_to_csv(const EvalReport& r) {
  std::ostringstream out;
  out << "db,n_images,n_test_pairs,srcc,plcc,fidelity,sigma_order_acc\n";
  for (const auto& m : r.per_db) csv_row(out, m);
  csv_row(out, r.weighted);
  return out.str();
}

void save_report_csv(const EvalReport& r, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << report_to_csv(r);
}

nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json j;
  j["session"] = r.session;
  j["per_db"] = nlohmann::json::array();
  for (const auto& m : r.per_db) j["per_db"].push_back(row_json(m));
  j["weighted"] = row_json(r.weighted);
  if (r.has_pooled_latent) j["pooled_latent_srcc"] = r.pooled_latent_srcc;
  return j;
}

EvalReport report_from_json(const nlohmann::json& j) {
  EvalReport r;
  try {
    r.session = j.at("session").get<std::string>();
    for (const auto& m : j.at("per_db")) r.per_db.push_back(row_from_json(m));
    r.weighted = row_from_json(j.at("weighted"));
    if (j.contains("pooled_latent_srcc")) {
      r.has_pooled_latent = true;
      r.pooled_latent_srcc = j.at("pooled_latent_srcc").get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad report: ") + e.what());
  }
  return r;
}

}  // namespace pairq
