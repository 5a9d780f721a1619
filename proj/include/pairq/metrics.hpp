#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pairq/pairs.hpp"
#include "pairq/scorer.hpp"
#include "pairq/trainer.hpp"

namespace pairq {

// Fractional (average) ranks, 1-based.
std::vector<double> average_ranks(std::span<const double> v);

double pearson(std::span<const double> a, std::span<const double> b);

// Spearman: Pearson correlation of average ranks. Throws ValidationError on
// length mismatch, fewer than 3 values, or a constant input.
double srcc(std::span<const double> pred, std::span<const double> truth);

// Pearson on raw values (no logistic remapping). Same error contract as srcc.
double plcc(std::span<const double> pred, std::span<const double> truth);

// Mean fidelity loss between the pair labels and the model probability.
// Throws ValidationError if a pair touches an id listed in `train_ids`.
double fidelity_metric(const ScorerParams& model, const std::vector<PairSample>& test_pairs,
                       const ItemIndex& items, const std::set<std::string>& train_ids,
                       double p_clamp = 1e-6);

// Fraction of pairs whose predicted-std order (sigma_x >= sigma_y -> +1)
// agrees with the label t.
double sigma_order_accuracy(const ScorerParams& model, const std::vector<PairSample>& pairs,
                            const ItemIndex& items);

struct WeightedValue {
  double value = 0.0;
  double n = 0.0;
};
// sum(value * n) / sum(n)
double weighted_aggregate(const std::map<std::string, WeightedValue>& per_db);

double median(std::vector<double> v);
double mean_abs_deviation(std::span<const double> v, double center);

// Paired one-sided t-test at confidence 1 - alpha (df = n - 1): +1 when `a`
// is significantly larger, -1 when `b` is, 0 otherwise.
int one_sided_t_test(std::span<const double> a, std::span<const double> b, double alpha = 0.05);

// Upper quantile of Student's t with `df` degrees of freedom.
double student_t_quantile(double prob, double df);

struct DbMetrics {
  std::string db;
  double n_images = 0.0;
  double n_pairs = 0.0;
  double srcc = 0.0;
  double plcc = 0.0;
  double fidelity = 0.0;
  double sigma_order_acc = 0.0;
};

/// One session's evaluation: one row per database plus the image-count
/// weighted row, plus the SRCC against latent quality pooled over all test sets when
/// a ground-truth sidecar was available.
struct EvalReport {
  std::string session;
  std::vector<DbMetrics> per_db;
  DbMetrics weighted;
  double pooled_latent_srcc = 0.0;
  bool has_pooled_latent = false;

  const DbMetrics& at(const std::string& db) const;
};

void finalize_weighted(EvalReport& r);

struct SessionAggregate {
  EvalReport median;
  EvalReport mad;  // mean absolute deviation about the median
};

SessionAggregate median_across_sessions(const std::vector<EvalReport>& reports);

// CSV: header then one row per database and a final "weighted" row.
std::string report_to_csv(const EvalReport& r);
void save_report_csv(const EvalReport& r, const std::filesystem::path& path);
nlohmann::json report_to_json(const EvalReport& r);
EvalReport report_from_json(const nlohmann::json& j);

}  // namespace pairq
