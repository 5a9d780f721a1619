#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "pairq/adam.hpp"
#include "pairq/losses.hpp"
#include "pairq/pairs.hpp"
#include "pairq/scorer.hpp"

namespace pairq {

// Pairwise objective driven by the trainer. `fidelity` is the fidelity loss
// plus the lambda-weighted hinge; the cross-entropy variants swap the data
// term and keep the same hinge handling.
enum class Objective { fidelity, continuous_ce, binary_ce };

std::string_view to_string(Objective o);
Objective parse_objective(std::string_view s);

struct TrainConfig {
  std::size_t epochs = 12;
  std::size_t warmup_epochs = 3;
  std::size_t batch_size_warmup = 128;
  std::size_t batch_size_main = 32;
  double lr0 = 1e-4;
  double decay_factor = 10.0;
  std::size_t decay_every = 3;
  LossConfig loss;
  Objective objective = Objective::fidelity;
  std::uint64_t seed = 0;
  AdamConfig adam;
  double clip_norm = 0.0;  // 0 disables gradient-norm clipping

  void validate() const;
  double learning_rate(std::size_t epoch) const;
};

nlohmann::json train_config_to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

using ItemIndex = std::unordered_map<std::string, const AnnotatedItem*>;

// Id -> item lookup across databases; item ids must be globally unique.
ItemIndex index_items(const std::vector<Database>& dbs);
ItemIndex index_items(std::vector<Database>&&) = delete;  // would dangle

struct EpochLog {
  std::size_t epoch = 0;
  double lr = 0.0;
  double mean_loss = 0.0;
};

struct TrainReport {
  std::vector<EpochLog> epochs;
  Checkpoint checkpoint;
};

void write_epoch_log_csv(const TrainReport& report, const std::filesystem::path& path);

// Mini-batch Adam over the training pairs. The first `warmup_epochs` update
// only the two-output head (other gradients are computed and then masked);
// Adam moments are reset when the full network is unfrozen.
TrainReport train(const TrainingSet& train_set, const ItemIndex& items, const Architecture& arch,
                  const TrainConfig& cfg);

// Same loop, continuing from given parameters instead of a fresh He init.
TrainReport train_from(const TrainingSet& train_set, const ItemIndex& items, ScorerParams init,
                       const TrainConfig& cfg);

struct RegressionSample {
  const AnnotatedItem* item = nullptr;
  double target = 0.0;
};

// Pointwise MSE regression of the quality head on `target`. Each epoch draws
// `samples_per_epoch` items with replacement. Targets are standardized with
// the sample mean/std during optimization and the affine map is folded back
// into the head, so the returned model predicts in target units.
TrainReport train_regression(const std::vector<RegressionSample>& samples,
                             std::size_t samples_per_epoch, const Architecture& arch,
                             const TrainConfig& cfg);

// Loss of one pair under the configured objective, with output gradients.
PairLoss objective_pair_loss(const ModelOutput& out_x, const ModelOutput& out_y,
                             const PairSample& pair, const TrainConfig& cfg);

// Mean objective over `pairs` and (optionally) its parameter gradient.
double objective_and_gradient(const ScorerParams& w, const std::vector<PairSample>& pairs,
                              const ItemIndex& items, const TrainConfig& cfg,
                              std::vector<double>* grad);

struct GradCheckOptions {
  double step = 1e-5;
  // Test hook: perturbs the analytic gradient so the check must fail.
  bool corrupt_analytic = false;
  Objective objective = Objective::fidelity;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t params_checked = 0;
};

// Compares the full-pipeline analytic gradient of the batch objective against
// central finite differences on random parameters, features, and pairs.
// Relative error per parameter is |a - n| / max(|a|, |n|, kGradCheckFloor).
// The floor sits well above the central-difference round-off (about
// 1e-16 * |L| / step), so structurally zero gradients do not read as errors.
inline constexpr double kGradCheckFloor = 1e-4;
GradCheckResult grad_check(const Architecture& arch, std::uint64_t seed, std::size_t n_trials,
                           const GradCheckOptions& opts = {});

}  // namespace pairq
