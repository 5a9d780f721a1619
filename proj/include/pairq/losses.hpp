#pragma once

#include <span>
#include <vector>

#include "pairq/pairs.hpp"
#include "pairq/scorer.hpp"

namespace pairq {

struct LossConfig {
  double xi = 0.025;       // hinge margin
  double lambda = 1.0;     // weight of the hinge term
  double p_clamp = 1e-6;   // model probabilities are clamped to [eps, 1 - eps]

  void validate() const;
};

/// Model-side preference probability and its partial derivatives with respect
/// to (f_x, sigma_x, f_y, sigma_y). Derivatives vanish when the clamp is active.
struct ModelProbability {
  double p = 0.5;
  double d_fx = 0.0;
  double d_sx = 0.0;
  double d_fy = 0.0;
  double d_sy = 0.0;
};

ModelProbability model_probability_grad(double f_x, double sigma_x, double f_y, double sigma_y,
                                        double p_clamp);
double model_probability(const ModelOutput& out_x, const ModelOutput& out_y, double p_clamp = 1e-6);

// 1 - sqrt(p * pw) - sqrt((1 - p)(1 - pw)).
double fidelity_loss(double p, double p_w);
// d fidelity_loss / d p_w; requires p_w strictly inside (0, 1).
double fidelity_grad(double p, double p_w);

// max(0, xi - t (sigma_x - sigma_y)).
double hinge_loss(double sigma_x_hat, double sigma_y_hat, int t, double xi);

struct PairLoss {
  double loss = 0.0;
  double data_term = 0.0;  // fidelity (or cross entropy) part, before the hinge
  double hinge = 0.0;
  OutputGrad grad_x;
  OutputGrad grad_y;
};

// Fidelity plus lambda-weighted hinge for one pair, with the exact gradient
// through the probability model. Hinge subgradient at the kink is zero.
PairLoss pair_loss(const ModelOutput& out_x, const ModelOutput& out_y, double p, int t,
                   const LossConfig& cfg);

struct BatchEntry {
  const PairSample* pair = nullptr;
  const ModelOutput* out_x = nullptr;
  const ModelOutput* out_y = nullptr;
};

// Mean of pair_loss over the batch, summed in index order.
double batch_loss(std::span<const BatchEntry> batch, const LossConfig& cfg);

// ---- comparison objectives ------------------------------------------------

double mse_loss(double f, double mos);
double mse_grad(double f, double mos);

// -r ln(pw) - (1 - r) ln(1 - pw) with pw clamped to [eps, 1 - eps].
double cross_entropy_loss(double r, double p_w, double p_clamp = 1e-6);
double cross_entropy_grad(double r, double p_w, double p_clamp = 1e-6);
double binary_ce_loss(double p_w, int r, double p_clamp = 1e-6);
double continuous_ce_loss(double p_w, double p, double p_clamp = 1e-6);

// Cross entropy on the model probability plus lambda-weighted hinge; `target`
// is the (binary or continuous) label.
PairLoss pair_ce_loss(const ModelOutput& out_x, const ModelOutput& out_y, double target, int t,
                      const LossConfig& cfg);

// Maps mu affinely onto [lo, hi]; throws on a constant-mu database.
Database rescale_mos(Database db, double lo, double hi);

}  // namespace pairq
