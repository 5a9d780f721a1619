#include "pairq/losses.hpp"

#include <algorithm>
#include <cmath>

#include "pairq/errors.hpp"
#include "pairq/normal.hpp"

namespace pairq {

void LossConfig::validate() const {
  if (!(xi > 0.0) || !std::isfinite(xi)) throw ValidationError("loss.xi must be > 0");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ValidationError("loss.lambda must be >= 0");
  if (!(p_clamp > 0.0 && p_clamp < 0.5)) throw ValidationError("loss.p_clamp must lie in (0, 0.5)");
}

ModelProbability model_probability_grad(double f_x, double sigma_x, double f_y, double sigma_y,
                                        double p_clamp) {
  if (!std::isfinite(f_x) || !std::isfinite(sigma_x) || !std::isfinite(f_y) || !std::isfinite(sigma_y)) {
    throw NumericError("non-finite model output");
  }
  const double var = sigma_x * sigma_x + sigma_y * sigma_y;
  const double s = std::sqrt(var);
  ModelProbability mp;
  if (!std::isfinite(var) || s == 0.0) {
    // Overflowed or degenerate spread: fall back to the clamped step limit.
    mp.p = f_x > f_y ? 1.0 - p_clamp : (f_x < f_y ? p_clamp : 0.5);
    return mp;
  }
  const double z = (f_x - f_y) / s;
  const double raw = std_normal_cdf(z);
  if (raw < p_clamp) {
    mp.p = p_clamp;
    return mp;
  }
  if (raw > 1.0 - p_clamp) {
    mp.p = 1.0 - p_clamp;
    return mp;
  }
  mp.p = raw;
  const double dens = std_normal_pdf(z);
  mp.d_fx = dens / s;
  mp.d_fy = -mp.d_fx;
  // dz/dsigma_x = -(f_x - f_y) sigma_x / s^3 = -z sigma_x / var
  mp.d_sx = -dens * z * sigma_x / var;
  mp.d_sy = -dens * z * sigma_y / var;
  return mp;
}

double model_probability(const ModelOutput& out_x, const ModelOutput& out_y, double p_clamp) {
  return model_probability_grad(out_x.f, out_x.sigma, out_y.f, out_y.sigma, p_clamp).p;
}

double fidelity_loss(double p, double p_w) {
  if (!(p >= 0.0 && p <= 1.0) || !(p_w >= 0.0 && p_w <= 1.0)) {
    throw ValidationError("fidelity_loss: probability outside [0, 1]");
  }
  // Summing before subtracting keeps the swap (p, p_w) -> (1 - p, 1 - p_w) bit-exact
  // whenever the complements are exact.
  return 1.0 - (std::sqrt(p * p_w) + std::sqrt((1.0 - p) * (1.0 - p_w)));
}

double fidelity_grad(double p, double p_w) {
  return -0.5 * (std::sqrt(p / p_w) - std::sqrt((1.0 - p) / (1.0 - p_w)));
}

double hinge_loss(double sigma_x_hat, double sigma_y_hat, int t, double xi) {
  return std::max(0.0, xi - static_cast<double>(t) * (sigma_x_hat - sigma_y_hat));
}

namespace {

// Shared tail of the pairwise objectives: chain dL/dpw through the model
// probability, then add the hinge term.
PairLoss finish_pair(const ModelOutput& out_x, const ModelOutput& out_y, const ModelProbability& mp,
                     double base_loss, double d_pw, int t, const LossConfig& cfg) {
  PairLoss r;
  r.data_term = base_loss;
  r.grad_x.d_f = d_pw * mp.d_fx;
  r.grad_x.d_sigma = d_pw * mp.d_sx;
  r.grad_y.d_f = d_pw * mp.d_fy;
  r.grad_y.d_sigma = d_pw * mp.d_sy;
  r.loss = base_loss;
  if (cfg.lambda != 0.0) {
    r.hinge = hinge_loss(out_x.sigma, out_y.sigma, t, cfg.xi);
    r.loss += cfg.lambda * r.hinge;
    if (r.hinge > 0.0) {
      const double g = cfg.lambda * static_cast<double>(t);
      r.grad_x.d_sigma -= g;
      r.grad_y.d_sigma += g;
    }
  }
  return r;
}

}  // namespace

PairLoss pair_loss(const ModelOutput& out_x, const ModelOutput& out_y, double p, int t,
                   const LossConfig& cfg) {
  const ModelProbability mp =
      model_probability_grad(out_x.f, out_x.sigma, out_y.f, out_y.sigma, cfg.p_clamp);
  return finish_pair(out_x, out_y, mp, fidelity_loss(p, mp.p), fidelity_grad(p, mp.p), t, cfg);
}

double batch_loss(std::span<const BatchEntry> batch, const LossConfig& cfg) {
  if (batch.empty()) throw ValidationError("batch_loss: empty batch");
  double sum = 0.0;
  for (const auto& e : batch) sum += pair_loss(*e.out_x, *e.out_y, e.pair->p, e.pair->t, cfg).loss;
  return sum / static_cast<double>(batch.size());
}

double mse_loss(double f, double mos) { return (f - mos) * (f - mos); }
double mse_grad(double f, double mos) { return 2.0 * (f - mos); }

double cross_entropy_loss(double r, double p_w, double p_clamp) {
  if (!(r >= 0.0 && r <= 1.0)) throw ValidationError("cross_entropy_loss: label outside [0, 1]");
  const double q = std::clamp(p_w, p_clamp, 1.0 - p_clamp);
  return -r * std::log(q) - (1.0 - r) * std::log1p(-q);
}

double cross_entropy_grad(double r, double p_w, double p_clamp) {
  const double q = std::clamp(p_w, p_clamp, 1.0 - p_clamp);
  return -r / q + (1.0 - r) / (1.0 - q);
}

double binary_ce_loss(double p_w, int r, double p_clamp) {
  if (r != 0 && r != 1) throw ValidationError("binary_ce_loss: label must be 0 or 1");
  return cross_entropy_loss(static_cast<double>(r), p_w, p_clamp);
}

double continuous_ce_loss(double p_w, double p, double p_clamp) {
  return cross_entropy_loss(p, p_w, p_clamp);
}

PairLoss pair_ce_loss(const ModelOutput& out_x, const ModelOutput& out_y, double target, int t,
                      const LossConfig& cfg) {
  const ModelProbability mp =
      model_probability_grad(out_x.f, out_x.sigma, out_y.f, out_y.sigma, cfg.p_clamp);
  return finish_pair(out_x, out_y, mp, cross_entropy_loss(target, mp.p, cfg.p_clamp),
                     cross_entropy_grad(target, mp.p, cfg.p_clamp), t, cfg);
}

Database rescale_mos(Database db, double lo, double hi) {
  if (!(hi > lo)) throw ValidationError("rescale_mos: need hi > lo");
  if (db.items.empty()) throw ValidationError("rescale_mos: empty database");
  double mn = db.items.front().mu;
  double mx = mn;
  for (const auto& it : db.items) {
    mn = std::min(mn, it.mu);
    mx = std::max(mx, it.mu);
  }
  if (!(mx > mn)) throw ValidationError("rescale_mos: database '" + db.name + "' has constant mu");
  const double scale = (hi - lo) / (mx - mn);
  for (auto& it : db.items) {
    it.mu = lo + (it.mu - mn) * scale;
    it.sigma *= scale;
  }
  return db;
}

}  // namespace pairq
