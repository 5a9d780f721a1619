#include "pairq/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "pairq/errors.hpp"
#include "pairq/io.hpp"
#include "pairq/seeding.hpp"

namespace pairq {

std::string_view to_string(Objective o) {
  switch (o) {
    case Objective::fidelity: return "fidelity";
    case Objective::continuous_ce: return "continuous_ce";
    case Objective::binary_ce: return "binary_ce";
  }
  return "?";
}

Objective parse_objective(std::string_view s) {
  if (s == "fidelity") return Objective::fidelity;
  if (s == "continuous_ce") return Objective::continuous_ce;
  if (s == "binary_ce") return Objective::binary_ce;
  throw ValidationError("unknown objective '" + std::string(s) + "'");
}

void TrainConfig::validate() const {
  if (warmup_epochs > epochs) throw ValidationError("train.warmup_epochs must be <= epochs");
  if (batch_size_warmup == 0 || batch_size_main == 0) {
    throw ValidationError("train batch sizes must be >= 1");
  }
  if (!(lr0 > 0.0)) throw ValidationError("train.lr0 must be > 0");
  if (!(decay_factor > 1.0)) throw ValidationError("train.decay_factor must be > 1");
  if (decay_every == 0) throw ValidationError("train.decay_every must be >= 1");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ValidationError("adam betas must lie in [0, 1)");
  }
  if (!(adam.eps > 0.0)) throw ValidationError("adam eps must be > 0");
  if (!(clip_norm >= 0.0)) throw ValidationError("train.clip_norm must be >= 0");
  loss.validate();
}

double TrainConfig::learning_rate(std::size_t epoch) const {
  const auto drops = static_cast<double>(epoch / decay_every);
  return lr0 * std::pow(decay_factor, -drops);
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
  nlohmann::json j;
  j["epochs"] = c.epochs;
  j["warmup_epochs"] = c.warmup_epochs;
  j["batch_size_warmup"] = c.batch_size_warmup;
  j["batch_size_main"] = c.batch_size_main;
  j["lr0"] = c.lr0;
  j["decay_factor"] = c.decay_factor;
  j["decay_every"] = c.decay_every;
  j["objective"] = std::string(to_string(c.objective));
  j["seed"] = c.seed;
  j["adam_betas"] = {c.adam.beta1, c.adam.beta2};
  j["adam_eps"] = c.adam.eps;
  j["clip_norm"] = c.clip_norm;
  j["loss"] = {{"xi", c.loss.xi}, {"lambda", c.loss.lambda}, {"p_clamp", c.loss.p_clamp}};
  return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.epochs = j.value("epochs", c.epochs);
    c.warmup_epochs = j.value("warmup_epochs", c.warmup_epochs);
    c.batch_size_warmup = j.value("batch_size_warmup", c.batch_size_warmup);
    c.batch_size_main = j.value("batch_size_main", c.batch_size_main);
    c.lr0 = j.value("lr0", c.lr0);
    c.decay_factor = j.value("decay_factor", c.decay_factor);
    c.decay_every = j.value("decay_every", c.decay_every);
    if (j.contains("objective")) c.objective = parse_objective(j.at("objective").get<std::string>());
    c.seed = j.value("seed", c.seed);
    if (j.contains("adam_betas")) {
      const auto b = j.at("adam_betas").get<std::vector<double>>();
      if (b.size() != 2) throw ValidationError("adam_betas needs two values");
      c.adam.beta1 = b[0];
      c.adam.beta2 = b[1];
    }
    c.adam.eps = j.value("adam_eps", c.adam.eps);
    c.clip_norm = j.value("clip_norm", c.clip_norm);
    if (j.contains("loss")) {
      const auto& l = j.at("loss");
      c.loss.xi = l.value("xi", c.loss.xi);
      c.loss.lambda = l.value("lambda", c.loss.lambda);
      c.loss.p_clamp = l.value("p_clamp", c.loss.p_clamp);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad training config: ") + e.what());
  }
  c.validate();
  return c;
}

ItemIndex index_items(const std::vector<Database>& dbs) {
  ItemIndex idx;
  for (const auto& db : dbs) {
    for (const auto& it : db.items) {
      if (!idx.emplace(it.id, &it).second) {
        throw ValidationError("item id '" + it.id + "' occurs in more than one database");
      }
    }
  }
  return idx;
}

void write_epoch_log_csv(const TrainReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << "epoch,lr,mean_loss\n";
  for (const auto& e : report.epochs) {
    out << e.epoch << ',' << format_double(e.lr) << ',' << format_double(e.mean_loss) << '\n';
  }
}

PairLoss objective_pair_loss(const ModelOutput& out_x, const ModelOutput& out_y,
                             const PairSample& pair, const TrainConfig& cfg) {
  switch (cfg.objective) {
    case Objective::fidelity:
      return pair_loss(out_x, out_y, pair.p, pair.t, cfg.loss);
    case Objective::continuous_ce:
      return pair_ce_loss(out_x, out_y, pair.p, pair.t, cfg.loss);
    case Objective::binary_ce:
      // p >= 0.5 exactly when mu_x >= mu_y, so this is the binary MOS label.
      return pair_ce_loss(out_x, out_y, pair.p >= 0.5 ? 1.0 : 0.0, pair.t, cfg.loss);
  }
  throw ValidationError("unknown objective");
}

namespace {

const AnnotatedItem& lookup(const ItemIndex& items, const std::string& id) {
  const auto it = items.find(id);
  if (it == items.end()) throw ValidationError("training pair references unknown item '" + id + "'");
  return *it->second;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void mask_to_head(const ScorerParams& w, std::vector<double>& grad) {
  const auto [lo, hi] = w.head_range();
  std::fill(grad.begin(), grad.begin() + static_cast<long>(lo), 0.0);
  std::fill(grad.begin() + static_cast<long>(hi), grad.end(), 0.0);
}

void clip(std::vector<double>& grad, double max_norm) {
  if (max_norm <= 0.0) return;
  double sq = 0.0;
  for (double g : grad) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (double& g : grad) g *= s;
  }
}

std::set<std::string> training_ids(const TrainingSet& ts) {
  std::set<std::string> ids;
  for (const auto& p : ts.pairs) {
    ids.insert(p.x_id);
    ids.insert(p.y_id);
  }
  return ids;
}

// Shared epoch/batch driver. `step_batch` fills the gradient for the batch
// indices and returns the batch mean loss.
// With `population` > 0 each epoch draws n_samples indices from
// [0, population) with replacement; otherwise it shuffles [0, n_samples).
template <typename StepFn>
std::vector<EpochLog> run_epochs(ScorerParams& w, std::size_t n_samples, std::size_t population,
                                 const TrainConfig& cfg, std::mt19937_64& rng, StepFn&& step_batch) {
  std::vector<EpochLog> logs;
  AdamState state(w.size());
  std::vector<double> grad(w.size());
  std::vector<std::size_t> order(n_samples);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const bool warm = epoch < cfg.warmup_epochs;
    if (epoch == cfg.warmup_epochs && epoch > 0) state.reset();
    const std::size_t bs = warm ? cfg.batch_size_warmup : cfg.batch_size_main;
    const double lr = cfg.learning_rate(epoch);

    if (population > 0) {
      std::uniform_int_distribution<std::size_t> pick(0, population - 1);
      for (auto& o : order) o = pick(rng);
    } else {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), rng);
    }

    double epoch_sum = 0.0;
    std::size_t batch_no = 0;
    for (std::size_t start = 0; start < n_samples; start += bs, ++batch_no) {
      const std::size_t end = std::min(n_samples, start + bs);
      std::fill(grad.begin(), grad.end(), 0.0);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      const std::string where = "epoch " + std::to_string(epoch) + ", batch " +
                                std::to_string(batch_no) + " (samples " + std::to_string(start) +
                                ".." + std::to_string(end - 1) + ")";
      double batch_mean = 0.0;
      try {
        batch_mean = step_batch(w, idx, grad);
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " in " + where);
      }
      if (!std::isfinite(batch_mean) || !all_finite(grad)) {
        throw NumericError("non-finite loss or gradient in " + where);
      }
      epoch_sum += batch_mean * static_cast<double>(idx.size());
      if (warm) mask_to_head(w, grad);
      clip(grad, cfg.clip_norm);
      adam_step(w.values, grad, state, lr, cfg.adam);
    }
    if (!all_finite(w.values)) {
      throw NumericError("non-finite parameters after epoch " + std::to_string(epoch));
    }
    logs.push_back({epoch, lr, epoch_sum / static_cast<double>(n_samples)});
  }
  return logs;
}

}  // namespace

double objective_and_gradient(const ScorerParams& w, const std::vector<PairSample>& pairs,
                              const ItemIndex& items, const TrainConfig& cfg,
                              std::vector<double>* grad) {
  if (pairs.empty()) throw ValidationError("objective over an empty pair list");
  if (grad != nullptr) grad->assign(w.size(), 0.0);
  double sum = 0.0;
  for (const auto& p : pairs) {
    const ModelOutput ox = forward(w, lookup(items, p.x_id).features);
    const ModelOutput oy = forward(w, lookup(items, p.y_id).features);
    const PairLoss pl = objective_pair_loss(ox, oy, p, cfg);
    sum += pl.loss;
    if (grad != nullptr) {
      backward(w, ox, pl.grad_x, *grad);
      backward(w, oy, pl.grad_y, *grad);
    }
  }
  const double n = static_cast<double>(pairs.size());
  if (grad != nullptr) {
    for (double& g : *grad) g /= n;
  }
  return sum / n;
}

TrainReport train_from(const TrainingSet& train_set, const ItemIndex& items, ScorerParams init,
                       const TrainConfig& cfg) {
  cfg.validate();
  for (const auto& p : train_set.pairs) {
    const auto& x = lookup(items, p.x_id);
    const auto& y = lookup(items, p.y_id);
    if (!init.arch.accepts(x.features) || !init.arch.accepts(y.features)) {
      throw ValidationError("item features do not match the architecture (pair " + p.x_id + ", " +
                            p.y_id + ")");
    }
  }
  if (cfg.epochs > 0 && train_set.pairs.empty()) {
    throw ValidationError("cannot train on an empty pair set");
  }

  const std::uint64_t shuffle_seed = derive_seed(cfg.seed, "shuffle");
  std::mt19937_64 rng(shuffle_seed);
  const auto& pairs = train_set.pairs;

  TrainReport report;
  report.epochs = run_epochs(
      init, pairs.size(), 0, cfg, rng,
      [&](const ScorerParams& w, std::span<const std::size_t> idx, std::vector<double>& grad) {
        double sum = 0.0;
        for (std::size_t k : idx) {
          const PairSample& p = pairs[k];
          const ModelOutput ox = forward(w, items.at(p.x_id)->features);
          const ModelOutput oy = forward(w, items.at(p.y_id)->features);
          const PairLoss pl = objective_pair_loss(ox, oy, p, cfg);
          sum += pl.loss;
          backward(w, ox, pl.grad_x, grad);
          backward(w, oy, pl.grad_y, grad);
        }
        const double n = static_cast<double>(idx.size());
        for (double& g : grad) g /= n;
        return sum / n;
      });

  report.checkpoint.params = std::move(init);
  auto& meta = report.checkpoint.meta;
  meta["train_config"] = train_config_to_json(cfg);
  meta["seeds"] = {{"train", cfg.seed}, {"shuffle", shuffle_seed}};
  nlohmann::json prov = nlohmann::json::array();
  for (const auto& pv : train_set.provenance) {
    prov.push_back({{"db", pv.db}, {"pairs", pv.count}, {"seed", pv.seed}});
  }
  meta["pair_provenance"] = prov;
  const auto ids = training_ids(train_set);
  meta["train_ids"] = std::vector<std::string>(ids.begin(), ids.end());
  return report;
}

TrainReport train(const TrainingSet& train_set, const ItemIndex& items, const Architecture& arch,
                  const TrainConfig& cfg) {
  const std::uint64_t init_seed = derive_seed(cfg.seed, "init");
  TrainReport r = train_from(train_set, items, init_params(arch, init_seed), cfg);
  r.checkpoint.meta["seeds"]["init"] = init_seed;
  return r;
}

TrainReport train_regression(const std::vector<RegressionSample>& samples,
                             std::size_t samples_per_epoch, const Architecture& arch,
                             const TrainConfig& cfg) {
  cfg.validate();
  if (samples.empty()) throw ValidationError("train_regression: no samples");
  if (samples_per_epoch == 0) throw ValidationError("train_regression: samples_per_epoch must be >= 1");
  for (const auto& s : samples) {
    if (s.item == nullptr || !arch.accepts(s.item->features)) {
      throw ValidationError("train_regression: sample features do not match the architecture");
    }
  }

  double mean = 0.0;
  for (const auto& s : samples) mean += s.target;
  mean /= static_cast<double>(samples.size());
  double var = 0.0;
  for (const auto& s : samples) var += (s.target - mean) * (s.target - mean);
  var /= static_cast<double>(samples.size());
  const double scale = var > 0.0 ? std::sqrt(var) : 1.0;

  const std::uint64_t init_seed = derive_seed(cfg.seed, "init");
  const std::uint64_t draw_seed = derive_seed(cfg.seed, "draw");
  ScorerParams w = init_params(arch, init_seed);
  std::mt19937_64 rng(draw_seed);

  TrainReport report;
  report.epochs = run_epochs(
      w, samples_per_epoch, samples.size(), cfg, rng,
      [&](const ScorerParams& params, std::span<const std::size_t> idx, std::vector<double>& grad) {
        double sum = 0.0;
        for (std::size_t k : idx) {
          const RegressionSample& s = samples[k];
          const double target = (s.target - mean) / scale;
          const ModelOutput o = forward(params, s.item->features);
          sum += mse_loss(o.f, target);
          backward(params, o, {mse_grad(o.f, target), 0.0}, grad);
        }
        const double n = static_cast<double>(idx.size());
        for (double& g : grad) g /= n;
        return sum / n;
      });

  // Fold f_native = mean + scale * f into the quality row of the head.
  const LayerShape& head = w.layers.back();
  for (std::size_t i = 0; i < head.in; ++i) w.values[head.weight_offset + i] *= scale;
  w.values[head.bias_offset] = w.values[head.bias_offset] * scale + mean;

  report.checkpoint.params = std::move(w);
  auto& meta = report.checkpoint.meta;
  meta["train_config"] = train_config_to_json(cfg);
  meta["objective"] = "mse";
  meta["seeds"] = {{"train", cfg.seed}, {"init", init_seed}, {"draw", draw_seed}};
  meta["target_standardization"] = {{"mean", mean}, {"scale", scale}};
  std::set<std::string> ids;
  for (const auto& s : samples) ids.insert(s.item->id);
  meta["train_ids"] = std::vector<std::string>(ids.begin(), ids.end());
  return report;
}

GradCheckResult grad_check(const Architecture& arch, std::uint64_t seed, std::size_t n_trials,
                           const GradCheckOptions& opts) {
  GradCheckResult result;
  TrainConfig cfg;
  cfg.objective = opts.objective;
  constexpr std::size_t kItems = 5;
  constexpr std::size_t kPairs = 4;

  for (std::size_t trial = 0; trial < n_trials; ++trial) {
    std::mt19937_64 rng(derive_seed(seed, "gradcheck/" + std::to_string(trial)));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.02, 0.98);

    ScorerParams w = init_params(arch, rng());
    for (const auto& l : w.layers) {
      for (std::size_t o = 0; o < l.out; ++o) w.values[l.bias_offset + o] = 0.2 * gauss(rng);
    }

    Database db;
    db.name = "gradcheck";
    for (std::size_t i = 0; i < kItems; ++i) {
      AnnotatedItem it;
      it.id = "g" + std::to_string(i);
      it.db = db.name;
      if (arch.kind == ArchKind::bilinear_mlp) {
        std::vector<double> v(arch.map_rows * arch.map_cols);
        for (double& x : v) x = 0.5 * gauss(rng);
        it.features = Features::make_map(arch.map_rows, arch.map_cols, std::move(v));
      } else {
        std::vector<double> v(arch.input_dim);
        for (double& x : v) x = gauss(rng);
        it.features = Features::make_vector(std::move(v));
      }
      db.items.push_back(std::move(it));
    }
    const std::vector<Database> dbs{std::move(db)};
    const ItemIndex items = index_items(dbs);
    std::vector<PairSample> pairs;
    std::uniform_int_distribution<std::size_t> pick(0, kItems - 1);
    for (std::size_t k = 0; k < kPairs; ++k) {
      const std::size_t i = pick(rng);
      std::size_t j = pick(rng);
      while (j == i) j = pick(rng);
      pairs.push_back({dbs[0].items[i].id, dbs[0].items[j].id, dbs[0].name, unif(rng), (rng() & 1U) ? 1 : -1});
    }

    std::vector<double> analytic;
    objective_and_gradient(w, pairs, items, cfg, &analytic);
    if (opts.corrupt_analytic) {
      for (std::size_t i = 0; i < analytic.size(); ++i) analytic[i] *= (i % 2 == 0) ? 1.01 : 0.99;
    }

    for (std::size_t i = 0; i < w.size(); ++i) {
      const double saved = w.values[i];
      w.values[i] = saved + opts.step;
      const double up = objective_and_gradient(w, pairs, items, cfg, nullptr);
      w.values[i] = saved - opts.step;
      const double down = objective_and_gradient(w, pairs, items, cfg, nullptr);
      w.values[i] = saved;
      const double numeric = (up - down) / (2.0 * opts.step);
      const double a = analytic[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), kGradCheckFloor});
      result.max_rel_error = std::max(result.max_rel_error, std::abs(a - numeric) / denom);
      ++result.params_checked;
    }
  }
  return result;
}

}  // namespace pairq
