#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "pairq/errors.hpp"
#include "pairq/metrics.hpp"
#include "pairq/seeding.hpp"
#include "pairq/trainer.hpp"

using namespace pairq;

namespace {

Architecture linear_arch(std::size_t d) {
  Architecture a;
  a.kind = ArchKind::linear;
  a.input_dim = d;
  return a;
}

Architecture mlp_arch(std::size_t d, std::vector<std::size_t> hidden) {
  Architecture a;
  a.kind = ArchKind::mlp;
  a.input_dim = d;
  a.hidden_sizes = std::move(hidden);
  return a;
}

std::set<std::string> ids_of(const Database& db) {
  std::set<std::string> s;
  for (const auto& it : db.items) s.insert(it.id);
  return s;
}

TrainConfig quick_config() {
  TrainConfig c;
  c.epochs = 4;
  c.warmup_epochs = 1;
  c.batch_size_warmup = 16;
  c.batch_size_main = 8;
  c.lr0 = 1e-2;
  c.seed = 3;
  return c;
}

}  // namespace

TEST(Adam, HandEvaluatedFirstStep) {
  std::vector<double> w{0.0};
  AdamState st(1);
  adam_step(w, std::vector<double>{1.0}, st, 0.1);
  EXPECT_NEAR(w[0], -0.1 / (1.0 + 1e-8), 1e-15);
  EXPECT_EQ(st.step, 1u);
}

TEST(Adam, ZeroGradientAndAsymptote) {
  std::vector<double> w{0.3, -2.0};
  AdamState st(2);
  adam_step(w, std::vector<double>{0.0, 0.0}, st, 0.1);
  EXPECT_EQ(w, (std::vector<double>{0.3, -2.0}));

  std::vector<double> v{0.0, 0.0};
  AdamState s2(2);
  for (int k = 0; k < 5000; ++k) {
    const auto before = v;
    adam_step(v, std::vector<double>{3.0, -0.02}, s2, 0.01);
    if (k == 4999) {
      EXPECT_NEAR(v[0] - before[0], -0.01, 1e-6);
      EXPECT_NEAR(v[1] - before[1], 0.01, 1e-6);
    }
  }
  EXPECT_THROW(adam_step(v, std::vector<double>{1.0}, s2, 0.01), ValidationError);
}

TEST(Trainer, LearningRateTable) {
  TrainConfig c;
  const double expect[] = {1e-4, 1e-4, 1e-4, 1e-5, 1e-5, 1e-5, 1e-6, 1e-6, 1e-6, 1e-7, 1e-7, 1e-7};
  for (std::size_t e = 0; e < 12; ++e) EXPECT_NEAR(c.learning_rate(e), expect[e], expect[e] * 1e-12) << e;
}

TEST(Trainer, ConfigValidation) {
  TrainConfig c;
  c.warmup_epochs = 13;
  EXPECT_THROW(c.validate(), ValidationError);
  c = TrainConfig{};
  c.decay_factor = 1.0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = TrainConfig{};
  EXPECT_NO_THROW(c.validate());
  const auto back = train_config_from_json(train_config_to_json(c));
  EXPECT_EQ(train_config_to_json(back), train_config_to_json(c));
}

TEST(Trainer, ZeroEpochsReturnsInit) {
  const std::vector<Database> dbs{pairq::test::toy_db("z", 20, 1, 1)};
  const auto items = index_items(dbs);
  const auto ts = combine({sample_pairs(dbs[0], ids_of(dbs[0]), 40, 1)});
  TrainConfig c = quick_config();
  c.epochs = 0;
  c.warmup_epochs = 0;
  const auto init = init_params(mlp_arch(3, {4}), 5);
  const auto r = train_from(ts, items, init, c);
  EXPECT_EQ(r.checkpoint.params.values, init.values);
  EXPECT_TRUE(r.epochs.empty());
}

TEST(Trainer, DeterministicPerSeed) {
  const std::vector<Database> dbs{pairq::test::toy_db("d", 40, 2, 2)};
  const auto items = index_items(dbs);
  const auto ts = combine({sample_pairs(dbs[0], ids_of(dbs[0]), 200, 2)});
  const auto a = train(ts, items, mlp_arch(3, {6}), quick_config());
  const auto b = train(ts, items, mlp_arch(3, {6}), quick_config());
  EXPECT_EQ(checkpoint_to_string(a.checkpoint), checkpoint_to_string(b.checkpoint));
  TrainConfig other = quick_config();
  other.seed = 4;
  EXPECT_NE(train(ts, items, mlp_arch(3, {6}), other).checkpoint.params.values, a.checkpoint.params.values);
}

TEST(Trainer, WarmupMasksEverythingButTheHead) {
  const std::vector<Database> dbs{pairq::test::toy_db("w", 40, 2, 3)};
  const auto items = index_items(dbs);
  const auto ts = combine({sample_pairs(dbs[0], ids_of(dbs[0]), 300, 3)});
  TrainConfig c = quick_config();
  c.epochs = 3;
  c.warmup_epochs = 3;
  const auto init = init_params(mlp_arch(3, {6, 4}), 11);
  const auto r = train_from(ts, items, init, c);
  const auto [hb, he] = init.head_range();
  bool head_moved = false;
  for (std::size_t i = 0; i < init.size(); ++i) {
    if (i >= hb && i < he) {
      head_moved |= r.checkpoint.params.values[i] != init.values[i];
    } else {
      EXPECT_EQ(r.checkpoint.params.values[i], init.values[i]) << i;
    }
  }
  EXPECT_TRUE(head_moved);

  // One more epoch unfreezes the body.
  c.epochs = 4;
  const auto full = train_from(ts, items, init, c);
  EXPECT_NE(full.checkpoint.params.values[0], init.values[0]);
}

// Separable fixture: quality is the first feature. The 10x drop threshold
// comes from running the optimizer on this seed (about 430x observed).
TEST(Trainer, LinearFixtureLossDropsTenfold) {
  const std::vector<Database> dbs{pairq::test::toy_db("lin", 100, 1, 7)};
  const auto items = index_items(dbs);
  const auto ts = combine({sample_pairs(dbs[0], ids_of(dbs[0]), 1000, 7)});
  TrainConfig c;
  c.epochs = 20;
  c.warmup_epochs = 0;
  c.batch_size_main = 32;
  c.lr0 = 0.05;
  c.decay_every = 10;
  c.seed = 7;
  c.loss.lambda = 0.0;
  const auto arch = linear_arch(3);
  const auto init = init_params(arch, derive_seed(c.seed, "init"));
  const double before = objective_and_gradient(init, ts.pairs, items, c, nullptr);
  const auto r = train(ts, items, arch, c);
  const double after = objective_and_gradient(r.checkpoint.params, ts.pairs, items, c, nullptr);
  EXPECT_LT(after * 10.0, before) << before << " -> " << after;
  for (const auto& e : r.epochs) EXPECT_TRUE(std::isfinite(e.mean_loss));
  ASSERT_EQ(r.epochs.size(), 20u);
  EXPECT_NEAR(r.epochs[10].lr, 0.005, 1e-15);
}

TEST(Trainer, UnknownItemAndNonFiniteAbort) {
  const std::vector<Database> dbs{pairq::test::toy_db("n", 10, 1, 1, 2)};
  const auto items = index_items(dbs);
  TrainingSet bad;
  bad.pairs = {{"n_0", "missing", "n", 0.5, 1}};
  EXPECT_THROW(train(bad, items, linear_arch(2), quick_config()), ValidationError);

  std::vector<Database> huge{pairq::test::toy_db("h", 10, 1, 1, 2)};
  for (auto& it : huge[0].items) it.features.values = {1.5e308, 1.5e308};
  const auto hi = index_items(huge);
  const auto ts = combine({sample_pairs(huge[0], ids_of(huge[0]), 20, 1)});
  auto init = make_params(linear_arch(2));
  std::fill(init.values.begin(), init.values.end(), 1.0);
  try {
    train_from(ts, hi, init, quick_config());
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 0"), std::string::npos) << e.what();
  }
}

TEST(Trainer, RegressionFoldsTargetsBack) {
  const std::vector<Database> dbs{pairq::test::toy_db("r", 80, 1, 9)};
  std::vector<RegressionSample> samples;
  for (const auto& it : dbs[0].items) samples.push_back({&it, 50.0 + 10.0 * it.mu});
  TrainConfig c = quick_config();
  c.epochs = 10;
  c.lr0 = 0.02;
  c.decay_every = 20;
  const auto r = train_regression(samples, 400, linear_arch(3), c);
  std::vector<double> pred, truth;
  for (const auto& s : samples) {
    pred.push_back(forward(r.checkpoint.params, s.item->features).f);
    truth.push_back(s.target);
  }
  EXPECT_GT(srcc(pred, truth), 0.99);
  double mp = 0;
  for (double p : pred) mp += p / pred.size();
  EXPECT_NEAR(mp, 50.0, 2.0);
}

TEST(GradCheck, DefaultArchitecturesWithinTolerance) {
  Architecture bil;
  bil.kind = ArchKind::bilinear_mlp;
  bil.map_rows = 4;
  bil.map_cols = 3;
  bil.hidden_sizes = {6};
  EXPECT_LE(grad_check(linear_arch(6), 7, 20).max_rel_error, 1e-6);
  EXPECT_LE(grad_check(mlp_arch(6, {8, 5}), 7, 20).max_rel_error, 1e-4);
  EXPECT_LE(grad_check(bil, 7, 20).max_rel_error, 1e-4);
  for (Objective o : {Objective::continuous_ce, Objective::binary_ce}) {
    GradCheckOptions opt;
    opt.objective = o;
    EXPECT_LE(grad_check(mlp_arch(6, {8, 5}), 9, 10, opt).max_rel_error, 1e-4) << to_string(o);
  }
  GradCheckOptions broken;
  broken.corrupt_analytic = true;
  EXPECT_GT(grad_check(linear_arch(6), 7, 5, broken).max_rel_error, 1e-4);
  EXPECT_GT(grad_check(linear_arch(6), 7, 5).params_checked, 0u);
}
