#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "pairq/errors.hpp"
#include "pairq/session.hpp"
#include "pairq/synth.hpp"

using namespace pairq;

namespace {

SessionConfig small_config(const std::filesystem::path& root, std::vector<std::uint64_t> seeds) {
  BenchmarkOptions o;
  o.n_items = 90;
  o.n_groups = 30;
  const auto files = write_benchmark(gen_benchmark(2024, o), root / "bench");
  SessionConfig c;
  for (std::size_t i = 0; i < files.databases.size(); ++i) c.databases.push_back({files.databases[i], files.latents[i], 0});
  c.total_pairs = 600;
  c.session_seeds = std::move(seeds);
  c.test_pairs_per_db = 100;
  c.hidden_sizes = {6};
  c.train.epochs = 3;
  c.train.warmup_epochs = 1;
  c.train.lr0 = 1e-2;
  c.variants = all_variants();
  c.output_dir = root / "out";
  return c;
}

}  // namespace

TEST(Session, PairBudget) {
  EXPECT_EQ(pair_budget({600, 600, 600}, {0, 0, 0}, 6000), (std::vector<std::size_t>{2000, 2000, 2000}));
  EXPECT_EQ(pair_budget({1, 1, 1}, {0, 0, 0}, 10), (std::vector<std::size_t>{4, 3, 3}));
  EXPECT_EQ(pair_budget({100, 300}, {0, 50}, 450), (std::vector<std::size_t>{400, 50}));
  EXPECT_EQ(pair_budget({100, 200, 100}, {0, 0, 0}, 1000), (std::vector<std::size_t>{250, 500, 250}));
}

TEST(Session, ConfigParsing) {
  const auto dir = pairq::test::scratch_dir("session_cfg");
  const nlohmann::json j = {
      {"databases", {{{"path", "bench/a.jsonl"}, {"latent", "bench/a.latent.csv"}}, {{"path", "/abs/b.jsonl"}, {"pairs", 30}}}},
      {"session_seeds", {1, 2, 3}},
      {"arch", {{"kind", "linear"}, {"hidden_sizes", nlohmann::json::array()}}},
      {"train", {{"epochs", 5}, {"warmup_epochs", 1}}},
      {"variants", {"fidelity+hinge", "mse"}},
      {"output_dir", "runs"}};
  const auto c = session_config_from_json(j, dir);
  EXPECT_EQ(c.databases[0].path, dir / "bench/a.jsonl");
  EXPECT_EQ(c.databases[0].latent, dir / "bench/a.latent.csv");
  EXPECT_EQ(c.databases[1].path, "/abs/b.jsonl");
  EXPECT_EQ(c.databases[1].pairs, 30u);
  EXPECT_EQ(c.session_seeds, (std::vector<std::uint64_t>{1, 2, 3}));
  EXPECT_EQ(c.arch_kind, ArchKind::linear);
  EXPECT_EQ(c.train.epochs, 5u);
  EXPECT_EQ(c.variants, (std::vector<Variant>{Variant::fidelity_hinge, Variant::mse}));
  EXPECT_EQ(c.output_dir, dir / "runs");
  EXPECT_EQ(session_config_from_json(session_config_to_json(c)).variants, c.variants);

  std::filesystem::create_directories(dir / "bench");
  std::ofstream(dir / "bench/a.jsonl") << "";
  std::ofstream(dir / "bench/a.latent.csv") << "";
  auto dup = j;
  dup["databases"] = {{{"path", "bench/a.jsonl"}, {"latent", "bench/a.latent.csv"}}};
  EXPECT_NO_THROW(session_config_from_json(dup, dir).validate());
  dup["session_seeds"] = {4, 4};
  try {
    session_config_from_json(dup, dir).validate();
    ADD_FAILURE() << "duplicate seeds accepted";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("distinct"), std::string::npos) << e.what();
  }
  auto bad = j;
  bad["variants"] = {"nope"};
  EXPECT_THROW(session_config_from_json(bad, dir), ValidationError);
}

TEST(Session, NoTestItemInTrainingPairs) {
  const auto root = pairq::test::scratch_dir("session_guard");
  const auto cfg = small_config(root, {1, 2});
  const auto loaded = load_session_databases(cfg);
  ASSERT_TRUE(loaded.have_latent);
  for (std::uint64_t seed : {1u, 2u, 77u}) {
    const auto s = prepare_session(cfg, loaded, seed);
    std::size_t n_train = 0;
    for (const auto& per_db : s.train_pairs) {
      n_train += per_db.size();
      for (const auto& p : per_db) {
        EXPECT_TRUE(s.splits.at(p.db).train_ids.count(p.x_id));
        EXPECT_TRUE(s.splits.at(p.db).train_ids.count(p.y_id));
      }
    }
    EXPECT_EQ(n_train, 600u);
    for (const auto& [db, pairs] : s.test_pairs) {
      EXPECT_EQ(pairs.size(), 100u);
      for (const auto& p : pairs) {
        EXPECT_TRUE(s.splits.at(db).test_ids.count(p.x_id));
        EXPECT_FALSE(s.train_ids.count(p.y_id));
      }
    }
    const auto again = prepare_session(cfg, loaded, seed);
    EXPECT_EQ(again.train_pairs, s.train_pairs);
    EXPECT_EQ(again.test_pairs, s.test_pairs);
  }
}

TEST(Session, SingleSessionReportShape) {
  const auto root = pairq::test::scratch_dir("session_one");
  const auto cfg = small_config(root, {5});
  const auto summary = run_sessions(cfg);
  EXPECT_TRUE(summary.failures.empty());
  ASSERT_EQ(summary.reports.size(), 6u);
  for (const auto& [variant, reports] : summary.reports) {
    ASSERT_EQ(reports.size(), 1u) << variant;
    EXPECT_EQ(reports[0].per_db.size(), 3u);
    EXPECT_TRUE(reports[0].has_pooled_latent);
    EXPECT_EQ(summary.aggregates.at(variant).mad.weighted.srcc, 0.0);
  }
  EXPECT_TRUE(std::filesystem::exists(cfg.output_dir / "comparison.csv"));
  EXPECT_TRUE(std::filesystem::exists(cfg.output_dir / "fidelity_hinge" / "session_5" / "report.csv"));
  EXPECT_TRUE(std::filesystem::exists(cfg.output_dir / "inputs" / "session_5" / "train_pairs.csv"));
}

TEST(Session, AggregateIsMedianOfSessionsAndDeterministic) {
  const auto root = pairq::test::scratch_dir("session_many");
  auto cfg = small_config(root, {1, 2, 3, 4});
  cfg.variants = {Variant::fidelity_hinge, Variant::fidelity_only};
  const auto a = run_sessions(cfg);
  ASSERT_TRUE(a.failures.empty());
  for (const auto& [variant, reports] : a.reports) {
    const auto expect = median_across_sessions(reports);
    EXPECT_EQ(report_to_csv(a.aggregates.at(variant).median), report_to_csv(expect.median));
    EXPECT_EQ(report_to_csv(a.aggregates.at(variant).mad), report_to_csv(expect.mad));
  }
  const std::string first = pairq::test::slurp(cfg.output_dir / "comparison.csv");
  const std::string report = pairq::test::slurp(cfg.output_dir / "fidelity_hinge" / "session_3" / "report.csv");
  run_sessions(cfg);
  EXPECT_EQ(pairq::test::slurp(cfg.output_dir / "comparison.csv"), first);
  EXPECT_EQ(pairq::test::slurp(cfg.output_dir / "fidelity_hinge" / "session_3" / "report.csv"), report);

  const auto rows = ttest_table(a, "fidelity+hinge");
  ASSERT_EQ(rows.size(), 4u);  // three databases plus weighted, one comparator
  for (const auto& r : rows) {
    EXPECT_EQ(r.variant_b, "fidelity-only");
    EXPECT_EQ(r.n, 4u);
  }
}

TEST(Session, FailingCellIsRecordedAndOthersRun) {
  const auto root = pairq::test::scratch_dir("session_fail");
  auto cfg = small_config(root, {1});
  cfg.variants = {Variant::fidelity_hinge, Variant::rescale_mse};
  cfg.train.lr0 = 1e300;  // drives the weights to overflow
  const auto s = run_sessions(cfg);
  EXPECT_FALSE(s.failures.empty());
  for (const auto& f : s.failures) EXPECT_TRUE(f.numeric) << f.message;
}
