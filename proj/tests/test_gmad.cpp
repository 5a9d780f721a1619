#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "pairq/errors.hpp"
#include "pairq/gmad.hpp"

using namespace pairq;

namespace {

std::vector<oracle::GmadHit> hits(const GmadResult& r) {
  std::vector<oracle::GmadHit> v;
  for (const auto& p : r.pairs) v.push_back({p.level, p.x_id, p.y_id});
  return v;
}

}  // namespace

TEST(Gmad, HandScoredSixItems) {
  // Defender bins (2 levels): {a, b, c} low, {d, e, f} high.
  const ScoreMap defender{{"a", 1.0}, {"b", 1.1}, {"c", 1.5}, {"d", 5.0}, {"e", 5.05}, {"f", 5.2}};
  const ScoreMap attacker{{"a", 0.2}, {"b", 0.9}, {"c", 3.0}, {"d", 7.0}, {"e", 2.0}, {"f", 6.0}};
  const std::vector<std::string> corpus{"a", "b", "c", "d", "e", "f"};
  GmadConfig cfg;
  cfg.level_tolerance = 0.2;
  const auto r = gmad_search(attacker, defender, corpus, cfg);
  ASSERT_EQ(r.pairs.size(), 2u);
  // Low bin: only (a, b) is within 0.2; high bin: (d, e) gap 5 beats (f, e) gap 4.
  EXPECT_EQ(r.pairs[0], (GmadPair{0, "b", "a", 1.1, 1.0, 0.9, 0.2}));
  EXPECT_EQ(r.pairs[1].x_id, "d");
  EXPECT_EQ(r.pairs[1].y_id, "e");
  EXPECT_EQ(hits(r), oracle::gmad(attacker, defender, corpus, 2, 0.2));
  EXPECT_TRUE(r.warnings.empty());
}

TEST(Gmad, ConstantDefenderGivesGlobalExtremes) {
  const ScoreMap defender{{"a", 2}, {"b", 2}, {"c", 2}, {"d", 2}};
  const ScoreMap attacker{{"a", 0.5}, {"b", -3}, {"c", 9}, {"d", 1}};
  GmadConfig cfg;
  cfg.n_levels = 1;
  const auto r = gmad_search(attacker, defender, {"a", "b", "c", "d"}, cfg);
  ASSERT_EQ(r.pairs.size(), 1u);
  EXPECT_EQ(r.pairs[0].x_id, "c");
  EXPECT_EQ(r.pairs[0].y_id, "b");
}

TEST(Gmad, AttackerEqualsDefender) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  ScoreMap s;
  std::vector<std::string> corpus;
  for (int i = 0; i < 40; ++i) {
    corpus.push_back("i" + std::to_string(i));
    s[corpus.back()] = g(rng);
  }
  GmadConfig cfg;
  cfg.n_levels = 3;
  const auto r = gmad_search(s, s, corpus, cfg);
  for (const auto& p : r.pairs) EXPECT_LE(p.attacker_gap(), r.tolerance);
}

TEST(Gmad, EmptyBinsWarn) {
  const ScoreMap s{{"a", 1}, {"b", 2}, {"c", 3}};
  GmadConfig cfg;
  cfg.n_levels = 3;  // one item per bin
  const auto r = gmad_search(s, s, {"a", "b", "c"}, cfg);
  EXPECT_TRUE(r.pairs.empty());
  EXPECT_EQ(r.warnings.size(), 3u);
  cfg.n_levels = 1;
  cfg.level_tolerance = 0.5;
  const auto far = gmad_search(s, s, {"a", "b", "c"}, cfg);
  EXPECT_TRUE(far.pairs.empty());
  ASSERT_EQ(far.warnings.size(), 1u);
  EXPECT_NE(far.warnings[0].find("tolerance"), std::string::npos);
  EXPECT_THROW(gmad_search(s, s, {"a"}, cfg), ValidationError);
  EXPECT_THROW(gmad_search(s, s, {"a", "zz"}, cfg), ValidationError);
}

// Randomized equivalence with the exhaustive oracle, including rounded
// scores so that ties in both defender and attacker occur.
TEST(Gmad, MatchesBruteForceOnRandomCorpora) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng() % 49;
    const std::size_t levels = 1 + rng() % 4;
    const bool coarse = trial % 2 == 0;
    std::uniform_real_distribution<double> u(0, 10);
    ScoreMap att, def;
    std::vector<std::string> corpus;
    for (std::size_t i = 0; i < n; ++i) {
      const std::string id = "x" + std::to_string(rng() % 1000) + "_" + std::to_string(i);
      corpus.push_back(id);
      att[id] = coarse ? std::round(u(rng)) : u(rng);
      def[id] = coarse ? std::round(u(rng)) : u(rng);
    }
    const double tol = coarse ? 1.0 : 0.5 + u(rng) / 5;
    GmadConfig cfg;
    cfg.n_levels = levels;
    cfg.level_tolerance = tol;
    const auto r = gmad_search(att, def, corpus, cfg);
    EXPECT_EQ(hits(r), oracle::gmad(att, def, corpus, levels, tol)) << "trial " << trial;
    for (const auto& p : r.pairs) {
      EXPECT_LE(std::abs(p.defender_x - p.defender_y), tol);
      EXPECT_GE(p.attacker_x, p.attacker_y);
    }
    // Role swap: the swapped run constrains on the former attacker.
    const auto swapped = gmad_search(def, att, corpus, cfg);
    for (const auto& p : swapped.pairs) EXPECT_LE(std::abs(att.at(p.x_id) - att.at(p.y_id)), tol);
  }
}

TEST(Gmad, DefaultToleranceAndCsv) {
  const ScoreMap d{{"a", 0}, {"b", 50}, {"c", 100}};
  EXPECT_EQ(default_gmad_tolerance(d, {"a", "b", "c"}), 1.0);
  const auto dir = pairq::test::scratch_dir("gmad_csv");
  GmadResult r;
  r.tolerance = 1;
  r.pairs = {{0, "a", "b", 0, 50, 3, 1}};
  write_gmad_csv({{"A_attacks_B", r}}, dir / "g.csv");
  EXPECT_EQ(pairq::test::slurp(dir / "g.csv"),
            "direction,level,x_id,y_id,defender_x,defender_y,attacker_x,attacker_y,tolerance\n"
            "A_attacks_B,0,a,b,0,50,3,1,1\n");
}
