#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "pairq/errors.hpp"
#include "pairq/io.hpp"
#include "pairq/metrics.hpp"
#include "pairq/synth.hpp"

using namespace pairq;

namespace {

// Least squares y ~ [1, x] via normal equations and Gaussian elimination.
std::vector<double> ols(const std::vector<std::vector<double>>& x, const std::vector<double>& y) {
  const std::size_t k = x[0].size() + 1;
  std::vector<std::vector<double>> a(k, std::vector<double>(k + 1, 0.0));
  for (std::size_t r = 0; r < x.size(); ++r) {
    std::vector<double> row{1.0};
    row.insert(row.end(), x[r].begin(), x[r].end());
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) a[i][j] += row[i] * row[j];
      a[i][k] += row[i] * y[r];
    }
  }
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < k; ++r) {
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    }
    std::swap(a[c], a[piv]);
    for (std::size_t r = 0; r < k; ++r) {
      if (r == c) continue;
      const double f = a[r][c] / a[c][c];
      for (std::size_t j = c; j <= k; ++j) a[r][j] -= f * a[c][j];
    }
  }
  std::vector<double> beta(k);
  for (std::size_t i = 0; i < k; ++i) beta[i] = a[i][k] / a[i][i];
  return beta;
}

SynthDbConfig plain(std::size_t n, double noise) {
  SynthDbConfig c;
  c.name = "p";
  c.n_items = n;
  c.n_groups = n / 2;
  c.noise = noise;
  c.seed = 5;
  return c;
}

}  // namespace

TEST(Synth, ArchSigma) {
  EXPECT_EQ(arch_sigma(-2, -2, 2, 0.3, 0.05, 1), 0.05);
  EXPECT_NEAR(arch_sigma(2, -2, 2, 0.3, 0.05, 1), 0.05, 1e-15);
  EXPECT_NEAR(arch_sigma(0, -2, 2, 0.3, 0.05, 1), 0.35, 1e-15);
  EXPECT_NEAR(arch_sigma(-1, -2, 2, 0.3, 0.05, 1), 0.05 + 0.75 * 0.3, 1e-15);
  for (int i = 0; i <= 100; ++i) {
    const double q = -1.0 + 3.0 * i / 100.0;
    EXPECT_NEAR(arch_sigma(q, -1, 2, 0.4, 0.1, 1.5), arch_sigma(1.0 - q, -1, 2, 0.4, 0.1, 1.5), 1e-12);
  }
  EXPECT_THROW(arch_sigma(2.5, -2, 2, 0.3, 0.05, 1), ValidationError);
}

TEST(Synth, IdentityMapAndNoiselessFeatures) {
  auto c = plain(200, 0.0);
  const auto s = gen_database(c);
  ASSERT_EQ(s.db.items.size(), 200u);
  std::vector<double> mu, q, f0;
  for (const auto& it : s.db.items) {
    EXPECT_EQ(it.mu, s.latent.at(it.id));
    EXPECT_EQ(it.features.values, latent_embedding(s.latent.at(it.id), c.dim));
    EXPECT_NEAR(it.sigma, arch_sigma(it.mu, c.q_lo, c.q_hi, c.sigma_max, c.sigma_0, c.gamma), 1e-15);
    mu.push_back(it.mu);
    q.push_back(s.latent.at(it.id));
    f0.push_back(it.features.values[0]);
  }
  EXPECT_EQ(srcc(f0, q), 1.0);
  EXPECT_EQ(latent_embedding(0.3, 4), latent_embedding(0.3, 4));
  EXPECT_EQ(latent_embedding(0.3, 10)[9], 0.0);
}

TEST(Synth, DeterministicAndRoundTrips) {
  auto c = plain(50, 0.3);
  c.feature_kind = FeatureKind::map;
  c.dim = 3;
  c.map_rows = 4;
  const auto a = gen_database(c);
  const auto b = gen_database(c);
  const auto dir = pairq::test::scratch_dir("synth_rt");
  save_database(a.db, dir / "a.jsonl");
  save_database(b.db, dir / "b.jsonl");
  EXPECT_EQ(pairq::test::slurp(dir / "a.jsonl"), pairq::test::slurp(dir / "b.jsonl"));
  const auto back = load_database(dir / "a.jsonl");
  save_database(back, dir / "c.jsonl");
  EXPECT_EQ(pairq::test::slurp(dir / "a.jsonl"), pairq::test::slurp(dir / "c.jsonl"));
  EXPECT_EQ(back.items[0].features.kind, FeatureKind::map);
}

TEST(Synth, BenchmarkStructure) {
  const auto bench = gen_benchmark(2024);
  ASSERT_EQ(bench.dbs.size(), 3u);
  std::size_t total = 0;
  for (const auto& s : bench.dbs) {
    total += s.db.items.size();
    std::set<std::string> groups;
    std::vector<double> mu, q;
    for (const auto& it : s.db.items) {
      groups.insert(it.content);
      mu.push_back(it.mu);
      q.push_back(s.latent.at(it.id));
    }
    EXPECT_EQ(groups.size(), 200u);
    EXPECT_EQ(srcc(mu, q), s.db.polarity == Polarity::MOS ? 1.0 : -1.0) << s.db.name;
  }
  EXPECT_EQ(total, 1800u);
  EXPECT_EQ(bench.dbs[0].db.polarity, Polarity::DMOS);
}

// Equal rescaled MOS across databases does not mean equal latent quality.
TEST(Synth, RescaledMosIsNotLatentQuality) {
  const auto bench = gen_benchmark(2024);
  auto normalized = [](const Database& raw) {
    const Database db = normalize_polarity(raw);
    double lo = db.items[0].mu, hi = lo;
    for (const auto& it : db.items) {
      lo = std::min(lo, it.mu);
      hi = std::max(hi, it.mu);
    }
    std::vector<std::pair<std::string, double>> v;
    for (const auto& it : db.items) v.emplace_back(it.id, (it.mu - lo) / (hi - lo));
    return v;
  };
  const auto lab = normalized(bench.dbs[0].db);
  const auto wild = normalized(bench.dbs[1].db);
  bool exhibited = false;
  for (const auto& [ia, na] : lab) {
    for (const auto& [ib, nb] : wild) {
      if (std::abs(na - nb) < 1e-3 &&
          std::abs(bench.dbs[0].latent.at(ia) - bench.dbs[1].latent.at(ib)) > 0.2) {
        exhibited = true;
      }
    }
  }
  EXPECT_TRUE(exhibited);
}

TEST(Synth, ManifestHashStableAndDirectoryCreated) {
  const auto root = pairq::test::scratch_dir("synth_manifest");
  BenchmarkOptions o;
  o.n_items = 60;
  o.n_groups = 20;
  const auto f1 = write_benchmark(gen_benchmark(9, o), root / "x" / "y");
  const auto f2 = write_benchmark(gen_benchmark(9, o), root / "z");
  EXPECT_TRUE(std::filesystem::exists(root / "x" / "y" / "manifest.json"));
  EXPECT_EQ(f1.manifest_hash, f2.manifest_hash);
  EXPECT_EQ(pairq::test::slurp(f1.manifest), pairq::test::slurp(f2.manifest));
  EXPECT_EQ(f1.databases.size(), 3u);
  EXPECT_NE(write_benchmark(gen_benchmark(10, o), root / "w").manifest_hash, f1.manifest_hash);
}

TEST(Synth, ConfigValidation) {
  auto c = plain(10, 0.1);
  c.a = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = plain(10, -0.1);
  EXPECT_THROW(c.validate(), ValidationError);
  c = plain(10, 0.1);
  EXPECT_EQ(synth_config_to_json(synth_config_from_json(synth_config_to_json(c))), synth_config_to_json(c));
}

// The default noise level is set so that a least-squares linear probe on the
// features reaches a held-out SRCC near 0.95 against mu.
TEST(Synth, DefaultNoiseCalibration) {
  const auto bench = gen_benchmark(2024);
  std::vector<double> per_db;
  for (const auto& s : bench.dbs) {
    const Database db = normalize_polarity(s.db);
    const std::size_t n_train = db.items.size() * 4 / 5;
    std::vector<std::vector<double>> x;
    std::vector<double> y;
    for (std::size_t i = 0; i < n_train; ++i) {
      x.push_back(db.items[i].features.values);
      y.push_back(db.items[i].mu);
    }
    const auto beta = ols(x, y);
    std::vector<double> pred, truth;
    for (std::size_t i = n_train; i < db.items.size(); ++i) {
      double v = beta[0];
      for (std::size_t k = 0; k < db.items[i].features.values.size(); ++k) v += beta[k + 1] * db.items[i].features.values[k];
      pred.push_back(v);
      truth.push_back(db.items[i].mu);
    }
    per_db.push_back(oracle::spearman(pred, truth));
  }
  std::sort(per_db.begin(), per_db.end());
  EXPECT_GT(per_db[1], 0.92);
  EXPECT_LT(per_db[1], 0.97);
}
