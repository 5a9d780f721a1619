#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "pairq/types.hpp"

namespace pairq::test {

inline AnnotatedItem vec_item(std::string id, std::string db, std::string content, double mu,
                              double sigma, std::vector<double> f) {
  AnnotatedItem it;
  it.id = std::move(id);
  it.db = std::move(db);
  it.content = std::move(content);
  it.mu = mu;
  it.sigma = sigma;
  it.features = Features::make_vector(std::move(f));
  return it;
}

// n items in n / per_group content groups, features [mu, noise...].
inline Database toy_db(const std::string& name, std::size_t n, std::size_t per_group,
                       std::uint64_t seed, std::size_t dim = 3) {
  Database db;
  db.name = name;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double mu = g(rng);
    std::vector<double> f(dim);
    f[0] = mu;
    for (std::size_t k = 1; k < dim; ++k) f[k] = g(rng);
    db.items.push_back(vec_item(name + "_" + std::to_string(i), name,
                                name + "_c" + std::to_string(i / per_group), mu,
                                0.1 + 0.05 * std::abs(g(rng)), std::move(f)));
  }
  return db;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("pairq_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace pairq::test
