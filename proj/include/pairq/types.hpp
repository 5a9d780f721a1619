#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace pairq {

enum class Scenario { synthetic, realistic };
enum class Polarity { MOS, DMOS };

std::string_view to_string(Scenario s);
std::string_view to_string(Polarity p);
Scenario parse_scenario(std::string_view s);
Polarity parse_polarity(std::string_view s);

enum class FeatureKind { vector, map };

/// Feature payload of one stimulus. A vector is stored as a 1 x d grid so both
/// kinds share the same row-major layout: `rows` is the spatial size s and
/// `cols` the channel count c (or the dimension d for vectors).
struct Features {
  FeatureKind kind = FeatureKind::vector;
  std::size_t rows = 1;
  std::size_t cols = 0;
  std::vector<double> values;

  static Features make_vector(std::vector<double> v);
  static Features make_map(std::size_t s, std::size_t c, std::vector<double> v);

  std::size_t size() const { return values.size(); }
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  bool same_shape(const Features& o) const {
    return kind == o.kind && rows == o.rows && cols == o.cols;
  }
};

struct AnnotatedItem {
  std::string id;
  std::string db;
  std::string content;
  double mu = 0.0;
  double sigma = 0.0;
  Features features;
};

struct Database {
  std::string name;
  Scenario scenario = Scenario::synthetic;
  Polarity polarity = Polarity::MOS;
  std::vector<AnnotatedItem> items;

  const AnnotatedItem* find(std::string_view id) const;
};

struct Split {
  std::set<std::string> train_ids;
  std::set<std::string> test_ids;

  bool operator==(const Split&) const = default;
};

// Throws ValidationError when an item breaks the per-item invariants.
void validate_item(const AnnotatedItem& item);
// Throws ValidationError when the database breaks its invariants.
void validate_database(const Database& db);

}  // namespace pairq
