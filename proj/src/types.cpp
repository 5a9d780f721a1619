#include "pairq/types.hpp"

#include <cmath>
#include <unordered_set>

#include "pairq/errors.hpp"

namespace pairq {

std::string_view to_string(Scenario s) {
  return s == Scenario::synthetic ? "synthetic" : "realistic";
}

std::string_view to_string(Polarity p) { return p == Polarity::MOS ? "MOS" : "DMOS"; }

Scenario parse_scenario(std::string_view s) {
  if (s == "synthetic") return Scenario::synthetic;
  if (s == "realistic") return Scenario::realistic;
  throw ValidationError("unknown scenario '" + std::string(s) + "'");
}

Polarity parse_polarity(std::string_view s) {
  if (s == "MOS") return Polarity::MOS;
  if (s == "DMOS") return Polarity::DMOS;
  throw ValidationError("unknown polarity '" + std::string(s) + "'");
}

Features Features::make_vector(std::vector<double> v) {
  Features f;
  f.kind = FeatureKind::vector;
  f.rows = 1;
  f.cols = v.size();
  f.values = std::move(v);
  return f;
}

Features Features::make_map(std::size_t s, std::size_t c, std::vector<double> v) {
  Features f;
  f.kind = FeatureKind::map;
  f.rows = s;
  f.cols = c;
  f.values = std::move(v);
  return f;
}

const AnnotatedItem* Database::find(std::string_view id) const {
  for (const auto& it : items) {
    if (it.id == id) return &it;
  }
  return nullptr;
}

void validate_item(const AnnotatedItem& item) {
  if (item.id.empty()) throw ValidationError("item has empty id");
  if (!std::isfinite(item.mu)) throw ValidationError("item '" + item.id + "': mu is not finite");
  if (!std::isfinite(item.sigma) || item.sigma < 0.0) {
    throw ValidationError("item '" + item.id + "': sigma must be finite and >= 0");
  }
  const auto& f = item.features;
  if (f.rows == 0 || f.cols == 0 || f.rows * f.cols != f.values.size()) {
    throw ValidationError("item '" + item.id + "': feature shape does not match value count");
  }
  if (f.kind == FeatureKind::vector && f.rows != 1) {
    throw ValidationError("item '" + item.id + "': feature vector must have a single row");
  }
  for (double v : f.values) {
    if (!std::isfinite(v)) throw ValidationError("item '" + item.id + "': non-finite feature");
  }
}

void validate_database(const Database& db) {
  if (db.items.empty()) throw ValidationError("database '" + db.name + "' is empty");
  std::unordered_set<std::string> seen;
  const Features& ref = db.items.front().features;
  for (const auto& it : db.items) {
    validate_item(it);
    if (!seen.insert(it.id).second) {
      throw ValidationError("database '" + db.name + "': duplicate id '" + it.id + "'");
    }
    if (!it.features.same_shape(ref)) {
      throw ValidationError("database '" + db.name + "': item '" + it.id +
                            "' has an inconsistent feature shape");
    }
  }
}

}  // namespace pairq
