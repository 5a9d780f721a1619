#include "pairq/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "pairq/errors.hpp"

namespace pairq {

using ojson = nlohmann::ordered_json;

namespace {

[[noreturn]] void fail_at(const std::string& source, std::size_t line, const std::string& msg) {
  throw ValidationError(source + ":" + std::to_string(line) + ": " + msg);
}

std::vector<double> read_numbers(const ojson& arr) {
  if (!arr.is_array()) throw ValidationError("expected a numeric array");
  std::vector<double> out;
  out.reserve(arr.size());
  for (const auto& v : arr) {
    if (!v.is_number()) throw ValidationError("expected a number");
    out.push_back(v.get<double>());
  }
  return out;
}

AnnotatedItem parse_item(const ojson& rec, Polarity& polarity) {
  AnnotatedItem item;
  item.id = rec.at("id").get<std::string>();
  item.db = rec.at("db").get<std::string>();
  item.content = rec.at("content").get<std::string>();
  polarity = parse_polarity(rec.at("polarity").get<std::string>());
  if (!rec.at("mu").is_number() || !rec.at("sigma").is_number()) {
    throw ValidationError("mu and sigma must be numbers");
  }
  item.mu = rec.at("mu").get<double>();
  item.sigma = rec.at("sigma").get<double>();
  const bool has_vec = rec.contains("features");
  const bool has_map = rec.contains("feature_map");
  if (has_vec == has_map) {
    throw ValidationError("record needs exactly one of 'features' or 'feature_map'");
  }
  if (has_vec) {
    item.features = Features::make_vector(read_numbers(rec.at("features")));
  } else {
    const auto& m = rec.at("feature_map");
    const auto s = m.at("s").get<std::size_t>();
    const auto c = m.at("c").get<std::size_t>();
    item.features = Features::make_map(s, c, read_numbers(m.at("values")));
  }
  validate_item(item);
  return item;
}

}  // namespace

Database read_database(std::istream& in, const std::string& source) {
  Database db;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  bool have_polarity = false;
  std::unordered_set<std::string> ids;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    ojson rec;
    try {
      rec = ojson::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail_at(source, lineno, std::string("malformed record: ") + e.what());
    }
    if (!have_header) {
      try {
        if (rec.at("format").get<std::string>() != kDatabaseFormatTag) {
          fail_at(source, lineno, "unsupported format tag");
        }
        db.name = rec.at("database").get<std::string>();
        db.scenario = parse_scenario(rec.at("scenario").get<std::string>());
      } catch (const nlohmann::json::exception& e) {
        fail_at(source, lineno, std::string("malformed header: ") + e.what());
      } catch (const ValidationError& e) {
        fail_at(source, lineno, e.what());
      }
      have_header = true;
      continue;
    }
    AnnotatedItem item;
    Polarity pol{};
    try {
      item = parse_item(rec, pol);
    } catch (const nlohmann::json::exception& e) {
      fail_at(source, lineno, std::string("malformed record: ") + e.what());
    } catch (const ValidationError& e) {
      fail_at(source, lineno, e.what());
    }
    if (item.db != db.name) {
      fail_at(source, lineno, "record db '" + item.db + "' does not match header '" + db.name + "'");
    }
    if (!have_polarity) {
      db.polarity = pol;
      have_polarity = true;
    } else if (pol != db.polarity) {
      fail_at(source, lineno, "mixed polarity within one database");
    }
    if (!ids.insert(item.id).second) {
      fail_at(source, lineno, "duplicate id '" + item.id + "'");
    }
    if (!db.items.empty() && !item.features.same_shape(db.items.front().features)) {
      fail_at(source, lineno, "inconsistent feature dimension for '" + item.id + "'");
    }
    db.items.push_back(std::move(item));
  }
  if (!have_header) throw ValidationError(source + ": missing header line");
  if (db.items.empty()) throw ValidationError(source + ": database has no records");
  return db;
}

Database load_database(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open database file " + path.string());
  return read_database(in, path.string());
}

void write_database(const Database& db, std::ostream& out) {
  validate_database(db);
  ojson header;
  header["format"] = kDatabaseFormatTag;
  header["database"] = db.name;
  header["scenario"] = std::string(to_string(db.scenario));
  out << header.dump() << '\n';
  for (const auto& it : db.items) {
    ojson rec;
    rec["id"] = it.id;
    rec["db"] = it.db;
    rec["content"] = it.content;
    rec["polarity"] = std::string(to_string(db.polarity));
    rec["mu"] = it.mu;
    rec["sigma"] = it.sigma;
    if (it.features.kind == FeatureKind::vector) {
      rec["features"] = it.features.values;
    } else {
      ojson m;
      m["s"] = it.features.rows;
      m["c"] = it.features.cols;
      m["values"] = it.features.values;
      rec["feature_map"] = std::move(m);
    }
    out << rec.dump() << '\n';
  }
}

void save_database(const Database& db, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write database file " + path.string());
  write_database(db, out);
}

Database normalize_polarity(Database db) {
  if (db.polarity == Polarity::DMOS) {
    for (auto& it : db.items) it.mu = -it.mu;
    db.polarity = Polarity::MOS;
  }
  return db;
}

Split split_by_content(const Database& db, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ValidationError("train_fraction must lie in (0, 1)");
  }
  std::vector<std::string> groups;
  for (const auto& it : db.items) groups.push_back(it.content);
  std::sort(groups.begin(), groups.end());
  groups.erase(std::unique(groups.begin(), groups.end()), groups.end());
  if (groups.size() < 2) {
    throw ValidationError("database '" + db.name + "' needs at least 2 content groups to split");
  }
  std::mt19937_64 rng(seed);
  std::shuffle(groups.begin(), groups.end(), rng);

  // floor(x + 0.5) rounds exact halves up, i.e. toward the train side.
  const double want = train_fraction * static_cast<double>(groups.size());
  auto n_train = static_cast<std::size_t>(std::floor(want + 0.5));
  n_train = std::clamp<std::size_t>(n_train, 1, groups.size() - 1);

  const std::set<std::string> train_groups(groups.begin(), groups.begin() + static_cast<long>(n_train));
  Split split;
  for (const auto& it : db.items) {
    (train_groups.count(it.content) ? split.train_ids : split.test_ids).insert(it.id);
  }
  return split;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void save_scores(const ScoreMap& scores, const std::filesystem::path& path,
                 const std::string& value_name) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << "id," << value_name << '\n';
  for (const auto& [id, v] : scores) out << id << ',' << format_double(v) << '\n';
}

ScoreMap load_scores(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  ScoreMap out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 || line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      fail_at(path.string(), lineno, "expected 'id,value'");
    }
    const std::string id = line.substr(0, comma);
    double v = 0.0;
    try {
      std::size_t used = 0;
      v = std::stod(line.substr(comma + 1), &used);
    } catch (const std::exception&) {
      fail_at(path.string(), lineno, "bad numeric value");
    }
    if (!std::isfinite(v)) fail_at(path.string(), lineno, "non-finite value");
    if (!out.emplace(id, v).second) fail_at(path.string(), lineno, "duplicate id '" + id + "'");
  }
  return out;
}

}  // namespace pairq
