#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "pairq/types.hpp"

namespace pairq {

// Database record files are JSON Lines. The first line is a header
//   {"format":"pairq-db/1","database":NAME,"scenario":"synthetic"|"realistic"}
// followed by one item per line with fields, in this order,
//   id, db, content, polarity, mu, sigma, features | feature_map{s,c,values}
// See docs/formats.md.
inline constexpr const char* kDatabaseFormatTag = "pairq-db/1";

Database load_database(const std::filesystem::path& path);
Database read_database(std::istream& in, const std::string& source_name = "<stream>");
void save_database(const Database& db, const std::filesystem::path& path);
void write_database(const Database& db, std::ostream& out);

// DMOS databases get their means negated and become MOS; sigma is untouched.
Database normalize_polarity(Database db);

// Randomly partitions content groups (not items) into train and test sides.
// The train side receives round(train_fraction * groups) groups, ties rounded
// toward train, clamped so both sides keep at least one group.
Split split_by_content(const Database& db, double train_fraction, std::uint64_t seed);

// Two-column CSV sidecars: "id,<value_name>" header then one row per item.
using ScoreMap = std::map<std::string, double>;
void save_scores(const ScoreMap& scores, const std::filesystem::path& path,
                 const std::string& value_name);
ScoreMap load_scores(const std::filesystem::path& path);

// Fixed-format double rendering used by every CSV writer ("%.17g").
std::string format_double(double v);

}  // namespace pairq
