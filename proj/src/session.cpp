#include "pairq/session.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <numeric>

#include "pairq/errors.hpp"
#include "pairq/losses.hpp"
#include "pairq/seeding.hpp"

namespace pairq {

namespace fs = std::filesystem;

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::fidelity_hinge: return "fidelity+hinge";
    case Variant::fidelity_only: return "fidelity-only";
    case Variant::mse: return "mse";
    case Variant::rescale_mse: return "rescale+mse";
    case Variant::binary_ce: return "binary-ce";
    case Variant::continuous_ce: return "continuous-ce";
  }
  return "?";
}

Variant parse_variant(std::string_view s) {
  for (Variant v : all_variants()) {
    if (to_string(v) == s) return v;
  }
  throw ValidationError("unknown loss variant '" + std::string(s) + "'");
}

const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> v{Variant::mse,           Variant::rescale_mse,
                                      Variant::binary_ce,     Variant::continuous_ce,
                                      Variant::fidelity_only, Variant::fidelity_hinge};
  return v;
}

namespace {

std::string slug(Variant v) {
  std::string s(to_string(v));
  for (char& c : s) {
    if (c == '+' || c == '-') c = '_';
  }
  return s;
}

fs::path resolve(const fs::path& p, const fs::path& base) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << text;
}

}  // namespace

void SessionConfig::validate() const {
  if (databases.empty()) throw ValidationError("session config: no databases");
  for (const auto& d : databases) {
    if (!fs::exists(d.path)) throw ValidationError("session config: missing database " + d.path.string());
    if (!d.latent.empty() && !fs::exists(d.latent)) {
      throw ValidationError("session config: missing latent sidecar " + d.latent.string());
    }
  }
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ValidationError("session config: train_fraction must lie in (0, 1)");
  }
  if (session_seeds.empty()) throw ValidationError("session config: no session seeds");
  std::set<std::uint64_t> seen(session_seeds.begin(), session_seeds.end());
  if (seen.size() != session_seeds.size()) throw ValidationError("session config: session seeds must be distinct");
  if (test_pairs_per_db == 0) throw ValidationError("session config: test_pairs_per_db must be >= 1");
  if (variants.empty()) throw ValidationError("session config: no variants");
  if (!(rescale_hi > rescale_lo)) throw ValidationError("session config: rescale range is empty");
  train.validate();
}

SessionConfig session_config_from_json(const nlohmann::json& j, const fs::path& base_dir) {
  SessionConfig c;
  try {
    for (const auto& d : j.at("databases")) {
      DbSource src;
      src.path = resolve(d.at("path").get<std::string>(), base_dir);
      if (d.contains("latent")) src.latent = resolve(d.at("latent").get<std::string>(), base_dir);
      src.pairs = d.value("pairs", std::size_t{0});
      c.databases.push_back(src);
    }
    c.total_pairs = j.value("total_pairs", c.total_pairs);
    c.train_fraction = j.value("train_fraction", c.train_fraction);
    c.session_seeds = j.at("session_seeds").get<std::vector<std::uint64_t>>();
    c.test_pairs_per_db = j.value("test_pairs_per_db", c.test_pairs_per_db);
    if (j.contains("arch")) {
      const auto& a = j.at("arch");
      c.arch_kind = parse_arch_kind(a.at("kind").get<std::string>());
      c.hidden_sizes = a.value("hidden_sizes", std::vector<std::size_t>{});
    }
    if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
    if (j.contains("variants")) {
      for (const auto& v : j.at("variants")) c.variants.push_back(parse_variant(v.get<std::string>()));
    } else {
      c.variants = all_variants();
    }
    if (j.contains("rescale_range")) {
      const auto r = j.at("rescale_range").get<std::vector<double>>();
      if (r.size() != 2) throw ValidationError("session config: rescale_range needs two values");
      c.rescale_lo = r[0];
      c.rescale_hi = r[1];
    }
    c.output_dir = resolve(j.value("output_dir", std::string("sessions")), base_dir);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad session config: ") + e.what());
  }
  return c;
}

SessionConfig load_session_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return session_config_from_json(j, path.parent_path());
}

nlohmann::json session_config_to_json(const SessionConfig& c) {
  nlohmann::json j;
  j["databases"] = nlohmann::json::array();
  for (const auto& d : c.databases) {
    nlohmann::json e{{"path", d.path.generic_string()}, {"pairs", d.pairs}};
    if (!d.latent.empty()) e["latent"] = d.latent.generic_string();
    j["databases"].push_back(e);
  }
  j["total_pairs"] = c.total_pairs;
  j["train_fraction"] = c.train_fraction;
  j["session_seeds"] = c.session_seeds;
  j["test_pairs_per_db"] = c.test_pairs_per_db;
  j["arch"] = {{"kind", std::string(to_string(c.arch_kind))}, {"hidden_sizes", c.hidden_sizes}};
  j["train"] = train_config_to_json(c.train);
  j["variants"] = nlohmann::json::array();
  for (Variant v : c.variants) j["variants"].push_back(std::string(to_string(v)));
  j["rescale_range"] = {c.rescale_lo, c.rescale_hi};
  j["output_dir"] = c.output_dir.generic_string();
  return j;
}

Architecture arch_for_features(ArchKind kind, const std::vector<std::size_t>& hidden,
                               const Features& sample) {
  Architecture a;
  a.kind = kind;
  a.hidden_sizes = hidden;
  if (kind == ArchKind::bilinear_mlp) {
    if (sample.kind != FeatureKind::map) throw ValidationError("bilinear_mlp needs map features");
    a.map_rows = sample.rows;
    a.map_cols = sample.cols;
  } else {
    if (sample.kind != FeatureKind::vector) throw ValidationError(std::string(to_string(kind)) + " needs vector features");
    a.input_dim = sample.cols;
  }
  a.validate();
  return a;
}

std::vector<std::size_t> pair_budget(const std::vector<std::size_t>& db_sizes,
                                     const std::vector<std::size_t>& explicit_counts,
                                     std::size_t total) {
  const std::size_t n = db_sizes.size();
  if (explicit_counts.size() != n) throw ValidationError("pair_budget: size mismatch");
  std::vector<std::size_t> out(explicit_counts);
  std::size_t free_items = 0, used = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (explicit_counts[k] == 0) free_items += db_sizes[k];
    else used += explicit_counts[k];
  }
  if (free_items == 0) return out;
  const std::size_t rest = total > used ? total - used : 0;
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (explicit_counts[k] != 0) continue;
    const double exact = static_cast<double>(rest) * static_cast<double>(db_sizes[k]) /
                         static_cast<double>(free_items);
    out[k] = static_cast<std::size_t>(exact);
    assigned += out[k];
    remainders.push_back({exact - static_cast<double>(out[k]), k});
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < rest && r < remainders.size(); ++r, ++assigned) {
    ++out[remainders[r].second];
  }
  return out;
}

const ScorerParams& ModelSet::for_db(const std::string& db) const {
  const auto it = route.find(db);
  const std::size_t k = it == route.end() ? 0 : it->second;
  if (k >= models.size() || models[k] == nullptr) throw ValidationError("no model for database '" + db + "'");
  return *models[k];
}

EvalReport evaluate_models(const ModelSet& models, const EvalInputs& in, const std::string& session) {
  if (in.dbs == nullptr) throw ValidationError("evaluate: no databases");
  const ItemIndex items = index_items(*in.dbs);
  EvalReport report;
  report.session = session;
  std::vector<double> pooled_pred, pooled_latent;

  for (const auto& db : *in.dbs) {
    const auto ids_it = in.test_ids.find(db.name);
    if (ids_it == in.test_ids.end() || ids_it->second.empty()) {
      throw ValidationError("evaluate: no test items for database '" + db.name + "'");
    }
    const ScorerParams& model = models.for_db(db.name);
    std::vector<double> pred, truth;
    for (const auto& id : ids_it->second) {
      if (in.train_ids.count(id)) throw ValidationError("evaluate: test item '" + id + "' was used for training");
      const AnnotatedItem* item = items.at(id);
      const double f = forward(model, item->features).f;
      pred.push_back(f);
      truth.push_back(item->mu);
      if (in.latent != nullptr) {
        const auto q = in.latent->find(id);
        if (q == in.latent->end()) throw ValidationError("evaluate: no latent value for '" + id + "'");
        pooled_pred.push_back(f);
        pooled_latent.push_back(q->second);
      }
    }
    DbMetrics m;
    m.db = db.name;
    m.n_images = static_cast<double>(pred.size());
    m.srcc = srcc(pred, truth);
    m.plcc = plcc(pred, truth);
    const auto pairs_it = in.test_pairs.find(db.name);
    if (pairs_it == in.test_pairs.end() || pairs_it->second.empty()) {
      throw ValidationError("evaluate: no test pairs for database '" + db.name + "'");
    }
    m.n_pairs = static_cast<double>(pairs_it->second.size());
    m.fidelity = fidelity_metric(model, pairs_it->second, items, in.train_ids, in.p_clamp);
    m.sigma_order_acc = sigma_order_accuracy(model, pairs_it->second, items);
    report.per_db.push_back(m);
  }
  finalize_weighted(report);
  if (in.latent != nullptr) {
    report.pooled_latent_srcc = srcc(pooled_pred, pooled_latent);
    report.has_pooled_latent = true;
  }
  return report;
}

SessionDatabases load_session_databases(const SessionConfig& cfg) {
  SessionDatabases out;
  std::vector<std::size_t> sizes, explicit_counts;
  out.have_latent = true;
  for (const auto& src : cfg.databases) {
    out.dbs.push_back(normalize_polarity(load_database(src.path)));
    sizes.push_back(out.dbs.back().items.size());
    explicit_counts.push_back(src.pairs);
    if (src.latent.empty()) {
      out.have_latent = false;
    } else {
      for (const auto& [id, q] : load_scores(src.latent)) out.latent[id] = q;
    }
  }
  out.budget = pair_budget(sizes, explicit_counts, cfg.total_pairs);
  return out;
}

SessionInputs prepare_session(const SessionConfig& cfg, const SessionDatabases& loaded,
                              std::uint64_t seed) {
  const auto& dbs = loaded.dbs;
  SessionInputs s;
  s.seed = seed;
  s.name = std::to_string(seed);
  for (std::size_t k = 0; k < dbs.size(); ++k) {
    const Database& db = dbs[k];
    Split split = split_by_content(db, cfg.train_fraction, derive_seed(seed, "split/" + db.name));
    s.train_ids.insert(split.train_ids.begin(), split.train_ids.end());
    const std::uint64_t ps = derive_seed(seed, "pairs/" + db.name);
    s.train_pairs.push_back(sample_pairs(db, split.train_ids, loaded.budget[k], ps));
    s.pair_seeds.push_back(ps);
    s.test_pairs[db.name] =
        sample_pairs(db, split.test_ids, cfg.test_pairs_per_db, derive_seed(seed, "test-pairs/" + db.name));
    s.splits[db.name] = std::move(split);
  }
  // Contamination guard: training pairs come from the train side only.
  for (const auto& list : s.train_pairs) {
    for (const auto& p : list) {
      if (!s.train_ids.count(p.x_id) || !s.train_ids.count(p.y_id)) {
        throw ValidationError("contamination: training pair (" + p.x_id + ", " + p.y_id +
                              ") touches a test item");
      }
    }
  }
  return s;
}

void write_session_inputs(const SessionInputs& s, const std::vector<Database>& dbs, const fs::path& dir) {
  fs::create_directories(dir);
  std::string split_csv = "db,id,side\n";
  for (const auto& db : dbs) {
    const Split& sp = s.splits.at(db.name);
    for (const auto& id : sp.train_ids) split_csv += db.name + ',' + id + ",train\n";
    for (const auto& id : sp.test_ids) split_csv += db.name + ',' + id + ",test\n";
  }
  write_text(dir / "split.csv", split_csv);
  std::vector<PairSample> train_all, test_all;
  for (const auto& list : s.train_pairs) train_all.insert(train_all.end(), list.begin(), list.end());
  for (const auto& db : dbs) {
    const auto& l = s.test_pairs.at(db.name);
    test_all.insert(test_all.end(), l.begin(), l.end());
  }
  save_pairs(train_all, dir / "train_pairs.csv");
  save_pairs(test_all, dir / "test_pairs.csv");
}

namespace {

EvalReport run_cell(const SessionConfig& cfg, Variant variant, const std::vector<Database>& dbs,
                    const ItemIndex& items, const Architecture& arch, const SessionInputs& s,
                    const ScoreMap* latent, const std::vector<std::size_t>& budget, const fs::path& dir) {
  fs::create_directories(dir);
  EvalInputs in;
  in.dbs = &dbs;
  in.train_ids = s.train_ids;
  in.test_pairs = s.test_pairs;
  in.latent = latent;
  in.p_clamp = cfg.train.loss.p_clamp;
  for (const auto& [db, split] : s.splits) in.test_ids[db] = split.test_ids;

  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(s.seed, "train");

  std::vector<TrainReport> trained;
  ModelSet models;

  switch (variant) {
    case Variant::fidelity_hinge:
    case Variant::fidelity_only:
    case Variant::binary_ce:
    case Variant::continuous_ce: {
      tc.objective = variant == Variant::binary_ce       ? Objective::binary_ce
                     : variant == Variant::continuous_ce ? Objective::continuous_ce
                                                         : Objective::fidelity;
      if (variant == Variant::fidelity_only || variant == Variant::binary_ce) tc.loss.lambda = 0.0;
      const TrainingSet ts = combine(s.train_pairs, s.pair_seeds);
      trained.push_back(train(ts, items, arch, tc));
      break;
    }
    case Variant::mse: {
      for (std::size_t k = 0; k < dbs.size(); ++k) {
        const Database& db = dbs[k];
        std::vector<RegressionSample> samples;
        for (const auto& it : db.items) {
          if (s.splits.at(db.name).train_ids.count(it.id)) samples.push_back({&it, it.mu});
        }
        TrainConfig dc = tc;
        dc.seed = derive_seed(s.seed, "train/" + db.name);
        trained.push_back(train_regression(samples, budget[k], arch, dc));
        models.route[db.name] = k;
      }
      break;
    }
    case Variant::rescale_mse: {
      std::vector<RegressionSample> samples;
      std::vector<Database> scaled;
      scaled.reserve(dbs.size());
      for (const auto& db : dbs) scaled.push_back(rescale_mos(db, cfg.rescale_lo, cfg.rescale_hi));
      for (const auto& db : scaled) {
        for (const auto& it : db.items) {
          if (s.train_ids.count(it.id)) samples.push_back({&it, it.mu});
        }
      }
      const std::size_t per_epoch = std::accumulate(budget.begin(), budget.end(), std::size_t{0});
      trained.push_back(train_regression(samples, per_epoch, arch, tc));
      break;
    }
  }

  for (const auto& t : trained) models.models.push_back(&t.checkpoint.params);
  EvalReport report = evaluate_models(models, in, s.name);

  if (trained.size() == 1) {
    write_epoch_log_csv(trained[0], dir / "train_log.csv");
    save_checkpoint(trained[0].checkpoint, dir / "checkpoint.json");
  } else {
    for (std::size_t k = 0; k < trained.size(); ++k) {
      write_epoch_log_csv(trained[k], dir / ("train_log_" + dbs[k].name + ".csv"));
      save_checkpoint(trained[k].checkpoint, dir / ("checkpoint_" + dbs[k].name + ".json"));
    }
  }
  save_report_csv(report, dir / "report.csv");
  write_text(dir / "report.json", report_to_json(report).dump(2) + "\n");
  return report;
}

std::string opt(const DbMetrics& m, double DbMetrics::*field) { return format_double(m.*field); }

std::string comparison_csv(const SessionConfig& cfg, const RunSummary& s) {
  std::string out =
      "variant,db,n_sessions,srcc_median,srcc_mad,plcc_median,plcc_mad,fidelity_median,fidelity_mad,"
      "sigma_order_acc_median,sigma_order_acc_mad\n";
  for (Variant v : cfg.variants) {
    const std::string name(to_string(v));
    const auto agg = s.aggregates.find(name);
    if (agg == s.aggregates.end()) continue;
    const std::string n = std::to_string(s.reports.at(name).size());
    auto row = [&](const DbMetrics& med, const DbMetrics& mad) {
      out += name + ',' + med.db + ',' + n + ',' + opt(med, &DbMetrics::srcc) + ',' +
             opt(mad, &DbMetrics::srcc) + ',' + opt(med, &DbMetrics::plcc) + ',' +
             opt(mad, &DbMetrics::plcc) + ',' + opt(med, &DbMetrics::fidelity) + ',' +
             opt(mad, &DbMetrics::fidelity) + ',' + opt(med, &DbMetrics::sigma_order_acc) + ',' +
             opt(mad, &DbMetrics::sigma_order_acc) + '\n';
    };
    const auto& med = agg->second.median;
    const auto& mad = agg->second.mad;
    for (std::size_t k = 0; k < med.per_db.size(); ++k) row(med.per_db[k], mad.per_db[k]);
    row(med.weighted, mad.weighted);
    if (med.has_pooled_latent) {
      out += name + ",pooled_latent," + n + ',' + format_double(med.pooled_latent_srcc) + ',' +
             format_double(mad.pooled_latent_srcc) + ",,,,,,\n";
    }
  }
  return out;
}

}  // namespace

std::vector<TTestRow> ttest_table(const RunSummary& s, const std::string& reference) {
  std::vector<TTestRow> rows;
  const auto ref = s.reports.find(reference);
  if (ref == s.reports.end()) return rows;
  for (const auto& [name, reports] : s.reports) {
    if (name == reference) continue;
    // Pair up sessions both variants completed.
    std::map<std::string, const EvalReport*> other;
    for (const auto& r : reports) other[r.session] = &r;
    std::vector<std::pair<const EvalReport*, const EvalReport*>> paired;
    for (const auto& r : ref->second) {
      const auto it = other.find(r.session);
      if (it != other.end()) paired.push_back({&r, it->second});
    }
    if (paired.empty()) continue;
    std::vector<std::string> dbs;
    for (const auto& m : paired.front().first->per_db) dbs.push_back(m.db);
    dbs.push_back("weighted");
    for (const auto& db : dbs) {
      std::vector<double> a, b;
      for (const auto& [ra, rb] : paired) {
        a.push_back(db == "weighted" ? ra->weighted.srcc : ra->at(db).srcc);
        b.push_back(db == "weighted" ? rb->weighted.srcc : rb->at(db).srcc);
      }
      TTestRow row{db, reference, name, a.size(), 0};
      if (a.size() >= 2) row.result = one_sided_t_test(a, b);
      rows.push_back(row);
    }
  }
  return rows;
}

RunSummary run_sessions(const SessionConfig& cfg) {
  cfg.validate();
  const SessionDatabases loaded = load_session_databases(cfg);
  const auto& dbs = loaded.dbs;
  const ItemIndex items = index_items(dbs);
  const Architecture arch = arch_for_features(cfg.arch_kind, cfg.hidden_sizes, dbs.front().items.front().features);
  for (const auto& db : dbs) {
    for (const auto& it : db.items) {
      if (!arch.accepts(it.features)) throw ValidationError("database '" + db.name + "' has features the architecture cannot take");
    }
  }
  const auto& budget = loaded.budget;
  const ScoreMap* latent_ptr = loaded.have_latent ? &loaded.latent : nullptr;

  fs::create_directories(cfg.output_dir);
  write_text(cfg.output_dir / "config.json", session_config_to_json(cfg).dump(2) + "\n");

  RunSummary summary;
  for (std::uint64_t seed : cfg.session_seeds) {
    const std::string sname = "session_" + std::to_string(seed);
    SessionInputs data;
    try {
      data = prepare_session(cfg, loaded, seed);
      write_session_inputs(data, dbs, cfg.output_dir / "inputs" / sname);
    } catch (const std::exception& e) {
      for (Variant v : cfg.variants) {
        summary.failures.push_back({std::string(to_string(v)), std::to_string(seed),
                                    e.what(), dynamic_cast<const NumericError*>(&e) != nullptr});
      }
      continue;
    }
    for (Variant v : cfg.variants) {
      const std::string vname(to_string(v));
      try {
        EvalReport r = run_cell(cfg, v, dbs, items, arch, data, latent_ptr, budget,
                                cfg.output_dir / slug(v) / sname);
        summary.reports[vname].push_back(std::move(r));
      } catch (const NumericError& e) {
        summary.failures.push_back({vname, data.name, e.what(), true});
      } catch (const ValidationError& e) {
        summary.failures.push_back({vname, data.name, e.what(), false});
      }
    }
  }

  for (Variant v : cfg.variants) {
    const std::string vname(to_string(v));
    const auto it = summary.reports.find(vname);
    if (it == summary.reports.end() || it->second.empty()) continue;
    SessionAggregate agg = median_across_sessions(it->second);
    const fs::path dir = cfg.output_dir / slug(v);
    save_report_csv(agg.median, dir / "summary_median.csv");
    save_report_csv(agg.mad, dir / "summary_mad.csv");
    nlohmann::json j{{"median", report_to_json(agg.median)}, {"mad", report_to_json(agg.mad)}};
    write_text(dir / "summary.json", j.dump(2) + "\n");
    summary.aggregates.emplace(vname, std::move(agg));
  }

  write_text(cfg.output_dir / "comparison.csv", comparison_csv(cfg, summary));

  std::string tt = "db,variant_a,variant_b,n_sessions,result\n";
  for (const auto& r : ttest_table(summary, std::string(to_string(Variant::fidelity_hinge)))) {
    tt += r.db + ',' + r.variant_a + ',' + r.variant_b + ',' + std::to_string(r.n) + ',' +
          std::to_string(r.result) + '\n';
  }
  write_text(cfg.output_dir / "ttest.csv", tt);

  std::string failures;
  for (const auto& f : summary.failures) {
    failures += f.variant + " session " + f.session + ": " + f.message + '\n';
  }
  write_text(cfg.output_dir / "failures.txt", failures);
  return summary;
}

}  // namespace pairq
