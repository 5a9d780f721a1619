#include "pairq/scorer.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "pairq/errors.hpp"

namespace pairq {

std::string_view to_string(ArchKind k) {
  switch (k) {
    case ArchKind::linear: return "linear";
    case ArchKind::mlp: return "mlp";
    case ArchKind::bilinear_mlp: return "bilinear_mlp";
  }
  return "?";
}

ArchKind parse_arch_kind(std::string_view s) {
  if (s == "linear") return ArchKind::linear;
  if (s == "mlp") return ArchKind::mlp;
  if (s == "bilinear_mlp") return ArchKind::bilinear_mlp;
  throw ValidationError("unknown architecture kind '" + std::string(s) + "'");
}

std::size_t Architecture::pooled_dim() const {
  return kind == ArchKind::bilinear_mlp ? map_cols * map_cols : input_dim;
}

std::size_t Architecture::head_input_dim() const {
  return hidden_sizes.empty() ? pooled_dim() : hidden_sizes.back();
}

void Architecture::validate() const {
  if (!(sigma_floor >= 0.0) || !std::isfinite(sigma_floor)) {
    throw ValidationError("sigma_floor must be finite and >= 0");
  }
  for (auto h : hidden_sizes) {
    if (h == 0) throw ValidationError("hidden sizes must be >= 1");
  }
  switch (kind) {
    case ArchKind::linear:
      if (!hidden_sizes.empty()) throw ValidationError("linear architecture takes no hidden layers");
      if (input_dim == 0) throw ValidationError("input_dim must be >= 1");
      break;
    case ArchKind::mlp:
      if (hidden_sizes.empty()) throw ValidationError("mlp needs at least one hidden layer");
      if (input_dim == 0) throw ValidationError("input_dim must be >= 1");
      break;
    case ArchKind::bilinear_mlp:
      if (map_rows == 0 || map_cols == 0) {
        throw ValidationError("bilinear_mlp needs map_rows and map_cols >= 1");
      }
      break;
  }
}

bool Architecture::accepts(const Features& f) const {
  if (kind == ArchKind::bilinear_mlp) {
    return f.kind == FeatureKind::map && f.rows == map_rows && f.cols == map_cols;
  }
  return f.kind == FeatureKind::vector && f.cols == input_dim;
}

std::pair<std::size_t, std::size_t> ScorerParams::head_range() const {
  const LayerShape& h = layers.back();
  return {h.weight_offset, h.bias_offset + h.out};
}

ScorerParams make_params(const Architecture& arch) {
  arch.validate();
  ScorerParams w;
  w.arch = arch;
  std::size_t in = arch.pooled_dim();
  std::size_t offset = 0;
  auto add = [&](std::size_t out) {
    LayerShape l;
    l.in = in;
    l.out = out;
    l.weight_offset = offset;
    offset += in * out;
    l.bias_offset = offset;
    offset += out;
    w.layers.push_back(l);
    in = out;
  };
  for (auto h : arch.hidden_sizes) add(h);
  add(2);
  w.values.assign(offset, 0.0);
  return w;
}

ScorerParams init_params(const Architecture& arch, std::uint64_t seed) {
  ScorerParams w = make_params(arch);
  std::mt19937_64 rng(seed);
  for (const auto& l : w.layers) {
    std::normal_distribution<double> he(0.0, std::sqrt(2.0 / static_cast<double>(l.in)));
    for (std::size_t k = 0; k < l.in * l.out; ++k) w.values[l.weight_offset + k] = he(rng);
  }
  return w;
}

std::vector<double> bilinear_pool(const Features& z) {
  const std::size_t s = z.rows;
  const std::size_t c = z.cols;
  std::vector<double> out(c * c, 0.0);
  for (std::size_t a = 0; a < c; ++a) {
    for (std::size_t b = a; b < c; ++b) {
      double acc = 0.0;
      for (std::size_t r = 0; r < s; ++r) acc += z.at(r, a) * z.at(r, b);
      out[a * c + b] = acc;
      out[b * c + a] = acc;
    }
  }
  return out;
}

double softplus(double u) {
  if (u > 0.0) return u + std::log1p(std::exp(-u));
  return std::log1p(std::exp(u));
}

double sigmoid(double u) {
  if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

ModelOutput forward(const ScorerParams& w, const Features& x) {
  if (!w.arch.accepts(x)) throw ValidationError("forward: feature shape does not match architecture");
  ModelOutput out;
  auto& cache = out.cache;
  cache.inputs.reserve(w.layers.size());
  cache.inputs.push_back(w.arch.kind == ArchKind::bilinear_mlp ? bilinear_pool(x) : x.values);

  const double* v = w.values.data();
  for (std::size_t li = 0; li < w.layers.size(); ++li) {
    const LayerShape& l = w.layers[li];
    const std::vector<double>& a = cache.inputs[li];
    std::vector<double> z(l.out);
    for (std::size_t o = 0; o < l.out; ++o) {
      const double* row = v + l.weight_offset + o * l.in;
      double acc = v[l.bias_offset + o];
      for (std::size_t i = 0; i < l.in; ++i) acc += row[i] * a[i];
      z[o] = acc;
    }
    if (li + 1 == w.layers.size()) {
      out.f = z[0];
      cache.raw_sigma = z[1];
      out.sigma = softplus(z[1]) + w.arch.sigma_floor;
    } else {
      std::vector<double> act(z.size());
      for (std::size_t o = 0; o < z.size(); ++o) act[o] = z[o] > 0.0 ? z[o] : 0.0;
      cache.pre.push_back(std::move(z));
      cache.inputs.push_back(std::move(act));
    }
  }
  return out;
}

void backward(const ScorerParams& w, const ModelOutput& out, OutputGrad upstream,
              std::span<double> grad) {
  const auto& cache = out.cache;
  if (grad.size() != w.values.size() || cache.inputs.size() != w.layers.size() ||
      cache.pre.size() + 1 != w.layers.size()) {
    throw ValidationError("backward: cache or gradient buffer does not match the architecture");
  }
  for (std::size_t li = 0; li < w.layers.size(); ++li) {
    if (cache.inputs[li].size() != w.layers[li].in) {
      throw ValidationError("backward: cached activation width mismatch");
    }
  }

  std::vector<double> delta = {upstream.d_f, upstream.d_sigma * sigmoid(cache.raw_sigma)};
  const double* v = w.values.data();
  for (std::size_t li = w.layers.size(); li-- > 0;) {
    const LayerShape& l = w.layers[li];
    const std::vector<double>& a = cache.inputs[li];
    for (std::size_t o = 0; o < l.out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      double* g = grad.data() + l.weight_offset + o * l.in;
      for (std::size_t i = 0; i < l.in; ++i) g[i] += d * a[i];
      grad[l.bias_offset + o] += d;
    }
    if (li == 0) break;
    // Propagate through W^T and the ReLU of the previous hidden layer.
    const std::vector<double>& pre = cache.pre[li - 1];
    std::vector<double> next(l.in, 0.0);
    for (std::size_t o = 0; o < l.out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      const double* row = v + l.weight_offset + o * l.in;
      for (std::size_t i = 0; i < l.in; ++i) next[i] += row[i] * d;
    }
    for (std::size_t i = 0; i < l.in; ++i) {
      if (pre[i] <= 0.0) next[i] = 0.0;
    }
    delta = std::move(next);
  }
}

std::vector<double> backward(const ScorerParams& w, const ModelOutput& out, OutputGrad upstream) {
  std::vector<double> g(w.values.size(), 0.0);
  backward(w, out, upstream, g);
  return g;
}

nlohmann::json arch_to_json(const Architecture& a) {
  nlohmann::json j;
  j["kind"] = std::string(to_string(a.kind));
  j["hidden_sizes"] = a.hidden_sizes;
  j["input_dim"] = a.input_dim;
  j["map_rows"] = a.map_rows;
  j["map_cols"] = a.map_cols;
  j["sigma_floor"] = a.sigma_floor;
  return j;
}

Architecture arch_from_json(const nlohmann::json& j) {
  Architecture a;
  try {
    a.kind = parse_arch_kind(j.at("kind").get<std::string>());
    a.hidden_sizes = j.value("hidden_sizes", std::vector<std::size_t>{});
    a.input_dim = j.value("input_dim", std::size_t{0});
    a.map_rows = j.value("map_rows", std::size_t{0});
    a.map_cols = j.value("map_cols", std::size_t{0});
    a.sigma_floor = j.value("sigma_floor", 1e-6);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad architecture: ") + e.what());
  }
  a.validate();
  return a;
}

std::string checkpoint_to_string(const Checkpoint& ckpt) {
  nlohmann::json j;
  j["format"] = "pairq-checkpoint/1";
  j["arch"] = arch_to_json(ckpt.params.arch);
  j["params"] = ckpt.params.values;
  j["meta"] = ckpt.meta;
  return j.dump(1) + "\n";
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write checkpoint " + path.string());
  out << checkpoint_to_string(ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open checkpoint " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": malformed checkpoint: " + e.what());
  }
  if (j.value("format", std::string{}) != "pairq-checkpoint/1") {
    throw ValidationError(path.string() + ": not a checkpoint file");
  }
  Checkpoint ckpt;
  ckpt.params = make_params(arch_from_json(j.at("arch")));
  const auto values = j.at("params").get<std::vector<double>>();
  if (values.size() != ckpt.params.values.size()) {
    throw ValidationError(path.string() + ": parameter count does not match architecture");
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw ValidationError(path.string() + ": non-finite parameter");
  }
  ckpt.params.values = values;
  ckpt.meta = j.value("meta", nlohmann::json::object());
  return ckpt;
}

}  // namespace pairq
