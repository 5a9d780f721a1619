#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pairq/types.hpp"

namespace pairq {

enum class ArchKind { linear, mlp, bilinear_mlp };

std::string_view to_string(ArchKind k);
ArchKind parse_arch_kind(std::string_view s);

/// Network shape. `linear` maps d features straight to the two-output head;
/// `mlp` inserts ReLU hidden layers; `bilinear_mlp` first pools an s x c
/// feature map into the c*c second-order statistic z^T z, then runs the
/// (possibly empty) ReLU stack and the head.
struct Architecture {
  ArchKind kind = ArchKind::linear;
  std::vector<std::size_t> hidden_sizes;
  std::size_t input_dim = 0;    // d for linear/mlp
  std::size_t map_rows = 0;     // s for bilinear_mlp
  std::size_t map_cols = 0;     // c for bilinear_mlp
  double sigma_floor = 1e-6;    // added after softplus on the uncertainty head

  std::size_t head_input_dim() const;
  std::size_t pooled_dim() const;  // width of the vector entering the first layer
  void validate() const;
  bool accepts(const Features& f) const;

  bool operator==(const Architecture&) const = default;
};

struct LayerShape {
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t weight_offset = 0;  // row-major out x in
  std::size_t bias_offset = 0;
};

/// All weights in one flat buffer; `layers` describes where each lives. The
/// last layer is the two-output head (row 0 -> quality, row 1 -> uncertainty).
struct ScorerParams {
  Architecture arch;
  std::vector<LayerShape> layers;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  // Index range [begin, end) of the head parameters inside `values`.
  std::pair<std::size_t, std::size_t> head_range() const;
};

ScorerParams make_params(const Architecture& arch);  // zero-filled
ScorerParams init_params(const Architecture& arch, std::uint64_t seed);

struct ForwardCache {
  std::vector<std::vector<double>> inputs;  // input to each layer
  std::vector<std::vector<double>> pre;     // pre-activations of hidden layers
  double raw_sigma = 0.0;                   // head output before softplus
};

struct ModelOutput {
  double f = 0.0;
  double sigma = 1.0;
  ForwardCache cache;
};

// Row-major flattening of z^T z for an s x c map.
std::vector<double> bilinear_pool(const Features& z);

double softplus(double u);
double sigmoid(double u);

ModelOutput forward(const ScorerParams& w, const Features& x);

struct OutputGrad {
  double d_f = 0.0;
  double d_sigma = 0.0;
};

// Accumulates dL/dw into `grad` (same length as w.values) given dL/df and
// dL/dsigma for one forward pass.
void backward(const ScorerParams& w, const ModelOutput& out, OutputGrad upstream,
              std::span<double> grad);
std::vector<double> backward(const ScorerParams& w, const ModelOutput& out, OutputGrad upstream);

nlohmann::json arch_to_json(const Architecture& a);
Architecture arch_from_json(const nlohmann::json& j);

/// Checkpoint: architecture, flat parameters, and free-form metadata (training
/// config echo, seed lineage, training item ids).
struct Checkpoint {
  ScorerParams params;
  nlohmann::json meta = nlohmann::json::object();
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
std::string checkpoint_to_string(const Checkpoint& ckpt);

}  // namespace pairq
