#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "beamgat/knn_graph.hpp"
#include "beamgat/tensor.hpp"

namespace beamgat::gat {

using ad::Tensor;

enum class Activation { kElu, kLeakyRelu };

std::string to_string(Activation a);
Activation parse_activation(const std::string& name);

// Node feature names accepted in ModelConfig::input_features.
//   x, y, z, reflectance  raw point fields (z is the masked sentinel on dropped beams)
//   mask                  1 for points with unknown z, else 0
//   beam                  beam / (B - 1)
const std::vector<std::string>& known_features();
const std::vector<std::string>& default_features();

struct ModelConfig {
  int layers = 3;
  int heads = 8;
  int head_width = 32;   // per-head hidden width; layer width = heads * head_width
  int head_hidden = 64;  // hidden width of the elevation regression head
  double dropout = 0.2;
  Activation activation = Activation::kElu;
  bool residual = true;
  double leaky_slope = 0.2;
  std::vector<std::string> input_features = default_features();

  std::size_t input_width() const { return input_features.size(); }
  std::size_t layer_width() const { return static_cast<std::size_t>(heads) * head_width; }
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// One attention layer: per head k, W[k] is head_width x F_in and a[k] has
// 2 * head_width entries (destination half first, then source half).
struct GatLayerParams {
  std::vector<Tensor> W;
  std::vector<Tensor> a;
};

struct GatModel {
  ModelConfig config;
  std::vector<GatLayerParams> layers;
  Tensor head_W1;  // head_hidden x layer_width
  Tensor head_b1;  // head_hidden
  Tensor head_W2;  // 1 x head_hidden
  Tensor head_b2;  // 1

  // Stable parameter order: layers (heads: W then a), then W1, b1, W2, b2.
  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;
  std::size_t parameter_count() const;
};

// Glorot-uniform matrices, zero biases; deterministic per seed.
GatModel init_params(const ModelConfig& config, std::uint64_t seed);

// Copy of `model` whose parameters are watched on `tape`.
GatModel watch(ad::Tape& tape, const GatModel& model);

struct ForwardOptions {
  bool training = false;
  std::uint64_t dropout_seed = 0;
  // When set, receives each head's attention coefficients (one rank-1 tensor
  // per head, edge order of the graph).
  std::vector<Tensor>* attention = nullptr;
};

// Multi-head attention layer: per-head projection, LeakyReLU edge scores,
// softmax over each destination's neighborhood, weighted aggregation, head
// concatenation, activation, residual (when widths match) and feature dropout.
Tensor gat_layer_forward(const Tensor& h, const graph::KnnGraph& graph, const GatLayerParams& params,
                         const ModelConfig& config, const ForwardOptions& options = {});

// Stacked layers followed by the regression head; returns one normalized
// elevation per node.
Tensor model_forward(const Tensor& features, const graph::KnnGraph& graph, const GatModel& model,
                     const ForwardOptions& options = {});

inline constexpr std::uint32_t kModelFileVersion = 1;

struct ModelFile {
  GatModel model;
  int epochs_completed = 0;
};

void save_model(const GatModel& model, const std::filesystem::path& path, int epochs_completed = 0);
ModelFile load_model_file(const std::filesystem::path& path);
GatModel load_model(const std::filesystem::path& path);

bool bitwise_equal(const GatModel& a, const GatModel& b);

}  // namespace beamgat::gat
