#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "beamgat/beam_model.hpp"
#include "beamgat/gat.hpp"
#include "beamgat/knn_graph.hpp"

namespace beamgat::train {

using ad::Tensor;

// Per-frame standardization statistics over observed (unmasked) points.
struct NormStats {
  std::vector<std::string> features;
  std::vector<double> mean;
  std::vector<double> std;  // clamped below by kMinStd
  double z_mean = 0.0;
  double z_std = 1.0;
};

inline constexpr double kMinStd = 1e-6;

struct NormalizedFrame {
  Tensor features;  // N x features.size()
  NormStats stats;
};

// z-scores every feature with observed-point statistics; the mask flag is
// passed through as 0/1 and masked z is 0 after scaling.
NormalizedFrame normalize_frame(const MaskedFrame& frame,
                                const std::vector<std::string>& features = gat::default_features());

inline double normalize_z(double z, const NormStats& s) { return (z - s.z_mean) / s.z_std; }
inline double denormalize_z(double v, const NormStats& s) { return v * s.z_std + s.z_mean; }

// Mean over masked nodes of (z_hat - normalized truth)^2.
Tensor loss_masked_mse(const Tensor& z_hat, const MaskedFrame& frame, const NormStats& stats);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  long step = 0;
};

// Bias-corrected Adam update in place. State is sized on first use.
void adam_step(std::vector<Tensor*> params, const std::vector<Tensor>& grads, AdamState& state,
               const AdamConfig& config);
void adam_step(gat::GatModel& model, const std::vector<Tensor>& grads, AdamState& state,
               const AdamConfig& config);

struct TrainConfig {
  AdamConfig adam;
  int max_epochs = 100;
  int patience = 10;
  int batch = 1;  // frames per optimizer step
  std::uint64_t seed = 0;
  double split_fraction = 0.2;
};

// A masked frame with its normalized features and graph, ready for the model.
struct PreparedFrame {
  MaskedFrame frame;
  NormalizedFrame input;
  graph::KnnGraph graph;
};

PreparedFrame prepare_frame(MaskedFrame frame, const gat::ModelConfig& model,
                            const graph::GraphOptions& graph_options);

// Rebuilds only the graph (e.g. for a different k).
void rebuild_graph(PreparedFrame& frame, const graph::GraphOptions& graph_options);

// Physical elevation prediction for every node.
std::vector<double> predict_z(const gat::GatModel& model, const PreparedFrame& frame);
// Physical elevation prediction for the masked nodes, in masked order.
std::vector<double> predict_masked_z(const gat::GatModel& model, const PreparedFrame& frame);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;  // normalized masked MSE, mean over steps
  double val_loss = 0.0;    // masked MSE in m^2 over all validation points
  double seconds = 0.0;
};

struct TrainResult {
  gat::GatModel model;  // best checkpoint
  std::vector<EpochLog> log;
  int best_epoch = 0;
  double best_val_loss = 0.0;
  int epochs_completed = 0;
};

// Splits frame indices: the last ceil(fraction * n) frames validate.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};
Split split_frames(std::size_t n, double fraction);

double validation_loss(const gat::GatModel& model, const std::vector<PreparedFrame>& frames);

using EpochCallback = std::function<void(const EpochLog&)>;

// Adam with early stopping on validation loss. Epoch numbers continue from
// `start_epoch`; stops once `patience` consecutive epochs fail to improve (at
// least one), or after max_epochs.
TrainResult fit(const std::vector<PreparedFrame>& train_frames,
                const std::vector<PreparedFrame>& val_frames, const gat::GatModel& initial,
                const TrainConfig& config, int start_epoch = 0, const EpochCallback& on_epoch = {});

// Splits `frames`, initializes the model from `seed`, and fits.
TrainResult train(const std::vector<PreparedFrame>& frames, const gat::ModelConfig& model_config,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

}  // namespace beamgat::train
