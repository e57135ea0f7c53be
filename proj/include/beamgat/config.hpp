#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "beamgat/beam_model.hpp"
#include "beamgat/gat.hpp"
#include "beamgat/io.hpp"
#include "beamgat/knn_graph.hpp"
#include "beamgat/trainer.hpp"

// Run configuration: one JSON document with the sections below. Every key is
// optional; unknown keys are rejected so that typos never silently fall back
// to defaults.
namespace beamgat::config {

struct DataConfig {
  std::string source = "synth";  // synth | kitti | csv
  std::string input_dir;         // kitti: *.bin files, csv: *.csv files
  std::size_t n_frames = 20;
  std::uint64_t seed = 0;
  int azimuth_steps = 360;
  double noise_std = 0.01;
  double ground_z = -1.73;
  int min_boxes = 3;
  int max_boxes = 6;
  std::size_t frame_size = io::kDefaultFrameSize;
  std::size_t min_points = io::kMinValidPoints;
  io::RangeFilter filter;
};

struct SensorConfig {
  std::string preset = "desk16";  // desk16 | hdl64e | custom
  int beam_count = 16;
  double theta_min_deg = -24.8;
  double theta_max_deg = 2.0;
  double sensor_height = 1.73;
  SensorSpec spec() const;
};

struct DropoutConfig {
  std::string kind = "every_nth";  // every_nth | random_fraction | contiguous_band
  int n = 4;                       // every_nth period, or band width
  double fraction = 0.25;
  int offset = 0;                  // every_nth phase, or first band beam
  std::uint64_t seed = 0;
  DropoutPattern pattern() const;
};

struct EvalConfig {
  double tau = 0.10;
  std::string frames = "validation";  // validation | all
  bool write_reconstructions = true;
  double cdf_max = 0.5;
  double cdf_step = 0.01;
};

struct SweepConfig {
  std::vector<std::size_t> ks = {4, 6, 8, 10, 14, 20};
  std::string mode = "reevaluate";  // reevaluate | retrain
  int repeats = 3;                  // timing takes the best of this many passes
};

struct RunConfig {
  DataConfig data;
  SensorConfig sensor;
  DropoutConfig dropout;
  graph::GraphOptions graph;
  gat::ModelConfig model;
  train::TrainConfig train;
  EvalConfig eval;
  SweepConfig sweep;
  std::string run_dir = "runs/default";

  // Cross-field checks; throws ConfigError.
  void validate() const;
};

RunConfig from_json_text(const std::string& text);
RunConfig load(const std::filesystem::path& path);
std::string to_json_text(const RunConfig& config);

// Applies a dotted override such as "train.max_epochs=5" to a JSON document
// before it is parsed. The value is read as JSON when possible, otherwise as
// a string.
std::string apply_override(const std::string& json_text, const std::string& assignment);

}  // namespace beamgat::config
