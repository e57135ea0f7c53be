#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "beamgat/beam_model.hpp"
#include "beamgat/config.hpp"
#include "beamgat/metrics.hpp"
#include "beamgat/trainer.hpp"

// File-based experiment stages: synth -> dropout -> train -> eval. Each
// command reads the previous stage's files from the run directory and writes
// its own, together with the resolved config it ran with.
namespace beamgat::pipeline {

namespace fs = std::filesystem;

// Layout of a run directory.
struct RunPaths {
  fs::path root;
  fs::path frames;      // synth output: <id>.csv
  fs::path masked;      // dropout output: <id>.csv + <id>.truth.csv
  fs::path recon;       // eval/reconstruct output: <id>.csv + <id>.ply
  fs::path model;       // model.bin
  fs::path train_log;   // train_log.csv
  fs::path metrics;     // metrics.csv
  fs::path summary;     // summary.csv
  fs::path cdf;         // cdf.csv
  fs::path sweep;       // sweep_k.csv
  fs::path config_echo(const std::string& command) const { return root / ("config." + command + ".json"); }
};

RunPaths run_paths(const config::RunConfig& config);

// Validates the config and every path the command touches, creates the run
// directory and writes the config echo. Call before any work.
void begin_command(const config::RunConfig& config, const std::string& command);

// Generates the synthetic benchmark set into frames/.
std::vector<fs::path> cmd_synth(const config::RunConfig& config, std::ostream& out);

// Filters, subsamples, assigns beams and masks every source frame into
// masked/. Returns the written masked frame files.
std::vector<fs::path> cmd_dropout(const config::RunConfig& config, std::ostream& out);

// Masked frames of the run, regenerating earlier stages when their outputs
// are missing or were produced under a different config.
std::vector<MaskedFrame> load_masked_frames(const config::RunConfig& config, std::ostream& out);

// Truth sidecar: header "index,z", one row per masked point.
void write_truth(const MaskedFrame& frame, const fs::path& path);
MaskedFrame read_masked_frame(const fs::path& cloud_path, const fs::path& truth_path);

struct TrainOptions {
  bool resume = false;  // continue from model.bin, numbering epochs after it
};
train::TrainResult cmd_train(const config::RunConfig& config, std::ostream& out, const TrainOptions& options = {});

struct EvalOptions {
  // Score reconstructions read from <dir>/<id>.csv instead of running the
  // model; lets external reconstructors be evaluated.
  fs::path predictions_dir;
  bool write_metrics = true;
};
std::vector<metrics::FrameMetrics> cmd_eval(const config::RunConfig& config, std::ostream& out,
                                            const EvalOptions& options = {});

// Reconstructs the evaluation frames with the trained model; no scoring.
std::vector<fs::path> cmd_reconstruct(const config::RunConfig& config, std::ostream& out);

struct SweepRow {
  std::size_t k = 0;
  double rmse_xyz = 0.0;  // mean over frames
  double rmse_z = 0.0;    // mean over frames
  double seconds = 0.0;   // mean per-frame graph + inference wall time (best of repeats)
};
std::vector<SweepRow> cmd_sweep_k(const config::RunConfig& config, std::ostream& out);
void write_sweep_csv(const std::vector<SweepRow>& rows, const fs::path& path);

void cmd_info(const config::RunConfig& config, std::ostream& out);

}  // namespace beamgat::pipeline
