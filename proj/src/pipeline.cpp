#include "beamgat/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "beamgat/errors.hpp"
#include "beamgat/io.hpp"
#include "beamgat/random.hpp"
#include "beamgat/synth.hpp"

namespace beamgat::pipeline {
namespace {

using config::RunConfig;
using nlohmann::json;

constexpr const char* kStampFile = ".stamp";

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  if (!in) return {};
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  if (!out) throw DataError("cannot open " + p.string() + " for writing");
  out << text;
  if (!out) throw DataError("write failed: " + p.string());
}

// Config sections a stage's output depends on, serialized canonically.
std::string stamp_for(const RunConfig& c, std::initializer_list<const char*> sections) {
  const auto all = json::parse(config::to_json_text(c));
  json j = json::object();
  for (const auto* s : sections) j[s] = all.at(s);
  return j.dump();
}

std::string frames_stamp(const RunConfig& c) { return stamp_for(c, {"data", "sensor"}); }
std::string masked_stamp(const RunConfig& c) { return stamp_for(c, {"data", "sensor", "dropout"}); }

bool stamp_matches(const fs::path& dir, const std::string& stamp) {
  return fs::is_directory(dir) && slurp(dir / kStampFile) == stamp;
}

bool is_truth_file(const fs::path& p) { return p.stem().extension() == ".truth"; }

// Sorted files in `dir` with the given extension (truth sidecars excluded).
std::vector<fs::path> list_files(const fs::path& dir, const std::string& extension) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == extension && !is_truth_file(e.path())) {
      out.push_back(e.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Empties a stage directory of files this tool writes there.
void reset_stage_dir(const fs::path& dir) {
  fs::create_directories(dir);
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto ext = e.path().extension();
    if (e.is_regular_file() && (ext == ".csv" || ext == ".ply" || e.path().filename() == kStampFile)) {
      fs::remove(e.path());
    }
  }
}

fs::path truth_path_for(const fs::path& cloud_path) {
  auto p = cloud_path;
  p.replace_extension(".truth.csv");
  return p;
}

void ensure_writable_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw DataError("cannot create run directory " + dir.string());
  const auto probe = dir / ".write_probe";
  {
    std::ofstream out(probe);
    if (!out) throw DataError("run directory " + dir.string() + " is not writable");
  }
  fs::remove(probe, ec);
}

std::vector<PointCloud> read_source_frames(const RunConfig& c, std::ostream& out) {
  const auto paths = run_paths(c);
  std::vector<PointCloud> frames;
  if (c.data.source == "synth") {
    if (!stamp_matches(paths.frames, frames_stamp(c)) || list_files(paths.frames, ".csv").empty()) {
      out << "synthetic frames missing or stale; generating\n";
      cmd_synth(c, out);
    }
    for (const auto& p : list_files(paths.frames, ".csv")) {
      auto cloud = io::read_csv(p);
      cloud.frame_id = p.stem().string();
      frames.push_back(std::move(cloud));
    }
  } else if (c.data.source == "kitti") {
    for (const auto& p : list_files(c.data.input_dir, ".bin")) {
      auto r = io::read_kitti_bin(p);
      if (r.dropped_nonfinite > 0) {
        out << p.filename().string() << ": dropped " << r.dropped_nonfinite << " non-finite records\n";
      }
      r.cloud.frame_id = p.stem().string();
      frames.push_back(std::move(r.cloud));
    }
  } else {
    for (const auto& p : list_files(c.data.input_dir, ".csv")) {
      auto cloud = io::read_csv(p);
      cloud.frame_id = p.stem().string();
      frames.push_back(std::move(cloud));
    }
  }
  if (frames.empty()) throw DataError("no input frames found for source '" + c.data.source + "'");
  return frames;
}

// Range filter, subsample, beam assignment and masking for one frame.
std::optional<MaskedFrame> mask_frame(const PointCloud& raw, std::size_t index, const RunConfig& c,
                                      std::ostream& out) {
  const auto spec = c.sensor.spec();
  auto cloud = io::range_filter(raw, c.data.filter);
  cloud = io::subsample_uniform(cloud, c.data.frame_size,
                                hash_combine(hash_combine(c.data.seed, 0x73756273ULL), index));
  cloud.frame_id = raw.frame_id;
  if (cloud.size() < c.data.min_points) {
    out << raw.frame_id << ": skipped, " << cloud.size() << " points after filtering (need "
        << c.data.min_points << ")\n";
    return std::nullopt;
  }
  const bool all_beams = std::all_of(cloud.points.begin(), cloud.points.end(),
                                     [](const Point& p) { return p.beam.has_value(); });
  if (!all_beams) {
    cloud = estimate_beam_index(cloud, spec);
  } else {
    if (!cloud.sensor) cloud.sensor = spec;
    for (const auto& p : cloud.points) {
      if (*p.beam < 0 || *p.beam >= cloud.sensor->beam_count) {
        throw DataError(raw.frame_id + ": beam index " + std::to_string(*p.beam) + " outside the " +
                        std::to_string(cloud.sensor->beam_count) + "-beam sensor");
      }
    }
  }
  for (auto& p : cloud.points) p.masked = false;
  return apply_channel_dropout(cloud, c.dropout.pattern());
}

std::vector<std::size_t> eval_indices(const RunConfig& c, std::size_t n) {
  if (c.eval.frames == "all") {
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    return all;
  }
  return train::split_frames(n, c.train.split_fraction).validation;
}

gat::GatModel load_checked_model(const RunConfig& c, const fs::path& path) {
  if (!fs::exists(path)) throw DataError("no trained model at " + path.string() + "; run train first");
  auto model = gat::load_model(path);
  if (model.config.input_features != c.model.input_features) {
    std::string a, b;
    for (const auto& f : model.config.input_features) a += (a.empty() ? "" : ",") + f;
    for (const auto& f : c.model.input_features) b += (b.empty() ? "" : ",") + f;
    throw ConfigError("model was trained on features [" + a + "] but the config asks for [" + b + "]");
  }
  return model;
}

void append_log_row(std::ostream& log, const train::EpochLog& e) {
  log << e.epoch << ',' << io::format_double(e.train_loss) << ',' << io::format_double(e.val_loss) << ','
      << io::format_double(e.seconds) << '\n';
  log.flush();
}

}  // namespace

RunPaths run_paths(const RunConfig& c) {
  RunPaths p;
  p.root = c.run_dir;
  p.frames = p.root / "frames";
  p.masked = p.root / "masked";
  p.recon = p.root / "recon";
  p.model = p.root / "model.bin";
  p.train_log = p.root / "train_log.csv";
  p.metrics = p.root / "metrics.csv";
  p.summary = p.root / "summary.csv";
  p.cdf = p.root / "cdf.csv";
  p.sweep = p.root / "sweep_k.csv";
  return p;
}

void begin_command(const RunConfig& c, const std::string& command) {
  c.validate();
  if (c.data.source != "synth" && !fs::is_directory(c.data.input_dir)) {
    throw DataError("input directory " + c.data.input_dir + " does not exist");
  }
  const auto paths = run_paths(c);
  ensure_writable_dir(paths.root);
  write_text(paths.config_echo(command), config::to_json_text(c));
}

std::vector<fs::path> cmd_synth(const RunConfig& c, std::ostream& out) {
  if (c.data.n_frames == 0) throw ConfigError("data.n_frames must be at least 1");
  const auto paths = run_paths(c);
  synth::BenchmarkOptions opts;
  opts.spec = c.sensor.spec();
  opts.scan.azimuth_steps = c.data.azimuth_steps;
  opts.scan.noise_std = c.data.noise_std;
  opts.ground_z = c.data.ground_z;
  opts.min_boxes = c.data.min_boxes;
  opts.max_boxes = c.data.max_boxes;
  const auto frames = synth::make_benchmark_set(c.data.n_frames, c.data.seed, opts);

  reset_stage_dir(paths.frames);
  std::vector<fs::path> written;
  for (const auto& f : frames) {
    const auto p = paths.frames / (f.frame_id + ".csv");
    io::write_csv(f, p);
    out << f.frame_id << ": " << f.size() << " points\n";
    written.push_back(p);
  }
  write_text(paths.frames / kStampFile, frames_stamp(c));
  out << "wrote " << written.size() << " frames to " << paths.frames.string() << "\n";
  return written;
}

void write_truth(const MaskedFrame& frame, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << "index,z\n";
  for (std::size_t k = 0; k < frame.masked_count(); ++k) {
    out << frame.masked_indices[k] << ',' << io::format_double(frame.truth_z[k]) << '\n';
  }
  if (!out) throw DataError("write failed: " + path.string());
}

MaskedFrame read_masked_frame(const fs::path& cloud_path, const fs::path& truth_path) {
  auto cloud = io::read_csv(cloud_path);
  cloud.frame_id = cloud_path.stem().string();
  std::ifstream in(truth_path);
  if (!in) throw DataError("missing truth sidecar " + truth_path.string());
  std::string line;
  if (!std::getline(in, line) || line != "index,z") {
    throw FormatError(truth_path.string() + ": expected header 'index,z'");
  }
  std::vector<double> truth;
  std::vector<std::size_t> indices;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    try {
      if (comma == std::string::npos) throw std::invalid_argument("no comma");
      std::size_t used = 0;
      indices.push_back(std::stoull(line.substr(0, comma), &used));
      const auto zs = line.substr(comma + 1);
      truth.push_back(std::stod(zs, &used));
      if (used != zs.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw FormatError(truth_path.string() + ":" + std::to_string(lineno) + ": bad row '" + line + "'");
    }
  }
  auto frame = assemble_masked_frame(std::move(cloud), std::move(truth));
  if (frame.masked_indices != indices) {
    throw DataError(truth_path.string() + ": indices do not match the masked points of " + cloud_path.string());
  }
  return frame;
}

std::vector<fs::path> cmd_dropout(const RunConfig& c, std::ostream& out) {
  const auto paths = run_paths(c);
  const auto dropped = dropped_beams(c.dropout.pattern(), c.sensor.spec().beam_count);
  out << "dropped beams:";
  for (int b : dropped) out << ' ' << b;
  out << "\n";

  const auto frames = read_source_frames(c, out);
  reset_stage_dir(paths.masked);
  std::vector<fs::path> written;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto masked = mask_frame(frames[i], i, c, out);
    if (!masked) continue;
    const auto p = paths.masked / (frames[i].frame_id + ".csv");
    io::write_csv(masked->cloud, p);
    write_truth(*masked, truth_path_for(p));
    out << frames[i].frame_id << ": " << masked->cloud.size() << " points, " << masked->masked_count()
        << " masked\n";
    written.push_back(p);
  }
  if (written.empty()) throw DataError("every frame was skipped; nothing to mask");
  write_text(paths.masked / kStampFile, masked_stamp(c));
  return written;
}

std::vector<MaskedFrame> load_masked_frames(const RunConfig& c, std::ostream& out) {
  const auto paths = run_paths(c);
  if (!stamp_matches(paths.masked, masked_stamp(c)) || list_files(paths.masked, ".csv").empty()) {
    out << "masked frames missing or stale; running dropout\n";
    cmd_dropout(c, out);
  }
  std::vector<MaskedFrame> frames;
  for (const auto& p : list_files(paths.masked, ".csv")) {
    frames.push_back(read_masked_frame(p, truth_path_for(p)));
    frames.back().cloud.sensor = c.sensor.spec();
  }
  return frames;
}

train::TrainResult cmd_train(const RunConfig& c, std::ostream& out, const TrainOptions& options) {
  const auto paths = run_paths(c);
  const auto masked = load_masked_frames(c, out);
  const auto split = train::split_frames(masked.size(), c.train.split_fraction);
  if (split.train.empty()) throw DataError("empty train split: " + std::to_string(masked.size()) + " usable frames");
  std::vector<train::PreparedFrame> tr, va;
  for (auto i : split.train) tr.push_back(train::prepare_frame(masked[i], c.model, c.graph));
  for (auto i : split.validation) va.push_back(train::prepare_frame(masked[i], c.model, c.graph));

  gat::GatModel initial;
  int start_epoch = 0;
  if (options.resume) {
    if (!fs::exists(paths.model)) throw DataError("cannot resume: no checkpoint at " + paths.model.string());
    auto file = gat::load_model_file(paths.model);
    if (!(file.model.config == c.model)) throw ConfigError("checkpoint model config differs from the run config");
    initial = std::move(file.model);
    start_epoch = file.epochs_completed;
    out << "resuming after epoch " << start_epoch << "\n";
  } else {
    initial = gat::init_params(c.model, hash_combine(c.train.seed, 0x6d6f64656cULL));
  }

  std::ofstream log(paths.train_log, options.resume ? std::ios::app : std::ios::trunc);
  if (!log) throw DataError("cannot open " + paths.train_log.string() + " for writing");
  if (!options.resume || fs::file_size(paths.train_log) == 0) log << "epoch,train_loss,val_loss,seconds\n";

  out << "training on " << tr.size() << " frames, validating on " << va.size() << "\n";
  const auto result = train::fit(tr, va, initial, c.train, start_epoch, [&](const train::EpochLog& e) {
    append_log_row(log, e);
    out << "epoch " << e.epoch << ": train_loss " << io::format_double(e.train_loss) << ", val_rmse_z "
        << std::sqrt(e.val_loss) << " m, " << std::fixed << std::setprecision(1) << e.seconds << " s\n"
        << std::defaultfloat << std::setprecision(6);
  });
  gat::save_model(result.model, paths.model, result.epochs_completed);
  out << "best epoch " << result.best_epoch << ", val_rmse_z " << std::sqrt(result.best_val_loss)
      << " m; saved " << paths.model.string() << "\n";
  return result;
}

std::vector<metrics::FrameMetrics> cmd_eval(const RunConfig& c, std::ostream& out, const EvalOptions& options) {
  const auto paths = run_paths(c);
  const bool external = !options.predictions_dir.empty();
  if (external && !fs::is_directory(options.predictions_dir)) {
    throw DataError("predictions directory " + options.predictions_dir.string() + " does not exist");
  }
  gat::GatModel model;
  if (!external) model = load_checked_model(c, paths.model);

  const auto masked = load_masked_frames(c, out);
  const auto indices = eval_indices(c, masked.size());
  if (indices.empty()) throw DataError("no frames to evaluate");
  if (c.eval.write_reconstructions) reset_stage_dir(paths.recon);

  std::vector<metrics::FrameMetrics> rows;
  std::vector<double> all_pred, all_truth;
  for (auto i : indices) {
    const auto& frame = masked[i];
    const auto& id = frame.cloud.frame_id;
    std::vector<double> pred;
    double runtime = 0.0;
    if (external) {
      const auto p = options.predictions_dir / (id + ".csv");
      const auto recon = io::read_csv(p);
      if (recon.size() != frame.cloud.size()) {
        throw DataError(p.string() + ": " + std::to_string(recon.size()) + " points, expected " +
                        std::to_string(frame.cloud.size()));
      }
      for (auto k : frame.masked_indices) pred.push_back(recon[k].z);
    } else {
      const auto t0 = std::chrono::steady_clock::now();
      const auto prepared = train::prepare_frame(frame, model.config, c.graph);
      pred = train::predict_masked_z(model, prepared);
      runtime = seconds_since(t0);
    }
    auto m = metrics::evaluate_frame(frame, pred, runtime, c.eval.tau);
    m.frame_id = id;
    rows.push_back(m);
    all_pred.insert(all_pred.end(), pred.begin(), pred.end());
    all_truth.insert(all_truth.end(), frame.truth_z.begin(), frame.truth_z.end());
    if (c.eval.write_reconstructions) {
      const auto recon = metrics::reconstructed_cloud(frame, pred);
      io::write_csv(recon, paths.recon / (id + ".csv"));
      io::write_ply(recon, paths.recon / (id + ".ply"));
    }
    out << id << ": rmse_z " << m.rmse_z << " m, accuracy " << m.accuracy << ", rmse_xyz " << m.rmse_xyz
        << " m, chamfer " << m.chamfer << " m, " << m.runtime_s << " s\n";
  }
  if (options.write_metrics) {
    metrics::write_metrics_csv(rows, paths.metrics);
    metrics::write_summary_csv(metrics::aggregate(rows), paths.summary);
    std::vector<double> edges;
    const auto steps = static_cast<long>(std::llround(c.eval.cdf_max / c.eval.cdf_step));
    for (long s = 0; s <= steps; ++s) edges.push_back(static_cast<double>(s) * c.eval.cdf_step);
    metrics::write_cdf_csv(metrics::error_cdf(all_pred, all_truth, edges), paths.cdf);
    const auto agg = metrics::aggregate(rows);
    out << "mean over " << rows.size() << " frames: rmse_z " << agg.rmse_z.mean << " m, accuracy "
        << agg.accuracy.mean << ", rmse_xyz " << agg.rmse_xyz.mean << " m\n";
  }
  return rows;
}

std::vector<fs::path> cmd_reconstruct(const RunConfig& c, std::ostream& out) {
  auto cfg = c;
  cfg.eval.write_reconstructions = true;
  EvalOptions options;
  options.write_metrics = false;
  const auto rows = cmd_eval(cfg, out, options);
  std::vector<fs::path> written;
  for (const auto& r : rows) written.push_back(run_paths(c).recon / (r.frame_id + ".ply"));
  return written;
}

std::vector<SweepRow> cmd_sweep_k(const RunConfig& c, std::ostream& out) {
  const auto paths = run_paths(c);
  const auto masked = load_masked_frames(c, out);
  const auto indices = eval_indices(c, masked.size());
  if (indices.empty()) throw DataError("no frames to evaluate");
  for (auto k : c.sweep.ks) {
    for (auto i : indices) {
      if (k >= masked[i].cloud.size()) {
        throw ConfigError("k=" + std::to_string(k) + " is not below the size of frame " + masked[i].cloud.frame_id);
      }
    }
  }
  gat::GatModel trained;
  if (c.sweep.mode == "reevaluate") trained = load_checked_model(c, paths.model);

  std::vector<SweepRow> rows;
  for (auto k : c.sweep.ks) {
    auto cfg = c;
    cfg.graph.k = k;
    gat::GatModel model = trained;
    if (c.sweep.mode == "retrain") {
      std::vector<train::PreparedFrame> prepared;
      for (const auto& f : masked) prepared.push_back(train::prepare_frame(f, cfg.model, cfg.graph));
      model = train::train(prepared, cfg.model, cfg.train).model;
    }
    SweepRow row;
    row.k = k;
    for (auto i : indices) {
      double best = std::numeric_limits<double>::infinity();
      std::vector<double> pred;
      for (int r = 0; r < c.sweep.repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto prepared = train::prepare_frame(masked[i], model.config, cfg.graph);
        pred = train::predict_masked_z(model, prepared);
        best = std::min(best, seconds_since(t0));
      }
      const auto m = metrics::evaluate_frame(masked[i], pred, best, c.eval.tau);
      row.rmse_xyz += m.rmse_xyz;
      row.rmse_z += m.rmse_z;
      row.seconds += best;
    }
    const auto n = static_cast<double>(indices.size());
    row.rmse_xyz /= n;
    row.rmse_z /= n;
    row.seconds /= n;
    out << "k=" << k << ": rmse_xyz " << row.rmse_xyz << " m, rmse_z " << row.rmse_z << " m, " << row.seconds
        << " s/frame\n";
    rows.push_back(row);
  }
  write_sweep_csv(rows, paths.sweep);
  return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << "k,rmse_xyz,rmse_z,seconds\n";
  for (const auto& r : rows) {
    out << r.k << ',' << io::format_double(r.rmse_xyz) << ',' << io::format_double(r.rmse_z) << ','
        << io::format_double(r.seconds) << '\n';
  }
  if (!out) throw DataError("write failed: " + path.string());
}

void cmd_info(const RunConfig& c, std::ostream& out) {
  const auto paths = run_paths(c);
  const auto spec = c.sensor.spec();
  out << "run directory: " << paths.root.string() << "\n";
  out << "sensor: " << c.sensor.preset << ", " << spec.beam_count << " beams over [" << c.sensor.theta_min_deg
      << ", " << c.sensor.theta_max_deg << "] deg\n";
  out << "dropped beams:";
  for (int b : dropped_beams(c.dropout.pattern(), spec.beam_count)) out << ' ' << b;
  out << "\n";
  out << "graph: k=" << c.graph.k << ", space " << graph::to_string(c.graph.space) << "\n";
  out << "model: " << c.model.layers << " layers x " << c.model.heads << " heads x " << c.model.head_width
      << ", features";
  for (const auto& f : c.model.input_features) out << ' ' << f;
  out << "\n";
  out << "synthetic frames: " << list_files(paths.frames, ".csv").size() << "\n";
  out << "masked frames: " << list_files(paths.masked, ".csv").size()
      << (stamp_matches(paths.masked, masked_stamp(c)) ? "" : " (stale or absent for this config)") << "\n";
  if (fs::exists(paths.model)) {
    const auto file = gat::load_model_file(paths.model);
    out << "checkpoint: " << file.model.parameter_count() << " parameters, " << file.epochs_completed
        << " epochs completed\n";
  } else {
    out << "checkpoint: none\n";
  }
}

}  // namespace beamgat::pipeline
