#include "beamgat/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "beamgat/errors.hpp"
#include "beamgat/io.hpp"

namespace beamgat::metrics {
namespace {

void check_pair(std::span<const double> pred, std::span<const double> truth) {
  if (pred.empty()) throw std::invalid_argument("metric over an empty point set");
  if (pred.size() != truth.size()) throw std::invalid_argument("prediction and truth lengths differ");
}

bool within(double pred, double truth, double tau) { return std::abs(pred - truth) <= tau; }

Spread spread(std::span<const FrameMetrics> frames, double FrameMetrics::*field) {
  Spread s;
  if (frames.empty()) return s;
  s.min = s.max = frames[0].*field;
  double sum = 0.0;
  for (const auto& f : frames) {
    sum += f.*field;
    s.min = std::min(s.min, f.*field);
    s.max = std::max(s.max, f.*field);
  }
  s.mean = sum / static_cast<double>(frames.size());
  double sq = 0.0;
  for (const auto& f : frames) sq += (f.*field - s.mean) * (f.*field - s.mean);
  s.std = std::sqrt(sq / static_cast<double>(frames.size()));
  return s;
}

}  // namespace

double rmse_z(std::span<const double> pred, std::span<const double> truth) {
  check_pair(pred, truth);
  double sq = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sq += (pred[i] - truth[i]) * (pred[i] - truth[i]);
  return std::sqrt(sq / static_cast<double>(pred.size()));
}

double mae_z(std::span<const double> pred, std::span<const double> truth) {
  check_pair(pred, truth);
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += std::abs(pred[i] - truth[i]);
  return sum / static_cast<double>(pred.size());
}

double accuracy_at(std::span<const double> pred, std::span<const double> truth, double tau) {
  check_pair(pred, truth);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += within(pred[i], truth[i], tau);
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

double rmse_xyz(const PointCloud& reconstructed, const PointCloud& original) {
  if (reconstructed.size() != original.size()) throw std::invalid_argument("rmse_xyz: point counts differ");
  if (original.empty()) throw std::invalid_argument("rmse_xyz over an empty cloud");
  double sq = 0.0;
  for (std::size_t i = 0; i < original.size(); ++i) {
    const auto& a = reconstructed[i];
    const auto& b = original[i];
    sq += (a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) + (a.z - b.z) * (a.z - b.z);
  }
  return std::sqrt(sq / static_cast<double>(original.size()));
}

double chamfer(std::span<const graph::Point3> a, std::span<const graph::Point3> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("chamfer distance needs two non-empty sets");
  const graph::KdTree ta(a), tb(b);
  double sum_a = 0.0, sum_b = 0.0;
  for (const auto& p : a) sum_a += std::sqrt(tb.nearest(p, 1).front().first);
  for (const auto& p : b) sum_b += std::sqrt(ta.nearest(p, 1).front().first);
  return 0.5 * (sum_a / static_cast<double>(a.size()) + sum_b / static_cast<double>(b.size()));
}

double chamfer_brute_force(std::span<const graph::Point3> a, std::span<const graph::Point3> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("chamfer distance needs two non-empty sets");
  auto one_way = [](std::span<const graph::Point3> from, std::span<const graph::Point3> to) {
    double sum = 0.0;
    for (const auto& p : from) {
      double best = graph::squared_distance(p, to[0]);
      for (const auto& q : to) best = std::min(best, graph::squared_distance(p, q));
      sum += std::sqrt(best);
    }
    return sum / static_cast<double>(from.size());
  };
  return 0.5 * (one_way(a, b) + one_way(b, a));
}

std::vector<CdfPoint> error_cdf(std::span<const double> pred, std::span<const double> truth,
                                std::span<const double> edges) {
  check_pair(pred, truth);
  if (!std::is_sorted(edges.begin(), edges.end())) throw std::invalid_argument("CDF edges must be ascending");
  std::vector<CdfPoint> cdf;
  double max_err = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) max_err = std::max(max_err, std::abs(pred[i] - truth[i]));
  for (double t : edges) cdf.push_back({t, accuracy_at(pred, truth, t)});
  if (cdf.empty() || cdf.back().fraction < 1.0) cdf.push_back({max_err, 1.0});
  return cdf;
}

std::vector<double> default_cdf_edges() {
  std::vector<double> edges;
  for (int i = 0; i <= 50; ++i) edges.push_back(i * 0.01);
  return edges;
}

PointCloud reconstructed_cloud(const MaskedFrame& frame, std::span<const double> predicted_masked_z) {
  if (predicted_masked_z.size() != frame.masked_count()) {
    throw std::invalid_argument("one prediction per masked point required");
  }
  PointCloud out = frame.cloud;
  for (std::size_t k = 0; k < frame.masked_indices.size(); ++k) {
    out.points[frame.masked_indices[k]].z = predicted_masked_z[k];
  }
  return out;
}

FrameMetrics evaluate_frame(const MaskedFrame& frame, std::span<const double> predicted_masked_z,
                            double runtime_s, double tau) {
  FrameMetrics m;
  m.frame_id = frame.cloud.frame_id;
  m.points = frame.cloud.size();
  m.masked = frame.masked_count();
  m.rmse_z = rmse_z(predicted_masked_z, frame.truth_z);
  m.mae_z = mae_z(predicted_masked_z, frame.truth_z);
  m.accuracy = accuracy_at(predicted_masked_z, frame.truth_z, tau);

  auto original = unmask(frame);
  auto recon = reconstructed_cloud(frame, predicted_masked_z);
  for (auto& p : recon.points) p.masked = false;
  m.rmse_xyz = rmse_xyz(recon, original);

  std::vector<graph::Point3> a, b;
  for (std::size_t k = 0; k < frame.masked_indices.size(); ++k) {
    const auto& p = frame.cloud[frame.masked_indices[k]];
    a.push_back({p.x, p.y, predicted_masked_z[k]});
    b.push_back({p.x, p.y, frame.truth_z[k]});
  }
  m.chamfer = chamfer(a, b);
  m.runtime_s = runtime_s;
  return m;
}

Aggregate aggregate(std::span<const FrameMetrics> frames) {
  return {spread(frames, &FrameMetrics::rmse_xyz), spread(frames, &FrameMetrics::rmse_z),
          spread(frames, &FrameMetrics::mae_z),    spread(frames, &FrameMetrics::accuracy),
          spread(frames, &FrameMetrics::chamfer),  spread(frames, &FrameMetrics::runtime_s)};
}

void write_metrics_csv(std::span<const FrameMetrics> frames, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  using io::format_double;
  out << "frame,points,masked,rmse_xyz,rmse_z,mae_z,accuracy,chamfer,runtime_s\n";
  std::size_t points = 0, masked = 0;
  for (const auto& f : frames) {
    out << f.frame_id << ',' << f.points << ',' << f.masked << ',' << format_double(f.rmse_xyz) << ','
        << format_double(f.rmse_z) << ',' << format_double(f.mae_z) << ',' << format_double(f.accuracy)
        << ',' << format_double(f.chamfer) << ',' << format_double(f.runtime_s) << '\n';
    points += f.points;
    masked += f.masked;
  }
  const auto agg = aggregate(frames);
  out << "mean," << points << ',' << masked << ',' << format_double(agg.rmse_xyz.mean) << ','
      << format_double(agg.rmse_z.mean) << ',' << format_double(agg.mae_z.mean) << ','
      << format_double(agg.accuracy.mean) << ',' << format_double(agg.chamfer.mean) << ','
      << format_double(agg.runtime_s.mean) << '\n';
  if (!out) throw DataError("write failed: " + path.string());
}

void write_summary_csv(const Aggregate& agg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "metric,mean,std,min,max,rel_spread_pct\n";
  auto row = [&](const char* name, const Spread& s) {
    const double rel = s.mean != 0.0 ? 100.0 * s.std / std::abs(s.mean) : 0.0;
    out << name << ',' << io::format_double(s.mean) << ',' << io::format_double(s.std) << ','
        << io::format_double(s.min) << ',' << io::format_double(s.max) << ',' << io::format_double(rel)
        << '\n';
  };
  row("rmse_xyz", agg.rmse_xyz);
  row("rmse_z", agg.rmse_z);
  row("mae_z", agg.mae_z);
  row("accuracy", agg.accuracy);
  row("chamfer", agg.chamfer);
  row("runtime_s", agg.runtime_s);
  if (!out) throw DataError("write failed: " + path.string());
}

void write_cdf_csv(std::span<const CdfPoint> cdf, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "threshold_m,fraction\n";
  for (const auto& p : cdf) out << io::format_double(p.threshold) << ',' << io::format_double(p.fraction) << '\n';
  if (!out) throw DataError("write failed: " + path.string());
}

}  // namespace beamgat::metrics
