#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "beamgat/beam_model.hpp"
#include "beamgat/knn_graph.hpp"

namespace beamgat::metrics {

inline constexpr double kDefaultTau = 0.10;

// Elevation errors over masked points only. All throw std::invalid_argument on
// empty or mismatched inputs.
double rmse_z(std::span<const double> pred, std::span<const double> truth);
double mae_z(std::span<const double> pred, std::span<const double> truth);
// Fraction of points with |pred - truth| <= tau.
double accuracy_at(std::span<const double> pred, std::span<const double> truth, double tau = kDefaultTau);

// Root mean squared 3D displacement over all points of two aligned clouds.
double rmse_xyz(const PointCloud& reconstructed, const PointCloud& original);

// Symmetric mean nearest-neighbor Euclidean distance:
// 0.5 * (mean_a min_b |a-b| + mean_b min_a |a-b|).
double chamfer(std::span<const graph::Point3> a, std::span<const graph::Point3> b);
double chamfer_brute_force(std::span<const graph::Point3> a, std::span<const graph::Point3> b);

struct CdfPoint {
  double threshold = 0.0;
  double fraction = 0.0;
};

// Cumulative fraction of points with |pred - truth| <= each threshold.
// `edges` must be ascending; a final point at the maximum error (fraction 1)
// is appended when the last edge does not already reach it.
std::vector<CdfPoint> error_cdf(std::span<const double> pred, std::span<const double> truth,
                                std::span<const double> edges);
std::vector<double> default_cdf_edges();

struct FrameMetrics {
  std::string frame_id;
  std::size_t points = 0;
  std::size_t masked = 0;
  double rmse_xyz = 0.0;
  double rmse_z = 0.0;
  double mae_z = 0.0;
  double accuracy = 0.0;
  double chamfer = 0.0;
  double runtime_s = 0.0;
};

// Scores predicted elevations for a masked frame (one per masked point, in
// masked order).
FrameMetrics evaluate_frame(const MaskedFrame& frame, std::span<const double> predicted_masked_z,
                            double runtime_s, double tau = kDefaultTau);

// Masked frame with predictions written back into z; mask flags kept.
PointCloud reconstructed_cloud(const MaskedFrame& frame, std::span<const double> predicted_masked_z);

struct Spread {
  double mean = 0.0, std = 0.0, min = 0.0, max = 0.0;
};

struct Aggregate {
  Spread rmse_xyz, rmse_z, mae_z, accuracy, chamfer, runtime_s;
};

Aggregate aggregate(std::span<const FrameMetrics> frames);

// One row per frame followed by a single "mean" row. Columns:
// frame,points,masked,rmse_xyz,rmse_z,mae_z,accuracy,chamfer,runtime_s
void write_metrics_csv(std::span<const FrameMetrics> frames, const std::filesystem::path& path);
// metric,mean,std,min,max,rel_spread_pct
void write_summary_csv(const Aggregate& agg, const std::filesystem::path& path);
void write_cdf_csv(std::span<const CdfPoint> cdf, const std::filesystem::path& path);

}  // namespace beamgat::metrics
