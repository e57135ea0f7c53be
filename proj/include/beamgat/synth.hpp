#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "beamgat/point_cloud.hpp"

namespace beamgat::synth {

struct Box {
  double cx = 0.0, cy = 0.0, cz = 0.0;  // center
  double sx = 1.0, sy = 1.0, sz = 1.0;  // full extents
  double reflectance = 0.6;
};

// Sensor at the origin looking out over an optional ground plane z = ground_z
// and a set of axis-aligned boxes.
struct Scene {
  std::optional<double> ground_z = -1.73;
  double ground_reflectance = 0.3;
  std::vector<Box> boxes;

  void validate() const;
};

struct ScanOptions {
  int azimuth_steps = 360;
  double noise_std = 0.0;  // Gaussian noise on range, meters
  std::uint64_t seed = 0;
  double r_max = 80.0;
};

// One ray per (beam, azimuth): beam b at its nominal elevation, azimuth
// 2*pi*m/M. Nearest hit within r_max is kept; misses produce no point. Beam
// indices are exact. Throws DataError if nothing is hit.
PointCloud raycast_scan(const Scene& scene, const SensorSpec& spec, const ScanOptions& options);

struct BenchmarkOptions {
  SensorSpec spec = SensorSpec::desk16();
  ScanOptions scan{360, 0.01, 0, 80.0};
  double ground_z = -1.73;
  int min_boxes = 3;
  int max_boxes = 6;
};

Scene random_scene(std::uint64_t seed, const BenchmarkOptions& options);

// n frames with randomized box layouts over a fixed ground plane. Frame i
// uses a sub-seed derived from (seed, i).
std::vector<PointCloud> make_benchmark_set(std::size_t n_frames, std::uint64_t seed,
                                           const BenchmarkOptions& options = {});

}  // namespace beamgat::synth
