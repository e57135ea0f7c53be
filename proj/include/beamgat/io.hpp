#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "beamgat/point_cloud.hpp"

namespace beamgat::io {

struct KittiReadResult {
  PointCloud cloud;
  std::size_t dropped_nonfinite = 0;
};

// KITTI Velodyne scan: packed little-endian float32 records (x, y, z, reflectance).
KittiReadResult read_kitti_bin(const std::filesystem::path& path);
void write_kitti_bin(const PointCloud& cloud, const std::filesystem::path& path);

// Axis-aligned acceptance box for range_filter.
struct Bounds {
  double x_min = -80.0, x_max = 80.0;
  double y_min = -80.0, y_max = 80.0;
  double z_min = -10.0, z_max = 4.0;
};

struct RangeFilter {
  double r_min = 2.0;
  double r_max = 80.0;
  Bounds bounds;
};

// Keeps points whose 3D range lies in [r_min, r_max] and that fall inside the
// box. Order is preserved.
PointCloud range_filter(const PointCloud& cloud, const RangeFilter& filter = {});

// Indices of a seeded uniform subset of size min(n, count), in ascending order.
std::vector<std::size_t> subsample_indices(std::size_t count, std::size_t n, std::uint64_t seed);
PointCloud subsample_uniform(const PointCloud& cloud, std::size_t n, std::uint64_t seed);

inline constexpr std::size_t kDefaultFrameSize = 4096;
inline constexpr std::size_t kMinValidPoints = 1024;

// CSV header: x,y,z,reflectance,beam,masked. Unset beams are written as empty
// fields. Values use the shortest representation that round-trips exactly.
void write_csv(const PointCloud& cloud, const std::filesystem::path& path);
PointCloud read_csv(const std::filesystem::path& path);

// ASCII PLY with x, y, z, reflectance, beam (-1 when unset), masked.
void write_ply(const PointCloud& cloud, const std::filesystem::path& path);

// FNV-1a over every point field; stable identifier for a frame's contents.
std::uint64_t checksum(const PointCloud& cloud);

// Shortest round-trip decimal form of a double.
std::string format_double(double v);

}  // namespace beamgat::io
