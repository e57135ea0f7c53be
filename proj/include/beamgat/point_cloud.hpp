#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace beamgat {

// Vertical geometry of a spinning LiDAR. Beam b covers elevations
// [theta_min + b*dtheta, theta_min + (b+1)*dtheta) with dtheta = fov / B.
struct SensorSpec {
  int beam_count = 64;
  double theta_min = 0.0;  // radians
  double theta_max = 0.0;  // radians
  double sensor_height = 1.73;

  double beam_spacing() const { return (theta_max - theta_min) / beam_count; }
  // Nominal (center) elevation of beam b.
  double beam_elevation(int beam) const { return theta_min + (beam + 0.5) * beam_spacing(); }
  void validate() const;

  // Velodyne HDL-64E: 64 beams over [-24.8 deg, +2.0 deg].
  static SensorSpec hdl64e();
  // Desk-scale synthetic sensor: same field of view, 16 beams.
  static SensorSpec desk16();

  bool operator==(const SensorSpec&) const = default;
};

struct Point {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double reflectance = 0.0;
  std::optional<int> beam;
  bool masked = false;

  bool operator==(const Point&) const = default;
};

struct PointCloud {
  std::vector<Point> points;
  std::string frame_id;
  std::optional<SensorSpec> sensor;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  const Point& operator[](std::size_t i) const { return points[i]; }
  Point& operator[](std::size_t i) { return points[i]; }
};

double deg2rad(double deg);

}  // namespace beamgat
