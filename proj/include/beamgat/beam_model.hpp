#pragma once

#include <cstdint>
#include <set>
#include <vector>

#include "beamgat/point_cloud.hpp"

namespace beamgat {

struct Cartesian {
  double x = 0.0, y = 0.0, z = 0.0;
};

struct Spherical {
  double r = 0.0;      // range
  double theta = 0.0;  // elevation above the horizontal plane
  double phi = 0.0;    // azimuth, atan2(y, x)
};

Cartesian cartesian_from_spherical(double r, double theta, double phi);
// Throws std::domain_error for the zero vector.
Spherical spherical_from_cartesian(double x, double y, double z);

// Quantizes each point's elevation into a beam index in [0, B). Returns a
// copy with `beam` set and `sensor` attached.
PointCloud estimate_beam_index(const PointCloud& cloud, const SensorSpec& spec);
int beam_for_elevation(double theta, const SensorSpec& spec);

enum class DropoutKind { kEveryNth, kRandomFraction, kContiguousBand };

// every_nth:       drops beams b with b % n == phase_offset % n.
// random_fraction: drops round(fraction * B) beams chosen by `seed` (at least one).
// contiguous_band: drops n consecutive beams starting at phase_offset.
struct DropoutPattern {
  DropoutKind kind = DropoutKind::kEveryNth;
  int n = 4;
  double fraction = 0.25;
  int phase_offset = 0;
  std::uint64_t seed = 0;

  static DropoutPattern every_nth(int n, int offset = 0);
  static DropoutPattern random_fraction(double fraction, std::uint64_t seed);
  static DropoutPattern contiguous_band(int first, int width);
};

// Validates the pattern against B and returns the dropped beam set.
std::set<int> dropped_beams(const DropoutPattern& pattern, int beam_count);

struct MaskedFrame {
  PointCloud cloud;              // masked points carry z == kMaskedZ
  std::vector<double> truth_z;   // one per masked point, in point order
  std::vector<std::size_t> masked_indices;
  std::set<int> dropped_beams;

  std::size_t masked_count() const { return truth_z.size(); }
  double masked_fraction() const;
};

inline constexpr double kMaskedZ = 0.0;

// Masks the elevation of every point on a dropped beam. x, y, reflectance and
// beam are untouched. Requires beams assigned and a sensor spec on the cloud.
MaskedFrame apply_channel_dropout(const PointCloud& cloud, const DropoutPattern& pattern);

// Restores ground-truth z and clears the mask flags.
PointCloud unmask(const MaskedFrame& frame);

// Rebuilds the frame bookkeeping from a cloud whose `masked` flags are set and
// the matching truth values (as read back from disk).
MaskedFrame assemble_masked_frame(PointCloud cloud, std::vector<double> truth_z);

// Keeps the listed points (ascending indices), carrying their truth values.
MaskedFrame select_points(const MaskedFrame& frame, const std::vector<std::size_t>& indices);

}  // namespace beamgat
