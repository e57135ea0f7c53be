#include "beamgat/beam_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "beamgat/errors.hpp"
#include "beamgat/random.hpp"

namespace beamgat {

Cartesian cartesian_from_spherical(double r, double theta, double phi) {
  if (r < 0.0) throw std::domain_error("range must be non-negative");
  const double c = std::cos(theta);
  return {r * c * std::cos(phi), r * c * std::sin(phi), r * std::sin(theta)};
}

Spherical spherical_from_cartesian(double x, double y, double z) {
  const double r = std::sqrt(x * x + y * y + z * z);
  if (r == 0.0) throw std::domain_error("spherical coordinates undefined at the origin");
  return {r, std::asin(std::clamp(z / r, -1.0, 1.0)), std::atan2(y, x)};
}

int beam_for_elevation(double theta, const SensorSpec& spec) {
  const double b = std::floor((theta - spec.theta_min) / spec.beam_spacing());
  return static_cast<int>(std::clamp(b, 0.0, static_cast<double>(spec.beam_count - 1)));
}

PointCloud estimate_beam_index(const PointCloud& cloud, const SensorSpec& spec) {
  spec.validate();
  PointCloud out = cloud;
  out.sensor = spec;
  for (auto& p : out.points) {
    const double r = std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z);
    // A return at the origin has no elevation; put it on the lowest beam.
    const double theta = r > 0.0 ? std::asin(std::clamp(p.z / r, -1.0, 1.0)) : spec.theta_min;
    p.beam = beam_for_elevation(theta, spec);
  }
  return out;
}

DropoutPattern DropoutPattern::every_nth(int n, int offset) {
  DropoutPattern p;
  p.kind = DropoutKind::kEveryNth;
  p.n = n;
  p.phase_offset = offset;
  return p;
}

DropoutPattern DropoutPattern::random_fraction(double fraction, std::uint64_t seed) {
  DropoutPattern p;
  p.kind = DropoutKind::kRandomFraction;
  p.fraction = fraction;
  p.seed = seed;
  return p;
}

DropoutPattern DropoutPattern::contiguous_band(int first, int width) {
  DropoutPattern p;
  p.kind = DropoutKind::kContiguousBand;
  p.phase_offset = first;
  p.n = width;
  return p;
}

std::set<int> dropped_beams(const DropoutPattern& pattern, int beam_count) {
  if (beam_count < 2) throw ConfigError("dropout needs at least 2 beams");
  std::set<int> beams;
  switch (pattern.kind) {
    case DropoutKind::kEveryNth: {
      if (pattern.n < 2) throw ConfigError("every_nth dropout needs n >= 2");
      if (pattern.phase_offset < 0) throw ConfigError("phase offset must be non-negative");
      const int phase = pattern.phase_offset % pattern.n;
      for (int b = phase; b < beam_count; b += pattern.n) beams.insert(b);
      break;
    }
    case DropoutKind::kRandomFraction: {
      if (!(pattern.fraction > 0.0 && pattern.fraction < 1.0)) {
        throw ConfigError("random_fraction must lie in (0, 1)");
      }
      const auto count = std::max<long>(1, std::lround(pattern.fraction * beam_count));
      std::vector<int> order(static_cast<std::size_t>(beam_count));
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(), [&](int a, int b) {
        const auto ka = hash_combine(pattern.seed, static_cast<std::uint64_t>(a));
        const auto kb = hash_combine(pattern.seed, static_cast<std::uint64_t>(b));
        return ka != kb ? ka < kb : a < b;
      });
      beams.insert(order.begin(), order.begin() + count);
      break;
    }
    case DropoutKind::kContiguousBand: {
      if (pattern.n < 1 || pattern.phase_offset < 0 || pattern.phase_offset + pattern.n > beam_count) {
        throw ConfigError("contiguous band must lie within [0, " + std::to_string(beam_count) + ")");
      }
      for (int b = pattern.phase_offset; b < pattern.phase_offset + pattern.n; ++b) beams.insert(b);
      break;
    }
  }
  if (beams.empty()) throw ConfigError("dropout pattern drops no beams");
  if (static_cast<int>(beams.size()) >= beam_count) {
    throw ConfigError("dropout pattern would remove every beam");
  }
  return beams;
}

double MaskedFrame::masked_fraction() const {
  return cloud.empty() ? 0.0 : static_cast<double>(masked_count()) / static_cast<double>(cloud.size());
}

MaskedFrame apply_channel_dropout(const PointCloud& cloud, const DropoutPattern& pattern) {
  if (!cloud.sensor) throw DataError("frame " + cloud.frame_id + " has no sensor spec");
  MaskedFrame frame;
  frame.dropped_beams = dropped_beams(pattern, cloud.sensor->beam_count);
  frame.cloud = cloud;
  for (std::size_t i = 0; i < frame.cloud.size(); ++i) {
    auto& p = frame.cloud.points[i];
    if (!p.beam) throw DataError("frame " + cloud.frame_id + " has points without a beam index");
    if (p.masked) throw DataError("frame " + cloud.frame_id + " is already masked");
    if (frame.dropped_beams.count(*p.beam)) {
      frame.truth_z.push_back(p.z);
      frame.masked_indices.push_back(i);
      p.z = kMaskedZ;
      p.masked = true;
    }
  }
  return frame;
}

PointCloud unmask(const MaskedFrame& frame) {
  PointCloud out = frame.cloud;
  for (std::size_t k = 0; k < frame.masked_indices.size(); ++k) {
    auto& p = out.points[frame.masked_indices[k]];
    p.z = frame.truth_z[k];
    p.masked = false;
  }
  return out;
}

MaskedFrame assemble_masked_frame(PointCloud cloud, std::vector<double> truth_z) {
  MaskedFrame frame;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    if (!p.masked) continue;
    frame.masked_indices.push_back(i);
    if (p.beam) frame.dropped_beams.insert(*p.beam);
  }
  if (frame.masked_indices.size() != truth_z.size()) {
    throw DataError("frame " + cloud.frame_id + ": " + std::to_string(frame.masked_indices.size()) +
                    " masked points but " + std::to_string(truth_z.size()) + " truth values");
  }
  frame.cloud = std::move(cloud);
  frame.truth_z = std::move(truth_z);
  return frame;
}

MaskedFrame select_points(const MaskedFrame& frame, const std::vector<std::size_t>& indices) {
  MaskedFrame out;
  out.cloud.frame_id = frame.cloud.frame_id;
  out.cloud.sensor = frame.cloud.sensor;
  out.dropped_beams = frame.dropped_beams;
  std::size_t k = 0;  // cursor into masked_indices
  for (auto i : indices) {
    if (i >= frame.cloud.size()) throw std::out_of_range("select_points: index out of range");
    while (k < frame.masked_indices.size() && frame.masked_indices[k] < i) ++k;
    const auto& p = frame.cloud.points[i];
    if (p.masked) {
      out.masked_indices.push_back(out.cloud.size());
      out.truth_z.push_back(frame.truth_z[k]);
    }
    out.cloud.points.push_back(p);
  }
  return out;
}

}  // namespace beamgat
