#include "beamgat/point_cloud.hpp"

#include <numbers>
#include <string>

#include "beamgat/errors.hpp"

namespace beamgat {

double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }

void SensorSpec::validate() const {
  if (beam_count < 2) throw ConfigError("sensor needs at least 2 beams, got " + std::to_string(beam_count));
  if (!(theta_min < theta_max)) throw ConfigError("sensor theta_min must be below theta_max");
}

SensorSpec SensorSpec::hdl64e() { return {64, deg2rad(-24.8), deg2rad(2.0), 1.73}; }

SensorSpec SensorSpec::desk16() { return {16, deg2rad(-24.8), deg2rad(2.0), 1.73}; }

}  // namespace beamgat
