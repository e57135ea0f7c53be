#include "beamgat/synth.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "beamgat/beam_model.hpp"
#include "beamgat/errors.hpp"
#include "beamgat/random.hpp"

namespace beamgat::synth {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Slab test; returns the entry distance along a unit direction from the
// origin, or +inf on a miss.
double ray_box(const Cartesian& d, const Box& box) {
  double t_near = 0.0, t_far = kInf;
  const double c[3] = {box.cx, box.cy, box.cz};
  const double h[3] = {box.sx / 2, box.sy / 2, box.sz / 2};
  const double dir[3] = {d.x, d.y, d.z};
  for (int a = 0; a < 3; ++a) {
    const double lo = c[a] - h[a], hi = c[a] + h[a];
    if (dir[a] == 0.0) {
      if (0.0 < lo || 0.0 > hi) return kInf;
      continue;
    }
    double t0 = lo / dir[a], t1 = hi / dir[a];
    if (t0 > t1) std::swap(t0, t1);
    t_near = std::max(t_near, t0);
    t_far = std::min(t_far, t1);
    if (t_near > t_far) return kInf;
  }
  return t_near > 0.0 ? t_near : kInf;
}

}  // namespace

void Scene::validate() const {
  if (ground_z && !(*ground_z < 0.0)) throw ConfigError("ground plane must lie below the sensor");
  for (const auto& b : boxes) {
    if (!(b.sx > 0 && b.sy > 0 && b.sz > 0)) throw ConfigError("box extents must be positive");
    if (ground_z && b.cz - b.sz / 2 < *ground_z - 1e-9) throw ConfigError("box extends below the ground");
  }
}

PointCloud raycast_scan(const Scene& scene, const SensorSpec& spec, const ScanOptions& options) {
  spec.validate();
  scene.validate();
  if (options.azimuth_steps < 8) throw ConfigError("raycast needs at least 8 azimuth steps");
  if (options.noise_std < 0.0) throw ConfigError("noise_std must be non-negative");
  if (!scene.ground_z && scene.boxes.empty()) throw DataError("scene has no surfaces");

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> noise(0.0, options.noise_std > 0 ? options.noise_std : 1.0);

  PointCloud cloud;
  cloud.sensor = spec;
  for (int b = 0; b < spec.beam_count; ++b) {
    const double theta = spec.beam_elevation(b);
    for (int m = 0; m < options.azimuth_steps; ++m) {
      const double phi = 2.0 * std::numbers::pi * m / options.azimuth_steps;
      const auto dir = cartesian_from_spherical(1.0, theta, phi);
      double best = kInf;
      double refl = 0.0;
      if (scene.ground_z && dir.z < 0.0) {
        best = *scene.ground_z / dir.z;
        refl = scene.ground_reflectance;
      }
      for (const auto& box : scene.boxes) {
        const double t = ray_box(dir, box);
        if (t < best) {
          best = t;
          refl = box.reflectance;
        }
      }
      if (!(best <= options.r_max)) continue;
      double r = best;
      if (options.noise_std > 0.0) r = std::max(0.0, r + noise(rng));
      const auto p = cartesian_from_spherical(r, theta, phi);
      cloud.points.push_back(Point{p.x, p.y, p.z, refl, b, false});
    }
  }
  if (cloud.empty()) throw DataError("raycast produced an empty scan");
  return cloud;
}

Scene random_scene(std::uint64_t seed, const BenchmarkOptions& options) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> count(options.min_boxes, options.max_boxes);
  std::uniform_real_distribution<double> range(6.0, 30.0);
  std::uniform_real_distribution<double> azimuth(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> footprint(1.0, 4.0);
  std::uniform_real_distribution<double> height(1.0, 3.0);
  std::uniform_real_distribution<double> refl(0.4, 0.9);

  Scene scene;
  scene.ground_z = options.ground_z;
  const int n = count(rng);
  for (int i = 0; i < n; ++i) {
    Box b;
    const double r = range(rng), a = azimuth(rng);
    b.cx = r * std::cos(a);
    b.cy = r * std::sin(a);
    b.sx = footprint(rng);
    b.sy = footprint(rng);
    b.sz = height(rng);
    b.cz = options.ground_z + b.sz / 2;
    b.reflectance = refl(rng);
    scene.boxes.push_back(b);
  }
  return scene;
}

std::vector<PointCloud> make_benchmark_set(std::size_t n_frames, std::uint64_t seed,
                                           const BenchmarkOptions& options) {
  if (n_frames == 0) throw ConfigError("benchmark set needs at least one frame");
  std::vector<PointCloud> frames;
  frames.reserve(n_frames);
  for (std::size_t i = 0; i < n_frames; ++i) {
    const auto sub = hash_combine(seed, i);
    auto scan = options.scan;
    scan.seed = hash_combine(sub, 1);
    auto cloud = raycast_scan(random_scene(sub, options), options.spec, scan);
    char id[32];
    std::snprintf(id, sizeof id, "frame_%04zu", i);
    cloud.frame_id = id;
    frames.push_back(std::move(cloud));
  }
  return frames;
}

}  // namespace beamgat::synth
