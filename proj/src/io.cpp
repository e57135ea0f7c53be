#include "beamgat/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "beamgat/errors.hpp"
#include "beamgat/random.hpp"

namespace beamgat::io {
namespace {

static_assert(std::endian::native == std::endian::little, "KITTI reader assumes a little-endian host");

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  return out;
}

void check_written(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw DataError("write failed: " + path.string());
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      parts.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  parts.push_back(cur);
  return parts;
}

double parse_double(const std::string& s, const std::filesystem::path& path, std::size_t line) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw FormatError(path.string() + ":" + std::to_string(line) + ": bad number '" + s + "'");
  }
  return v;
}

long parse_int(const std::string& s, const std::filesystem::path& path, std::size_t line) {
  long v = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw FormatError(path.string() + ":" + std::to_string(line) + ": bad integer '" + s + "'");
  }
  return v;
}

}  // namespace

KittiReadResult read_kitti_bin(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() % 16 != 0) {
    throw FormatError(path.string() + ": size " + std::to_string(bytes.size()) +
                      " is not a multiple of 16 bytes");
  }
  KittiReadResult result;
  result.cloud.frame_id = path.stem().string();
  const std::size_t n = bytes.size() / 16;
  result.cloud.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    float rec[4];
    std::memcpy(rec, bytes.data() + 16 * i, sizeof rec);
    if (!std::isfinite(rec[0]) || !std::isfinite(rec[1]) || !std::isfinite(rec[2]) ||
        !std::isfinite(rec[3])) {
      ++result.dropped_nonfinite;
      continue;
    }
    result.cloud.points.push_back(Point{rec[0], rec[1], rec[2], rec[3], std::nullopt, false});
  }
  return result;
}

void write_kitti_bin(const PointCloud& cloud, const std::filesystem::path& path) {
  auto out = open_out(path, std::ios::binary);
  for (const auto& p : cloud.points) {
    const float rec[4] = {static_cast<float>(p.x), static_cast<float>(p.y), static_cast<float>(p.z),
                          static_cast<float>(p.reflectance)};
    out.write(reinterpret_cast<const char*>(rec), sizeof rec);
  }
  check_written(out, path);
}

PointCloud range_filter(const PointCloud& cloud, const RangeFilter& filter) {
  if (!(filter.r_min < filter.r_max)) throw ConfigError("range filter needs r_min < r_max");
  PointCloud out;
  out.frame_id = cloud.frame_id;
  out.sensor = cloud.sensor;
  const auto& b = filter.bounds;
  for (const auto& p : cloud.points) {
    const double r = std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z);
    if (r < filter.r_min || r > filter.r_max) continue;
    if (p.x < b.x_min || p.x > b.x_max || p.y < b.y_min || p.y > b.y_max || p.z < b.z_min ||
        p.z > b.z_max) {
      continue;
    }
    out.points.push_back(p);
  }
  return out;
}

std::vector<std::size_t> subsample_indices(std::size_t count, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ConfigError("subsample size must be at least 1");
  std::vector<std::size_t> idx(count);
  std::iota(idx.begin(), idx.end(), 0);
  if (count <= n) return idx;
  // Each index draws a key from (seed, index); the n smallest keys win.
  std::vector<std::uint64_t> key(count);
  for (std::size_t i = 0; i < count; ++i) key[i] = hash_combine(seed, i);
  std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n), idx.end(),
                   [&](std::size_t a, std::size_t b) {
                     return key[a] != key[b] ? key[a] < key[b] : a < b;
                   });
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  return idx;
}

PointCloud subsample_uniform(const PointCloud& cloud, std::size_t n, std::uint64_t seed) {
  PointCloud out;
  out.frame_id = cloud.frame_id;
  out.sensor = cloud.sensor;
  for (auto i : subsample_indices(cloud.size(), n, seed)) out.points.push_back(cloud.points[i]);
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void write_csv(const PointCloud& cloud, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "x,y,z,reflectance,beam,masked\n";
  for (const auto& p : cloud.points) {
    out << format_double(p.x) << ',' << format_double(p.y) << ',' << format_double(p.z) << ','
        << format_double(p.reflectance) << ',';
    if (p.beam) out << *p.beam;
    out << ',' << (p.masked ? 1 : 0) << '\n';
  }
  check_written(out, path);
}

PointCloud read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "x,y,z,reflectance,beam,masked") {
    throw FormatError(path.string() + ": unexpected header '" + line + "'");
  }
  PointCloud cloud;
  cloud.frame_id = path.stem().string();
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split(line, ',');
    if (f.size() != 6) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected 6 fields");
    }
    Point p;
    p.x = parse_double(f[0], path, lineno);
    p.y = parse_double(f[1], path, lineno);
    p.z = parse_double(f[2], path, lineno);
    p.reflectance = parse_double(f[3], path, lineno);
    if (!f[4].empty()) p.beam = static_cast<int>(parse_int(f[4], path, lineno));
    const long m = parse_int(f[5], path, lineno);
    if (m != 0 && m != 1) throw FormatError(path.string() + ":" + std::to_string(lineno) + ": masked must be 0/1");
    p.masked = m == 1;
    cloud.points.push_back(p);
  }
  return cloud;
}

void write_ply(const PointCloud& cloud, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "ply\nformat ascii 1.0\n";
  if (!cloud.frame_id.empty()) out << "comment frame " << cloud.frame_id << '\n';
  out << "element vertex " << cloud.size() << '\n'
      << "property double x\nproperty double y\nproperty double z\n"
      << "property double reflectance\nproperty int beam\nproperty uchar masked\n"
      << "end_header\n";
  for (const auto& p : cloud.points) {
    out << format_double(p.x) << ' ' << format_double(p.y) << ' ' << format_double(p.z) << ' '
        << format_double(p.reflectance) << ' ' << (p.beam ? *p.beam : -1) << ' '
        << (p.masked ? 1 : 0) << '\n';
  }
  check_written(out, path);
}

std::uint64_t checksum(const PointCloud& cloud) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& p : cloud.points) {
    mix(&p.x, sizeof p.x);
    mix(&p.y, sizeof p.y);
    mix(&p.z, sizeof p.z);
    mix(&p.reflectance, sizeof p.reflectance);
    const int beam = p.beam ? *p.beam : -1;
    mix(&beam, sizeof beam);
    const unsigned char m = p.masked;
    mix(&m, 1);
  }
  return h;
}

}  // namespace beamgat::io
