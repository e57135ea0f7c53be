#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "beamgat/point_cloud.hpp"

namespace beamgat::graph {

using Point3 = std::array<double, 3>;

// Coordinate space used for neighbor search.
//   kXyzFull:      (x, y, z) as stored; masked points use their sentinel z.
//   kXyOnly:       (x, y, 0).
//   kXyNominalZ:   (x, y, r_xy * tan(theta_b)) from the beam's nominal
//                  elevation; available for dropped beams too.
enum class Space { kXyzFull, kXyOnly, kXyNominalZ };

std::string to_string(Space space);
Space parse_space(const std::string& name);

struct GraphOptions {
  std::size_t k = 10;
  Space space = Space::kXyNominalZ;
  bool self_loops = true;
};

std::vector<Point3> coordinates(const PointCloud& cloud, Space space);

// Squared Euclidean distance; the single definition shared by every search
// path so that ties compare identically.
inline double squared_distance(const Point3& a, const Point3& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  const double dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

// Directed kNN graph in CSR form, grouped by destination: segment i holds the
// sources j in N(i), nearest first (ties by lower index), followed by i itself
// when self-loops are on.
struct KnnGraph {
  std::vector<std::size_t> offsets;
  std::vector<std::size_t> neighbors;
  std::size_t k = 0;
  Space space = Space::kXyNominalZ;
  bool self_loops = true;

  std::size_t node_count() const { return offsets.empty() ? 0 : offsets.size() - 1; }
  std::size_t edge_count() const { return neighbors.size(); }
  std::span<const std::size_t> segment(std::size_t i) const {
    return {neighbors.data() + offsets[i], offsets[i + 1] - offsets[i]};
  }
  bool operator==(const KnnGraph&) const = default;
};

// Static 3D kd-tree answering exact k-nearest and nearest-neighbor queries
// with the (distance, index) ordering.
class KdTree {
 public:
  explicit KdTree(std::span<const Point3> points, std::size_t leaf_size = 8);

  // The k nearest points to `query`, skipping index `exclude` (pass npos to
  // keep all). Sorted by (squared distance, index).
  std::vector<std::pair<double, std::size_t>> nearest(const Point3& query, std::size_t k,
                                                      std::size_t exclude = npos) const;
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  std::size_t size() const { return points_.size(); }

 private:
  struct Node {
    std::size_t begin, end;   // range into order_
    std::size_t left, right;  // child nodes, npos for leaves
    int axis;
    double split;
  };
  std::size_t build(std::size_t begin, std::size_t end);
  void search(std::size_t node, const Point3& q, std::size_t k, std::size_t exclude,
              std::vector<std::pair<double, std::size_t>>& heap) const;

  std::vector<Point3> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
  std::size_t leaf_size_;
};

KnnGraph build_knn(std::span<const Point3> points, std::size_t k, bool add_self_loops = true);
KnnGraph brute_force_knn(std::span<const Point3> points, std::size_t k, bool add_self_loops = true);

KnnGraph build_knn(const PointCloud& cloud, std::size_t k, Space space, bool add_self_loops = true);
KnnGraph brute_force_knn(const PointCloud& cloud, std::size_t k, Space space,
                         bool add_self_loops = true);

inline KnnGraph build_knn(const PointCloud& cloud, const GraphOptions& options) {
  return build_knn(cloud, options.k, options.space, options.self_loops);
}

// Debug dump: one offset per line, one neighbor per line.
void write_csr(const KnnGraph& graph, const std::filesystem::path& offsets_path,
               const std::filesystem::path& neighbors_path);

}  // namespace beamgat::graph
