#include "beamgat/knn_graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "beamgat/errors.hpp"

namespace beamgat::graph {
namespace {

using Candidate = std::pair<double, std::size_t>;  // lexicographic order is the tie rule

void check_k(std::size_t n, std::size_t k) {
  if (k == 0) throw ConfigError("k must be at least 1");
  if (n <= k) {
    throw DataError("kNN graph needs more than k=" + std::to_string(k) + " points, got " +
                    std::to_string(n));
  }
}

KnnGraph assemble(std::size_t n, std::size_t k, bool self_loops,
                  const std::vector<std::vector<Candidate>>& per_node) {
  KnnGraph g;
  g.k = k;
  g.self_loops = self_loops;
  const std::size_t seg = k + (self_loops ? 1 : 0);
  g.offsets.resize(n + 1);
  g.neighbors.reserve(n * seg);
  for (std::size_t i = 0; i < n; ++i) {
    g.offsets[i] = i * seg;
    for (const auto& c : per_node[i]) g.neighbors.push_back(c.second);
    if (self_loops) g.neighbors.push_back(i);
  }
  g.offsets[n] = n * seg;
  return g;
}

}  // namespace

std::string to_string(Space space) {
  switch (space) {
    case Space::kXyzFull: return "xyz_full";
    case Space::kXyOnly: return "xy_only";
    case Space::kXyNominalZ: return "xy_plus_nominal_z";
  }
  return "?";
}

Space parse_space(const std::string& name) {
  if (name == "xyz_full") return Space::kXyzFull;
  if (name == "xy_only") return Space::kXyOnly;
  if (name == "xy_plus_nominal_z") return Space::kXyNominalZ;
  throw ConfigError("unknown graph space '" + name + "'");
}

std::vector<Point3> coordinates(const PointCloud& cloud, Space space) {
  std::vector<Point3> pts;
  pts.reserve(cloud.size());
  if (space == Space::kXyNominalZ && !cloud.sensor) {
    throw DataError("nominal-z graph space needs a sensor spec on frame " + cloud.frame_id);
  }
  for (const auto& p : cloud.points) {
    switch (space) {
      case Space::kXyzFull: pts.push_back({p.x, p.y, p.z}); break;
      case Space::kXyOnly: pts.push_back({p.x, p.y, 0.0}); break;
      case Space::kXyNominalZ: {
        if (!p.beam) throw DataError("nominal-z graph space needs beam indices");
        const double rxy = std::hypot(p.x, p.y);
        pts.push_back({p.x, p.y, rxy * std::tan(cloud.sensor->beam_elevation(*p.beam))});
        break;
      }
    }
  }
  return pts;
}

KdTree::KdTree(std::span<const Point3> points, std::size_t leaf_size)
    : points_(points.begin(), points.end()), order_(points.size()), leaf_size_(std::max<std::size_t>(1, leaf_size)) {
  std::iota(order_.begin(), order_.end(), 0);
  if (!points_.empty()) build(0, points_.size());
}

std::size_t KdTree::build(std::size_t begin, std::size_t end) {
  const std::size_t id = nodes_.size();
  nodes_.push_back(Node{begin, end, npos, npos, 0, 0.0});
  if (end - begin <= leaf_size_) return id;

  Point3 lo = points_[order_[begin]], hi = lo;
  for (auto i = begin; i < end; ++i) {
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], points_[order_[i]][a]);
      hi[a] = std::max(hi[a], points_[order_[i]][a]);
    }
  }
  int axis = 0;
  for (int a = 1; a < 3; ++a)
    if (hi[a] - lo[a] > hi[axis] - lo[axis]) axis = a;
  if (hi[axis] == lo[axis]) return id;  // all coincident: keep as a leaf

  const auto mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                   order_.begin() + static_cast<std::ptrdiff_t>(mid),
                   order_.begin() + static_cast<std::ptrdiff_t>(end), [&](std::size_t a, std::size_t b) {
                     const double ca = points_[a][axis], cb = points_[b][axis];
                     return ca != cb ? ca < cb : a < b;
                   });
  const double split = points_[order_[mid]][axis];
  const auto left = build(begin, mid);
  const auto right = build(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  nodes_[id].axis = axis;
  nodes_[id].split = split;
  return id;
}

void KdTree::search(std::size_t node_id, const Point3& q, std::size_t k, std::size_t exclude,
                    std::vector<Candidate>& heap) const {
  const Node& node = nodes_[node_id];
  if (node.left == npos) {
    for (auto i = node.begin; i < node.end; ++i) {
      const auto idx = order_[i];
      if (idx == exclude) continue;
      const Candidate c{squared_distance(q, points_[idx]), idx};
      if (heap.size() < k) {
        heap.push_back(c);
        std::push_heap(heap.begin(), heap.end());
      } else if (c < heap.front()) {
        std::pop_heap(heap.begin(), heap.end());
        heap.back() = c;
        std::push_heap(heap.begin(), heap.end());
      }
    }
    return;
  }
  // Left holds coordinates <= split, right holds >= split.
  const double diff = q[node.axis] - node.split;
  const auto near = diff <= 0.0 ? node.left : node.right;
  const auto far = diff <= 0.0 ? node.right : node.left;
  search(near, q, k, exclude, heap);
  // Visit the far side unless every point there is strictly farther than the
  // current worst candidate; equal distances can still win on index.
  if (heap.size() < k || diff * diff <= heap.front().first) search(far, q, k, exclude, heap);
}

std::vector<Candidate> KdTree::nearest(const Point3& query, std::size_t k, std::size_t exclude) const {
  std::vector<Candidate> heap;
  if (k == 0 || points_.empty()) return heap;
  heap.reserve(k + 1);
  search(0, query, k, exclude, heap);
  std::sort_heap(heap.begin(), heap.end());
  return heap;
}

KnnGraph build_knn(std::span<const Point3> points, std::size_t k, bool add_self_loops) {
  const auto n = points.size();
  check_k(n, k);
  const KdTree tree(points);
  std::vector<std::vector<Candidate>> per_node(n);
  for (std::size_t i = 0; i < n; ++i) per_node[i] = tree.nearest(points[i], k, i);
  return assemble(n, k, add_self_loops, per_node);
}

KnnGraph brute_force_knn(std::span<const Point3> points, std::size_t k, bool add_self_loops) {
  const auto n = points.size();
  check_k(n, k);
  std::vector<std::vector<Candidate>> per_node(n);
  std::vector<Candidate> all;
  for (std::size_t i = 0; i < n; ++i) {
    all.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) all.emplace_back(squared_distance(points[i], points[j]), j);
    }
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end());
    per_node[i].assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k));
  }
  return assemble(n, k, add_self_loops, per_node);
}

KnnGraph build_knn(const PointCloud& cloud, std::size_t k, Space space, bool add_self_loops) {
  auto g = build_knn(coordinates(cloud, space), k, add_self_loops);
  g.space = space;
  return g;
}

KnnGraph brute_force_knn(const PointCloud& cloud, std::size_t k, Space space, bool add_self_loops) {
  auto g = brute_force_knn(coordinates(cloud, space), k, add_self_loops);
  g.space = space;
  return g;
}

void write_csr(const KnnGraph& graph, const std::filesystem::path& offsets_path,
               const std::filesystem::path& neighbors_path) {
  std::ofstream off(offsets_path), nb(neighbors_path);
  if (!off || !nb) throw DataError("cannot write CSR dump to " + offsets_path.string());
  off << "offset\n";
  for (auto o : graph.offsets) off << o << '\n';
  nb << "neighbor\n";
  for (auto j : graph.neighbors) nb << j << '\n';
  if (!off || !nb) throw DataError("CSR dump write failed");
}

}  // namespace beamgat::graph
