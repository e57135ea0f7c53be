#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "beamgat/errors.hpp"
#include "beamgat/knn_graph.hpp"

using namespace beamgat;
using namespace beamgat::graph;

namespace {

std::vector<Point3> random_points(std::size_t n, std::uint64_t seed, bool grid = false) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  std::uniform_int_distribution<int> g(-3, 3);
  std::vector<Point3> pts(n);
  for (auto& p : pts) {
    if (grid) {
      p = {double(g(rng)), double(g(rng)), double(g(rng))};  // lots of exact ties
    } else {
      p = {u(rng), u(rng), u(rng)};
    }
  }
  return pts;
}

}  // namespace

TEST(Knn, CollinearExample) {
  const std::vector<Point3> pts = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}};
  const auto g = build_knn(pts, 1, false);
  EXPECT_EQ(g.segment(0)[0], 1u);
  EXPECT_EQ(g.segment(3)[0], 2u);
  // Point 1 is equidistant from 0 and 2: lower index wins.
  EXPECT_EQ(g.segment(1)[0], 0u);
  EXPECT_EQ(g.segment(2)[0], 1u);
}

TEST(Knn, TieBreaksByLowerIndex) {
  const std::vector<Point3> pts = {{0, 0, 0}, {1, 0, 0}, {-1, 0, 0}};
  EXPECT_EQ(build_knn(pts, 1, false).segment(0)[0], 1u);
  const std::vector<Point3> swapped = {{0, 0, 0}, {-1, 0, 0}, {1, 0, 0}};
  EXPECT_EQ(build_knn(swapped, 1, false).segment(0)[0], 1u);
}

TEST(Knn, SelfLoopIsAppendedLast) {
  const auto pts = random_points(40, 1);
  const auto g = build_knn(pts, 5);
  ASSERT_EQ(g.offsets.size(), 41u);
  EXPECT_EQ(g.offsets.back(), g.edge_count());
  for (std::size_t i = 0; i < 40; ++i) {
    const auto seg = g.segment(i);
    ASSERT_EQ(seg.size(), 6u);
    EXPECT_EQ(seg.back(), i);
    std::set<std::size_t> uniq(seg.begin(), seg.end());
    EXPECT_EQ(uniq.size(), seg.size());
    for (std::size_t e = 1; e + 1 < seg.size(); ++e) {
      const double d0 = squared_distance(pts[i], pts[seg[e - 1]]);
      const double d1 = squared_distance(pts[i], pts[seg[e]]);
      EXPECT_TRUE(d0 < d1 || (d0 == d1 && seg[e - 1] < seg[e]));
    }
  }
}

TEST(Knn, MatchesBruteForceOnRandomClouds) {
  for (std::uint64_t trial = 0; trial < 100; ++trial) {
    const auto pts = random_points(64, trial);
    for (std::size_t k : {1u, 5u, 10u}) {
      ASSERT_EQ(build_knn(pts, k), brute_force_knn(pts, k)) << "trial " << trial << " k " << k;
    }
  }
}

TEST(Knn, MatchesBruteForceWithHeavyTies) {
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    const auto pts = random_points(300, trial, true);
    for (std::size_t k : {1u, 5u, 10u}) {
      ASSERT_EQ(build_knn(pts, k), brute_force_knn(pts, k)) << "trial " << trial << " k " << k;
    }
  }
}

TEST(Knn, Large512Cloud) {
  const auto pts = random_points(512, 99);
  EXPECT_EQ(build_knn(pts, 10), brute_force_knn(pts, 10));
}

TEST(Knn, FullyConnectedWhenKIsNMinusOne) {
  const auto pts = random_points(12, 3);
  const auto g = brute_force_knn(pts, 11, false);
  for (std::size_t i = 0; i < 12; ++i) {
    std::set<std::size_t> s(g.segment(i).begin(), g.segment(i).end());
    EXPECT_EQ(s.size(), 11u);
    EXPECT_EQ(s.count(i), 0u);
  }
  EXPECT_EQ(build_knn(pts, 11, false), g);
}

TEST(Knn, DuplicatePointsUseIndexOrder) {
  const std::vector<Point3> pts = {{1, 1, 1}, {0, 0, 0}, {1, 1, 1}, {1, 1, 1}, {5, 5, 5}};
  const auto g = build_knn(pts, 2, false);
  EXPECT_EQ(std::vector<std::size_t>(g.segment(0).begin(), g.segment(0).end()), (std::vector<std::size_t>{2, 3}));
  EXPECT_EQ(std::vector<std::size_t>(g.segment(3).begin(), g.segment(3).end()), (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(g, brute_force_knn(pts, 2, false));
}

TEST(Knn, DeterministicAndRejectsSmallClouds) {
  const auto pts = random_points(200, 8);
  EXPECT_EQ(build_knn(pts, 7), build_knn(pts, 7));
  EXPECT_THROW(build_knn(std::span<const Point3>(pts.data(), 5), 5), DataError);
  EXPECT_THROW(brute_force_knn(std::span<const Point3>(pts.data(), 5), 5), DataError);
  EXPECT_THROW(build_knn(pts, 0), ConfigError);
}

TEST(Knn, KdTreeNearestMatchesScan) {
  const auto pts = random_points(256, 4);
  const KdTree tree(pts);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-12, 12);
  for (int q = 0; q < 50; ++q) {
    const Point3 query{u(rng), u(rng), u(rng)};
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t i = 0; i < pts.size(); ++i) all.emplace_back(squared_distance(query, pts[i]), i);
    std::sort(all.begin(), all.end());
    all.resize(7);
    EXPECT_EQ(tree.nearest(query, 7), all);
  }
}

TEST(CoordinateSpaces, NominalZUsesBeamElevation) {
  PointCloud c;
  c.sensor = SensorSpec::desk16();
  c.points = {{3, 4, 0.0, 0, 2, true}, {1, 0, -5, 0, 15, false}};
  const auto xyz = coordinates(c, Space::kXyzFull);
  EXPECT_EQ(xyz[0][2], 0.0);
  const auto xy = coordinates(c, Space::kXyOnly);
  EXPECT_EQ(xy[1][2], 0.0);
  const auto nom = coordinates(c, Space::kXyNominalZ);
  EXPECT_NEAR(nom[0][2], 5.0 * std::tan(c.sensor->beam_elevation(2)), 1e-12);
  EXPECT_NEAR(nom[1][2], 1.0 * std::tan(c.sensor->beam_elevation(15)), 1e-12);
  EXPECT_EQ(nom[0][0], 3.0);
  EXPECT_EQ(parse_space("xy_plus_nominal_z"), Space::kXyNominalZ);
  EXPECT_EQ(to_string(Space::kXyzFull), "xyz_full");
  EXPECT_THROW(parse_space("xyz"), ConfigError);
  PointCloud bare = c;
  bare.sensor.reset();
  EXPECT_THROW(coordinates(bare, Space::kXyNominalZ), DataError);
}
