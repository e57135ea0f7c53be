#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include "beamgat/errors.hpp"
#include "beamgat/io.hpp"

namespace fs = std::filesystem;
using namespace beamgat;

namespace {

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("beamgat_io_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

// Independent little-endian float32 encoder; does not go through the library.
void write_le_floats(const fs::path& path, const std::vector<float>& values) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  ASSERT_NE(f, nullptr);
  for (float v : values) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    const unsigned char bytes[4] = {static_cast<unsigned char>(bits & 0xff),
                                    static_cast<unsigned char>((bits >> 8) & 0xff),
                                    static_cast<unsigned char>((bits >> 16) & 0xff),
                                    static_cast<unsigned char>((bits >> 24) & 0xff)};
    std::fwrite(bytes, 1, 4, f);
  }
  std::fclose(f);
}

PointCloud random_cloud(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  PointCloud c;
  c.frame_id = "rand";
  for (std::size_t i = 0; i < n; ++i) {
    Point p{u(rng), u(rng), u(rng) / 10.0, std::abs(u(rng)) / 50.0, std::nullopt, false};
    if (i % 3 == 0) p.beam = static_cast<int>(i % 16);
    p.masked = i % 4 == 1;
    c.points.push_back(p);
  }
  return c;
}

}  // namespace

TEST(KittiBin, ReadsCraftedRecords) {
  TempDir dir;
  write_le_floats(dir / "two.bin", {1, 2, 3, 0.5f, 4, 5, 6, 0.25f});
  ASSERT_EQ(fs::file_size(dir / "two.bin"), 32u);
  const auto r = io::read_kitti_bin(dir / "two.bin");
  ASSERT_EQ(r.cloud.size(), 2u);
  EXPECT_EQ(r.dropped_nonfinite, 0u);
  EXPECT_EQ(r.cloud[0].x, 1.0);
  EXPECT_EQ(r.cloud[0].y, 2.0);
  EXPECT_EQ(r.cloud[0].z, 3.0);
  EXPECT_EQ(r.cloud[0].reflectance, 0.5);
  EXPECT_EQ(r.cloud[1].x, 4.0);
  EXPECT_EQ(r.cloud[1].reflectance, 0.25);
  for (const auto& p : r.cloud.points) {
    EXPECT_FALSE(p.beam.has_value());
    EXPECT_FALSE(p.masked);
  }
}

TEST(KittiBin, EmptyFileGivesEmptyCloud) {
  TempDir dir;
  write_le_floats(dir / "empty.bin", {});
  EXPECT_TRUE(io::read_kitti_bin(dir / "empty.bin").cloud.empty());
}

TEST(KittiBin, TruncatedFileIsFormatError) {
  TempDir dir;
  std::ofstream(dir / "odd.bin", std::ios::binary).write("0123456789abcdefg", 17);
  EXPECT_THROW(io::read_kitti_bin(dir / "odd.bin"), FormatError);
}

TEST(KittiBin, MissingFileIsDataError) {
  EXPECT_THROW(io::read_kitti_bin("/nonexistent/beamgat/none.bin"), DataError);
}

TEST(KittiBin, NonFiniteRecordsAreDroppedAndCounted) {
  TempDir dir;
  const float nan = std::numeric_limits<float>::quiet_NaN();
  const float inf = std::numeric_limits<float>::infinity();
  write_le_floats(dir / "bad.bin", {1, 1, 1, 0, nan, 0, 0, 0, 2, 2, 2, 0, 0, inf, 0, 0});
  const auto r = io::read_kitti_bin(dir / "bad.bin");
  EXPECT_EQ(r.cloud.size(), 2u);
  EXPECT_EQ(r.dropped_nonfinite, 2u);
  EXPECT_EQ(r.cloud[1].x, 2.0);
}

TEST(KittiBin, WriteReadRoundTripAtFloatPrecision) {
  TempDir dir;
  const auto c = random_cloud(50, 3);
  io::write_kitti_bin(c, dir / "rt.bin");
  const auto back = io::read_kitti_bin(dir / "rt.bin").cloud;
  ASSERT_EQ(back.size(), c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_EQ(back[i].x, static_cast<double>(static_cast<float>(c[i].x)));
    EXPECT_EQ(back[i].z, static_cast<double>(static_cast<float>(c[i].z)));
  }
}

TEST(RangeFilter, RemovesOriginAndKeepsOrder) {
  PointCloud c;
  c.points = {{0, 0, 0, 0}, {5, 0, 0, 0.1}, {1, 1, 0, 0}, {0, 10, -2, 0.2}, {90, 0, 0, 0}, {0, 30, 0, 0.3}};
  const auto f = io::range_filter(c);
  ASSERT_EQ(f.size(), 3u);
  EXPECT_EQ(f[0].x, 5.0);
  EXPECT_EQ(f[1].y, 10.0);
  EXPECT_EQ(f[2].y, 30.0);
}

TEST(RangeFilter, AllInsideIsIdentity) {
  PointCloud c;
  c.frame_id = "in";
  for (int i = 0; i < 20; ++i) c.points.push_back({3.0 + i, -2.0, 0.5, 0.1 * (i % 10)});
  const auto f = io::range_filter(c);
  EXPECT_EQ(f.points, c.points);
  EXPECT_EQ(f.frame_id, "in");
}

TEST(RangeFilter, BoxBoundsApply) {
  PointCloud c;
  c.points = {{10, 0, 5, 0}, {10, 0, -11, 0}, {10, 0, 3.9, 0}, {-79.9, 0, 0, 0}};
  const auto f = io::range_filter(c);
  ASSERT_EQ(f.size(), 2u);
  EXPECT_EQ(f[0].z, 3.9);
  EXPECT_EQ(f[1].x, -79.9);
}

TEST(RangeFilter, RejectsInvertedRange) {
  io::RangeFilter rf;
  rf.r_min = 10;
  rf.r_max = 5;
  EXPECT_THROW(io::range_filter(PointCloud{}, rf), ConfigError);
}

TEST(Subsample, SmallCloudIsIdentity) {
  const auto c = random_cloud(100, 1);
  EXPECT_EQ(io::subsample_uniform(c, 100, 7).points, c.points);
  EXPECT_EQ(io::subsample_uniform(c, 1000, 7).points, c.points);
}

TEST(Subsample, ZeroTargetIsRejected) {
  EXPECT_THROW(io::subsample_uniform(random_cloud(10, 1), 0, 1), ConfigError);
}

TEST(Subsample, DeterministicAndOrderPreserving) {
  const auto c = random_cloud(5000, 2);
  const auto a = io::subsample_indices(c.size(), 300, 42);
  const auto b = io::subsample_indices(c.size(), 300, 42);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, io::subsample_indices(c.size(), 300, 43));
  ASSERT_EQ(a.size(), 300u);
  EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
  EXPECT_EQ(std::adjacent_find(a.begin(), a.end()), a.end());
  const auto s = io::subsample_uniform(c, 300, 42);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(s[i], c[a[i]]);
}

TEST(Subsample, FullScaleFrameGivesExactlyDefaultSize) {
  const auto c = random_cloud(120000, 5);
  const auto s = io::subsample_uniform(c, io::kDefaultFrameSize, 9);
  EXPECT_EQ(s.size(), 4096u);
}

TEST(Subsample, RoughlyUniformOverIndexRange) {
  const auto idx = io::subsample_indices(100000, 10000, 11);
  std::size_t low = 0;
  for (auto i : idx) low += i < 50000;
  EXPECT_NEAR(static_cast<double>(low) / 10000.0, 0.5, 0.03);
}

TEST(Csv, RoundTripIsExact) {
  TempDir dir;
  auto c = random_cloud(200, 4);
  c.points[0].x = 0.1 + 0.2;
  c.points[1].z = -1e-300;
  io::write_csv(c, dir / "c.csv");
  const auto back = io::read_csv(dir / "c.csv");
  ASSERT_EQ(back.size(), c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_NEAR(back[i].x, c[i].x, 1e-9);
    EXPECT_NEAR(back[i].y, c[i].y, 1e-9);
    EXPECT_NEAR(back[i].z, c[i].z, 1e-9);
    EXPECT_EQ(back[i], c[i]);
  }
}

TEST(Csv, EmptyCloudWritesHeaderOnly) {
  TempDir dir;
  io::write_csv(PointCloud{}, dir / "e.csv");
  std::ifstream in(dir / "e.csv");
  std::string line;
  ASSERT_TRUE(std::getline(in, line));
  EXPECT_EQ(line, "x,y,z,reflectance,beam,masked");
  EXPECT_FALSE(std::getline(in, line));
  EXPECT_TRUE(io::read_csv(dir / "e.csv").empty());
}

TEST(Csv, MaskedFlagIsZeroOrOne) {
  TempDir dir;
  PointCloud c;
  c.points = {{1, 2, 3, 0.5, 4, true}, {1, 2, 3, 0.5, std::nullopt, false}};
  io::write_csv(c, dir / "m.csv");
  std::ifstream in(dir / "m.csv");
  std::string header, a, b;
  std::getline(in, header);
  std::getline(in, a);
  std::getline(in, b);
  EXPECT_EQ(a, "1,2,3,0.5,4,1");
  EXPECT_EQ(b, "1,2,3,0.5,,0");
}

TEST(Csv, MalformedInputIsFormatError) {
  TempDir dir;
  std::ofstream(dir / "bad.csv") << "x,y,z,reflectance,beam,masked\n1,2,three,0,,0\n";
  EXPECT_THROW(io::read_csv(dir / "bad.csv"), FormatError);
  std::ofstream(dir / "hdr.csv") << "a,b,c\n";
  EXPECT_THROW(io::read_csv(dir / "hdr.csv"), FormatError);
  std::ofstream(dir / "flag.csv") << "x,y,z,reflectance,beam,masked\n1,2,3,0,,2\n";
  EXPECT_THROW(io::read_csv(dir / "flag.csv"), FormatError);
}

TEST(Csv, UnwritablePathMentionsPath) {
  try {
    io::write_csv(PointCloud{}, "/nonexistent/dir/out.csv");
    FAIL() << "expected an exception";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/dir/out.csv"), std::string::npos);
  }
}

TEST(Ply, HeaderDeclaresAllProperties) {
  TempDir dir;
  PointCloud c;
  c.points = {{1, 2, 3, 0.5, 7, true}, {4, 5, 6, 0.25, std::nullopt, false}};
  io::write_ply(c, dir / "c.ply");
  std::ifstream in(dir / "c.ply");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_EQ(text.rfind("ply\nformat ascii 1.0\n", 0), 0u);
  for (const char* prop : {"x", "y", "z", "reflectance", "beam", "masked"}) {
    EXPECT_NE(text.find(std::string(" ") + prop + "\n"), std::string::npos) << prop;
  }
  EXPECT_NE(text.find("element vertex 2\n"), std::string::npos);
  EXPECT_NE(text.find("1 2 3 0.5 7 1\n"), std::string::npos);
  EXPECT_NE(text.find("4 5 6 0.25 -1 0\n"), std::string::npos);
}

TEST(Checksum, SensitiveToAnyField) {
  const auto c = random_cloud(20, 8);
  auto d = c;
  EXPECT_EQ(io::checksum(c), io::checksum(d));
  d.points[5].masked = !d.points[5].masked;
  EXPECT_NE(io::checksum(c), io::checksum(d));
}
