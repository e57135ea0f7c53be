#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "beamgat/config.hpp"
#include "beamgat/errors.hpp"

namespace fs = std::filesystem;
using namespace beamgat;
using namespace beamgat::config;

namespace {

std::string message_of(const std::string& text) {
  try {
    from_json_text(text).validate();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, EmptyDocumentGivesDefaults) {
  const auto c = from_json_text("{}");
  EXPECT_EQ(c.data.source, "synth");
  EXPECT_EQ(c.data.n_frames, 20u);
  EXPECT_EQ(c.data.azimuth_steps, 360);
  EXPECT_EQ(c.sensor.spec(), SensorSpec::desk16());
  EXPECT_EQ(c.graph.k, 10u);
  EXPECT_EQ(c.model.layers, 3);
  EXPECT_EQ(c.model.heads, 8);
  EXPECT_EQ(c.model.layer_width(), 256u);
  EXPECT_EQ(c.model.dropout, 0.2);
  EXPECT_EQ(c.train.max_epochs, 100);
  EXPECT_EQ(c.train.adam.learning_rate, 1e-3);
  EXPECT_EQ(c.dropout.pattern().kind, DropoutKind::kEveryNth);
  EXPECT_EQ(c.dropout.pattern().n, 4);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, JsonRoundTripIsExact) {
  auto c = from_json_text(R"({"train": {"learning_rate": 0.0003, "seed": 17}, "graph": {"k": 14, "space": "xyz_full"},
                              "model": {"activation": "leaky_relu", "input_features": ["x", "y", "mask"]},
                              "sweep": {"ks": [4, 8]}, "output": {"run_dir": "runs/x"}})");
  EXPECT_EQ(c.train.adam.learning_rate, 0.0003);
  EXPECT_EQ(c.graph.space, graph::Space::kXyzFull);
  EXPECT_EQ(c.model.activation, gat::Activation::kLeakyRelu);
  EXPECT_EQ(c.sweep.ks, (std::vector<std::size_t>{4, 8}));
  EXPECT_EQ(c.run_dir, "runs/x");
  const auto text = to_json_text(c);
  EXPECT_EQ(to_json_text(from_json_text(text)), text);
}

TEST(Config, UnknownKeysAreRejected) {
  EXPECT_THROW(from_json_text(R"({"trian": {}})"), ConfigError);
  try {
    from_json_text(R"({"train": {"max_epoch": 5}})");
    FAIL() << "typo accepted";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("train.max_epoch"), std::string::npos);
  }
}

TEST(Config, TypeMismatchesAreRejected) {
  EXPECT_THROW(from_json_text(R"({"train": {"max_epochs": "5"}})"), ConfigError);
  EXPECT_THROW(from_json_text(R"({"train": {"max_epochs": 2.5}})"), ConfigError);
  EXPECT_THROW(from_json_text(R"({"data": {"n_frames": -1}})"), ConfigError);
  EXPECT_THROW(from_json_text(R"({"graph": {"self_loops": 1}})"), ConfigError);
  EXPECT_THROW(from_json_text(R"({"sweep": {"ks": [4, "8"]}})"), ConfigError);
  EXPECT_THROW(from_json_text(R"({"data": 3})"), ConfigError);
  EXPECT_THROW(from_json_text("{not json"), ConfigError);
  EXPECT_THROW(from_json_text(R"({"graph": {"space": "polar"}})"), ConfigError);
  // Integers are accepted where reals are expected.
  EXPECT_EQ(from_json_text(R"({"eval": {"tau": 1}})").eval.tau, 1.0);
}

TEST(Config, ValidationCatchesBadValues) {
  EXPECT_NE(message_of(R"({"data": {"n_frames": 0}})"), "");
  EXPECT_NE(message_of(R"({"data": {"source": "kitti"}})").find("input_dir"), std::string::npos);
  EXPECT_NE(message_of(R"({"data": {"source": "lidar"}})"), "");
  EXPECT_NE(message_of(R"({"graph": {"k": 0}})"), "");
  EXPECT_NE(message_of(R"({"graph": {"k": 4096}})"), "");
  EXPECT_NE(message_of(R"({"train": {"split_fraction": 1.0}})"), "");
  EXPECT_NE(message_of(R"({"train": {"beta2": 1.0}})"), "");
  EXPECT_NE(message_of(R"({"dropout": {"kind": "contiguous_band", "offset": 0, "n": 16}})"), "");
  EXPECT_NE(message_of(R"({"dropout": {"kind": "sometimes"}})"), "");
  EXPECT_NE(message_of(R"({"sensor": {"preset": "vlp32"}})"), "");
  EXPECT_NE(message_of(R"({"sweep": {"ks": []}})"), "");
  EXPECT_NE(message_of(R"({"sweep": {"mode": "guess"}})"), "");
  EXPECT_NE(message_of(R"({"model": {"layers": 0}})"), "");
  EXPECT_NE(message_of(R"({"output": {"run_dir": ""}})"), "");
  EXPECT_EQ(message_of(R"({"dropout": {"kind": "random_fraction", "fraction": 0.25, "seed": 3}})"), "");
}

TEST(Config, CustomSensorAndPresets) {
  const auto c = from_json_text(
      R"({"sensor": {"preset": "custom", "beam_count": 32, "theta_min_deg": -30, "theta_max_deg": 10}})");
  const auto s = c.sensor.spec();
  EXPECT_EQ(s.beam_count, 32);
  EXPECT_DOUBLE_EQ(s.theta_min, deg2rad(-30.0));
  EXPECT_EQ(from_json_text(R"({"sensor": {"preset": "hdl64e"}})").sensor.spec(), SensorSpec::hdl64e());
}

TEST(Config, OverridesEditNestedKeys) {
  auto text = apply_override("{}", "train.max_epochs=5");
  text = apply_override(text, "data.source=csv");
  text = apply_override(text, "sweep.ks=[4,8,16]");
  text = apply_override(text, "train.max_epochs=7");
  const auto c = from_json_text(text);
  EXPECT_EQ(c.train.max_epochs, 7);
  EXPECT_EQ(c.data.source, "csv");
  EXPECT_EQ(c.sweep.ks.size(), 3u);
  EXPECT_THROW(apply_override("{}", "train.max_epochs"), ConfigError);
  EXPECT_THROW(apply_override("{}", "=5"), ConfigError);
  EXPECT_THROW(apply_override("{}", "train..x=5"), ConfigError);
  EXPECT_THROW(apply_override(R"({"train": 3})", "train.seed=1"), ConfigError);
  EXPECT_THROW(from_json_text(apply_override("{}", "train.nope=1")), ConfigError);
}

TEST(Config, LoadReadsFiles) {
  const auto p = fs::temp_directory_path() / "beamgat_config_test.json";
  {
    std::ofstream out(p);
    out << R"({"data": {"n_frames": 3}})";
  }
  EXPECT_EQ(load(p).data.n_frames, 3u);
  fs::remove(p);
  EXPECT_THROW(load(p), ConfigError);
}
