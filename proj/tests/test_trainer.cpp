#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "beamgat/errors.hpp"
#include "beamgat/metrics.hpp"
#include "beamgat/ops.hpp"
#include "beamgat/synth.hpp"
#include "beamgat/trainer.hpp"
#include "support/gradcheck.hpp"

using namespace beamgat;
using namespace beamgat::train;

namespace {

MaskedFrame tiny_frame() {
  PointCloud c;
  c.sensor = SensorSpec::desk16();
  c.points = {{1, 0, -1, 0.5, 0}, {2, 0, 1, 0.5, 1}, {3, 0, 4, 0.5, 2}, {4, 0, 7, 0.5, 3}};
  return apply_channel_dropout(c, DropoutPattern::contiguous_band(2, 2));
}

gat::ModelConfig tiny_model() {
  gat::ModelConfig c;
  c.layers = 1;
  c.heads = 2;
  c.head_width = 4;
  c.head_hidden = 8;
  return c;
}

std::vector<PreparedFrame> synthetic_frames(std::size_t n, std::uint64_t seed, int azimuths,
                                            const gat::ModelConfig& model) {
  synth::BenchmarkOptions opts;
  opts.scan.azimuth_steps = azimuths;
  std::vector<PreparedFrame> out;
  for (auto& cloud : synth::make_benchmark_set(n, seed, opts)) {
    out.push_back(prepare_frame(apply_channel_dropout(cloud, DropoutPattern::every_nth(4)), model, {}));
  }
  return out;
}

}  // namespace

TEST(Normalize, ObservedStatisticsOnly) {
  const auto f = tiny_frame();
  const auto n = normalize_frame(f, {"z", "mask", "reflectance", "x"});
  // Observed z = {-1, 1}: mean 0, population std 1.
  EXPECT_DOUBLE_EQ(n.stats.z_mean, 0.0);
  EXPECT_DOUBLE_EQ(n.stats.z_std, 1.0);
  EXPECT_DOUBLE_EQ(n.features.at(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(n.features.at(1, 0), 1.0);
  EXPECT_EQ(n.features.at(2, 0), 0.0);
  EXPECT_EQ(n.features.at(3, 0), 0.0);
  // Mask flag is passed through.
  EXPECT_EQ(n.features.at(0, 1), 0.0);
  EXPECT_EQ(n.features.at(3, 1), 1.0);
  // Constant reflectance becomes 0 thanks to the std clamp.
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(n.features.at(i, 2), 0.0);
  EXPECT_DOUBLE_EQ(n.stats.std[2], kMinStd);
  // x statistics come from the observed points {1, 2} only.
  EXPECT_DOUBLE_EQ(n.stats.mean[3], 1.5);
  EXPECT_DOUBLE_EQ(n.features.at(3, 3), (4.0 - 1.5) / 0.5);
}

TEST(Normalize, RoundTripAndBeamFeature) {
  const auto f = tiny_frame();
  const auto n = normalize_frame(f);
  for (std::size_t i = 0; i < 2; ++i) {
    const double z = f.cloud[i].z;
    EXPECT_NEAR(denormalize_z(normalize_z(z, n.stats), n.stats), z, 1e-12);
    EXPECT_NEAR(denormalize_z(n.features.at(i, 2), n.stats), z, 1e-12);
  }
  EXPECT_EQ(n.features.cols(), 6u);
}

TEST(Normalize, AllMaskedIsRejected) {
  PointCloud c;
  c.sensor = SensorSpec::desk16();
  c.points = {{1, 0, -1, 0.5, 0}, {2, 0, 1, 0.5, 0}};
  MaskedFrame f;
  f.cloud = c;
  f.cloud.points[0].masked = f.cloud.points[1].masked = true;
  f.truth_z = {-1, 1};
  f.masked_indices = {0, 1};
  EXPECT_THROW(normalize_frame(f), DataError);
}

TEST(Loss, ExamplesAndErrors) {
  const auto f = tiny_frame();
  NormStats s;
  s.z_mean = 1.0;
  s.z_std = 2.0;
  // Normalized truth for masked points (z = 4, 7) is 1.5 and 3.
  EXPECT_DOUBLE_EQ(loss_masked_mse(Tensor::vector({9, 9, 1.5, 3}), f, s).item(), 0.0);
  EXPECT_NEAR(loss_masked_mse(Tensor::vector({9, 9, 1.75, 3.25}), f, s).item(), 0.0625, 1e-15);
  EXPECT_THROW(loss_masked_mse(Tensor::vector({0, 0, 0}), f, s), ad::DimensionError);
  MaskedFrame none = f;
  none.truth_z.clear();
  none.masked_indices.clear();
  EXPECT_THROW(loss_masked_mse(Tensor::vector({0, 0, 0, 0}), none, s), DataError);
}

TEST(Loss, GradientIsTwiceResidualOverCount) {
  const auto f = tiny_frame();
  NormStats s;
  const std::vector<double> zh = {0.3, -0.2, 2.5, 6.0};
  ad::Tape tape;
  const auto z = tape.watch(Tensor::vector(zh));
  const auto g = tape.backward(loss_masked_mse(z, f, s)).of(z);
  EXPECT_EQ(g[0], 0.0);
  EXPECT_EQ(g[1], 0.0);
  EXPECT_NEAR(g[2], 2 * (2.5 - 4.0) / 2, 1e-12);
  EXPECT_NEAR(g[3], 2 * (6.0 - 7.0) / 2, 1e-12);
  const auto r = beamgat::testing::gradcheck(
      [&](const std::vector<Tensor>& in) { return loss_masked_mse(in[0], f, s); }, {Tensor::vector(zh)});
  EXPECT_LT(r.max_rel_error, 1e-7);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  for (double g : {0.5, -3.0, 1e-3}) {
    Tensor w = Tensor::vector({1.0});
    AdamState st;
    adam_step({&w}, {Tensor::vector({g})}, st, {});
    EXPECT_NEAR(w[0] - 1.0, -1e-3 * (g > 0 ? 1 : -1), 1e-3 * 1e-4) << g;
    EXPECT_EQ(st.step, 1);
  }
}

TEST(Adam, ZeroGradientAndZeroRateAreIdentity) {
  Tensor w = Tensor::vector({0.25, -4.0});
  AdamState st;
  adam_step({&w}, {Tensor::vector({0.0, 0.0})}, st, {});
  EXPECT_EQ(w[0], 0.25);
  EXPECT_EQ(w[1], -4.0);
  AdamConfig frozen;
  frozen.learning_rate = 0.0;
  adam_step({&w}, {Tensor::vector({5.0, -1.0})}, st, frozen);
  EXPECT_EQ(w[0], 0.25);
  EXPECT_EQ(w[1], -4.0);
}

TEST(Adam, ConvergesOnScalarQuadratic) {
  Tensor w = Tensor::vector({0.0});
  AdamState st;
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  for (int i = 0; i < 200; ++i) adam_step({&w}, {Tensor::vector({2.0 * (w[0] - 3.0)})}, st, cfg);
  EXPECT_LT(std::abs(w[0] - 3.0), 0.05);
}

TEST(Adam, ShapeMismatchIsRejected) {
  Tensor w = Tensor::vector({0.0, 1.0});
  AdamState st;
  EXPECT_THROW(adam_step({&w}, {Tensor::vector({1.0})}, st, {}), ad::DimensionError);
  EXPECT_THROW(adam_step({&w}, {}, st, {}), ad::DimensionError);
}

TEST(Split, LastFramesValidate) {
  const auto s = split_frames(20, 0.2);
  EXPECT_EQ(s.train.size(), 16u);
  EXPECT_EQ(s.validation, (std::vector<std::size_t>{16, 17, 18, 19}));
  EXPECT_EQ(split_frames(3, 0.2).validation.size(), 1u);
  EXPECT_THROW(split_frames(1, 0.5), DataError);
  EXPECT_THROW(split_frames(10, 0.0), ConfigError);
  EXPECT_THROW(split_frames(10, 1.0), ConfigError);
}

TEST(Training, EmptySplitsAreRejected) {
  const auto frames = synthetic_frames(2, 1, 24, tiny_model());
  const auto m = gat::init_params(tiny_model(), 1);
  EXPECT_THROW(fit({}, frames, m, {}), DataError);
  EXPECT_THROW(fit(frames, {}, m, {}), DataError);
}

TEST(Training, PatienceZeroStopsAtFirstNonImprovingEpoch) {
  const auto frames = synthetic_frames(3, 2, 24, tiny_model());
  TrainConfig cfg;
  cfg.patience = 0;
  cfg.max_epochs = 50;
  cfg.adam.learning_rate = 0.05;
  const auto initial = gat::init_params(tiny_model(), 3);
  const auto r = fit({frames[0], frames[1]}, {frames[2]}, initial, cfg);
  ASSERT_FALSE(r.log.empty());
  ASSERT_LT(r.epochs_completed, cfg.max_epochs);
  double best = validation_loss(initial, {frames[2]});
  for (std::size_t i = 0; i + 1 < r.log.size(); ++i) {
    EXPECT_LT(r.log[i].val_loss, best) << "epoch " << r.log[i].epoch;
    best = r.log[i].val_loss;
  }
  EXPECT_GE(r.log.back().val_loss, best);
  EXPECT_EQ(static_cast<int>(r.log.size()), r.epochs_completed);
}

TEST(Training, BestCheckpointIsNeverWorseThanLoggedEpochs) {
  const auto frames = synthetic_frames(3, 4, 24, tiny_model());
  TrainConfig cfg;
  cfg.max_epochs = 6;
  cfg.patience = 3;
  const auto r = fit({frames[0], frames[1]}, {frames[2]}, gat::init_params(tiny_model(), 5), cfg);
  for (const auto& e : r.log) EXPECT_LE(r.best_val_loss, e.val_loss);
  EXPECT_DOUBLE_EQ(validation_loss(r.model, {frames[2]}), r.best_val_loss);
}

TEST(Training, IdenticalSeedsGiveIdenticalLogs) {
  const auto frames = synthetic_frames(4, 6, 24, tiny_model());
  TrainConfig cfg;
  cfg.max_epochs = 3;
  cfg.seed = 42;
  const auto a = beamgat::train::train(frames, tiny_model(), cfg);
  const auto b = beamgat::train::train(frames, tiny_model(), cfg);
  ASSERT_EQ(a.log.size(), b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    EXPECT_EQ(a.log[i].train_loss, b.log[i].train_loss);
    EXPECT_EQ(a.log[i].val_loss, b.log[i].val_loss);
  }
  EXPECT_TRUE(gat::bitwise_equal(a.model, b.model));
  cfg.seed = 43;
  EXPECT_NE(beamgat::train::train(frames, tiny_model(), cfg).log[0].train_loss, a.log[0].train_loss);
}

TEST(Training, ResumeContinuesEpochNumbering) {
  const auto frames = synthetic_frames(3, 7, 24, tiny_model());
  TrainConfig cfg;
  cfg.max_epochs = 2;
  const auto r = fit({frames[0], frames[1]}, {frames[2]}, gat::init_params(tiny_model(), 1), cfg, 5);
  ASSERT_FALSE(r.log.empty());
  EXPECT_EQ(r.log.front().epoch, 6);
  EXPECT_EQ(r.epochs_completed, 5 + static_cast<int>(r.log.size()));
}

TEST(Training, SinglePlanarFrameReachesCentimetreError) {
  synth::Scene plane;
  auto cloud = synth::raycast_scan(plane, SensorSpec::desk16(), {90, 0.01, 3, 80.0});
  cloud.frame_id = "plane";
  const auto model_cfg = tiny_model();
  const auto frame = prepare_frame(apply_channel_dropout(cloud, DropoutPattern::every_nth(4)), model_cfg, {});
  TrainConfig cfg;
  cfg.max_epochs = 100;
  cfg.adam.learning_rate = 1e-2;
  const auto r = fit({frame}, {frame}, gat::init_params(model_cfg, 9), cfg);
  const auto pred = predict_masked_z(r.model, frame);
  EXPECT_LT(metrics::rmse_z(pred, frame.frame.truth_z), 0.05);
}
