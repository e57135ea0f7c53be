#include "beamgat/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <mutex>
#include <random>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "beamgat/errors.hpp"
#include "beamgat/ops.hpp"
#include "beamgat/random.hpp"

namespace beamgat::train {
namespace {

double raw_feature(const std::string& name, const Point& p, int beam_count) {
  if (name == "x") return p.x;
  if (name == "y") return p.y;
  if (name == "z") return p.z;
  if (name == "reflectance") return p.reflectance;
  if (name == "mask") return p.masked ? 1.0 : 0.0;
  if (name == "beam") {
    if (!p.beam) throw DataError("beam feature requested but the frame has no beam indices");
    return static_cast<double>(*p.beam) / (beam_count - 1);
  }
  throw ConfigError("unknown feature '" + name + "'");
}

std::pair<double, double> observed_stats(const MaskedFrame& frame, const std::string& name, int beam_count) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& p : frame.cloud.points) {
    if (p.masked) continue;
    sum += raw_feature(name, p, beam_count);
    ++n;
  }
  const double mean = sum / static_cast<double>(n);
  double sq = 0.0;
  for (const auto& p : frame.cloud.points) {
    if (p.masked) continue;
    const double d = raw_feature(name, p, beam_count) - mean;
    sq += d * d;
  }
  return {mean, std::max(kMinStd, std::sqrt(sq / static_cast<double>(n)))};
}

// Training churns through many large, short-lived buffers; keeping them in
// the heap instead of mmap/munmap per allocation cuts system time sharply.
void tune_allocator() {
  static std::once_flag once;
  std::call_once(once, [] {
#if defined(__GLIBC__)
    mallopt(M_MMAP_THRESHOLD, 512 * 1024 * 1024);
    mallopt(M_TRIM_THRESHOLD, 1024 * 1024 * 1024);
    mallopt(M_TOP_PAD, 64 * 1024 * 1024);
#endif
  });
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

NormalizedFrame normalize_frame(const MaskedFrame& frame, const std::vector<std::string>& features) {
  const auto n = frame.cloud.size();
  if (frame.masked_count() >= n) {
    throw DataError("frame " + frame.cloud.frame_id + " has no observed points to normalize with");
  }
  const int beam_count = frame.cloud.sensor ? frame.cloud.sensor->beam_count : 2;

  NormalizedFrame out;
  out.stats.features = features;
  std::tie(out.stats.z_mean, out.stats.z_std) = observed_stats(frame, "z", beam_count);
  for (const auto& f : features) {
    if (f == "mask") {
      out.stats.mean.push_back(0.0);
      out.stats.std.push_back(1.0);
    } else {
      const auto [m, s] = observed_stats(frame, f, beam_count);
      out.stats.mean.push_back(m);
      out.stats.std.push_back(s);
    }
  }
  const auto nf = features.size();
  std::vector<double> values(n * nf);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = frame.cloud.points[i];
    for (std::size_t j = 0; j < nf; ++j) {
      double v = (raw_feature(features[j], p, beam_count) - out.stats.mean[j]) / out.stats.std[j];
      if (features[j] == "z" && p.masked) v = 0.0;
      values[i * nf + j] = v;
    }
  }
  out.features = Tensor::matrix(n, nf, std::move(values));
  return out;
}

Tensor loss_masked_mse(const Tensor& z_hat, const MaskedFrame& frame, const NormStats& stats) {
  if (frame.masked_count() == 0) throw DataError("frame " + frame.cloud.frame_id + " has no masked points");
  if (z_hat.size() != frame.cloud.size()) throw ad::DimensionError("prediction count does not match the frame");
  std::vector<double> target(frame.masked_count());
  for (std::size_t k = 0; k < target.size(); ++k) target[k] = normalize_z(frame.truth_z[k], stats);
  const auto picked = ad::gather_rows(z_hat, frame.masked_indices);
  const auto diff = ad::sub(picked, Tensor::vector(std::move(target)));
  return ad::mean(ad::mul(diff, diff));
}

void adam_step(std::vector<Tensor*> params, const std::vector<Tensor>& grads, AdamState& state,
               const AdamConfig& config) {
  if (grads.size() != params.size()) throw ad::DimensionError("adam: one gradient per parameter required");
  if (state.m.empty()) {
    for (const auto* p : params) {
      state.m.emplace_back(p->size(), 0.0);
      state.v.emplace_back(p->size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw ad::DimensionError("adam: state does not match parameters");
  ++state.step;
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    const auto& g = grads[i];
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (g.size() != p.size() || m.size() != p.size()) throw ad::DimensionError("adam: shape mismatch");
    std::vector<double> next(p.values().begin(), p.values().end());
    for (std::size_t j = 0; j < next.size(); ++j) {
      m[j] = config.beta1 * m[j] + (1.0 - config.beta1) * g[j];
      v[j] = config.beta2 * v[j] + (1.0 - config.beta2) * g[j] * g[j];
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      next[j] -= config.learning_rate * mhat / (std::sqrt(vhat) + config.epsilon);
    }
    p = Tensor(p.shape(), std::move(next));
  }
}

void adam_step(gat::GatModel& model, const std::vector<Tensor>& grads, AdamState& state,
               const AdamConfig& config) {
  adam_step(model.parameters(), grads, state, config);
}

PreparedFrame prepare_frame(MaskedFrame frame, const gat::ModelConfig& model,
                            const graph::GraphOptions& graph_options) {
  PreparedFrame out;
  out.input = normalize_frame(frame, model.input_features);
  out.graph = graph::build_knn(frame.cloud, graph_options);
  out.frame = std::move(frame);
  return out;
}

void rebuild_graph(PreparedFrame& frame, const graph::GraphOptions& graph_options) {
  frame.graph = graph::build_knn(frame.frame.cloud, graph_options);
}

std::vector<double> predict_z(const gat::GatModel& model, const PreparedFrame& frame) {
  const auto z = gat::model_forward(frame.input.features, frame.graph, model);
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = denormalize_z(z[i], frame.input.stats);
  return out;
}

std::vector<double> predict_masked_z(const gat::GatModel& model, const PreparedFrame& frame) {
  const auto all = predict_z(model, frame);
  std::vector<double> out;
  out.reserve(frame.frame.masked_count());
  for (auto i : frame.frame.masked_indices) out.push_back(all[i]);
  return out;
}

Split split_frames(std::size_t n, double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("split fraction must lie in (0, 1)");
  const auto n_val = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
  if (n_val == 0 || n_val >= n) {
    throw DataError("cannot split " + std::to_string(n) + " frames into non-empty train and validation sets");
  }
  Split s;
  for (std::size_t i = 0; i < n; ++i) (i < n - n_val ? s.train : s.validation).push_back(i);
  return s;
}

double validation_loss(const gat::GatModel& model, const std::vector<PreparedFrame>& frames) {
  double sq = 0.0;
  std::size_t count = 0;
  for (const auto& f : frames) {
    const auto pred = predict_masked_z(model, f);
    for (std::size_t k = 0; k < pred.size(); ++k) {
      const double d = pred[k] - f.frame.truth_z[k];
      sq += d * d;
    }
    count += pred.size();
  }
  if (count == 0) throw DataError("validation frames contain no masked points");
  return sq / static_cast<double>(count);
}

TrainResult fit(const std::vector<PreparedFrame>& train_frames,
                const std::vector<PreparedFrame>& val_frames, const gat::GatModel& initial,
                const TrainConfig& config, int start_epoch, const EpochCallback& on_epoch) {
  if (train_frames.empty()) throw DataError("training split is empty");
  if (val_frames.empty()) throw DataError("validation split is empty");
  if (config.max_epochs < 1) throw ConfigError("max_epochs must be at least 1");
  if (config.patience < 0) throw ConfigError("patience must be non-negative");
  if (config.batch < 1) throw ConfigError("batch must be at least 1");

  tune_allocator();
  TrainResult result;
  result.model = initial;
  result.best_val_loss = validation_loss(initial, val_frames);
  result.best_epoch = start_epoch;
  result.epochs_completed = start_epoch;

  gat::GatModel model = initial;
  AdamState adam;
  ad::Tape tape;
  int stale = 0;
  for (int e = 0; e < config.max_epochs; ++e) {
    const int epoch = start_epoch + e + 1;
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<std::size_t> order(train_frames.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffle_rng(hash_combine(config.seed, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    std::vector<Tensor> accum;
    std::size_t in_batch = 0;
    auto apply = [&] {
      for (auto& g : accum) g = ad::scale(g, 1.0 / static_cast<double>(in_batch));
      adam_step(model, accum, adam, config.adam);
      accum.clear();
      in_batch = 0;
    };
    for (std::size_t s = 0; s < order.size(); ++s) {
      const auto& f = train_frames[order[s]];
      const auto tracked = gat::watch(tape, model);
      gat::ForwardOptions fo;
      fo.training = true;
      fo.dropout_seed = hash_combine(hash_combine(config.seed, static_cast<std::uint64_t>(epoch)), s);
      const auto z = gat::model_forward(f.input.features, f.graph, tracked, fo);
      const auto loss = loss_masked_mse(z, f.frame, f.input.stats);
      loss_sum += loss.item();
      const auto grads = tape.backward(loss);
      const auto params = tracked.parameters();
      if (accum.empty()) {
        for (const auto* p : params) accum.push_back(grads.of(*p));
      } else {
        for (std::size_t i = 0; i < params.size(); ++i) accum[i] = ad::add(accum[i], grads.of(*params[i]));
      }
      if (++in_batch == static_cast<std::size_t>(config.batch)) apply();
    }
    if (in_batch > 0) apply();

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = loss_sum / static_cast<double>(order.size());
    log.val_loss = validation_loss(model, val_frames);
    log.seconds = seconds_since(t0);
    result.log.push_back(log);
    result.epochs_completed = epoch;
    if (on_epoch) on_epoch(log);

    if (log.val_loss < result.best_val_loss) {
      result.best_val_loss = log.val_loss;
      result.best_epoch = epoch;
      result.model = model;
      stale = 0;
    } else if (++stale >= std::max(1, config.patience)) {
      break;
    }
  }
  return result;
}

TrainResult train(const std::vector<PreparedFrame>& frames, const gat::ModelConfig& model_config,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  const auto split = split_frames(frames.size(), config.split_fraction);
  std::vector<PreparedFrame> tr, va;
  for (auto i : split.train) tr.push_back(frames[i]);
  for (auto i : split.validation) va.push_back(frames[i]);
  return fit(tr, va, gat::init_params(model_config, hash_combine(config.seed, 0x6d6f64656cULL)), config, 0,
             on_epoch);
}

}  // namespace beamgat::train
