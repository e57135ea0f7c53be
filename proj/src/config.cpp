#include "beamgat/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <type_traits>

#include <json.hpp>

#include "beamgat/errors.hpp"

namespace beamgat::config {
namespace {

using nlohmann::json;

// Reads typed keys out of one JSON object and remembers which keys were
// used, so that anything left over can be reported as unknown.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError("'" + name_ + "' must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    seen_.insert(key);
    const auto where = name_ + "." + key;
    if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) throw ConfigError(where + " must be true or false");
    } else if constexpr (std::is_unsigned_v<T>) {
      if (!it->is_number_unsigned()) throw ConfigError(where + " must be a non-negative integer");
    } else if constexpr (std::is_integral_v<T>) {
      if (!it->is_number_integer()) throw ConfigError(where + " must be an integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!it->is_number()) throw ConfigError(where + " must be a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!it->is_string()) throw ConfigError(where + " must be a string");
    } else {
      if (!it->is_array()) throw ConfigError(where + " must be an array");
      for (const auto& e : *it) {
        using E = typename T::value_type;
        if constexpr (std::is_same_v<E, std::string>) {
          if (!e.is_string()) throw ConfigError(where + " must hold strings");
        } else {
          if (!e.is_number_unsigned()) throw ConfigError(where + " must hold non-negative integers");
        }
      }
    }
    out = it->get<T>();
  }

  // Nested object, or an empty one when absent.
  Section child(const char* key) {
    static const json empty = json::object();
    const auto it = j_.find(key);
    if (it == j_.end()) return Section(empty, name_.empty() ? key : name_ + "." + key);
    seen_.insert(key);
    return Section(*it, name_.empty() ? key : name_ + "." + key);
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) {
        throw ConfigError("unknown config key '" + (name_.empty() ? key : name_ + "." + key) + "'");
      }
    }
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

template <class T>
void require(bool ok, const T& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

SensorSpec SensorConfig::spec() const {
  if (preset == "desk16") return SensorSpec::desk16();
  if (preset == "hdl64e") return SensorSpec::hdl64e();
  if (preset == "custom") return {beam_count, deg2rad(theta_min_deg), deg2rad(theta_max_deg), sensor_height};
  throw ConfigError("unknown sensor preset '" + preset + "' (expected desk16, hdl64e or custom)");
}

DropoutPattern DropoutConfig::pattern() const {
  if (kind == "every_nth") return DropoutPattern::every_nth(n, offset);
  if (kind == "random_fraction") return DropoutPattern::random_fraction(fraction, seed);
  if (kind == "contiguous_band") return DropoutPattern::contiguous_band(offset, n);
  throw ConfigError("unknown dropout kind '" + kind + "'");
}

void RunConfig::validate() const {
  require(data.source == "synth" || data.source == "kitti" || data.source == "csv",
          "data.source must be synth, kitti or csv");
  require(data.source == "synth" || !data.input_dir.empty(), "data.input_dir is required for " + data.source);
  require(data.n_frames >= 1, "data.n_frames must be at least 1");
  require(data.azimuth_steps >= 8, "data.azimuth_steps must be at least 8");
  require(data.noise_std >= 0.0, "data.noise_std must be non-negative");
  require(data.ground_z < 0.0, "data.ground_z must be negative");
  require(data.min_boxes >= 0 && data.min_boxes <= data.max_boxes, "data.min_boxes must be <= data.max_boxes");
  require(data.frame_size >= 1, "data.frame_size must be at least 1");
  require(data.filter.r_min < data.filter.r_max, "data.r_min must be below data.r_max");
  const auto spec = sensor.spec();
  spec.validate();
  dropped_beams(dropout.pattern(), spec.beam_count);
  require(graph.k >= 1, "graph.k must be at least 1");
  require(graph.k < data.frame_size, "graph.k must be below data.frame_size");
  model.validate();
  require(train.max_epochs >= 1, "train.max_epochs must be at least 1");
  require(train.patience >= 0, "train.patience must be non-negative");
  require(train.batch >= 1, "train.batch must be at least 1");
  require(train.split_fraction > 0.0 && train.split_fraction < 1.0, "train.split_fraction must lie in (0, 1)");
  require(train.adam.learning_rate >= 0.0, "train.learning_rate must be non-negative");
  require(train.adam.beta1 >= 0.0 && train.adam.beta1 < 1.0, "train.beta1 must lie in [0, 1)");
  require(train.adam.beta2 >= 0.0 && train.adam.beta2 < 1.0, "train.beta2 must lie in [0, 1)");
  require(train.adam.epsilon > 0.0, "train.epsilon must be positive");
  require(eval.tau > 0.0, "eval.tau must be positive");
  require(eval.frames == "validation" || eval.frames == "all", "eval.frames must be validation or all");
  require(eval.cdf_step > 0.0 && eval.cdf_max > 0.0, "eval.cdf_step and eval.cdf_max must be positive");
  require(!sweep.ks.empty(), "sweep.ks must not be empty");
  for (auto k : sweep.ks) require(k >= 1 && k < data.frame_size, "sweep.ks entries must lie in [1, frame_size)");
  require(sweep.mode == "reevaluate" || sweep.mode == "retrain", "sweep.mode must be reevaluate or retrain");
  require(sweep.repeats >= 1, "sweep.repeats must be at least 1");
  require(!run_dir.empty(), "output.run_dir must not be empty");
}

RunConfig from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  Section root(doc, "");

  auto data = root.child("data");
  data.get("source", c.data.source);
  data.get("input_dir", c.data.input_dir);
  data.get("n_frames", c.data.n_frames);
  data.get("seed", c.data.seed);
  data.get("azimuth_steps", c.data.azimuth_steps);
  data.get("noise_std", c.data.noise_std);
  data.get("ground_z", c.data.ground_z);
  data.get("min_boxes", c.data.min_boxes);
  data.get("max_boxes", c.data.max_boxes);
  data.get("frame_size", c.data.frame_size);
  data.get("min_points", c.data.min_points);
  data.get("r_min", c.data.filter.r_min);
  data.get("r_max", c.data.filter.r_max);
  data.get("x_min", c.data.filter.bounds.x_min);
  data.get("x_max", c.data.filter.bounds.x_max);
  data.get("y_min", c.data.filter.bounds.y_min);
  data.get("y_max", c.data.filter.bounds.y_max);
  data.get("z_min", c.data.filter.bounds.z_min);
  data.get("z_max", c.data.filter.bounds.z_max);
  data.finish();

  auto sensor = root.child("sensor");
  sensor.get("preset", c.sensor.preset);
  sensor.get("beam_count", c.sensor.beam_count);
  sensor.get("theta_min_deg", c.sensor.theta_min_deg);
  sensor.get("theta_max_deg", c.sensor.theta_max_deg);
  sensor.get("sensor_height", c.sensor.sensor_height);
  sensor.finish();

  auto dropout = root.child("dropout");
  dropout.get("kind", c.dropout.kind);
  dropout.get("n", c.dropout.n);
  dropout.get("fraction", c.dropout.fraction);
  dropout.get("offset", c.dropout.offset);
  dropout.get("seed", c.dropout.seed);
  dropout.finish();

  auto graph = root.child("graph");
  graph.get("k", c.graph.k);
  std::string space = graph::to_string(c.graph.space);
  graph.get("space", space);
  c.graph.space = graph::parse_space(space);
  graph.get("self_loops", c.graph.self_loops);
  graph.finish();

  auto model = root.child("model");
  model.get("layers", c.model.layers);
  model.get("heads", c.model.heads);
  model.get("head_width", c.model.head_width);
  model.get("head_hidden", c.model.head_hidden);
  model.get("dropout", c.model.dropout);
  std::string activation = gat::to_string(c.model.activation);
  model.get("activation", activation);
  c.model.activation = gat::parse_activation(activation);
  model.get("residual", c.model.residual);
  model.get("leaky_slope", c.model.leaky_slope);
  model.get("input_features", c.model.input_features);
  model.finish();

  auto train = root.child("train");
  train.get("learning_rate", c.train.adam.learning_rate);
  train.get("beta1", c.train.adam.beta1);
  train.get("beta2", c.train.adam.beta2);
  train.get("epsilon", c.train.adam.epsilon);
  train.get("max_epochs", c.train.max_epochs);
  train.get("patience", c.train.patience);
  train.get("batch", c.train.batch);
  train.get("seed", c.train.seed);
  train.get("split_fraction", c.train.split_fraction);
  train.finish();

  auto eval = root.child("eval");
  eval.get("tau", c.eval.tau);
  eval.get("frames", c.eval.frames);
  eval.get("write_reconstructions", c.eval.write_reconstructions);
  eval.get("cdf_max", c.eval.cdf_max);
  eval.get("cdf_step", c.eval.cdf_step);
  eval.finish();

  auto sweep = root.child("sweep");
  sweep.get("ks", c.sweep.ks);
  sweep.get("mode", c.sweep.mode);
  sweep.get("repeats", c.sweep.repeats);
  sweep.finish();

  auto output = root.child("output");
  output.get("run_dir", c.run_dir);
  output.finish();

  root.finish();
  return c;
}

RunConfig load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

std::string to_json_text(const RunConfig& c) {
  const auto& f = c.data.filter;
  json j{
      {"data",
       {{"source", c.data.source},
        {"input_dir", c.data.input_dir},
        {"n_frames", c.data.n_frames},
        {"seed", c.data.seed},
        {"azimuth_steps", c.data.azimuth_steps},
        {"noise_std", c.data.noise_std},
        {"ground_z", c.data.ground_z},
        {"min_boxes", c.data.min_boxes},
        {"max_boxes", c.data.max_boxes},
        {"frame_size", c.data.frame_size},
        {"min_points", c.data.min_points},
        {"r_min", f.r_min},
        {"r_max", f.r_max},
        {"x_min", f.bounds.x_min},
        {"x_max", f.bounds.x_max},
        {"y_min", f.bounds.y_min},
        {"y_max", f.bounds.y_max},
        {"z_min", f.bounds.z_min},
        {"z_max", f.bounds.z_max}}},
      {"sensor",
       {{"preset", c.sensor.preset},
        {"beam_count", c.sensor.beam_count},
        {"theta_min_deg", c.sensor.theta_min_deg},
        {"theta_max_deg", c.sensor.theta_max_deg},
        {"sensor_height", c.sensor.sensor_height}}},
      {"dropout",
       {{"kind", c.dropout.kind},
        {"n", c.dropout.n},
        {"fraction", c.dropout.fraction},
        {"offset", c.dropout.offset},
        {"seed", c.dropout.seed}}},
      {"graph", {{"k", c.graph.k}, {"space", graph::to_string(c.graph.space)}, {"self_loops", c.graph.self_loops}}},
      {"model",
       {{"layers", c.model.layers},
        {"heads", c.model.heads},
        {"head_width", c.model.head_width},
        {"head_hidden", c.model.head_hidden},
        {"dropout", c.model.dropout},
        {"activation", gat::to_string(c.model.activation)},
        {"residual", c.model.residual},
        {"leaky_slope", c.model.leaky_slope},
        {"input_features", c.model.input_features}}},
      {"train",
       {{"learning_rate", c.train.adam.learning_rate},
        {"beta1", c.train.adam.beta1},
        {"beta2", c.train.adam.beta2},
        {"epsilon", c.train.adam.epsilon},
        {"max_epochs", c.train.max_epochs},
        {"patience", c.train.patience},
        {"batch", c.train.batch},
        {"seed", c.train.seed},
        {"split_fraction", c.train.split_fraction}}},
      {"eval",
       {{"tau", c.eval.tau},
        {"frames", c.eval.frames},
        {"write_reconstructions", c.eval.write_reconstructions},
        {"cdf_max", c.eval.cdf_max},
        {"cdf_step", c.eval.cdf_step}}},
      {"sweep", {{"ks", c.sweep.ks}, {"mode", c.sweep.mode}, {"repeats", c.sweep.repeats}}},
      {"output", {{"run_dir", c.run_dir}}},
  };
  return j.dump(2) + "\n";
}

std::string apply_override(const std::string& json_text, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' must look like section.key=value");
  }
  const auto path = assignment.substr(0, eq);
  const auto raw = assignment.substr(eq + 1);
  json doc;
  try {
    doc = json_text.empty() ? json::object() : json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const auto part = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("override path '" + path + "' has an empty component");
    if (!node->is_object()) throw ConfigError("override path '" + path + "' crosses a non-object value");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      break;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
  return doc.dump();
}

}  // namespace beamgat::config
