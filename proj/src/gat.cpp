#include "beamgat/gat.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "beamgat/errors.hpp"
#include "beamgat/ops.hpp"
#include "beamgat/random.hpp"

namespace beamgat::gat {
namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'B', 'E', 'A', 'M', 'G', 'A', 'T', '\0'};

Tensor glorot(std::size_t rows, std::size_t cols, std::size_t fan_in, std::size_t fan_out,
              std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> v(rows * cols);
  for (auto& x : v) x = (2.0 * unit_double(rng()) - 1.0) * limit;
  return Tensor::matrix(rows, cols, std::move(v));
}

json config_to_json(const ModelConfig& c) {
  return json{{"layers", c.layers},           {"heads", c.heads},
              {"head_width", c.head_width},   {"head_hidden", c.head_hidden},
              {"dropout", c.dropout},         {"activation", to_string(c.activation)},
              {"residual", c.residual},       {"leaky_slope", c.leaky_slope},
              {"input_features", c.input_features}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.layers = j.at("layers").get<int>();
  c.heads = j.at("heads").get<int>();
  c.head_width = j.at("head_width").get<int>();
  c.head_hidden = j.at("head_hidden").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.activation = parse_activation(j.at("activation").get<std::string>());
  c.residual = j.at("residual").get<bool>();
  c.leaky_slope = j.at("leaky_slope").get<double>();
  c.input_features = j.at("input_features").get<std::vector<std::string>>();
  return c;
}

Tensor activate(const Tensor& x, const ModelConfig& config) {
  return config.activation == Activation::kElu ? ad::elu(x) : ad::leaky_relu(x, config.leaky_slope);
}

}  // namespace

std::string to_string(Activation a) { return a == Activation::kElu ? "elu" : "leaky_relu"; }

Activation parse_activation(const std::string& name) {
  if (name == "elu") return Activation::kElu;
  if (name == "leaky_relu") return Activation::kLeakyRelu;
  throw ConfigError("unknown activation '" + name + "'");
}

const std::vector<std::string>& known_features() {
  static const std::vector<std::string> names{"x", "y", "z", "reflectance", "mask", "beam"};
  return names;
}

const std::vector<std::string>& default_features() { return known_features(); }

void ModelConfig::validate() const {
  if (layers < 1) throw ConfigError("model needs at least one attention layer");
  if (heads < 1 || head_width < 1 || head_hidden < 1) throw ConfigError("model widths must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) throw ConfigError("leaky slope must lie in (0, 1)");
  if (input_features.empty()) throw ConfigError("model needs at least one input feature");
  for (std::size_t i = 0; i < input_features.size(); ++i) {
    const auto& f = input_features[i];
    if (std::find(known_features().begin(), known_features().end(), f) == known_features().end()) {
      throw ConfigError("unknown input feature '" + f + "'");
    }
    if (std::find(input_features.begin(), input_features.begin() + static_cast<std::ptrdiff_t>(i), f) !=
        input_features.begin() + static_cast<std::ptrdiff_t>(i)) {
      throw ConfigError("duplicate input feature '" + f + "'");
    }
  }
}

std::vector<Tensor*> GatModel::parameters() {
  std::vector<Tensor*> out;
  for (auto& layer : layers) {
    for (std::size_t k = 0; k < layer.W.size(); ++k) {
      out.push_back(&layer.W[k]);
      out.push_back(&layer.a[k]);
    }
  }
  out.insert(out.end(), {&head_W1, &head_b1, &head_W2, &head_b2});
  return out;
}

std::vector<const Tensor*> GatModel::parameters() const {
  auto mut = const_cast<GatModel*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

std::size_t GatModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto* p : parameters()) n += p->size();
  return n;
}

GatModel init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  GatModel m;
  m.config = config;
  const auto fw = static_cast<std::size_t>(config.head_width);
  std::size_t in = config.input_width();
  for (int l = 0; l < config.layers; ++l) {
    GatLayerParams layer;
    for (int k = 0; k < config.heads; ++k) {
      layer.W.push_back(glorot(fw, in, in, fw, rng));
      layer.a.push_back(ad::reshape(glorot(2 * fw, 1, 2 * fw, 1, rng), {2 * fw}));
    }
    m.layers.push_back(std::move(layer));
    in = config.layer_width();
  }
  const auto hh = static_cast<std::size_t>(config.head_hidden);
  m.head_W1 = glorot(hh, in, in, hh, rng);
  m.head_b1 = Tensor::zeros({hh});
  m.head_W2 = glorot(1, hh, hh, 1, rng);
  m.head_b2 = Tensor::zeros({1});
  return m;
}

GatModel watch(ad::Tape& tape, const GatModel& model) {
  GatModel out = model;
  for (auto* p : out.parameters()) *p = tape.watch(p->detached());
  return out;
}

Tensor gat_layer_forward(const Tensor& h, const graph::KnnGraph& graph, const GatLayerParams& params,
                         const ModelConfig& config, const ForwardOptions& options) {
  const auto n = h.rows();
  if (h.rank() != 2) throw ad::DimensionError("layer input must be a matrix");
  if (graph.node_count() != n) {
    throw ad::DimensionError("graph has " + std::to_string(graph.node_count()) + " nodes, features have " +
                             std::to_string(n));
  }
  if (params.W.empty() || params.W.size() != params.a.size()) {
    throw ad::DimensionError("layer needs one projection and one attention vector per head");
  }
  const auto fw = params.W[0].rows();
  const ad::Segments offsets(graph.offsets);
  const auto dst = ad::segment_ids(offsets);

  std::vector<Tensor> heads;
  heads.reserve(params.W.size());
  for (std::size_t k = 0; k < params.W.size(); ++k) {
    if (params.W[k].cols() != h.cols() || params.W[k].rows() != fw || params.a[k].size() != 2 * fw) {
      throw ad::DimensionError("head " + std::to_string(k) + " parameters do not fit input width " +
                               std::to_string(h.cols()));
    }
    const auto wh = ad::matmul(h, ad::transpose(params.W[k]));  // N x F'
    const auto a_dst = ad::reshape(ad::slice_rows(params.a[k], 0, fw), {fw, 1});
    const auto a_src = ad::reshape(ad::slice_rows(params.a[k], fw, 2 * fw), {fw, 1});
    const auto s_dst = ad::reshape(ad::matmul(wh, a_dst), {n});
    const auto s_src = ad::reshape(ad::matmul(wh, a_src), {n});
    const auto scores = ad::leaky_relu(
        ad::add(ad::gather_rows(s_dst, dst), ad::gather_rows(s_src, graph.neighbors)), config.leaky_slope);
    const auto alpha = ad::segment_softmax(scores, offsets);
    if (options.attention) options.attention->push_back(alpha.detached());
    heads.push_back(ad::neighbor_weighted_sum(alpha, wh, graph.neighbors, offsets));
  }
  auto out = activate(ad::concat_columns(heads), config);
  if (config.residual && out.cols() == h.cols()) out = ad::add(out, h);
  return ad::apply_dropout(out, config.dropout, options.dropout_seed, options.training);
}

Tensor model_forward(const Tensor& features, const graph::KnnGraph& graph, const GatModel& model,
                     const ForwardOptions& options) {
  model.config.validate();
  if (model.layers.empty()) throw ConfigError("model has no attention layers");
  if (features.rank() != 2 || features.cols() != model.config.input_width()) {
    throw ad::DimensionError("features of shape " + ad::to_string(features.shape()) +
                             " do not match the model's " +
                             std::to_string(model.config.input_width()) + " inputs");
  }
  Tensor h = features;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    ForwardOptions layer_options = options;
    layer_options.dropout_seed = hash_combine(options.dropout_seed, l);
    h = gat_layer_forward(h, graph, model.layers[l], model.config, layer_options);
  }
  const auto hidden = ad::leaky_relu(ad::add_row_bias(ad::matmul(h, ad::transpose(model.head_W1)), model.head_b1),
                                     model.config.leaky_slope);
  const auto z = ad::add_row_bias(ad::matmul(hidden, ad::transpose(model.head_W2)), model.head_b2);
  return ad::reshape(z, {features.rows()});
}

// Layout: magic, u32 version, u64 header length, JSON header, then every
// parameter's values as little-endian doubles in parameters() order.
void save_model(const GatModel& model, const std::filesystem::path& path, int epochs_completed) {
  json header{{"config", config_to_json(model.config)}, {"epochs_completed", epochs_completed}};
  json shapes = json::array();
  for (const auto* p : model.parameters()) shapes.push_back(p->shape());
  header["shapes"] = shapes;
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write model to " + path.string());
  const std::uint32_t version = kModelFileVersion;
  const std::uint64_t len = text.size();
  out.write(kMagic, sizeof kMagic);
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto* p : model.parameters()) {
    out.write(reinterpret_cast<const char*>(p->values().data()),
              static_cast<std::streamsize>(p->size() * sizeof(double)));
  }
  out.flush();
  if (!out) throw DataError("write failed: " + path.string());
}

ModelFile load_model_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model " + path.string());
  const auto fail = [&](const std::string& why) -> FormatError {
    return FormatError(path.string() + ": " + why);
  };
  char magic[8];
  std::uint32_t version = 0;
  std::uint64_t len = 0;
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw fail("not a model file");
  }
  if (!in.read(reinterpret_cast<char*>(&version), sizeof version)) throw fail("truncated header");
  if (version != kModelFileVersion) {
    throw fail("unsupported model file version " + std::to_string(version) + " (expected " +
               std::to_string(kModelFileVersion) + ")");
  }
  if (!in.read(reinterpret_cast<char*>(&len), sizeof len) || len > (1u << 24)) throw fail("truncated header");
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw fail("truncated header");

  ModelFile file;
  json header;
  try {
    header = json::parse(text);
    file.model = init_params(config_from_json(header.at("config")), 0);
    file.epochs_completed = header.at("epochs_completed").get<int>();
  } catch (const json::exception& e) {
    throw fail(std::string("bad header: ") + e.what());
  }
  const auto params = file.model.parameters();
  const auto& shapes = header.at("shapes");
  if (shapes.size() != params.size()) throw fail("parameter count does not match the config");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto shape = shapes[i].get<ad::Shape>();
    if (shape != params[i]->shape()) throw fail("parameter " + std::to_string(i) + " has the wrong shape");
    std::vector<double> values(params[i]->size());
    if (!in.read(reinterpret_cast<char*>(values.data()),
                 static_cast<std::streamsize>(values.size() * sizeof(double)))) {
      throw fail("truncated parameter data");
    }
    try {
      *params[i] = Tensor(shape, std::move(values));
    } catch (const std::invalid_argument&) {
      throw fail("non-finite parameter values");
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) throw fail("trailing bytes after parameters");
  return file;
}

GatModel load_model(const std::filesystem::path& path) { return load_model_file(path).model; }

bool bitwise_equal(const GatModel& a, const GatModel& b) {
  if (!(a.config == b.config)) return false;
  const auto pa = a.parameters(), pb = b.parameters();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (pa[i]->shape() != pb[i]->shape()) return false;
    if (std::memcmp(pa[i]->values().data(), pb[i]->values().data(), pa[i]->size() * sizeof(double)) != 0) {
      return false;
    }
  }
  return true;
}

}  // namespace beamgat::gat
