#include "beamgat/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>

namespace beamgat::ad {
namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

// Inputs kept alive for a backward closure; shares the value buffer.
Tensor save(const Tensor& t) { return t.detached(); }

Tensor finish(OpKind kind, Shape shape, std::vector<double> values,
              std::initializer_list<const Tensor*> inputs, Tape::BackwardFn backward) {
  const std::vector<const Tensor*> in(inputs);
  Tape* tape = common_tape(in);
  if (!tape) return make_unchecked(std::move(shape), std::move(values));
  return tape->record(kind, std::move(shape), std::move(values), in, std::move(backward));
}

void require_matrix(const Tensor& t, const char* what) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(what) + ": expected a matrix, got " + to_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(what) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
  }
}

void check_segments(Segments offsets, std::size_t edges, const char* what) {
  if (offsets.empty() || offsets.front() != 0 || offsets.back() != edges) {
    throw DimensionError(std::string(what) + ": offsets must partition [0, " +
                         std::to_string(edges) + ")");
  }
  for (std::size_t i = 1; i < offsets.size(); ++i) {
    if (offsets[i] < offsets[i - 1]) {
      throw DimensionError(std::string(what) + ": offsets must be non-decreasing");
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const auto m = a.rows(), n = a.cols(), p = b.cols();
  if (b.rows() != n) {
    throw DimensionError("matmul: inner dimensions disagree " + to_string(a.shape()) + " * " +
                         to_string(b.shape()));
  }
  std::vector<double> out(m * p);
  MutMap(out.data(), m, p).noalias() = ConstMap(a.values().data(), m, n) *
                                       ConstMap(b.values().data(), n, p);
  auto sa = save(a);
  auto sb = save(b);
  return finish(OpKind::kMatmul, {m, p}, std::move(out), {&a, &b},
                [sa, sb, m, n, p](std::span<const double> g, std::span<double* const> gin) {
                  ConstMap G(g.data(), m, p);
                  if (gin[0]) MutMap(gin[0], m, n).noalias() += G * ConstMap(sb.values().data(), n, p).transpose();
                  if (gin[1]) MutMap(gin[1], n, p).noalias() += ConstMap(sa.values().data(), m, n).transpose() * G;
                });
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  const auto r = a.rows(), c = a.cols();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a.values()[i * c + j];
  return finish(OpKind::kTranspose, {c, r}, std::move(out), {&a},
                [r, c](std::span<const double> g, std::span<double* const> gin) {
                  for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < c; ++j) gin[0][i * c + j] += g[j * r + i];
                });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return finish(OpKind::kAdd, a.shape(), std::move(out), {&a, &b},
                [](std::span<const double> g, std::span<double* const> gin) {
                  for (double* d : gin) {
                    if (!d) continue;
                    for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
                  }
                });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return finish(OpKind::kSub, a.shape(), std::move(out), {&a, &b},
                [](std::span<const double> g, std::span<double* const> gin) {
                  if (gin[0])
                    for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i];
                  if (gin[1])
                    for (std::size_t i = 0; i < g.size(); ++i) gin[1][i] -= g[i];
                });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  auto sa = save(a);
  auto sb = save(b);
  return finish(OpKind::kMul, a.shape(), std::move(out), {&a, &b},
                [sa, sb](std::span<const double> g, std::span<double* const> gin) {
                  if (gin[0])
                    for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i] * sb[i];
                  if (gin[1])
                    for (std::size_t i = 0; i < g.size(); ++i) gin[1][i] += g[i] * sa[i];
                });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * factor;
  return finish(OpKind::kScale, a.shape(), std::move(out), {&a},
                [factor](std::span<const double> g, std::span<double* const> gin) {
                  for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i] * factor;
                });
}

Tensor add_row_bias(const Tensor& x, const Tensor& bias) {
  require_matrix(x, "add_row_bias");
  const auto n = x.rows(), f = x.cols();
  if (bias.size() != f) {
    throw DimensionError("add_row_bias: bias of " + to_string(bias.shape()) + " for rows of width " +
                         std::to_string(f));
  }
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < f; ++j) out[i * f + j] = x[i * f + j] + bias[j];
  return finish(OpKind::kAddRowBias, x.shape(), std::move(out), {&x, &bias},
                [n, f](std::span<const double> g, std::span<double* const> gin) {
                  if (gin[0])
                    for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i];
                  if (gin[1])
                    for (std::size_t i = 0; i < n; ++i)
                      for (std::size_t j = 0; j < f; ++j) gin[1][j] += g[i * f + j];
                });
}

Tensor leaky_relu(const Tensor& x, double slope) {
  if (!(slope > 0.0 && slope < 1.0)) throw std::invalid_argument("leaky_relu: slope must be in (0, 1)");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : slope * x[i];
  auto sx = save(x);
  return finish(OpKind::kLeakyRelu, x.shape(), std::move(out), {&x},
                [sx, slope](std::span<const double> g, std::span<double* const> gin) {
                  for (std::size_t i = 0; i < g.size(); ++i)
                    gin[0][i] += sx[i] > 0.0 ? g[i] : slope * g[i];
                });
}

Tensor elu(const Tensor& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] >= 0.0 ? x[i] : std::expm1(x[i]);
  auto sx = save(x);
  return finish(OpKind::kElu, x.shape(), std::move(out), {&x},
                [sx](std::span<const double> g, std::span<double* const> gin) {
                  for (std::size_t i = 0; i < g.size(); ++i) {
                    const double v = sx[i];
                    gin[0][i] += v >= 0.0 ? g[i] : g[i] * std::exp(v);
                  }
                });
}

Tensor segment_softmax(const Tensor& scores, Segments offsets) {
  if (scores.rank() != 1) throw DimensionError("segment_softmax: scores must be rank-1");
  check_segments(offsets, scores.size(), "segment_softmax");
  const std::size_t segs = offsets.size() - 1;
  auto out = std::make_shared<std::vector<double>>(scores.size());
  for (std::size_t s = 0; s < segs; ++s) {
    const auto b = offsets[s], e = offsets[s + 1];
    if (b == e) throw DimensionError("segment_softmax: segment " + std::to_string(s) + " is empty");
    double mx = scores[b];
    for (auto i = b + 1; i < e; ++i) mx = std::max(mx, scores[i]);
    double total = 0.0;
    for (auto i = b; i < e; ++i) {
      (*out)[i] = std::exp(scores[i] - mx);
      total += (*out)[i];
    }
    for (auto i = b; i < e; ++i) (*out)[i] /= total;
  }
  std::vector<std::size_t> off(offsets.begin(), offsets.end());
  std::vector<double> values = *out;
  return finish(OpKind::kSegmentSoftmax, scores.shape(), std::move(values), {&scores},
                [out, off = std::move(off)](std::span<const double> g, std::span<double* const> gin) {
                  const auto& y = *out;
                  for (std::size_t s = 0; s + 1 < off.size(); ++s) {
                    double dot = 0.0;
                    for (auto i = off[s]; i < off[s + 1]; ++i) dot += g[i] * y[i];
                    for (auto i = off[s]; i < off[s + 1]; ++i) gin[0][i] += y[i] * (g[i] - dot);
                  }
                });
}

Tensor segment_weighted_sum(const Tensor& alpha, const Tensor& messages, Segments offsets) {
  if (alpha.rank() != 1) throw DimensionError("segment_weighted_sum: alpha must be rank-1");
  require_matrix(messages, "segment_weighted_sum");
  if (messages.rows() != alpha.size()) {
    throw DimensionError("segment_weighted_sum: " + std::to_string(alpha.size()) + " weights for " +
                         std::to_string(messages.rows()) + " messages");
  }
  check_segments(offsets, alpha.size(), "segment_weighted_sum");
  const std::size_t n = offsets.size() - 1, f = messages.cols();
  std::vector<double> out(n * f, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    double* row = out.data() + s * f;
    for (auto e = offsets[s]; e < offsets[s + 1]; ++e) {
      const double w = alpha[e];
      const double* msg = messages.values().data() + e * f;
      for (std::size_t j = 0; j < f; ++j) row[j] += w * msg[j];
    }
  }
  auto sa = save(alpha);
  auto sm = save(messages);
  std::vector<std::size_t> off(offsets.begin(), offsets.end());
  return finish(OpKind::kSegmentWeightedSum, {n, f}, std::move(out), {&alpha, &messages},
                [sa, sm, f, off = std::move(off)](std::span<const double> g,
                                                 std::span<double* const> gin) {
                  for (std::size_t s = 0; s + 1 < off.size(); ++s) {
                    const double* grow = g.data() + s * f;
                    for (auto e = off[s]; e < off[s + 1]; ++e) {
                      if (gin[0]) {
                        const double* msg = sm.values().data() + e * f;
                        double acc = 0.0;
                        for (std::size_t j = 0; j < f; ++j) acc += grow[j] * msg[j];
                        gin[0][e] += acc;
                      }
                      if (gin[1]) {
                        const double w = sa[e];
                        double* dm = gin[1] + e * f;
                        for (std::size_t j = 0; j < f; ++j) dm[j] += w * grow[j];
                      }
                    }
                  }
                });
}

Tensor neighbor_weighted_sum(const Tensor& alpha, const Tensor& x, std::span<const std::size_t> neighbors,
                             Segments offsets) {
  if (alpha.rank() != 1) throw DimensionError("neighbor_weighted_sum: alpha must be rank-1");
  require_matrix(x, "neighbor_weighted_sum");
  if (neighbors.size() != alpha.size()) {
    throw DimensionError("neighbor_weighted_sum: " + std::to_string(alpha.size()) + " weights for " +
                         std::to_string(neighbors.size()) + " edges");
  }
  check_segments(offsets, alpha.size(), "neighbor_weighted_sum");
  const std::size_t n = offsets.size() - 1, f = x.cols(), rows = x.rows();
  for (auto j : neighbors) {
    if (j >= rows) throw DimensionError("neighbor_weighted_sum: neighbor index out of range");
  }
  std::vector<double> out(n * f, 0.0);
  const double* xv = x.values().data();
  for (std::size_t s = 0; s < n; ++s) {
    double* row = out.data() + s * f;
    for (auto e = offsets[s]; e < offsets[s + 1]; ++e) {
      const double w = alpha[e];
      const double* src = xv + neighbors[e] * f;
      for (std::size_t j = 0; j < f; ++j) row[j] += w * src[j];
    }
  }
  auto sa = save(alpha);
  auto sx = save(x);
  auto nb = std::make_shared<const std::vector<std::size_t>>(neighbors.begin(), neighbors.end());
  auto off = std::make_shared<const std::vector<std::size_t>>(offsets.begin(), offsets.end());
  return finish(OpKind::kNeighborWeightedSum, {n, f}, std::move(out), {&alpha, &x},
                [sa, sx, f, nb, off](std::span<const double> g, std::span<double* const> gin) {
                  const double* xv = sx.values().data();
                  for (std::size_t s = 0; s + 1 < off->size(); ++s) {
                    const double* grow = g.data() + s * f;
                    for (auto e = (*off)[s]; e < (*off)[s + 1]; ++e) {
                      const auto j0 = (*nb)[e];
                      if (gin[0]) {
                        const double* src = xv + j0 * f;
                        double acc = 0.0;
                        for (std::size_t j = 0; j < f; ++j) acc += grow[j] * src[j];
                        gin[0][e] += acc;
                      }
                      if (gin[1]) {
                        const double w = sa[e];
                        double* dx = gin[1] + j0 * f;
                        for (std::size_t j = 0; j < f; ++j) dx[j] += w * grow[j];
                      }
                    }
                  }
                });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index) {
  if (x.rank() != 1 && x.rank() != 2) throw DimensionError("gather_rows: rank-1 or rank-2 input");
  const auto rows = x.rows(), f = x.cols();
  std::vector<double> out(index.size() * f);
  for (std::size_t e = 0; e < index.size(); ++e) {
    if (index[e] >= rows) throw DimensionError("gather_rows: index out of range");
    std::copy_n(x.values().data() + index[e] * f, f, out.data() + e * f);
  }
  Shape shape = x.rank() == 1 ? Shape{index.size()} : Shape{index.size(), f};
  auto idx = std::make_shared<const std::vector<std::size_t>>(index.begin(), index.end());
  return finish(OpKind::kGatherRows, std::move(shape), std::move(out), {&x},
                [idx, f](std::span<const double> g, std::span<double* const> gin) {
                  for (std::size_t e = 0; e < idx->size(); ++e) {
                    double* dst = gin[0] + (*idx)[e] * f;
                    const double* src = g.data() + e * f;
                    for (std::size_t j = 0; j < f; ++j) dst[j] += src[j];
                  }
                });
}

Tensor concat_columns(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_columns: no parts");
  const auto n = parts[0].rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_matrix(p, "concat_columns");
    if (p.rows() != n) throw DimensionError("concat_columns: row count mismatch");
    widths.push_back(p.cols());
    total += p.cols();
  }
  std::vector<double> out(n * total);
  std::size_t col = 0;
  for (const auto& p : parts) {
    const auto w = p.cols();
    for (std::size_t i = 0; i < n; ++i)
      std::copy_n(p.values().data() + i * w, w, out.data() + i * total + col);
    col += w;
  }
  std::vector<const Tensor*> in;
  for (const auto& p : parts) in.push_back(&p);
  Tape* tape = common_tape(in);
  if (!tape) return make_unchecked({n, total}, std::move(out));
  return tape->record(OpKind::kConcatColumns, {n, total}, std::move(out), in,
                      [n, total, widths](std::span<const double> g, std::span<double* const> gin) {
                        std::size_t c = 0;
                        for (std::size_t k = 0; k < widths.size(); ++k) {
                          const auto w = widths[k];
                          if (gin[k])
                            for (std::size_t i = 0; i < n; ++i)
                              for (std::size_t j = 0; j < w; ++j)
                                gin[k][i * w + j] += g[i * total + c + j];
                          c += w;
                        }
                      });
}

Tensor slice_columns(const Tensor& x, std::size_t begin, std::size_t end) {
  require_matrix(x, "slice_columns");
  const auto n = x.rows(), f = x.cols();
  if (begin > end || end > f) throw DimensionError("slice_columns: range out of bounds");
  const auto w = end - begin;
  std::vector<double> out(n * w);
  for (std::size_t i = 0; i < n; ++i)
    std::copy_n(x.values().data() + i * f + begin, w, out.data() + i * w);
  return finish(OpKind::kSliceColumns, {n, w}, std::move(out), {&x},
                [n, f, w, begin](std::span<const double> g, std::span<double* const> gin) {
                  for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < w; ++j) gin[0][i * f + begin + j] += g[i * w + j];
                });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  if (x.rank() != 1 && x.rank() != 2) throw DimensionError("slice_rows: rank-1 or rank-2 input");
  if (begin > end || end > x.rows()) throw DimensionError("slice_rows: range out of bounds");
  const auto f = x.cols();
  std::vector<double> out(x.values().begin() + begin * f, x.values().begin() + end * f);
  Shape shape = x.rank() == 1 ? Shape{end - begin} : Shape{end - begin, f};
  return finish(OpKind::kSliceRows, std::move(shape), std::move(out), {&x},
                [begin, f](std::span<const double> g, std::span<double* const> gin) {
                  for (std::size_t i = 0; i < g.size(); ++i) gin[0][begin * f + i] += g[i];
                });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (element_count(shape) != x.size()) {
    throw DimensionError("reshape: " + to_string(x.shape()) + " -> " + to_string(shape));
  }
  std::vector<double> out(x.values().begin(), x.values().end());
  return finish(OpKind::kReshape, std::move(shape), std::move(out), {&x},
                [](std::span<const double> g, std::span<double* const> gin) {
                  for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i];
                });
}

Tensor apply_dropout(const Tensor& x, double rate, std::uint64_t seed, bool training) {
  if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("dropout rate must be in [0, 1)");
  if (!training || rate == 0.0) return x;
  std::mt19937_64 rng(seed);
  const double keep_scale = 1.0 / (1.0 - rate);
  auto mask = std::make_shared<std::vector<double>>(x.size());
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    // 53-bit uniform in [0, 1), independent of the standard library's distributions.
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    (*mask)[i] = u < rate ? 0.0 : keep_scale;
    out[i] = x[i] * (*mask)[i];
  }
  return finish(OpKind::kDropout, x.shape(), std::move(out), {&x},
                [mask](std::span<const double> g, std::span<double* const> gin) {
                  for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i] * (*mask)[i];
                });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.values()) total += v;
  const auto n = x.size();
  return finish(OpKind::kSum, {}, {total}, {&x},
                [n](std::span<const double> g, std::span<double* const> gin) {
                  for (std::size_t i = 0; i < n; ++i) gin[0][i] += g[0];
                });
}

Tensor mean(const Tensor& x) {
  if (x.size() == 0) throw DimensionError("mean of an empty tensor");
  double total = 0.0;
  for (double v : x.values()) total += v;
  const auto n = x.size();
  const double inv = 1.0 / static_cast<double>(n);
  return finish(OpKind::kMean, {}, {total * inv}, {&x},
                [n, inv](std::span<const double> g, std::span<double* const> gin) {
                  for (std::size_t i = 0; i < n; ++i) gin[0][i] += g[0] * inv;
                });
}

std::vector<std::size_t> segment_ids(Segments offsets) {
  std::vector<std::size_t> ids(offsets.empty() ? 0 : offsets.back());
  for (std::size_t s = 0; s + 1 < offsets.size(); ++s)
    for (auto e = offsets[s]; e < offsets[s + 1]; ++e) ids[e] = s;
  return ids;
}

}  // namespace beamgat::ad
