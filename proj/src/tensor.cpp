#include "beamgat/tensor.hpp"

#include <cmath>
#include <sstream>

namespace beamgat::ad {

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t element_count(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

Tensor::Tensor() : data_(std::make_shared<const std::vector<double>>()) { shape_ = {0}; }

Tensor::Tensor(Shape shape, std::vector<double> values) {
  if (element_count(shape) != values.size()) {
    throw DimensionError("tensor shape " + to_string(shape) + " does not match " +
                         std::to_string(values.size()) + " values");
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument("tensor values must be finite");
  }
  shape_ = std::move(shape);
  data_ = std::make_shared<const std::vector<double>>(std::move(values));
}

Tensor::Tensor(Unchecked, Shape shape, std::shared_ptr<const std::vector<double>> data)
    : shape_(std::move(shape)), data_(std::move(data)) {}

Tensor make_unchecked(Shape shape, std::vector<double> values) {
  if (element_count(shape) != values.size()) {
    throw DimensionError("tensor shape " + to_string(shape) + " does not match " +
                         std::to_string(values.size()) + " values");
  }
  return Tensor(Tensor::Unchecked{}, std::move(shape),
                std::make_shared<const std::vector<double>>(std::move(values)));
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  const auto n = element_count(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, {value}); }

Tensor Tensor::vector(std::vector<double> values) {
  const auto n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

std::size_t Tensor::rows() const { return shape_.empty() ? 1 : shape_[0]; }

std::size_t Tensor::cols() const {
  if (shape_.size() <= 1) return 1;
  std::size_t c = 1;
  for (std::size_t i = 1; i < shape_.size(); ++i) c *= shape_[i];
  return c;
}

double Tensor::item() const {
  if (size() != 1) throw DimensionError("item() on tensor of shape " + to_string(shape_));
  return (*data_)[0];
}

Tensor Tensor::detached() const { return Tensor(Unchecked{}, shape_, data_); }

// ---------------------------------------------------------------------------

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kMatmul: return "matmul";
    case OpKind::kTranspose: return "transpose";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kScale: return "scale";
    case OpKind::kAddRowBias: return "add_row_bias";
    case OpKind::kLeakyRelu: return "leaky_relu";
    case OpKind::kElu: return "elu";
    case OpKind::kSegmentSoftmax: return "segment_softmax";
    case OpKind::kSegmentWeightedSum: return "segment_weighted_sum";
    case OpKind::kNeighborWeightedSum: return "neighbor_weighted_sum";
    case OpKind::kGatherRows: return "gather_rows";
    case OpKind::kConcatColumns: return "concat_columns";
    case OpKind::kSliceColumns: return "slice_columns";
    case OpKind::kSliceRows: return "slice_rows";
    case OpKind::kReshape: return "reshape";
    case OpKind::kDropout: return "dropout";
    case OpKind::kSum: return "sum";
    case OpKind::kMean: return "mean";
  }
  return "?";
}

void Tape::check_live(const Tensor& t) const {
  if (!t.tracked()) return;
  if (t.tape_ != this) throw TapeError("tensor belongs to a different tape");
  if (t.generation_ != generation_ || t.node_ >= records_.size()) {
    throw TapeError("tensor handle is stale (tape was cleared)");
  }
}

Tensor Tape::watch(const Tensor& t) {
  if (t.tracked()) throw TapeError("tensor is already tracked");
  records_.push_back(Record{OpKind::kLeaf, t.shape_, {}, nullptr});
  Tensor out(Tensor::Unchecked{}, t.shape_, t.data_);
  out.tape_ = this;
  out.node_ = records_.size() - 1;
  out.generation_ = generation_;
  return out;
}

Tensor Tape::record(OpKind kind, Shape shape, std::vector<double> values,
                    std::span<const Tensor* const> inputs, BackwardFn backward) {
  Record rec{kind, shape, {}, std::move(backward)};
  rec.inputs.reserve(inputs.size());
  for (const Tensor* in : inputs) {
    if (in->tracked()) {
      check_live(*in);
      rec.inputs.push_back(in->node_);
    } else {
      rec.inputs.push_back(kNoInput);
    }
  }
  Tensor out = make_unchecked(std::move(shape), std::move(values));
  records_.push_back(std::move(rec));
  out.tape_ = this;
  out.node_ = records_.size() - 1;
  out.generation_ = generation_;
  return out;
}

Gradients Tape::backward(const Tensor& loss) {
  if (!loss.tracked()) throw TapeError("backward() called on an untracked tensor");
  check_live(loss);
  if (loss.size() != 1) {
    throw DimensionError("backward() needs a scalar loss, got " + to_string(loss.shape()));
  }

  Gradients g;
  g.tape_ = this;
  g.generation_ = generation_;
  g.grads_.resize(records_.size());
  g.shapes_.reserve(records_.size());
  for (const auto& r : records_) g.shapes_.push_back(r.shape);

  g.grads_[loss.node_].assign(1, 1.0);
  std::vector<double*> grad_in;
  for (std::size_t n = loss.node_ + 1; n-- > 0;) {
    Record& rec = records_[n];
    if (g.grads_[n].empty() || !rec.backward) continue;
    grad_in.assign(rec.inputs.size(), nullptr);
    for (std::size_t k = 0; k < rec.inputs.size(); ++k) {
      const auto id = rec.inputs[k];
      if (id == kNoInput) continue;
      auto& slot = g.grads_[id];
      if (slot.empty()) slot.assign(element_count(records_[id].shape), 0.0);
      grad_in[k] = slot.data();
    }
    rec.backward(g.grads_[n], grad_in);
  }
  clear();
  return g;
}

void Tape::clear() {
  records_.clear();
  ++generation_;
}

Tape* common_tape(std::span<const Tensor* const> inputs) {
  Tape* tape = nullptr;
  for (const Tensor* in : inputs) {
    if (!in->tracked()) continue;
    if (tape && in->tape() != tape) throw TapeError("inputs are tracked on different tapes");
    tape = in->tape();
  }
  if (tape) {
    for (const Tensor* in : inputs) tape->check_live(*in);
  }
  return tape;
}

// ---------------------------------------------------------------------------

bool Gradients::has(const Tensor& t) const {
  return t.tracked() && t.tape() == tape_ && t.generation_ == generation_ &&
         t.node() < grads_.size() && !grads_[t.node()].empty();
}

Tensor Gradients::of(const Tensor& t) const {
  if (!t.tracked() || t.tape() != tape_ || t.generation_ != generation_ ||
      t.node() >= grads_.size()) {
    throw TapeError("tensor was not recorded on the tape these gradients came from");
  }
  const auto& grad = grads_[t.node()];
  if (grad.empty()) return make_unchecked(shapes_[t.node()],
                                          std::vector<double>(element_count(shapes_[t.node()]), 0.0));
  return make_unchecked(shapes_[t.node()], grad);
}

}  // namespace beamgat::ad
