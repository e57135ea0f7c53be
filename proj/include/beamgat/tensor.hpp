#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace beamgat::ad {

using Shape = std::vector<std::size_t>;

class Tape;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class TapeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

std::string to_string(const Shape& shape);
std::size_t element_count(const Shape& shape);

// Dense row-major array of doubles. Values are immutable and shared between
// copies. A tensor produced while a Tape is recording carries a handle to its
// tape record; untracked tensors carry none.
class Tensor {
 public:
  Tensor();

  // Validates that the shape matches the value count and that every value is
  // finite. Use this for anything coming from outside the library.
  Tensor(Shape shape, std::vector<double> values);

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_->size(); }
  // rank-1 tensors count as a column: rows() == size(), cols() == 1.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> values() const { return *data_; }
  double operator[](std::size_t i) const { return (*data_)[i]; }
  double at(std::size_t r, std::size_t c) const { return (*data_)[r * cols() + c]; }
  double item() const;

  bool tracked() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  std::size_t node() const { return node_; }

  // Same values, no tape handle.
  Tensor detached() const;

 private:
  friend class Tape;
  friend class Gradients;
  friend Tensor make_unchecked(Shape shape, std::vector<double> values);

  struct Unchecked {};
  Tensor(Unchecked, Shape shape, std::shared_ptr<const std::vector<double>> data);

  Shape shape_;
  std::shared_ptr<const std::vector<double>> data_;
  Tape* tape_ = nullptr;
  std::size_t node_ = 0;
  std::uint64_t generation_ = 0;
};

// Internal constructor for op outputs: only checks the shape.
Tensor make_unchecked(Shape shape, std::vector<double> values);

class Gradients {
 public:
  // Gradient of the loss w.r.t. `t`. Tensors that did not influence the loss
  // get a zero gradient of matching shape.
  Tensor of(const Tensor& t) const;
  bool has(const Tensor& t) const;

 private:
  friend class Tape;
  std::uint64_t generation_ = 0;
  const Tape* tape_ = nullptr;
  std::vector<std::vector<double>> grads_;
  std::vector<Shape> shapes_;
};

enum class OpKind {
  kLeaf,
  kMatmul,
  kTranspose,
  kAdd,
  kSub,
  kMul,
  kScale,
  kAddRowBias,
  kLeakyRelu,
  kElu,
  kSegmentSoftmax,
  kSegmentWeightedSum,
  kNeighborWeightedSum,
  kGatherRows,
  kConcatColumns,
  kSliceColumns,
  kSliceRows,
  kReshape,
  kDropout,
  kSum,
  kMean,
};

const char* op_name(OpKind kind);

// Append-only record of differentiable operations. One tape per training
// step; not thread-safe.
class Tape {
 public:
  // Receives the output gradient and one pointer per recorded input: the
  // input's gradient accumulator, or nullptr when that input is untracked.
  using BackwardFn =
      std::function<void(std::span<const double> grad_out, std::span<double* const> grad_in)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Registers `t` as a leaf on this tape and returns the tracked handle.
  Tensor watch(const Tensor& t);

  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  OpKind kind(std::size_t node) const { return records_.at(node).kind; }

  // Records an op output. Inputs that are untracked are passed as nullptr to
  // `backward`. Tracked inputs must belong to this tape's current generation.
  Tensor record(OpKind kind, Shape shape, std::vector<double> values,
                std::span<const Tensor* const> inputs, BackwardFn backward);

  // Reverse sweep from a scalar loss. Clears the tape afterwards; tensors
  // tracked before the call become stale and are rejected by later ops.
  Gradients backward(const Tensor& loss);

  void clear();

  // Throws unless `t` is untracked or a live handle on this tape.
  void check_live(const Tensor& t) const;

 private:
  struct Record {
    OpKind kind;
    Shape shape;
    std::vector<std::size_t> inputs;  // kNoInput for untracked
    BackwardFn backward;
  };
  static constexpr std::size_t kNoInput = static_cast<std::size_t>(-1);

  std::vector<Record> records_;
  std::uint64_t generation_ = 1;
};

// Picks the tape shared by the tracked tensors in `inputs`, or nullptr when
// none are tracked. Throws TapeError on mixed tapes or stale handles.
Tape* common_tape(std::span<const Tensor* const> inputs);

}  // namespace beamgat::ad
