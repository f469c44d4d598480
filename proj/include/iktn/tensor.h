#ifndef IKTN_TENSOR_H_
#define IKTN_TENSOR_H_

// Dense tensors and a tape-based reverse-mode differentiation engine.
//
// A Tensor is a reference-counted handle: copies alias the same storage, the
// way parameters are shared between the model, the optimizer and the tape.
// Every differentiable operation takes the active Tape as its first argument
// and records a local backward rule there. Tape::backward() replays the rules
// in reverse recording order.
//
// The engine is instantiated for float (training) and double (gradient
// checking).

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace iktn {

using Shape = std::vector<std::size_t>;

std::string ShapeToString(const Shape& shape);
std::size_t ShapeSize(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class IndexError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

using Rng = std::mt19937_64;

template <typename T>
struct TensorStorage {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty unless requires_grad
  bool requires_grad = false;
};

template <typename T>
class Tensor {
 public:
  Tensor() = default;

  static Tensor Zeros(Shape shape, bool requires_grad = false);
  static Tensor FromData(Shape shape, std::vector<T> data,
                         bool requires_grad = false);
  static Tensor Scalar(T value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
  std::size_t size() const { return impl_->data.size(); }
  bool requires_grad() const { return impl_->requires_grad; }
  bool has_grad() const { return !impl_->grad.empty(); }

  std::span<const T> data() const { return impl_->data; }
  std::span<T> mutable_data() const { return impl_->data; }
  std::span<const T> grad() const { return impl_->grad; }
  std::span<T> mutable_grad() const { return impl_->grad; }

  T item() const;
  T at(std::size_t i) const { return impl_->data[i]; }
  T at(std::size_t i, std::size_t j) const {
    return impl_->data[i * impl_->shape[1] + j];
  }

  // Turns on gradient tracking and allocates a zeroed gradient buffer.
  void set_requires_grad(bool on);
  void zero_grad() const;
  // Deep copy that does not share storage with this tensor.
  Tensor clone() const;
  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  explicit Tensor(std::shared_ptr<TensorStorage<T>> impl)
      : impl_(std::move(impl)) {}

  std::shared_ptr<TensorStorage<T>> impl_;
};

// Ordered record of operations. Not thread-safe; one tape per training step.
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  // Registers `output` as produced from `inputs`. The output tracks
  // gradients iff any input does; in that case `backward` is kept and run
  // during backward(). Returns the output for chaining.
  Tensor<T> Record(Tensor<T> output, const std::vector<Tensor<T>>& inputs,
                   BackwardFn backward);

  // Seeds d(loss)/d(loss) = 1 and propagates to every tracked tensor.
  // Intermediate gradients are reset first, so repeated calls accumulate
  // exactly once more into leaf gradients.
  void Backward(const Tensor<T>& loss);

  std::size_t size() const { return nodes_.size(); }
  void Clear() { nodes_.clear(); }

 private:
  struct Node {
    Tensor<T> output;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

// ---- Elementwise and reductions ----

template <typename T>
Tensor<T> Add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> Mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> Scale(Tape<T>& tape, const Tensor<T>& a, T factor);
template <typename T>
Tensor<T> Relu(Tape<T>& tape, const Tensor<T>& x);
template <typename T>
Tensor<T> Sigmoid(Tape<T>& tape, const Tensor<T>& x);
template <typename T>
Tensor<T> Sum(Tape<T>& tape, const Tensor<T>& x);
template <typename T>
Tensor<T> Mean(Tape<T>& tape, const Tensor<T>& x);
template <typename T>
Tensor<T> Reshape(Tape<T>& tape, const Tensor<T>& x, Shape shape);

// ---- Linear algebra ----

template <typename T>
Tensor<T> MatMul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);
// x[m×k] + bias[k] broadcast over rows.
template <typename T>
Tensor<T> AddRowBroadcast(Tape<T>& tape, const Tensor<T>& x,
                          const Tensor<T>& bias);
// x[n×in] · weight[in×out] + bias[out].
template <typename T>
Tensor<T> FullyConnected(Tape<T>& tape, const Tensor<T>& x,
                         const Tensor<T>& weight, const Tensor<T>& bias);
// Same-length convolution with symmetric zero padding.
// x[n×d_in], kernels[w×d_in×d_out] with w odd.
template <typename T>
Tensor<T> Conv1d(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& kernels);

// ---- Structural ----

template <typename T>
Tensor<T> Concat(Tape<T>& tape, const std::vector<Tensor<T>>& parts,
                 std::size_t axis);
// Rows of `table` selected by `ids`. No gradient reaches `frozen_row`.
template <typename T>
Tensor<T> EmbeddingLookup(Tape<T>& tape, const Tensor<T>& table,
                          std::span<const std::int32_t> ids,
                          std::int32_t frozen_row = -1);
// x[k] repeated into [n×k].
template <typename T>
Tensor<T> RepeatRows(Tape<T>& tape, const Tensor<T>& x, std::size_t n);
// Zeroes rows i of x[n×d] with mask[i] == 0.
template <typename T>
Tensor<T> MaskRows(Tape<T>& tape, const Tensor<T>& x,
                   std::span<const std::uint8_t> mask);
// Inverted dropout with an explicit Bernoulli mask; identity when !train.
template <typename T>
Tensor<T> Dropout(Tape<T>& tape, const Tensor<T>& x, double rate, bool train,
                  Rng& rng);

// ---- Normalizers ----

// Softmax along `axis`. When `mask` is non-empty it has one entry per
// position along `axis`; masked positions get probability exactly 0.
template <typename T>
Tensor<T> Softmax(Tape<T>& tape, const Tensor<T>& x, std::size_t axis,
                  std::span<const std::uint8_t> mask = {});
// ||s||²/(1+||s||²) · s/(||s||+1e-9) over the last axis.
template <typename T>
Tensor<T> Squash(Tape<T>& tape, const Tensor<T>& s);

// ---- Losses ----

// −log softmax(logits)[target] for logits[k].
template <typename T>
Tensor<T> CrossEntropy(Tape<T>& tape, const Tensor<T>& logits, int target);
// Mean over rows with targets[i] >= 0 of the row cross-entropy of
// logits[n×k]. Rows with negative targets are ignored; if none remain the
// result is exactly 0.
template <typename T>
Tensor<T> MaskedMeanCrossEntropy(Tape<T>& tape, const Tensor<T>& logits,
                                 std::span<const int> targets);

// ---- Routing kernels ----

// out[i][j][:] = source[i][:] + target[j][:]  (source, target: n×d).
template <typename T>
Tensor<T> PairwiseSum(Tape<T>& tape, const Tensor<T>& source,
                      const Tensor<T>& target);
// out[j][:] = Σ_i coupling[i][j] · votes[i][j][:] over sources i with
// source_mask[i] != 0 (all sources when the mask is empty).
template <typename T>
Tensor<T> WeightedSourceSum(Tape<T>& tape, const Tensor<T>& coupling,
                            const Tensor<T>& votes,
                            std::span<const std::uint8_t> source_mask = {});
// out[i][j] = votes[i][j][:] · outputs[j][:].
template <typename T>
Tensor<T> Agreement(Tape<T>& tape, const Tensor<T>& votes,
                    const Tensor<T>& outputs);

// Mutation hooks used to validate the gradient checker. Never enabled in
// normal operation.
namespace testing_hooks {
void SetCorruptSquashBackward(bool on);
bool CorruptSquashBackward();
// While set, every Relu appends one byte per element (1 if the input is
// positive) to `sink`. Gradient checking uses it to spot finite-difference
// steps that cross the kink at zero.
void SetReluSignSink(std::vector<std::uint8_t>* sink);
}  // namespace testing_hooks

}  // namespace iktn

#endif  // IKTN_TENSOR_H_
