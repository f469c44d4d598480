#ifndef IKTN_LAYERS_H_
#define IKTN_LAYERS_H_

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "iktn/data.h"
#include "iktn/tensor.h"

namespace iktn {

// Named trainable tensors in creation order. Names double as checkpoint
// manifest keys.
template <typename T>
class ParameterSet {
 public:
  enum class Init { kZeros, kGlorot };

  Tensor<T> Create(const std::string& name, Shape shape, Init init, Rng& rng,
                   bool trainable = true);
  Tensor<T> Adopt(const std::string& name, Tensor<T> tensor);

  // When set, each Create draws from its own generator seeded by this value
  // and the parameter name, ignoring the generator passed in. Initial values
  // then do not depend on which other parameters exist.
  void set_name_seed(std::optional<std::uint64_t> seed) { name_seed_ = seed; }

  bool Contains(const std::string& name) const { return index_.count(name) > 0; }
  Tensor<T> Get(const std::string& name) const;
  const std::vector<std::pair<std::string, Tensor<T>>>& entries() const {
    return entries_;
  }
  std::vector<Tensor<T>> Tensors() const;
  std::size_t ScalarCount() const;
  void ZeroGrad();

 private:
  std::vector<std::pair<std::string, Tensor<T>>> entries_;
  std::map<std::string, std::size_t> index_;
  std::optional<std::uint64_t> name_seed_;
};

// FNV-1a of `name` mixed into `seed`.
std::uint64_t NameSeed(std::uint64_t seed, std::string_view name);

template <typename T>
class Affine {
 public:
  Affine() = default;
  Affine(ParameterSet<T>& params, const std::string& prefix, std::size_t in,
         std::size_t out, Rng& rng);

  // x[n×in] -> [n×out]
  Tensor<T> Apply(Tape<T>& tape, const Tensor<T>& x) const;
  std::size_t in_dim() const { return weight_.dim(0); }
  std::size_t out_dim() const { return weight_.dim(1); }
  bool defined() const { return weight_.defined(); }

 private:
  Tensor<T> weight_;
  Tensor<T> bias_;
};

// ReLU(conv1d(x) + bias) with padded rows forced back to zero, so padded and
// unpadded inputs give identical values at real positions.
template <typename T>
class ConvLayer {
 public:
  ConvLayer() = default;
  ConvLayer(ParameterSet<T>& params, const std::string& prefix,
            std::size_t width, std::size_t in, std::size_t out, Rng& rng);

  Tensor<T> Apply(Tape<T>& tape, const Tensor<T>& x,
                  std::span<const std::uint8_t> mask) const;

 private:
  Tensor<T> kernels_;
  Tensor<T> bias_;
};

// Kernels of several widths over the embedded sentence; outputs are
// concatenated per token.
template <typename T>
class SharedEncoder {
 public:
  SharedEncoder() = default;
  SharedEncoder(ParameterSet<T>& params, const std::vector<std::size_t>& widths,
                std::size_t in, std::size_t out, Rng& rng);

  Tensor<T> Encode(Tape<T>& tape, const Tensor<T>& embedded,
                   std::span<const std::uint8_t> mask) const;
  std::size_t out_dim() const { return out_dim_; }

 private:
  std::vector<ConvLayer<T>> convs_;
  std::size_t out_dim_ = 0;
};

// Task-private convolution stack (one per task, nothing shared).
template <typename T>
class TaskLayer {
 public:
  TaskLayer() = default;
  TaskLayer(ParameterSet<T>& params, Task task, std::size_t depth,
            std::size_t width, std::size_t in, std::size_t out, Rng& rng);

  Tensor<T> Apply(Tape<T>& tape, const Tensor<T>& shared,
                  std::span<const std::uint8_t> mask) const;
  Task task() const { return task_; }

 private:
  Task task_ = Task::kAte;
  std::vector<ConvLayer<T>> stack_;
};

template <typename T>
struct AttentionOutput {
  Tensor<T> weights;     // [n], zero on padded tokens
  Tensor<T> summary;     // [d]
  Tensor<T> logits;      // [C2]
  Tensor<T> probabilities;  // [C2]
};

// Self-attention pooling followed by an affine classifier.
template <typename T>
class AttentionHead {
 public:
  AttentionHead() = default;
  AttentionHead(ParameterSet<T>& params, Task task, std::size_t d,
                std::size_t classes, Rng& rng);

  AttentionOutput<T> Attend(Tape<T>& tape, const Tensor<T>& h,
                            std::span<const std::uint8_t> mask) const;

 private:
  Tensor<T> scorer_;  // [d×1]
  Affine<T> classifier_;
};

template <typename T>
struct TokenPredictions {
  Tensor<T> logits;         // [n×C1]
  Tensor<T> probabilities;  // [n×C1], rows sum to 1
};

template <typename T>
class TokenDecoder {
 public:
  TokenDecoder() = default;
  TokenDecoder(ParameterSet<T>& params, Task task, std::size_t d,
               std::size_t classes, Rng& rng);

  TokenPredictions<T> Decode(Tape<T>& tape, const Tensor<T>& h) const;

 private:
  Affine<T> affine_;
};

}  // namespace iktn

#endif  // IKTN_LAYERS_H_
