#include "iktn/layers.h"

#include <cmath>

namespace iktn {

// ---------------------------------------------------------------------------
// ParameterSet

std::uint64_t NameSeed(std::uint64_t seed, std::string_view name) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : name) {
    h ^= c;
    h *= 1099511628211ull;
  }
  // splitmix64 finalizer over the combination
  std::uint64_t z = h ^ (seed + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

template <typename T>
Tensor<T> ParameterSet<T>::Create(const std::string& name, Shape shape,
                                  Init init, Rng& rng, bool trainable) {
  const std::size_t n = ShapeSize(shape);
  std::vector<T> data(n, T(0));
  if (init == Init::kGlorot) {
    // Fan-in is everything but the last axis (conv kernels: width × d_in).
    const std::size_t fan_out = shape.back();
    const std::size_t fan_in = n / fan_out;
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Rng own(name_seed_ ? NameSeed(*name_seed_, name) : 0);
    Rng& source = name_seed_ ? own : rng;
    for (T& v : data) v = static_cast<T>(dist(source));
  }
  return Adopt(name, Tensor<T>::FromData(std::move(shape), std::move(data), trainable));
}

template <typename T>
Tensor<T> ParameterSet<T>::Adopt(const std::string& name, Tensor<T> tensor) {
  if (index_.count(name)) throw ContractError("duplicate parameter name " + name);
  index_.emplace(name, entries_.size());
  entries_.emplace_back(name, tensor);
  return tensor;
}

template <typename T>
Tensor<T> ParameterSet<T>::Get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("no parameter named " + name);
  return entries_[it->second].second;
}

template <typename T>
std::vector<Tensor<T>> ParameterSet<T>::Tensors() const {
  std::vector<Tensor<T>> out;
  for (const auto& [name, t] : entries_) out.push_back(t);
  return out;
}

template <typename T>
std::size_t ParameterSet<T>::ScalarCount() const {
  std::size_t n = 0;
  for (const auto& [name, t] : entries_) n += t.size();
  return n;
}

template <typename T>
void ParameterSet<T>::ZeroGrad() {
  for (auto& [name, t] : entries_) {
    if (t.requires_grad()) t.zero_grad();
  }
}

// ---------------------------------------------------------------------------
// Affine / conv

template <typename T>
Affine<T>::Affine(ParameterSet<T>& params, const std::string& prefix,
                  std::size_t in, std::size_t out, Rng& rng) {
  using Init = typename ParameterSet<T>::Init;
  weight_ = params.Create(prefix + ".W", {in, out}, Init::kGlorot, rng);
  bias_ = params.Create(prefix + ".b", {out}, Init::kZeros, rng);
}

template <typename T>
Tensor<T> Affine<T>::Apply(Tape<T>& tape, const Tensor<T>& x) const {
  return FullyConnected(tape, x, weight_, bias_);
}

template <typename T>
ConvLayer<T>::ConvLayer(ParameterSet<T>& params, const std::string& prefix,
                        std::size_t width, std::size_t in, std::size_t out,
                        Rng& rng) {
  using Init = typename ParameterSet<T>::Init;
  if (width % 2 == 0) {
    throw ConfigError("kernel width must be odd, got " + std::to_string(width));
  }
  kernels_ = params.Create(prefix + ".kernel", {width, in, out}, Init::kGlorot, rng);
  bias_ = params.Create(prefix + ".bias", {out}, Init::kZeros, rng);
}

template <typename T>
Tensor<T> ConvLayer<T>::Apply(Tape<T>& tape, const Tensor<T>& x,
                              std::span<const std::uint8_t> mask) const {
  Tensor<T> y = Relu(tape, AddRowBroadcast(tape, Conv1d(tape, x, kernels_), bias_));
  return MaskRows(tape, y, mask);
}

// ---------------------------------------------------------------------------
// Shared encoder and task layers

template <typename T>
SharedEncoder<T>::SharedEncoder(ParameterSet<T>& params,
                                const std::vector<std::size_t>& widths,
                                std::size_t in, std::size_t out, Rng& rng)
    : out_dim_(out) {
  if (widths.empty()) throw ConfigError("encoder needs at least one kernel width");
  if (out % widths.size() != 0) {
    throw ConfigError("d_enc " + std::to_string(out) +
                      " is not divisible by the number of kernel widths");
  }
  const std::size_t per_width = out / widths.size();
  for (std::size_t w : widths) {
    convs_.emplace_back(params, "encoder.conv" + std::to_string(w), w, in,
                        per_width, rng);
  }
}

template <typename T>
Tensor<T> SharedEncoder<T>::Encode(Tape<T>& tape, const Tensor<T>& embedded,
                                   std::span<const std::uint8_t> mask) const {
  std::vector<Tensor<T>> features;
  for (const auto& conv : convs_) features.push_back(conv.Apply(tape, embedded, mask));
  return features.size() == 1 ? features.front() : Concat(tape, features, 1);
}

template <typename T>
TaskLayer<T>::TaskLayer(ParameterSet<T>& params, Task task, std::size_t depth,
                        std::size_t width, std::size_t in, std::size_t out,
                        Rng& rng)
    : task_(task) {
  if (depth == 0) throw ConfigError("task layers need depth >= 1");
  const std::string prefix = "task." + std::string(TaskName(task)) + ".conv";
  for (std::size_t l = 0; l < depth; ++l) {
    stack_.emplace_back(params, prefix + std::to_string(l), width, l == 0 ? in : out,
                        out, rng);
  }
}

template <typename T>
Tensor<T> TaskLayer<T>::Apply(Tape<T>& tape, const Tensor<T>& shared,
                              std::span<const std::uint8_t> mask) const {
  Tensor<T> h = shared;
  for (const auto& conv : stack_) h = conv.Apply(tape, h, mask);
  return h;
}

// ---------------------------------------------------------------------------
// Heads

template <typename T>
AttentionHead<T>::AttentionHead(ParameterSet<T>& params, Task task, std::size_t d,
                                std::size_t classes, Rng& rng) {
  using Init = typename ParameterSet<T>::Init;
  const std::string prefix = "head." + std::string(TaskName(task));
  scorer_ = params.Create(prefix + ".attn", {d, 1}, Init::kGlorot, rng);
  classifier_ = Affine<T>(params, prefix + ".cls", d, classes, rng);
}

template <typename T>
AttentionOutput<T> AttentionHead<T>::Attend(
    Tape<T>& tape, const Tensor<T>& h, std::span<const std::uint8_t> mask) const {
  const std::size_t n = h.dim(0);
  const std::size_t d = h.dim(1);
  bool any = mask.empty();
  for (auto m : mask) any = any || m != 0;
  if (!any) throw ContractError("attention over a fully masked sequence");
  AttentionOutput<T> out;
  Tensor<T> scores = Reshape(tape, MatMul(tape, h, scorer_), {n});
  out.weights = Softmax(tape, scores, 0, mask);
  Tensor<T> row = Reshape(tape, out.weights, {1, n});
  out.summary = Reshape(tape, MatMul(tape, row, h), {d});
  out.logits = Reshape(tape, classifier_.Apply(tape, Reshape(tape, out.summary, {1, d})),
                       {classifier_.out_dim()});
  out.probabilities = Softmax(tape, out.logits, 0);
  return out;
}

template <typename T>
TokenDecoder<T>::TokenDecoder(ParameterSet<T>& params, Task task, std::size_t d,
                              std::size_t classes, Rng& rng)
    : affine_(params, "decoder." + std::string(TaskName(task)), d, classes, rng) {}

template <typename T>
TokenPredictions<T> TokenDecoder<T>::Decode(Tape<T>& tape, const Tensor<T>& h) const {
  TokenPredictions<T> out;
  out.logits = affine_.Apply(tape, h);
  out.probabilities = Softmax(tape, out.logits, 1);
  return out;
}

template class ParameterSet<float>;
template class ParameterSet<double>;
template class Affine<float>;
template class Affine<double>;
template class ConvLayer<float>;
template class ConvLayer<double>;
template class SharedEncoder<float>;
template class SharedEncoder<double>;
template class TaskLayer<float>;
template class TaskLayer<double>;
template class AttentionHead<float>;
template class AttentionHead<double>;
template class TokenDecoder<float>;
template class TokenDecoder<double>;

}  // namespace iktn
