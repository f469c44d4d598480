#include "iktn/tensor.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace iktn {

std::string ShapeToString(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t ShapeSize(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

namespace testing_hooks {
namespace {
std::atomic<bool> corrupt_squash{false};
}
void SetCorruptSquashBackward(bool on) { corrupt_squash = on; }
bool CorruptSquashBackward() { return corrupt_squash; }
namespace {
thread_local std::vector<std::uint8_t>* relu_sink = nullptr;
}
void SetReluSignSink(std::vector<std::uint8_t>* sink) { relu_sink = sink; }
}  // namespace testing_hooks

// ---------------------------------------------------------------------------
// Tensor

template <typename T>
Tensor<T> Tensor<T>::Zeros(Shape shape, bool requires_grad) {
  const std::size_t n = ShapeSize(shape);
  return FromData(std::move(shape), std::vector<T>(n, T(0)), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::FromData(Shape shape, std::vector<T> data,
                              bool requires_grad) {
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("zero-length dimension in " + ShapeToString(shape));
  }
  if (ShapeSize(shape) != data.size()) {
    throw ShapeError("shape " + ShapeToString(shape) + " does not hold " +
                     std::to_string(data.size()) + " values");
  }
  auto impl = std::make_shared<TensorStorage<T>>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  Tensor t(std::move(impl));
  t.set_requires_grad(requires_grad);
  return t;
}

template <typename T>
Tensor<T> Tensor<T>::Scalar(T value, bool requires_grad) {
  return FromData({1}, {value}, requires_grad);
}

template <typename T>
T Tensor<T>::item() const {
  if (size() != 1) {
    throw ContractError("item() on non-scalar tensor " + ShapeToString(shape()));
  }
  return impl_->data[0];
}

template <typename T>
void Tensor<T>::set_requires_grad(bool on) {
  impl_->requires_grad = on;
  if (on) {
    impl_->grad.assign(impl_->data.size(), T(0));
  } else {
    impl_->grad.clear();
  }
}

template <typename T>
void Tensor<T>::zero_grad() const {
  std::fill(impl_->grad.begin(), impl_->grad.end(), T(0));
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  auto impl = std::make_shared<TensorStorage<T>>(*impl_);
  return Tensor(std::move(impl));
}

// ---------------------------------------------------------------------------
// Tape

template <typename T>
Tensor<T> Tape<T>::Record(Tensor<T> output, const std::vector<Tensor<T>>& inputs,
                          BackwardFn backward) {
  bool track = false;
  for (const auto& in : inputs) track = track || in.requires_grad();
  output.set_requires_grad(track);
  nodes_.push_back({output, track ? std::move(backward) : BackwardFn{}});
  return output;
}

template <typename T>
void Tape<T>::Backward(const Tensor<T>& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ContractError("backward() needs a scalar loss, got " +
                        (loss.defined() ? ShapeToString(loss.shape())
                                        : std::string("undefined")));
  }
  if (!loss.requires_grad()) return;
  for (auto& node : nodes_) {
    if (node.output.requires_grad()) node.output.zero_grad();
  }
  Tensor<T> seed = loss;
  seed.mutable_grad()[0] += T(1);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (it->backward) it->backward();
  }
}

namespace {

template <typename T>
void RequireSameShape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shapes " + ShapeToString(a.shape()) +
                     " and " + ShapeToString(b.shape()) + " differ");
  }
}

template <typename T>
void RequireRank(const Tensor<T>& a, std::size_t rank, const char* op) {
  if (a.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) +
                     ", got " + ShapeToString(a.shape()));
  }
}

// Splits a shape into (outer, axis length, inner) around `axis`.
struct AxisView {
  std::size_t outer = 1, length = 1, inner = 1;
};

AxisView ViewAround(const Shape& shape, std::size_t axis) {
  AxisView v;
  for (std::size_t i = 0; i < axis; ++i) v.outer *= shape[i];
  v.length = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) v.inner *= shape[i];
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// Elementwise and reductions

template <typename T>
Tensor<T> Add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  RequireSameShape(a, b, "add");
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) + b.at(i);
  Tensor<T> y = Tensor<T>::FromData(a.shape(), std::move(out));
  return tape.Record(y, {a, b}, [a, b, y]() mutable {
    auto g = y.grad();
    if (a.requires_grad()) {
      auto ga = a.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (b.requires_grad()) {
      auto gb = b.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
    }
  });
}

template <typename T>
Tensor<T> Mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  RequireSameShape(a, b, "mul");
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) * b.at(i);
  Tensor<T> y = Tensor<T>::FromData(a.shape(), std::move(out));
  return tape.Record(y, {a, b}, [a, b, y]() mutable {
    auto g = y.grad();
    if (a.requires_grad()) {
      auto ga = a.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b.at(i);
    }
    if (b.requires_grad()) {
      auto gb = b.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a.at(i);
    }
  });
}

template <typename T>
Tensor<T> Scale(Tape<T>& tape, const Tensor<T>& a, T factor) {
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) * factor;
  Tensor<T> y = Tensor<T>::FromData(a.shape(), std::move(out));
  return tape.Record(y, {a}, [a, y, factor]() mutable {
    auto g = y.grad();
    auto ga = a.mutable_grad();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
  });
}

template <typename T>
Tensor<T> Relu(Tape<T>& tape, const Tensor<T>& x) {
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(x.at(i), T(0));
  if (testing_hooks::relu_sink) {
    for (std::size_t i = 0; i < out.size(); ++i) testing_hooks::relu_sink->push_back(x.at(i) > T(0));
  }
  Tensor<T> y = Tensor<T>::FromData(x.shape(), std::move(out));
  return tape.Record(y, {x}, [x, y]() mutable {
    auto g = y.grad();
    auto gx = x.mutable_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (x.at(i) > T(0)) gx[i] += g[i];
    }
  });
}

template <typename T>
Tensor<T> Sigmoid(Tape<T>& tape, const Tensor<T>& x) {
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = T(1) / (T(1) + std::exp(-x.at(i)));
  }
  Tensor<T> y = Tensor<T>::FromData(x.shape(), std::move(out));
  return tape.Record(y, {x}, [x, y]() mutable {
    auto g = y.grad();
    auto gx = x.mutable_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const T s = y.at(i);
      gx[i] += g[i] * s * (T(1) - s);
    }
  });
}

template <typename T>
Tensor<T> Sum(Tape<T>& tape, const Tensor<T>& x) {
  T total = 0;
  for (T v : x.data()) total += v;
  Tensor<T> y = Tensor<T>::Scalar(total);
  return tape.Record(y, {x}, [x, y]() mutable {
    const T g = y.grad()[0];
    for (T& gx : x.mutable_grad()) gx += g;
  });
}

template <typename T>
Tensor<T> Mean(Tape<T>& tape, const Tensor<T>& x) {
  return Scale(tape, Sum(tape, x), T(1) / static_cast<T>(x.size()));
}

template <typename T>
Tensor<T> Reshape(Tape<T>& tape, const Tensor<T>& x, Shape shape) {
  if (ShapeSize(shape) != x.size()) {
    throw ShapeError("reshape: cannot view " + ShapeToString(x.shape()) +
                     " as " + ShapeToString(shape));
  }
  std::vector<T> out(x.data().begin(), x.data().end());
  Tensor<T> y = Tensor<T>::FromData(std::move(shape), std::move(out));
  return tape.Record(y, {x}, [x, y]() mutable {
    auto g = y.grad();
    auto gx = x.mutable_grad();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

// ---------------------------------------------------------------------------
// Linear algebra

template <typename T>
Tensor<T> MatMul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  RequireRank(a, 2, "matmul");
  RequireRank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul: inner dimensions of " + ShapeToString(a.shape()) +
                     " and " + ShapeToString(b.shape()) + " disagree");
  }
  std::vector<T> out(m * n, T(0));
  const auto ad = a.data();
  const auto bd = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    T* row = &out[i * n];
    for (std::size_t p = 0; p < k; ++p) {
      const T av = ad[i * k + p];
      if (av == T(0)) continue;
      const T* brow = &bd[p * n];
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
  Tensor<T> y = Tensor<T>::FromData({m, n}, std::move(out));
  return tape.Record(y, {a, b}, [a, b, y, m, k, n]() mutable {
    const auto g = y.grad();
    const auto ad = a.data();
    const auto bd = b.data();
    if (a.requires_grad()) {
      // dA = dC · Bᵀ
      auto ga = a.mutable_grad();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          T acc = 0;
          for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * bd[p * n + j];
          ga[i * k + p] += acc;
        }
      }
    }
    if (b.requires_grad()) {
      // dB = Aᵀ · dC
      auto gb = b.mutable_grad();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const T av = ad[i * k + p];
          if (av == T(0)) continue;
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += av * g[i * n + j];
        }
      }
    }
  });
}

template <typename T>
Tensor<T> AddRowBroadcast(Tape<T>& tape, const Tensor<T>& x,
                          const Tensor<T>& bias) {
  RequireRank(x, 2, "add_row_broadcast");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (bias.size() != n) {
    throw ShapeError("add_row_broadcast: bias " + ShapeToString(bias.shape()) +
                     " does not match " + ShapeToString(x.shape()));
  }
  std::vector<T> out(x.data().begin(), x.data().end());
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += bias.at(j);
  }
  Tensor<T> y = Tensor<T>::FromData(x.shape(), std::move(out));
  return tape.Record(y, {x, bias}, [x, bias, y, m, n]() mutable {
    const auto g = y.grad();
    if (x.requires_grad()) {
      auto gx = x.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
    if (bias.requires_grad()) {
      auto gb = bias.mutable_grad();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
      }
    }
  });
}

template <typename T>
Tensor<T> FullyConnected(Tape<T>& tape, const Tensor<T>& x,
                         const Tensor<T>& weight, const Tensor<T>& bias) {
  return AddRowBroadcast(tape, MatMul(tape, x, weight), bias);
}

template <typename T>
Tensor<T> Conv1d(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& kernels) {
  RequireRank(x, 2, "conv1d");
  RequireRank(kernels, 3, "conv1d");
  const std::size_t n = x.dim(0), d_in = x.dim(1);
  const std::size_t w = kernels.dim(0), d_out = kernels.dim(2);
  if (w % 2 == 0) {
    throw ConfigError("conv1d: kernel width must be odd, got " + std::to_string(w));
  }
  if (kernels.dim(1) != d_in) {
    throw ShapeError("conv1d: input " + ShapeToString(x.shape()) +
                     " does not match kernels " + ShapeToString(kernels.shape()));
  }
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(w / 2);
  const auto xd = x.data();
  const auto kd = kernels.data();
  std::vector<T> out(n * d_out, T(0));
  for (std::size_t t = 0; t < n; ++t) {
    T* orow = &out[t * d_out];
    for (std::size_t k = 0; k < w; ++k) {
      const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(t + k) - half;
      if (r < 0 || r >= static_cast<std::ptrdiff_t>(n)) continue;
      for (std::size_t c = 0; c < d_in; ++c) {
        const T xv = xd[r * d_in + c];
        if (xv == T(0)) continue;
        const T* krow = &kd[(k * d_in + c) * d_out];
        for (std::size_t o = 0; o < d_out; ++o) orow[o] += xv * krow[o];
      }
    }
  }
  Tensor<T> y = Tensor<T>::FromData({n, d_out}, std::move(out));
  return tape.Record(y, {x, kernels},
                     [x, kernels, y, n, d_in, w, d_out, half]() mutable {
    const auto g = y.grad();
    const auto xd = x.data();
    const auto kd = kernels.data();
    const bool need_x = x.requires_grad();
    const bool need_k = kernels.requires_grad();
    std::span<T> gx = need_x ? x.mutable_grad() : std::span<T>{};
    std::span<T> gk = need_k ? kernels.mutable_grad() : std::span<T>{};
    for (std::size_t t = 0; t < n; ++t) {
      const T* grow = &g[t * d_out];
      for (std::size_t k = 0; k < w; ++k) {
        const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(t + k) - half;
        if (r < 0 || r >= static_cast<std::ptrdiff_t>(n)) continue;
        for (std::size_t c = 0; c < d_in; ++c) {
          const std::size_t kbase = (k * d_in + c) * d_out;
          if (need_x) {
            T acc = 0;
            for (std::size_t o = 0; o < d_out; ++o) acc += grow[o] * kd[kbase + o];
            gx[r * d_in + c] += acc;
          }
          if (need_k) {
            const T xv = xd[r * d_in + c];
            if (xv == T(0)) continue;
            for (std::size_t o = 0; o < d_out; ++o) gk[kbase + o] += xv * grow[o];
          }
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Structural

template <typename T>
Tensor<T> Concat(Tape<T>& tape, const std::vector<Tensor<T>>& parts,
                 std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw ShapeError("concat: axis out of range");
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    if (p.rank() != first.size()) {
      throw ShapeError("concat: rank mismatch " + ShapeToString(first) + " vs " +
                       ShapeToString(p.shape()));
    }
    for (std::size_t d = 0; d < first.size(); ++d) {
      if (d != axis && p.dim(d) != first[d]) {
        throw ShapeError("concat: " + ShapeToString(first) + " and " +
                         ShapeToString(p.shape()) + " disagree off axis " +
                         std::to_string(axis));
      }
    }
    out_shape[axis] += p.dim(axis);
  }
  const AxisView ov = ViewAround(out_shape, axis);
  std::vector<T> out(ShapeSize(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    offsets.push_back(offset);
    const AxisView pv = ViewAround(p.shape(), axis);
    const std::size_t chunk = pv.length * pv.inner;
    for (std::size_t o = 0; o < pv.outer; ++o) {
      std::copy_n(p.data().begin() + o * chunk, chunk,
                  out.begin() + o * ov.length * ov.inner + offset * ov.inner);
    }
    offset += pv.length;
  }
  Tensor<T> y = Tensor<T>::FromData(out_shape, std::move(out));
  return tape.Record(y, parts, [parts, y, offsets, ov, axis]() mutable {
    const auto g = y.grad();
    for (std::size_t idx = 0; idx < parts.size(); ++idx) {
      auto& p = parts[idx];
      if (!p.requires_grad()) continue;
      const AxisView pv = ViewAround(p.shape(), axis);
      const std::size_t chunk = pv.length * pv.inner;
      auto gp = p.mutable_grad();
      for (std::size_t o = 0; o < pv.outer; ++o) {
        const std::size_t src = o * ov.length * ov.inner + offsets[idx] * ov.inner;
        for (std::size_t e = 0; e < chunk; ++e) gp[o * chunk + e] += g[src + e];
      }
    }
  });
}

template <typename T>
Tensor<T> EmbeddingLookup(Tape<T>& tape, const Tensor<T>& table,
                          std::span<const std::int32_t> ids,
                          std::int32_t frozen_row) {
  RequireRank(table, 2, "embedding_lookup");
  const std::size_t rows = table.dim(0), d = table.dim(1);
  if (ids.empty()) throw ShapeError("embedding_lookup: empty id list");
  std::vector<std::int32_t> idv(ids.begin(), ids.end());
  std::vector<T> out(idv.size() * d);
  for (std::size_t t = 0; t < idv.size(); ++t) {
    if (idv[t] < 0 || static_cast<std::size_t>(idv[t]) >= rows) {
      throw IndexError("embedding_lookup: id " + std::to_string(idv[t]) +
                       " outside table of " + std::to_string(rows) + " rows");
    }
    std::copy_n(table.data().begin() + idv[t] * d, d, out.begin() + t * d);
  }
  Tensor<T> y = Tensor<T>::FromData({idv.size(), d}, std::move(out));
  return tape.Record(y, {table}, [table, y, idv, d, frozen_row]() mutable {
    const auto g = y.grad();
    auto gt = table.mutable_grad();
    for (std::size_t t = 0; t < idv.size(); ++t) {
      if (idv[t] == frozen_row) continue;
      for (std::size_t c = 0; c < d; ++c) gt[idv[t] * d + c] += g[t * d + c];
    }
  });
}

template <typename T>
Tensor<T> RepeatRows(Tape<T>& tape, const Tensor<T>& x, std::size_t n) {
  const std::size_t k = x.size();
  std::vector<T> out(n * k);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(x.data().begin(), x.data().end(), out.begin() + i * k);
  }
  Tensor<T> y = Tensor<T>::FromData({n, k}, std::move(out));
  return tape.Record(y, {x}, [x, y, n, k]() mutable {
    const auto g = y.grad();
    auto gx = x.mutable_grad();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < k; ++c) gx[c] += g[i * k + c];
    }
  });
}

template <typename T>
Tensor<T> MaskRows(Tape<T>& tape, const Tensor<T>& x,
                   std::span<const std::uint8_t> mask) {
  RequireRank(x, 2, "mask_rows");
  const std::size_t n = x.dim(0), d = x.dim(1);
  if (mask.size() != n) throw ShapeError("mask_rows: mask length mismatch");
  std::vector<std::uint8_t> keep(mask.begin(), mask.end());
  std::vector<T> out(x.data().begin(), x.data().end());
  for (std::size_t i = 0; i < n; ++i) {
    if (!keep[i]) std::fill_n(out.begin() + i * d, d, T(0));
  }
  Tensor<T> y = Tensor<T>::FromData(x.shape(), std::move(out));
  return tape.Record(y, {x}, [x, y, keep, d]() mutable {
    const auto g = y.grad();
    auto gx = x.mutable_grad();
    for (std::size_t i = 0; i < keep.size(); ++i) {
      if (!keep[i]) continue;
      for (std::size_t c = 0; c < d; ++c) gx[i * d + c] += g[i * d + c];
    }
  });
}

template <typename T>
Tensor<T> Dropout(Tape<T>& tape, const Tensor<T>& x, double rate, bool train,
                  Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) {
    throw ConfigError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (!train || rate == 0.0) return x;
  std::bernoulli_distribution keep_dist(1.0 - rate);
  const T scale = static_cast<T>(1.0 / (1.0 - rate));
  std::vector<T> mask(x.size());
  for (T& m : mask) m = keep_dist(rng) ? scale : T(0);
  return Mul(tape, x, Tensor<T>::FromData(x.shape(), std::move(mask)));
}

// ---------------------------------------------------------------------------
// Normalizers

template <typename T>
Tensor<T> Softmax(Tape<T>& tape, const Tensor<T>& x, std::size_t axis,
                  std::span<const std::uint8_t> mask) {
  if (axis >= x.rank()) throw ShapeError("softmax: axis out of range");
  const AxisView v = ViewAround(x.shape(), axis);
  if (!mask.empty() && mask.size() != v.length) {
    throw ShapeError("softmax: mask length " + std::to_string(mask.size()) +
                     " does not match axis length " + std::to_string(v.length));
  }
  auto live = [&mask](std::size_t k) { return mask.empty() || mask[k] != 0; };
  const auto xd = x.data();
  std::vector<T> out(x.size(), T(0));
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t in = 0; in < v.inner; ++in) {
      const std::size_t base = o * v.length * v.inner + in;
      T max_v = -std::numeric_limits<T>::infinity();
      for (std::size_t k = 0; k < v.length; ++k) {
        if (live(k)) max_v = std::max(max_v, xd[base + k * v.inner]);
      }
      if (max_v == -std::numeric_limits<T>::infinity()) {
        throw ContractError("softmax: every position along the axis is masked");
      }
      T denom = 0;
      for (std::size_t k = 0; k < v.length; ++k) {
        if (!live(k)) continue;
        const T e = std::exp(xd[base + k * v.inner] - max_v);
        out[base + k * v.inner] = e;
        denom += e;
      }
      for (std::size_t k = 0; k < v.length; ++k) out[base + k * v.inner] /= denom;
    }
  }
  Tensor<T> y = Tensor<T>::FromData(x.shape(), std::move(out));
  return tape.Record(y, {x}, [x, y, v]() mutable {
    const auto g = y.grad();
    const auto yd = y.data();
    auto gx = x.mutable_grad();
    for (std::size_t o = 0; o < v.outer; ++o) {
      for (std::size_t in = 0; in < v.inner; ++in) {
        const std::size_t base = o * v.length * v.inner + in;
        T dot = 0;
        for (std::size_t k = 0; k < v.length; ++k) {
          dot += g[base + k * v.inner] * yd[base + k * v.inner];
        }
        for (std::size_t k = 0; k < v.length; ++k) {
          const std::size_t idx = base + k * v.inner;
          gx[idx] += yd[idx] * (g[idx] - dot);
        }
      }
    }
  });
}

namespace {
constexpr double kSquashEps = 1e-9;
}

template <typename T>
Tensor<T> Squash(Tape<T>& tape, const Tensor<T>& s) {
  const std::size_t d = s.shape().back();
  const std::size_t rows = s.size() / d;
  const auto sd = s.data();
  std::vector<T> out(s.size());
  std::vector<T> norms(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    T sq = 0;
    for (std::size_t c = 0; c < d; ++c) sq += sd[r * d + c] * sd[r * d + c];
    const T norm = std::sqrt(sq);
    norms[r] = norm;
    const T factor = sq / ((T(1) + sq) * (norm + T(kSquashEps)));
    for (std::size_t c = 0; c < d; ++c) out[r * d + c] = factor * sd[r * d + c];
  }
  Tensor<T> y = Tensor<T>::FromData(s.shape(), std::move(out));
  return tape.Record(y, {s}, [s, y, norms, d, rows]() mutable {
    const auto g = y.grad();
    const auto sd = s.data();
    auto gs = s.mutable_grad();
    const bool corrupt = testing_hooks::CorruptSquashBackward();
    for (std::size_t r = 0; r < rows; ++r) {
      const T norm = norms[r];
      const T sq = norm * norm;
      const T eps = T(kSquashEps);
      // v = f(r)·s with f(r) = r² / ((1 + r²)(r + eps)).
      const T den = (T(1) + sq) * (norm + eps);
      const T f = sq / den;
      T radial = 0;  // f'(r)/r, multiplies s·(sᵀg)
      if (norm > T(0)) {
        const T dden = T(2) * norm * (norm + eps) + (T(1) + sq);
        const T fprime = (T(2) * norm * den - sq * dden) / (den * den);
        radial = fprime / norm;
      }
      if (corrupt) radial = 0;
      T sg = 0;
      for (std::size_t c = 0; c < d; ++c) sg += sd[r * d + c] * g[r * d + c];
      for (std::size_t c = 0; c < d; ++c) {
        gs[r * d + c] += f * g[r * d + c] + radial * sg * sd[r * d + c];
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Losses

template <typename T>
Tensor<T> CrossEntropy(Tape<T>& tape, const Tensor<T>& logits, int target) {
  const std::size_t k = logits.size();
  if (target < 0 || static_cast<std::size_t>(target) >= k) {
    throw IndexError("cross_entropy: target " + std::to_string(target) +
                     " outside [0, " + std::to_string(k) + ")");
  }
  Tensor<T> row = Reshape(tape, logits, {1, k});
  const int targets[1] = {target};
  return MaskedMeanCrossEntropy(tape, row, std::span<const int>(targets, 1));
}

template <typename T>
Tensor<T> MaskedMeanCrossEntropy(Tape<T>& tape, const Tensor<T>& logits,
                                 std::span<const int> targets) {
  RequireRank(logits, 2, "cross_entropy");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  if (targets.size() != n) {
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) +
                     " targets for " + std::to_string(n) + " rows");
  }
  std::vector<int> tv(targets.begin(), targets.end());
  std::size_t count = 0;
  for (int t : tv) {
    if (t >= static_cast<int>(k)) {
      throw IndexError("cross_entropy: target " + std::to_string(t) +
                       " outside [0, " + std::to_string(k) + ")");
    }
    if (t >= 0) ++count;
  }
  const auto ld = logits.data();
  std::vector<T> probs(n * k, T(0));
  T total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (tv[i] < 0) continue;
    const T* row = &ld[i * k];
    const T max_v = *std::max_element(row, row + k);
    T denom = 0;
    for (std::size_t c = 0; c < k; ++c) {
      probs[i * k + c] = std::exp(row[c] - max_v);
      denom += probs[i * k + c];
    }
    for (std::size_t c = 0; c < k; ++c) probs[i * k + c] /= denom;
    total += -(row[tv[i]] - max_v - std::log(denom));
  }
  const T inv = count ? T(1) / static_cast<T>(count) : T(0);
  Tensor<T> y = Tensor<T>::Scalar(total * inv);
  return tape.Record(y, {logits}, [logits, y, probs, tv, k, inv]() mutable {
    const T g = y.grad()[0] * inv;
    auto gl = logits.mutable_grad();
    for (std::size_t i = 0; i < tv.size(); ++i) {
      if (tv[i] < 0) continue;
      for (std::size_t c = 0; c < k; ++c) {
        const T onehot = static_cast<int>(c) == tv[i] ? T(1) : T(0);
        gl[i * k + c] += g * (probs[i * k + c] - onehot);
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Routing kernels

template <typename T>
Tensor<T> PairwiseSum(Tape<T>& tape, const Tensor<T>& source,
                      const Tensor<T>& target) {
  RequireRank(source, 2, "pairwise_sum");
  RequireRank(target, 2, "pairwise_sum");
  const std::size_t ns = source.dim(0), nt = target.dim(0), d = source.dim(1);
  if (target.dim(1) != d) {
    throw ShapeError("pairwise_sum: " + ShapeToString(source.shape()) + " vs " +
                     ShapeToString(target.shape()));
  }
  const auto sd = source.data();
  const auto td = target.data();
  std::vector<T> out(ns * nt * d);
  for (std::size_t i = 0; i < ns; ++i) {
    for (std::size_t j = 0; j < nt; ++j) {
      T* o = &out[(i * nt + j) * d];
      for (std::size_t c = 0; c < d; ++c) o[c] = sd[i * d + c] + td[j * d + c];
    }
  }
  Tensor<T> y = Tensor<T>::FromData({ns, nt, d}, std::move(out));
  return tape.Record(y, {source, target},
                     [source, target, y, ns, nt, d]() mutable {
    const auto g = y.grad();
    const bool need_s = source.requires_grad();
    const bool need_t = target.requires_grad();
    std::span<T> gs = need_s ? source.mutable_grad() : std::span<T>{};
    std::span<T> gt = need_t ? target.mutable_grad() : std::span<T>{};
    for (std::size_t i = 0; i < ns; ++i) {
      for (std::size_t j = 0; j < nt; ++j) {
        const T* gr = &g[(i * nt + j) * d];
        for (std::size_t c = 0; c < d; ++c) {
          if (need_s) gs[i * d + c] += gr[c];
          if (need_t) gt[j * d + c] += gr[c];
        }
      }
    }
  });
}

template <typename T>
Tensor<T> WeightedSourceSum(Tape<T>& tape, const Tensor<T>& coupling,
                            const Tensor<T>& votes,
                            std::span<const std::uint8_t> source_mask) {
  RequireRank(coupling, 2, "weighted_source_sum");
  RequireRank(votes, 3, "weighted_source_sum");
  const std::size_t ns = votes.dim(0), nt = votes.dim(1), d = votes.dim(2);
  if (coupling.dim(0) != ns || coupling.dim(1) != nt) {
    throw ShapeError("weighted_source_sum: coupling " +
                     ShapeToString(coupling.shape()) + " vs votes " +
                     ShapeToString(votes.shape()));
  }
  if (!source_mask.empty() && source_mask.size() != ns) {
    throw ShapeError("weighted_source_sum: mask length mismatch");
  }
  std::vector<std::uint8_t> live(ns, 1);
  if (!source_mask.empty()) live.assign(source_mask.begin(), source_mask.end());
  const auto cd = coupling.data();
  const auto vd = votes.data();
  std::vector<T> out(nt * d, T(0));
  for (std::size_t i = 0; i < ns; ++i) {
    if (!live[i]) continue;
    for (std::size_t j = 0; j < nt; ++j) {
      const T c = cd[i * nt + j];
      const T* u = &vd[(i * nt + j) * d];
      T* o = &out[j * d];
      for (std::size_t k = 0; k < d; ++k) o[k] += c * u[k];
    }
  }
  Tensor<T> y = Tensor<T>::FromData({nt, d}, std::move(out));
  return tape.Record(y, {coupling, votes},
                     [coupling, votes, y, live, ns, nt, d]() mutable {
    const auto g = y.grad();
    const auto cd = coupling.data();
    const auto vd = votes.data();
    const bool need_c = coupling.requires_grad();
    const bool need_v = votes.requires_grad();
    std::span<T> gc = need_c ? coupling.mutable_grad() : std::span<T>{};
    std::span<T> gv = need_v ? votes.mutable_grad() : std::span<T>{};
    for (std::size_t i = 0; i < ns; ++i) {
      if (!live[i]) continue;
      for (std::size_t j = 0; j < nt; ++j) {
        const T* gr = &g[j * d];
        const std::size_t base = (i * nt + j) * d;
        if (need_c) {
          T acc = 0;
          for (std::size_t k = 0; k < d; ++k) acc += gr[k] * vd[base + k];
          gc[i * nt + j] += acc;
        }
        if (need_v) {
          const T c = cd[i * nt + j];
          for (std::size_t k = 0; k < d; ++k) gv[base + k] += c * gr[k];
        }
      }
    }
  });
}

template <typename T>
Tensor<T> Agreement(Tape<T>& tape, const Tensor<T>& votes,
                    const Tensor<T>& outputs) {
  RequireRank(votes, 3, "agreement");
  RequireRank(outputs, 2, "agreement");
  const std::size_t ns = votes.dim(0), nt = votes.dim(1), d = votes.dim(2);
  if (outputs.dim(0) != nt || outputs.dim(1) != d) {
    throw ShapeError("agreement: votes " + ShapeToString(votes.shape()) +
                     " vs outputs " + ShapeToString(outputs.shape()));
  }
  const auto vd = votes.data();
  const auto od = outputs.data();
  std::vector<T> out(ns * nt, T(0));
  for (std::size_t i = 0; i < ns; ++i) {
    for (std::size_t j = 0; j < nt; ++j) {
      const T* u = &vd[(i * nt + j) * d];
      const T* v = &od[j * d];
      T acc = 0;
      for (std::size_t k = 0; k < d; ++k) acc += u[k] * v[k];
      out[i * nt + j] = acc;
    }
  }
  Tensor<T> y = Tensor<T>::FromData({ns, nt}, std::move(out));
  return tape.Record(y, {votes, outputs},
                     [votes, outputs, y, ns, nt, d]() mutable {
    const auto g = y.grad();
    const auto vd = votes.data();
    const auto od = outputs.data();
    const bool need_u = votes.requires_grad();
    const bool need_v = outputs.requires_grad();
    std::span<T> gu = need_u ? votes.mutable_grad() : std::span<T>{};
    std::span<T> gv = need_v ? outputs.mutable_grad() : std::span<T>{};
    for (std::size_t i = 0; i < ns; ++i) {
      for (std::size_t j = 0; j < nt; ++j) {
        const T gij = g[i * nt + j];
        if (gij == T(0)) continue;
        const std::size_t base = (i * nt + j) * d;
        for (std::size_t k = 0; k < d; ++k) {
          if (need_u) gu[base + k] += gij * od[j * d + k];
          if (need_v) gv[j * d + k] += gij * vd[base + k];
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Instantiations

#define IKTN_INSTANTIATE_TENSOR(T)                                              \
  template class Tensor<T>;                                                     \
  template class Tape<T>;                                                       \
  template Tensor<T> Add(Tape<T>&, const Tensor<T>&, const Tensor<T>&);         \
  template Tensor<T> Mul(Tape<T>&, const Tensor<T>&, const Tensor<T>&);         \
  template Tensor<T> Scale(Tape<T>&, const Tensor<T>&, T);                      \
  template Tensor<T> Relu(Tape<T>&, const Tensor<T>&);                          \
  template Tensor<T> Sigmoid(Tape<T>&, const Tensor<T>&);                       \
  template Tensor<T> Sum(Tape<T>&, const Tensor<T>&);                           \
  template Tensor<T> Mean(Tape<T>&, const Tensor<T>&);                          \
  template Tensor<T> Reshape(Tape<T>&, const Tensor<T>&, Shape);                \
  template Tensor<T> MatMul(Tape<T>&, const Tensor<T>&, const Tensor<T>&);      \
  template Tensor<T> AddRowBroadcast(Tape<T>&, const Tensor<T>&,                \
                                     const Tensor<T>&);                         \
  template Tensor<T> FullyConnected(Tape<T>&, const Tensor<T>&,                 \
                                    const Tensor<T>&, const Tensor<T>&);        \
  template Tensor<T> Conv1d(Tape<T>&, const Tensor<T>&, const Tensor<T>&);      \
  template Tensor<T> Concat(Tape<T>&, const std::vector<Tensor<T>>&,            \
                            std::size_t);                                       \
  template Tensor<T> EmbeddingLookup(Tape<T>&, const Tensor<T>&,                \
                                     std::span<const std::int32_t>,             \
                                     std::int32_t);                             \
  template Tensor<T> RepeatRows(Tape<T>&, const Tensor<T>&, std::size_t);       \
  template Tensor<T> MaskRows(Tape<T>&, const Tensor<T>&,                       \
                              std::span<const std::uint8_t>);                   \
  template Tensor<T> Dropout(Tape<T>&, const Tensor<T>&, double, bool, Rng&);   \
  template Tensor<T> Softmax(Tape<T>&, const Tensor<T>&, std::size_t,           \
                             std::span<const std::uint8_t>);                    \
  template Tensor<T> Squash(Tape<T>&, const Tensor<T>&);                        \
  template Tensor<T> CrossEntropy(Tape<T>&, const Tensor<T>&, int);             \
  template Tensor<T> MaskedMeanCrossEntropy(Tape<T>&, const Tensor<T>&,         \
                                            std::span<const int>);              \
  template Tensor<T> PairwiseSum(Tape<T>&, const Tensor<T>&, const Tensor<T>&); \
  template Tensor<T> WeightedSourceSum(Tape<T>&, const Tensor<T>&,              \
                                       const Tensor<T>&,                        \
                                       std::span<const std::uint8_t>);          \
  template Tensor<T> Agreement(Tape<T>&, const Tensor<T>&, const Tensor<T>&);

IKTN_INSTANTIATE_TENSOR(float)
IKTN_INSTANTIATE_TENSOR(double)

#undef IKTN_INSTANTIATE_TENSOR

}  // namespace iktn
