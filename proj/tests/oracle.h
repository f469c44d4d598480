#ifndef IKTN_TESTS_ORACLE_H_
#define IKTN_TESTS_ORACLE_H_

// Test-side helpers: an independent central-difference gradient oracle and
// random tensor builders.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "iktn/tensor.h"

namespace iktn::test {

using TensorD = Tensor<double>;
using TapeD = Tape<double>;

inline TensorD RandomTensor(Shape shape, std::mt19937_64& rng, double lo = -1.0,
                            double hi = 1.0, bool grad = true) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> data(ShapeSize(shape));
  for (auto& v : data) v = u(rng);
  return TensorD::FromData(std::move(shape), std::move(data), grad);
}

// max|a - n| / max(max|a|, max|n|, 1e-8) over every entry of every input,
// with n the central difference of `f` at `step`.
inline double FdRelativeError(const std::vector<TensorD>& inputs,
                              const std::function<TensorD(TapeD&)>& f,
                              double step = 1e-3) {
  for (const auto& t : inputs) t.zero_grad();
  {
    TapeD tape;
    tape.Backward(f(tape));
  }
  double max_err = 0, max_a = 0, max_n = 0;
  for (const auto& t : inputs) {
    const std::vector<double> analytic(t.grad().begin(), t.grad().end());
    auto data = t.mutable_data();
    for (std::size_t k = 0; k < data.size(); ++k) {
      const double x = data[k];
      data[k] = x + step;
      double up;
      {
        TapeD tape;
        up = f(tape).item();
      }
      data[k] = x - step;
      double down;
      {
        TapeD tape;
        down = f(tape).item();
      }
      data[k] = x;
      const double numeric = (up - down) / (2 * step);
      max_err = std::max(max_err, std::abs(numeric - analytic[k]));
      max_a = std::max(max_a, std::abs(analytic[k]));
      max_n = std::max(max_n, std::abs(numeric));
    }
  }
  return max_err / std::max({max_a, max_n, 1e-8});
}

// Random weighted sum of a tensor's entries, so every output entry gets a
// distinct upstream gradient.
inline TensorD Project(TapeD& tape, const TensorD& y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const TensorD w = RandomTensor(y.shape(), rng, -1, 1, false);
  return Sum(tape, Mul(tape, y, w));
}

}  // namespace iktn::test

#endif  // IKTN_TESTS_ORACLE_H_
