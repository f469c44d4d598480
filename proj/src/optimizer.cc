#include "iktn/optimizer.h"

#include <cmath>

namespace iktn {

template <typename T>
Adam<T>::Adam(std::vector<Tensor<T>> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  for (const auto& p : params_) {
    first_moment_.emplace_back(p.size(), T(0));
    second_moment_.emplace_back(p.size(), T(0));
  }
}

template <typename T>
void Adam<T>::Step() {
  ++steps_;
  const double c1 = 1.0 - std::pow(options_.beta1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(options_.beta2, static_cast<double>(steps_));
  const T b1 = static_cast<T>(options_.beta1);
  const T b2 = static_cast<T>(options_.beta2);
  const T step = static_cast<T>(options_.learning_rate / c1);
  const T inv_c2 = static_cast<T>(1.0 / c2);
  const T eps = static_cast<T>(options_.epsilon);
  for (std::size_t p = 0; p < params_.size(); ++p) {
    Tensor<T>& param = params_[p];
    if (!param.requires_grad()) continue;
    auto data = param.mutable_data();
    const auto grad = param.grad();
    auto& m = first_moment_[p];
    auto& v = second_moment_[p];
    for (std::size_t i = 0; i < data.size(); ++i) {
      const T g = grad[i];
      m[i] = b1 * m[i] + (T(1) - b1) * g;
      v[i] = b2 * v[i] + (T(1) - b2) * g * g;
      data[i] -= step * m[i] / (std::sqrt(v[i] * inv_c2) + eps);
    }
  }
}

template <typename T>
void Adam<T>::ZeroGrad() {
  for (auto& p : params_) {
    if (p.requires_grad()) p.zero_grad();
  }
}

template <typename T>
double GradientNorm(const std::vector<Tensor<T>>& params) {
  double sq = 0;
  for (const auto& p : params) {
    if (!p.requires_grad()) continue;
    for (T g : p.grad()) sq += static_cast<double>(g) * static_cast<double>(g);
  }
  return std::sqrt(sq);
}

template <typename T>
double ClipGradientNorm(const std::vector<Tensor<T>>& params, double max_norm) {
  const double norm = GradientNorm(params);
  if (norm > max_norm && norm > 0) {
    const T scale = static_cast<T>(max_norm / norm);
    for (auto p : params) {
      if (!p.requires_grad()) continue;
      for (T& g : p.mutable_grad()) g *= scale;
    }
  }
  return norm;
}

template class Adam<float>;
template class Adam<double>;
template double GradientNorm(const std::vector<Tensor<float>>&);
template double GradientNorm(const std::vector<Tensor<double>>&);
template double ClipGradientNorm(const std::vector<Tensor<float>>&, double);
template double ClipGradientNorm(const std::vector<Tensor<double>>&, double);

}  // namespace iktn
