#ifndef IKTN_OPTIMIZER_H_
#define IKTN_OPTIMIZER_H_

#include <vector>

#include "iktn/tensor.h"

namespace iktn {

struct AdamOptions {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Bias-corrected Adam over a fixed list of parameter tensors. The moment
// buffers are indexed by position, so the list must not change between
// steps.
template <typename T>
class Adam {
 public:
  Adam(std::vector<Tensor<T>> params, AdamOptions options);

  // One update from the gradients currently stored in the parameters.
  void Step();
  void ZeroGrad();

  long step_count() const { return steps_; }
  const AdamOptions& options() const { return options_; }

 private:
  std::vector<Tensor<T>> params_;
  std::vector<std::vector<T>> first_moment_;
  std::vector<std::vector<T>> second_moment_;
  AdamOptions options_;
  long steps_ = 0;
};

// Global L2 norm over all gradients.
template <typename T>
double GradientNorm(const std::vector<Tensor<T>>& params);

// Rescales every gradient so the global norm is at most `max_norm`.
// Returns the norm before clipping.
template <typename T>
double ClipGradientNorm(const std::vector<Tensor<T>>& params, double max_norm);

}  // namespace iktn

#endif  // IKTN_OPTIMIZER_H_
