#pragma once

#include <functional>
#include <vector>

#include "stoa/rng.hpp"
#include "stoa/tensor.hpp"

namespace stoa {

// Central finite differences of a pure scalar loss with respect to the given
// parameter tensors: (f(p+eps) - f(p-eps)) / (2 eps) per coordinate. The loss
// function must re-read the parameter values on every call.
std::vector<Mat> finite_difference_grad(const std::function<double()>& loss_fn,
                                        std::vector<Tensor>& params, double eps);

struct GradCheckReport {
  double max_rel_error{0.0};
  int coords_checked{0};
  std::string worst_param;
};

// Compares analytic gradients (already accumulated in params' grad slots)
// against finite differences on a random subset of coordinates per parameter.
// Relative error uses |a - n| / max(floor, |a|, |n|).
GradCheckReport compare_grads(const std::function<double()>& loss_fn, std::vector<Tensor>& params,
                              const std::vector<std::string>& names, double eps, int coords_per_param,
                              Rng& rng, double floor = 1e-3);

}  // namespace stoa
