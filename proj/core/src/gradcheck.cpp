#include "stoa/gradcheck.hpp"

#include <cmath>

namespace stoa {

std::vector<Mat> finite_difference_grad(const std::function<double()>& loss_fn,
                                        std::vector<Tensor>& params, double eps) {
  if (eps <= 0.0) throw ConfigError("finite_difference_grad: eps must be positive");
  std::vector<Mat> grads;
  grads.reserve(params.size());
  for (auto& p : params) {
    Mat g = Mat::Zero(p.rows(), p.cols());
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      for (Eigen::Index j = 0; j < p.cols(); ++j) {
        const double orig = p.raw_value()(i, j);
        p.raw_value()(i, j) = orig + eps;
        const double fp = loss_fn();
        p.raw_value()(i, j) = orig - eps;
        const double fm = loss_fn();
        p.raw_value()(i, j) = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm))
          throw NumericError("finite_difference_grad: non-finite loss");
        g(i, j) = (fp - fm) / (2.0 * eps);
      }
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

GradCheckReport compare_grads(const std::function<double()>& loss_fn, std::vector<Tensor>& params,
                              const std::vector<std::string>& names, double eps,
                              int coords_per_param, Rng& rng, double floor) {
  GradCheckReport report;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    auto& p = params[pi];
    const int n = static_cast<int>(p.rows() * p.cols());
    const int checks = coords_per_param > 0 ? std::min(coords_per_param, n) : n;
    for (int k = 0; k < checks; ++k) {
      const int flat = coords_per_param > 0 ? rng.uniform_int(n) : k;
      const Eigen::Index i = flat / p.cols();
      const Eigen::Index j = flat % p.cols();
      const double orig = p.raw_value()(i, j);
      p.raw_value()(i, j) = orig + eps;
      const double fp = loss_fn();
      p.raw_value()(i, j) = orig - eps;
      const double fm = loss_fn();
      p.raw_value()(i, j) = orig;
      if (!std::isfinite(fp) || !std::isfinite(fm))
        throw NumericError("compare_grads: non-finite loss");
      const double numeric = (fp - fm) / (2.0 * eps);
      const double analytic = p.grad()(i, j);
      const double denom = std::max({floor, std::abs(numeric), std::abs(analytic)});
      const double rel = std::abs(analytic - numeric) / denom;
      ++report.coords_checked;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = pi < names.size() ? names[pi] : std::to_string(pi);
      }
    }
  }
  return report;
}

}  // namespace stoa
