#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "stoa/errors.hpp"

namespace stoa {

using Mat = Eigen::MatrixXd;
using BMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

// When true (STOA_TEST_F64=1 in the environment, or set_strict_checks), op
// outputs are checked for NaN/Inf at creation.
bool strict_checks();
void set_strict_checks(bool on);

struct Node {
  Mat value;
  Mat grad;  // same shape, zero-initialized
  bool requires_grad{false};
  std::vector<std::shared_ptr<Node>> parents;
  // Accumulates this node's grad into its parents' grads.
  std::function<void(Node&)> backward;
};

// Value-semantic handle on a graph node. Copies share the node.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Mat v, bool requires_grad = false);
  Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}

  bool defined() const { return node_ != nullptr; }
  const Mat& value() const { return node_->value; }
  Mat& raw_value() { return node_->value; }  // in-place edits (finite differences)
  const Mat& grad() const { return node_->grad; }
  Mat& raw_grad() { return node_->grad; }
  bool requires_grad() const { return node_->requires_grad; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  double scalar() const;  // requires 1x1
  void zero_grad() { node_->grad.setZero(); }

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Runs reverse-mode accumulation from a 1x1 root.
void backward(const Tensor& root);

// --- primitive ops ---------------------------------------------------------

Tensor constant(Mat v);
Tensor parameter(Mat v);  // requires_grad = true

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_rowvec(const Tensor& a, const Tensor& row);  // row is 1xC
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor premul_const(const Mat& a, const Tensor& x);  // a * x, a not differentiated
Tensor gelu(const Tensor& a);
Tensor exp_elem(const Tensor& a);
Tensor mul_scalar_tensor(const Tensor& a, const Tensor& s);  // s is 1x1

Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& a, Eigen::Index start, Eigen::Index count);
Tensor slice_cols(const Tensor& a, Eigen::Index start, Eigen::Index count);
Tensor gather_rows(const Tensor& a, const std::vector<int>& idx);

Tensor mean_rows(const Tensor& a);  // 1xC
Tensor sum_all(const Tensor& a);    // 1x1
Tensor colwise_max_rows(const Tensor& a);  // max over rows -> 1xC, argmax backward
Tensor l2_normalize_rows(const Tensor& a);
Tensor detach(const Tensor& a);

// Row-wise softmax. mask (same shape, true = visible) may be null. Fully
// masked rows produce zero rows, not NaN.
Tensor softmax_rows(const Tensor& a, const BMask* mask);

Tensor layer_norm(const Tensor& a, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

// Mean over selected rows of -log softmax(row)[target]. If rows is null all
// rows are used. Returns 1x1.
Tensor cross_entropy_rows(const Tensor& logits, const std::vector<int>& targets,
                          const std::vector<int>* rows = nullptr);

// Mean over all entries of (a-b)^2. Returns 1x1.
Tensor mse(const Tensor& a, const Tensor& b);

// Inverted dropout with an explicit mask in [0,1); identity when rate == 0.
class Rng;
Tensor dropout(const Tensor& a, double rate, Rng& rng);

void check_finite(const Mat& m, const std::string& where);

}  // namespace stoa
