#include "stoa/tensor.hpp"

#include <cmath>
#include <cstdlib>
#include <unordered_set>

#include "stoa/rng.hpp"

namespace stoa {

namespace {

bool g_strict = [] {
  const char* v = std::getenv("STOA_TEST_F64");
  return v != nullptr && std::string(v) == "1";
}();

std::shared_ptr<Node> make_node(Mat value, std::vector<std::shared_ptr<Node>> parents,
                                std::function<void(Node&)> backward) {
  auto n = std::make_shared<Node>();
  if (g_strict) check_finite(value, "op output");
  n->grad = Mat::Zero(value.rows(), value.cols());
  n->value = std::move(value);
  for (auto& p : parents) {
    if (p->requires_grad) n->requires_grad = true;
  }
  if (n->requires_grad) {
    n->parents = std::move(parents);
    n->backward = std::move(backward);
  }
  return n;
}

void require(bool cond, const std::string& msg) {
  if (!cond) throw ShapeError(msg);
}

}  // namespace

bool strict_checks() { return g_strict; }
void set_strict_checks(bool on) { g_strict = on; }

void check_finite(const Mat& m, const std::string& where) {
  if (!m.allFinite()) throw NumericError("non-finite value in " + where);
}

Tensor::Tensor(Mat v, bool requires_grad) {
  node_ = std::make_shared<Node>();
  node_->grad = Mat::Zero(v.rows(), v.cols());
  node_->value = std::move(v);
  node_->requires_grad = requires_grad;
}

double Tensor::scalar() const {
  require(rows() == 1 && cols() == 1, "scalar() on non-1x1 tensor");
  return node_->value(0, 0);
}

void backward(const Tensor& root) {
  require(root.rows() == 1 && root.cols() == 1, "backward root must be 1x1");
  // Iterative post-order topological sort.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [n, i] = stack.back();
    if (i < n->parents.size()) {
      Node* p = n->parents[i].get();
      ++i;
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  root.node()->grad(0, 0) += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward) n->backward(*n);
  }
}

Tensor constant(Mat v) { return Tensor(std::move(v), false); }
Tensor parameter(Mat v) { return Tensor(std::move(v), true); }

Tensor add(const Tensor& a, const Tensor& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add: shape mismatch");
  auto pa = a.node(), pb = b.node();
  return make_node(a.value() + b.value(), {pa, pb}, [pa, pb](Node& n) {
    if (pa->requires_grad) pa->grad += n.grad;
    if (pb->requires_grad) pb->grad += n.grad;
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "sub: shape mismatch");
  auto pa = a.node(), pb = b.node();
  return make_node(a.value() - b.value(), {pa, pb}, [pa, pb](Node& n) {
    if (pa->requires_grad) pa->grad += n.grad;
    if (pb->requires_grad) pb->grad -= n.grad;
  });
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "hadamard: shape mismatch");
  auto pa = a.node(), pb = b.node();
  return make_node(a.value().cwiseProduct(b.value()), {pa, pb}, [pa, pb](Node& n) {
    if (pa->requires_grad) pa->grad += n.grad.cwiseProduct(pb->value);
    if (pb->requires_grad) pb->grad += n.grad.cwiseProduct(pa->value);
  });
}

Tensor scale(const Tensor& a, double s) {
  auto pa = a.node();
  return make_node(a.value() * s, {pa}, [pa, s](Node& n) {
    if (pa->requires_grad) pa->grad += n.grad * s;
  });
}

Tensor add_rowvec(const Tensor& a, const Tensor& row) {
  require(row.rows() == 1 && row.cols() == a.cols(), "add_rowvec: row must be 1xC");
  auto pa = a.node(), pr = row.node();
  Mat out = a.value();
  out.rowwise() += row.value().row(0);
  return make_node(std::move(out), {pa, pr}, [pa, pr](Node& n) {
    if (pa->requires_grad) pa->grad += n.grad;
    if (pr->requires_grad) pr->grad += n.grad.colwise().sum();
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.cols() == b.rows(), "matmul: inner dimension mismatch");
  auto pa = a.node(), pb = b.node();
  return make_node(a.value() * b.value(), {pa, pb}, [pa, pb](Node& n) {
    if (pa->requires_grad) pa->grad += n.grad * pb->value.transpose();
    if (pb->requires_grad) pb->grad += pa->value.transpose() * n.grad;
  });
}

Tensor transpose(const Tensor& a) {
  auto pa = a.node();
  return make_node(a.value().transpose(), {pa}, [pa](Node& n) {
    if (pa->requires_grad) pa->grad += n.grad.transpose();
  });
}

Tensor premul_const(const Mat& a, const Tensor& x) {
  require(a.cols() == x.rows(), "premul_const: inner dimension mismatch");
  auto px = x.node();
  Mat a_copy = a;
  return make_node(a * x.value(), {px}, [px, a_copy](Node& n) {
    if (px->requires_grad) px->grad += a_copy.transpose() * n.grad;
  });
}

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
}  // namespace

Tensor gelu(const Tensor& a) {
  auto pa = a.node();
  Mat out = a.value().unaryExpr([](double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); });
  return make_node(std::move(out), {pa}, [pa](Node& n) {
    if (!pa->requires_grad) return;
    for (Eigen::Index i = 0; i < n.grad.rows(); ++i)
      for (Eigen::Index j = 0; j < n.grad.cols(); ++j) {
        const double x = pa->value(i, j);
        const double d = 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
        pa->grad(i, j) += n.grad(i, j) * d;
      }
  });
}

Tensor exp_elem(const Tensor& a) {
  auto pa = a.node();
  Mat out = a.value().array().exp().matrix();
  return make_node(std::move(out), {pa}, [pa](Node& n) {
    if (pa->requires_grad) pa->grad += n.grad.cwiseProduct(n.value);
  });
}

Tensor mul_scalar_tensor(const Tensor& a, const Tensor& s) {
  require(s.rows() == 1 && s.cols() == 1, "mul_scalar_tensor: scale must be 1x1");
  auto pa = a.node(), ps = s.node();
  return make_node(a.value() * s.value()(0, 0), {pa, ps}, [pa, ps](Node& n) {
    if (pa->requires_grad) pa->grad += n.grad * ps->value(0, 0);
    if (ps->requires_grad) ps->grad(0, 0) += n.grad.cwiseProduct(pa->value).sum();
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  require(!parts.empty(), "concat_rows: empty input");
  Eigen::Index total = 0;
  const Eigen::Index c = parts[0].cols();
  for (auto& p : parts) {
    require(p.cols() == c, "concat_rows: column mismatch");
    total += p.rows();
  }
  Mat out(total, c);
  std::vector<std::shared_ptr<Node>> parents;
  Eigen::Index r = 0;
  for (auto& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
    parents.push_back(p.node());
  }
  auto ps = parents;
  return make_node(std::move(out), std::move(parents), [ps](Node& n) {
    Eigen::Index r = 0;
    for (auto& p : ps) {
      if (p->requires_grad) p->grad += n.grad.middleRows(r, p->value.rows());
      r += p->value.rows();
    }
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  require(!parts.empty(), "concat_cols: empty input");
  Eigen::Index total = 0;
  const Eigen::Index r = parts[0].rows();
  for (auto& p : parts) {
    require(p.rows() == r, "concat_cols: row mismatch");
    total += p.cols();
  }
  Mat out(r, total);
  std::vector<std::shared_ptr<Node>> parents;
  Eigen::Index c = 0;
  for (auto& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
    parents.push_back(p.node());
  }
  auto ps = parents;
  return make_node(std::move(out), std::move(parents), [ps](Node& n) {
    Eigen::Index c = 0;
    for (auto& p : ps) {
      if (p->requires_grad) p->grad += n.grad.middleCols(c, p->value.cols());
      c += p->value.cols();
    }
  });
}

Tensor slice_rows(const Tensor& a, Eigen::Index start, Eigen::Index count) {
  require(start >= 0 && count >= 0 && start + count <= a.rows(), "slice_rows: out of range");
  auto pa = a.node();
  return make_node(a.value().middleRows(start, count), {pa}, [pa, start, count](Node& n) {
    if (pa->requires_grad) pa->grad.middleRows(start, count) += n.grad;
  });
}

Tensor slice_cols(const Tensor& a, Eigen::Index start, Eigen::Index count) {
  require(start >= 0 && count >= 0 && start + count <= a.cols(), "slice_cols: out of range");
  auto pa = a.node();
  return make_node(a.value().middleCols(start, count), {pa}, [pa, start, count](Node& n) {
    if (pa->requires_grad) pa->grad.middleCols(start, count) += n.grad;
  });
}

Tensor gather_rows(const Tensor& a, const std::vector<int>& idx) {
  Mat out(static_cast<Eigen::Index>(idx.size()), a.cols());
  for (size_t i = 0; i < idx.size(); ++i) {
    require(idx[i] >= 0 && idx[i] < a.rows(), "gather_rows: index out of range");
    out.row(static_cast<Eigen::Index>(i)) = a.value().row(idx[i]);
  }
  auto pa = a.node();
  auto ids = idx;
  return make_node(std::move(out), {pa}, [pa, ids](Node& n) {
    if (!pa->requires_grad) return;
    for (size_t i = 0; i < ids.size(); ++i)
      pa->grad.row(ids[i]) += n.grad.row(static_cast<Eigen::Index>(i));
  });
}

Tensor mean_rows(const Tensor& a) {
  require(a.rows() >= 1, "mean_rows: empty");
  auto pa = a.node();
  const double inv = 1.0 / static_cast<double>(a.rows());
  Mat out = a.value().colwise().mean();
  return make_node(std::move(out), {pa}, [pa, inv](Node& n) {
    if (pa->requires_grad) pa->grad.rowwise() += (n.grad.row(0) * inv).eval();
  });
}

Tensor sum_all(const Tensor& a) {
  auto pa = a.node();
  Mat out(1, 1);
  out(0, 0) = a.value().sum();
  return make_node(std::move(out), {pa}, [pa](Node& n) {
    if (pa->requires_grad) pa->grad.array() += n.grad(0, 0);
  });
}

Tensor colwise_max_rows(const Tensor& a) {
  require(a.rows() >= 1, "colwise_max_rows: empty");
  auto pa = a.node();
  Mat out(1, a.cols());
  std::vector<int> argmax(static_cast<size_t>(a.cols()));
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    Eigen::Index r;
    out(0, j) = a.value().col(j).maxCoeff(&r);
    argmax[static_cast<size_t>(j)] = static_cast<int>(r);
  }
  return make_node(std::move(out), {pa}, [pa, argmax](Node& n) {
    if (!pa->requires_grad) return;
    for (Eigen::Index j = 0; j < n.grad.cols(); ++j)
      pa->grad(argmax[static_cast<size_t>(j)], j) += n.grad(0, j);
  });
}

Tensor l2_normalize_rows(const Tensor& a) {
  auto pa = a.node();
  Mat out = a.value();
  std::vector<double> norms(static_cast<size_t>(a.rows()));
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double nrm = a.value().row(i).norm();
    if (nrm < 1e-30) throw NumericError("l2_normalize_rows: zero-norm row");
    norms[static_cast<size_t>(i)] = nrm;
    out.row(i) /= nrm;
  }
  return make_node(std::move(out), {pa}, [pa, norms](Node& n) {
    if (!pa->requires_grad) return;
    for (Eigen::Index i = 0; i < n.grad.rows(); ++i) {
      const auto y = n.value.row(i);
      const double dot = n.grad.row(i).dot(y);
      pa->grad.row(i) += (n.grad.row(i) - dot * y) / norms[static_cast<size_t>(i)];
    }
  });
}

Tensor detach(const Tensor& a) { return constant(a.value()); }

Tensor softmax_rows(const Tensor& a, const BMask* mask) {
  if (mask != nullptr)
    require(mask->rows() == a.rows() && mask->cols() == a.cols(), "softmax_rows: mask shape mismatch");
  auto pa = a.node();
  Mat out(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (mask == nullptr || (*mask)(i, j)) mx = std::max(mx, a.value()(i, j));
    }
    if (!std::isfinite(mx)) {  // fully masked row
      out.row(i).setZero();
      continue;
    }
    double denom = 0.0;
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (mask == nullptr || (*mask)(i, j)) {
        out(i, j) = std::exp(a.value()(i, j) - mx);
        denom += out(i, j);
      } else {
        out(i, j) = 0.0;
      }
    }
    out.row(i) /= denom;
  }
  return make_node(std::move(out), {pa}, [pa](Node& n) {
    if (!pa->requires_grad) return;
    for (Eigen::Index i = 0; i < n.grad.rows(); ++i) {
      const auto y = n.value.row(i);
      const double dot = n.grad.row(i).dot(y);
      pa->grad.row(i) += (n.grad.row(i).array() - dot).matrix().cwiseProduct(y);
    }
  });
}

Tensor layer_norm(const Tensor& a, const Tensor& gamma, const Tensor& beta, double eps) {
  require(gamma.rows() == 1 && gamma.cols() == a.cols(), "layer_norm: gamma must be 1xC");
  require(beta.rows() == 1 && beta.cols() == a.cols(), "layer_norm: beta must be 1xC");
  auto pa = a.node(), pg = gamma.node(), pb = beta.node();
  const Eigen::Index c = a.cols();
  Mat xhat(a.rows(), c);
  std::vector<double> inv_sigma(static_cast<size_t>(a.rows()));
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double mu = a.value().row(i).mean();
    const double var = (a.value().row(i).array() - mu).square().mean();
    const double is = 1.0 / std::sqrt(var + eps);
    inv_sigma[static_cast<size_t>(i)] = is;
    xhat.row(i) = (a.value().row(i).array() - mu).matrix() * is;
  }
  Mat out = xhat;
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    out.row(i) = out.row(i).cwiseProduct(gamma.value().row(0)) + beta.value().row(0);
  Mat xhat_copy = xhat;
  return make_node(std::move(out), {pa, pg, pb}, [pa, pg, pb, xhat_copy, inv_sigma](Node& n) {
    const Eigen::Index c = n.grad.cols();
    for (Eigen::Index i = 0; i < n.grad.rows(); ++i) {
      if (pg->requires_grad) pg->grad.row(0) += n.grad.row(i).cwiseProduct(xhat_copy.row(i));
      if (pb->requires_grad) pb->grad.row(0) += n.grad.row(i);
      if (pa->requires_grad) {
        Eigen::RowVectorXd dxhat = n.grad.row(i).cwiseProduct(pg->value.row(0));
        const double m1 = dxhat.mean();
        const double m2 = dxhat.cwiseProduct(xhat_copy.row(i)).mean();
        pa->grad.row(i) +=
            inv_sigma[static_cast<size_t>(i)] *
            (dxhat.array() - m1 - xhat_copy.row(i).array() * m2).matrix();
      }
    }
    (void)c;
  });
}

Tensor cross_entropy_rows(const Tensor& logits, const std::vector<int>& targets,
                          const std::vector<int>* rows) {
  std::vector<int> sel;
  if (rows == nullptr) {
    sel.resize(static_cast<size_t>(logits.rows()));
    for (size_t i = 0; i < sel.size(); ++i) sel[i] = static_cast<int>(i);
  } else {
    sel = *rows;
  }
  require(!sel.empty(), "cross_entropy_rows: no rows selected");
  require(targets.size() == sel.size(), "cross_entropy_rows: targets/rows size mismatch");
  auto pl = logits.node();
  double total = 0.0;
  for (size_t k = 0; k < sel.size(); ++k) {
    const int r = sel[k];
    require(r >= 0 && r < logits.rows(), "cross_entropy_rows: row out of range");
    require(targets[k] >= 0 && targets[k] < logits.cols(), "cross_entropy_rows: target out of range");
    const auto row = logits.value().row(r);
    const double mx = row.maxCoeff();
    const double lse = mx + std::log((row.array() - mx).exp().sum());
    total += lse - row(targets[k]);
  }
  Mat out(1, 1);
  out(0, 0) = total / static_cast<double>(sel.size());
  auto tg = targets;
  return make_node(std::move(out), {pl}, [pl, sel, tg](Node& n) {
    if (!pl->requires_grad) return;
    const double g = n.grad(0, 0) / static_cast<double>(sel.size());
    for (size_t k = 0; k < sel.size(); ++k) {
      const int r = sel[k];
      const auto row = pl->value.row(r);
      const double mx = row.maxCoeff();
      Eigen::RowVectorXd sm = (row.array() - mx).exp().matrix();
      sm /= sm.sum();
      sm(tg[k]) -= 1.0;
      pl->grad.row(r) += g * sm;
    }
  });
}

Tensor mse(const Tensor& a, const Tensor& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "mse: shape mismatch");
  auto pa = a.node(), pb = b.node();
  const double inv = 1.0 / static_cast<double>(a.rows() * a.cols());
  Mat out(1, 1);
  out(0, 0) = (a.value() - b.value()).squaredNorm() * inv;
  return make_node(std::move(out), {pa, pb}, [pa, pb, inv](Node& n) {
    const Mat d = 2.0 * inv * n.grad(0, 0) * (pa->value - pb->value);
    if (pa->requires_grad) pa->grad += d;
    if (pb->requires_grad) pb->grad -= d;
  });
}

Tensor dropout(const Tensor& a, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout rate must be in [0,1)");
  if (rate == 0.0) return a;
  Mat keep(a.rows(), a.cols());
  const double inv_keep = 1.0 / (1.0 - rate);
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      keep(i, j) = rng.uniform() < rate ? 0.0 : inv_keep;
  return hadamard(a, constant(keep));
}

}  // namespace stoa
