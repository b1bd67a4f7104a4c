/* Copyright 2026 The CSLR Toolkit Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <Eigen/Dense>

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "cslr/errors.hpp"
#include "cslr/rng.hpp"

namespace cslr {

// Every tensor in this library is a dense row-major matrix; vectors are
// 1 x N rows. The scalar type is a template parameter: training runs in
// float, gradient checks in double.
template <typename Scalar>
using DenseMatrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace detail {

template <typename Scalar>
struct TensorNode {
  DenseMatrix<Scalar> value;
  DenseMatrix<Scalar> grad;  // empty until backward touches this node
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  // Scatters this node's grad into its parents' grads.
  std::function<void(TensorNode&)> backprop;

  DenseMatrix<Scalar>& ensure_grad() {
    if (grad.rows() != value.rows() || grad.cols() != value.cols())
      grad = DenseMatrix<Scalar>::Zero(value.rows(), value.cols());
    return grad;
  }
};

// Graph recording can be suspended (evaluation passes); values are
// unaffected, only the backward closures are skipped.
inline thread_local bool autograd_enabled = true;

}  // namespace detail

struct NoGradGuard {
  NoGradGuard() : previous(detail::autograd_enabled) {
    detail::autograd_enabled = false;
  }
  ~NoGradGuard() { detail::autograd_enabled = previous; }
  bool previous;
};

template <typename Scalar>
class Tensor {
 public:
  using Matrix = DenseMatrix<Scalar>;
  using Node = detail::TensorNode<Scalar>;

  Tensor() : node_(std::make_shared<Node>()) {}

  explicit Tensor(Matrix value, bool requires_grad = false)
      : node_(std::make_shared<Node>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad && detail::autograd_enabled;
  }

  static Tensor zeros(Eigen::Index rows, Eigen::Index cols,
                      bool requires_grad = false) {
    return Tensor(Matrix::Zero(rows, cols), requires_grad);
  }

  static Tensor ones(Eigen::Index rows, Eigen::Index cols,
                     bool requires_grad = false) {
    return Tensor(Matrix::Ones(rows, cols), requires_grad);
  }

  // Fan-in scaled uniform init: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  static Tensor uniform_init(Eigen::Index rows, Eigen::Index cols,
                             Eigen::Index fan_in, Rng& rng,
                             bool requires_grad = true) {
    Matrix m(rows, cols);
    const double bound =
        1.0 / std::sqrt(static_cast<double>(fan_in > 0 ? fan_in : 1));
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j)
        m(i, j) = static_cast<Scalar>(rng.uniform(-bound, bound));
    return Tensor(std::move(m), requires_grad);
  }

  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }

  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  Eigen::Index numel() const { return node_->value.size(); }
  std::array<Eigen::Index, 2> shape() const { return {rows(), cols()}; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool b) { node_->requires_grad = b; }

  bool has_grad() const { return node_->grad.size() == node_->value.size(); }
  const Matrix& grad() const { return node_->grad; }
  Matrix& mutable_grad() { return node_->ensure_grad(); }

  // Clears the accumulated gradient. Repeated backward calls without a
  // reset accumulate by design.
  void zero_grad() {
    if (node_->grad.size() > 0) node_->grad.setZero();
  }

  std::shared_ptr<Node> node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}
  std::shared_ptr<Node> node_;

  template <typename S>
  friend Tensor<S> make_op_result(DenseMatrix<S> value,
                                  std::vector<Tensor<S>> inputs,
                                  std::function<void(detail::TensorNode<S>&)> fn);
};

// Builds the result node of an op: value plus, when any input wants
// gradients and recording is on, the backward closure.
template <typename Scalar>
Tensor<Scalar> make_op_result(
    DenseMatrix<Scalar> value, std::vector<Tensor<Scalar>> inputs,
    std::function<void(detail::TensorNode<Scalar>&)> fn) {
  auto node = std::make_shared<detail::TensorNode<Scalar>>();
  node->value = std::move(value);
  bool needs = false;
  if (detail::autograd_enabled)
    for (const auto& in : inputs) needs = needs || in.requires_grad();
  if (needs) {
    node->requires_grad = true;
    node->parents.reserve(inputs.size());
    for (const auto& in : inputs) node->parents.push_back(in.node());
    node->backprop = std::move(fn);
  }
  return Tensor<Scalar>(std::move(node));
}

namespace detail {

template <typename Scalar>
void check_same_shape(const Tensor<Scalar>& a, const Tensor<Scalar>& b,
                      const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                     " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
}

template <typename Scalar>
Scalar stable_sigmoid(Scalar x) {
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise and affine ops
// ---------------------------------------------------------------------------

template <typename Scalar>
Tensor<Scalar> add(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::check_same_shape(a, b, "add");
  DenseMatrix<Scalar> v = a.value() + b.value();
  return make_op_result<Scalar>(
      std::move(v), {a, b}, [](detail::TensorNode<Scalar>& n) {
        if (n.parents[0]->requires_grad) n.parents[0]->ensure_grad() += n.grad;
        if (n.parents[1]->requires_grad) n.parents[1]->ensure_grad() += n.grad;
      });
}

template <typename Scalar>
Tensor<Scalar> mul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::check_same_shape(a, b, "mul");
  DenseMatrix<Scalar> v = a.value().cwiseProduct(b.value());
  DenseMatrix<Scalar> av = a.value(), bv = b.value();
  return make_op_result<Scalar>(
      std::move(v), {a, b},
      [av, bv](detail::TensorNode<Scalar>& n) {
        if (n.parents[0]->requires_grad)
          n.parents[0]->ensure_grad() += n.grad.cwiseProduct(bv);
        if (n.parents[1]->requires_grad)
          n.parents[1]->ensure_grad() += n.grad.cwiseProduct(av);
      });
}

template <typename Scalar>
Tensor<Scalar> scale(const Tensor<Scalar>& a, Scalar c) {
  DenseMatrix<Scalar> v = a.value() * c;
  return make_op_result<Scalar>(std::move(v), {a},
                                [c](detail::TensorNode<Scalar>& n) {
                                  if (n.parents[0]->requires_grad)
                                    n.parents[0]->ensure_grad() += n.grad * c;
                                });
}

// Elementwise product with a constant mask/matrix (not differentiated
// through the constant). Used for dropout-style masks and padding zeroing.
template <typename Scalar>
Tensor<Scalar> mul_const(const Tensor<Scalar>& a, DenseMatrix<Scalar> m) {
  if (a.rows() != m.rows() || a.cols() != m.cols())
    throw ShapeError("mul_const: mask shape mismatch");
  DenseMatrix<Scalar> v = a.value().cwiseProduct(m);
  return make_op_result<Scalar>(
      std::move(v), {a}, [m = std::move(m)](detail::TensorNode<Scalar>& n) {
        if (n.parents[0]->requires_grad)
          n.parents[0]->ensure_grad() += n.grad.cwiseProduct(m);
      });
}

template <typename Scalar>
Tensor<Scalar> add_const(const Tensor<Scalar>& a, const DenseMatrix<Scalar>& m) {
  if (a.rows() != m.rows() || a.cols() != m.cols())
    throw ShapeError("add_const: shape mismatch");
  DenseMatrix<Scalar> v = a.value() + m;
  return make_op_result<Scalar>(std::move(v), {a},
                                [](detail::TensorNode<Scalar>& n) {
                                  if (n.parents[0]->requires_grad)
                                    n.parents[0]->ensure_grad() += n.grad;
                                });
}

// Adds a 1 x C row vector to every row of a T x C matrix.
template <typename Scalar>
Tensor<Scalar> add_rowvec(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (b.rows() != 1 || b.cols() != a.cols())
    throw ShapeError("add_rowvec: expected 1x" + std::to_string(a.cols()) +
                     " row vector, got " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
  DenseMatrix<Scalar> v = a.value();
  v.rowwise() += b.value().row(0);
  return make_op_result<Scalar>(
      std::move(v), {a, b}, [](detail::TensorNode<Scalar>& n) {
        if (n.parents[0]->requires_grad) n.parents[0]->ensure_grad() += n.grad;
        if (n.parents[1]->requires_grad)
          n.parents[1]->ensure_grad().row(0) += n.grad.colwise().sum();
      });
}

template <typename Scalar>
Tensor<Scalar> sum(const Tensor<Scalar>& a) {
  DenseMatrix<Scalar> v(1, 1);
  v(0, 0) = a.value().sum();
  return make_op_result<Scalar>(
      std::move(v), {a}, [](detail::TensorNode<Scalar>& n) {
        if (n.parents[0]->requires_grad)
          n.parents[0]->ensure_grad().array() += n.grad(0, 0);
      });
}

// ---------------------------------------------------------------------------
// Matrix products
// ---------------------------------------------------------------------------

template <typename Scalar>
Tensor<Scalar> matmul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.cols() != b.rows())
    throw ShapeError("matmul: inner dimensions " + std::to_string(a.cols()) +
                     " vs " + std::to_string(b.rows()));
  DenseMatrix<Scalar> v = a.value() * b.value();
  DenseMatrix<Scalar> av = a.value(), bv = b.value();
  return make_op_result<Scalar>(
      std::move(v), {a, b},
      [av, bv](detail::TensorNode<Scalar>& n) {
        if (n.parents[0]->requires_grad)
          n.parents[0]->ensure_grad().noalias() += n.grad * bv.transpose();
        if (n.parents[1]->requires_grad)
          n.parents[1]->ensure_grad().noalias() += av.transpose() * n.grad;
      });
}

// C = A * B^T (both stored untransposed); saves explicit transposes in
// attention score computation.
template <typename Scalar>
Tensor<Scalar> matmul_nt(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.cols() != b.cols())
    throw ShapeError("matmul_nt: inner dimensions " + std::to_string(a.cols()) +
                     " vs " + std::to_string(b.cols()));
  DenseMatrix<Scalar> v = a.value() * b.value().transpose();
  DenseMatrix<Scalar> av = a.value(), bv = b.value();
  return make_op_result<Scalar>(
      std::move(v), {a, b},
      [av, bv](detail::TensorNode<Scalar>& n) {
        if (n.parents[0]->requires_grad)
          n.parents[0]->ensure_grad().noalias() += n.grad * bv;
        if (n.parents[1]->requires_grad)
          n.parents[1]->ensure_grad().noalias() += n.grad.transpose() * av;
      });
}

// ---------------------------------------------------------------------------
// Column slicing / concatenation (attention heads, GLU halves)
// ---------------------------------------------------------------------------

template <typename Scalar>
Tensor<Scalar> slice_cols(const Tensor<Scalar>& a, Eigen::Index start,
                          Eigen::Index n) {
  if (start < 0 || n <= 0 || start + n > a.cols())
    throw ShapeError("slice_cols: [" + std::to_string(start) + ", " +
                     std::to_string(start + n) + ") out of " +
                     std::to_string(a.cols()) + " columns");
  DenseMatrix<Scalar> v = a.value().middleCols(start, n);
  return make_op_result<Scalar>(
      std::move(v), {a}, [start, n](detail::TensorNode<Scalar>& n_) {
        if (n_.parents[0]->requires_grad)
          n_.parents[0]->ensure_grad().middleCols(start, n) += n_.grad;
      });
}

template <typename Scalar>
Tensor<Scalar> concat_cols(const std::vector<Tensor<Scalar>>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index total = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw ShapeError("concat_cols: row count mismatch");
    total += p.cols();
  }
  DenseMatrix<Scalar> v(rows, total);
  std::vector<Eigen::Index> widths;
  widths.reserve(parts.size());
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    v.middleCols(at, p.cols()) = p.value();
    widths.push_back(p.cols());
    at += p.cols();
  }
  return make_op_result<Scalar>(
      std::move(v), parts, [widths](detail::TensorNode<Scalar>& n) {
        Eigen::Index at = 0;
        for (std::size_t i = 0; i < widths.size(); ++i) {
          if (n.parents[i]->requires_grad)
            n.parents[i]->ensure_grad() += n.grad.middleCols(at, widths[i]);
          at += widths[i];
        }
      });
}

// ---------------------------------------------------------------------------
// Nonlinearities
// ---------------------------------------------------------------------------

template <typename Scalar>
Tensor<Scalar> swish(const Tensor<Scalar>& a) {
  DenseMatrix<Scalar> sig = a.value().unaryExpr(
      [](Scalar x) { return detail::stable_sigmoid<Scalar>(x); });
  DenseMatrix<Scalar> v = a.value().cwiseProduct(sig);
  DenseMatrix<Scalar> av = a.value();
  return make_op_result<Scalar>(
      std::move(v), {a},
      [av, sig](detail::TensorNode<Scalar>& n) {
        if (!n.parents[0]->requires_grad) return;
        // d/dx x*s(x) = s(x) + x*s(x)*(1-s(x))
        DenseMatrix<Scalar> d =
            sig.array() *
            (Scalar(1) + av.array() * (Scalar(1) - sig.array()));
        n.parents[0]->ensure_grad() += n.grad.cwiseProduct(d);
      });
}

// Gated linear unit over the last axis: [a | b] -> a .* sigmoid(b).
template <typename Scalar>
Tensor<Scalar> glu(const Tensor<Scalar>& x) {
  if (x.cols() % 2 != 0)
    throw ShapeError("glu: last axis must be even, got " +
                     std::to_string(x.cols()));
  const Eigen::Index h = x.cols() / 2;
  DenseMatrix<Scalar> a = x.value().leftCols(h);
  DenseMatrix<Scalar> sig = x.value().rightCols(h).unaryExpr(
      [](Scalar v) { return detail::stable_sigmoid<Scalar>(v); });
  DenseMatrix<Scalar> v = a.cwiseProduct(sig);
  return make_op_result<Scalar>(
      std::move(v), {x},
      [a, sig, h](detail::TensorNode<Scalar>& n) {
        if (!n.parents[0]->requires_grad) return;
        auto& g = n.parents[0]->ensure_grad();
        g.leftCols(h) += n.grad.cwiseProduct(sig);
        g.rightCols(h).array() +=
            n.grad.array() * a.array() * sig.array() * (Scalar(1) - sig.array());
      });
}

template <typename Scalar>
Tensor<Scalar> softmax_rows(const Tensor<Scalar>& x) {
  DenseMatrix<Scalar> v = x.value();
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    const Scalar m = v.row(i).maxCoeff();
    v.row(i) = (v.row(i).array() - m).exp();
    v.row(i) /= v.row(i).sum();
  }
  DenseMatrix<Scalar> y = v;
  return make_op_result<Scalar>(
      std::move(v), {x}, [y](detail::TensorNode<Scalar>& n) {
        if (!n.parents[0]->requires_grad) return;
        DenseMatrix<Scalar> d = n.grad.cwiseProduct(y);
        for (Eigen::Index i = 0; i < d.rows(); ++i) {
          const Scalar s = d.row(i).sum();
          d.row(i) -= s * y.row(i);
        }
        n.parents[0]->ensure_grad() += d;
      });
}

// Softmax over columns [0, valid); masked columns get probability zero and
// receive zero gradient. Rows are all processed.
template <typename Scalar>
Tensor<Scalar> masked_softmax_rows(const Tensor<Scalar>& x,
                                   Eigen::Index valid) {
  if (valid <= 0 || valid > x.cols())
    throw ShapeError("masked_softmax_rows: valid=" + std::to_string(valid) +
                     " of " + std::to_string(x.cols()) + " columns");
  DenseMatrix<Scalar> v = DenseMatrix<Scalar>::Zero(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    const Scalar m = x.value().row(i).head(valid).maxCoeff();
    v.row(i).head(valid) = (x.value().row(i).head(valid).array() - m).exp();
    v.row(i).head(valid) /= v.row(i).head(valid).sum();
  }
  DenseMatrix<Scalar> y = v;
  return make_op_result<Scalar>(
      std::move(v), {x}, [y, valid](detail::TensorNode<Scalar>& n) {
        if (!n.parents[0]->requires_grad) return;
        DenseMatrix<Scalar> d = n.grad.cwiseProduct(y);
        for (Eigen::Index i = 0; i < d.rows(); ++i) {
          const Scalar s = d.row(i).head(valid).sum();
          d.row(i).head(valid) -= s * y.row(i).head(valid);
        }
        n.parents[0]->ensure_grad() += d;
      });
}

template <typename Scalar>
Tensor<Scalar> log_softmax_rows(const Tensor<Scalar>& x) {
  DenseMatrix<Scalar> v = x.value();
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    const Scalar m = v.row(i).maxCoeff();
    const Scalar lse =
        m + std::log((v.row(i).array() - m).exp().sum());
    v.row(i).array() -= lse;
  }
  DenseMatrix<Scalar> y = v;
  return make_op_result<Scalar>(
      std::move(v), {x}, [y](detail::TensorNode<Scalar>& n) {
        if (!n.parents[0]->requires_grad) return;
        DenseMatrix<Scalar> d = n.grad;
        for (Eigen::Index i = 0; i < d.rows(); ++i) {
          const Scalar s = n.grad.row(i).sum();
          d.row(i) -= s * y.row(i).array().exp().matrix();
        }
        n.parents[0]->ensure_grad() += d;
      });
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

// Last-axis layer normalization with affine transform. Variance is the
// population form (divide by C).
template <typename Scalar>
Tensor<Scalar> layer_norm(const Tensor<Scalar>& x, const Tensor<Scalar>& gain,
                          const Tensor<Scalar>& bias, Scalar eps) {
  if (eps <= Scalar(0)) throw ConfigError("layer_norm: eps must be > 0");
  if (gain.rows() != 1 || gain.cols() != x.cols() || bias.rows() != 1 ||
      bias.cols() != x.cols())
    throw ShapeError("layer_norm: gain/bias must be 1x" +
                     std::to_string(x.cols()));
  const Eigen::Index c = x.cols();
  DenseMatrix<Scalar> z(x.rows(), c);
  DenseMatrix<Scalar> inv_std(x.rows(), 1);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Scalar mu = x.value().row(i).mean();
    const Scalar var =
        (x.value().row(i).array() - mu).square().sum() / Scalar(c);
    const Scalar is = Scalar(1) / std::sqrt(var + eps);
    inv_std(i, 0) = is;
    z.row(i) = (x.value().row(i).array() - mu) * is;
  }
  DenseMatrix<Scalar> v = z;
  v.array().rowwise() *= gain.value().row(0).array();
  v.rowwise() += bias.value().row(0);
  DenseMatrix<Scalar> gv = gain.value();
  return make_op_result<Scalar>(
      std::move(v), {x, gain, bias},
      [z, inv_std, gv, c](detail::TensorNode<Scalar>& n) {
        DenseMatrix<Scalar> dz = n.grad;
        dz.array().rowwise() *= gv.row(0).array();
        if (n.parents[0]->requires_grad) {
          auto& gx = n.parents[0]->ensure_grad();
          for (Eigen::Index i = 0; i < dz.rows(); ++i) {
            const Scalar mean_dz = dz.row(i).mean();
            const Scalar mean_dzz = dz.row(i).cwiseProduct(z.row(i)).mean();
            gx.row(i).array() +=
                inv_std(i, 0) * (dz.row(i).array() - mean_dz -
                                 z.row(i).array() * mean_dzz);
          }
        }
        if (n.parents[1]->requires_grad)
          n.parents[1]->ensure_grad().row(0) +=
              n.grad.cwiseProduct(z).colwise().sum();
        if (n.parents[2]->requires_grad)
          n.parents[2]->ensure_grad().row(0) += n.grad.colwise().sum();
      });
}

// ---------------------------------------------------------------------------
// Convolutions / temporal ops
// ---------------------------------------------------------------------------

// Depthwise temporal convolution: x is T x C, kernel is C x W (odd W),
// zero "same" padding, each channel convolved with its own kernel.
template <typename Scalar>
Tensor<Scalar> conv1d_depthwise(const Tensor<Scalar>& x,
                                const Tensor<Scalar>& kernel) {
  const Eigen::Index t_len = x.rows(), c = x.cols(), w = kernel.cols();
  if (kernel.rows() != c)
    throw ShapeError("conv1d_depthwise: kernel rows " +
                     std::to_string(kernel.rows()) + " != channels " +
                     std::to_string(c));
  if (w % 2 == 0)
    throw ConfigError("conv1d_depthwise: kernel width must be odd, got " +
                      std::to_string(w));
  const Eigen::Index h = (w - 1) / 2;
  DenseMatrix<Scalar> v = DenseMatrix<Scalar>::Zero(t_len, c);
  for (Eigen::Index t = 0; t < t_len; ++t) {
    for (Eigen::Index k = 0; k < w; ++k) {
      const Eigen::Index src = t + k - h;
      if (src < 0 || src >= t_len) continue;
      v.row(t).array() +=
          x.value().row(src).array() * kernel.value().col(k).transpose().array();
    }
  }
  DenseMatrix<Scalar> xv = x.value(), kv = kernel.value();
  return make_op_result<Scalar>(
      std::move(v), {x, kernel},
      [xv, kv, h, w](detail::TensorNode<Scalar>& n) {
        const Eigen::Index t_len = xv.rows();
        if (n.parents[0]->requires_grad) {
          auto& gx = n.parents[0]->ensure_grad();
          for (Eigen::Index t = 0; t < t_len; ++t)
            for (Eigen::Index k = 0; k < w; ++k) {
              const Eigen::Index src = t + k - h;
              if (src < 0 || src >= t_len) continue;
              gx.row(src).array() +=
                  n.grad.row(t).array() * kv.col(k).transpose().array();
            }
        }
        if (n.parents[1]->requires_grad) {
          auto& gk = n.parents[1]->ensure_grad();
          for (Eigen::Index t = 0; t < t_len; ++t)
            for (Eigen::Index k = 0; k < w; ++k) {
              const Eigen::Index src = t + k - h;
              if (src < 0 || src >= t_len) continue;
              gk.col(k).array() +=
                  (n.grad.row(t).array() * xv.row(src).array()).transpose();
            }
        }
      });
}

// Gathers strided windows of rows: output row t' is the concatenation of
// input rows [stride*t' - pad, ..., +w-1], zero outside. With w=3, stride=2
// the output length is ceil(T/2); two applications give the 4x subsampling.
template <typename Scalar>
Tensor<Scalar> time_unfold(const Tensor<Scalar>& x, Eigen::Index w,
                           Eigen::Index stride) {
  if (w % 2 == 0) throw ConfigError("time_unfold: window must be odd");
  if (stride < 1) throw ConfigError("time_unfold: stride must be >= 1");
  const Eigen::Index t_len = x.rows(), c = x.cols(), pad = (w - 1) / 2;
  const Eigen::Index t_out = (t_len + 2 * pad - w) / stride + 1;
  DenseMatrix<Scalar> v = DenseMatrix<Scalar>::Zero(t_out, w * c);
  for (Eigen::Index t = 0; t < t_out; ++t)
    for (Eigen::Index k = 0; k < w; ++k) {
      const Eigen::Index src = stride * t - pad + k;
      if (src < 0 || src >= t_len) continue;
      v.row(t).segment(k * c, c) = x.value().row(src);
    }
  return make_op_result<Scalar>(
      std::move(v), {x}, [w, stride, pad, c, t_len](detail::TensorNode<Scalar>& n) {
        if (!n.parents[0]->requires_grad) return;
        auto& gx = n.parents[0]->ensure_grad();
        for (Eigen::Index t = 0; t < n.grad.rows(); ++t)
          for (Eigen::Index k = 0; k < w; ++k) {
            const Eigen::Index src = stride * t - pad + k;
            if (src < 0 || src >= t_len) continue;
            gx.row(src) += n.grad.row(t).segment(k * c, c);
          }
      });
}

// ---------------------------------------------------------------------------
// Dropout
// ---------------------------------------------------------------------------

template <typename Scalar>
Tensor<Scalar> dropout(const Tensor<Scalar>& x, double p, bool training,
                       Rng& rng) {
  if (p < 0.0 || p >= 1.0)
    throw ConfigError("dropout: p must be in [0, 1), got " + std::to_string(p));
  if (!training || p == 0.0) {
    DenseMatrix<Scalar> v = x.value();
    return make_op_result<Scalar>(std::move(v), {x},
                                  [](detail::TensorNode<Scalar>& n) {
                                    if (n.parents[0]->requires_grad)
                                      n.parents[0]->ensure_grad() += n.grad;
                                  });
  }
  const Scalar keep_scale = Scalar(1.0 / (1.0 - p));
  DenseMatrix<Scalar> mask(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      mask(i, j) = rng.uniform() < p ? Scalar(0) : keep_scale;
  return mul_const(x, std::move(mask));
}

// ---------------------------------------------------------------------------
// Custom scalar-valued op hook (used by the CTC loss node)
// ---------------------------------------------------------------------------

// Wraps an externally computed scalar whose gradient with respect to the
// single input is known analytically.
template <typename Scalar>
Tensor<Scalar> custom_scalar_op(const Tensor<Scalar>& input, Scalar value,
                                DenseMatrix<Scalar> input_grad) {
  if (input_grad.rows() != input.rows() || input_grad.cols() != input.cols())
    throw ShapeError("custom_scalar_op: gradient shape mismatch");
  DenseMatrix<Scalar> v(1, 1);
  v(0, 0) = value;
  return make_op_result<Scalar>(
      std::move(v), {input},
      [g = std::move(input_grad)](detail::TensorNode<Scalar>& n) {
        if (n.parents[0]->requires_grad)
          n.parents[0]->ensure_grad() += n.grad(0, 0) * g;
      });
}

// ---------------------------------------------------------------------------
// Backward pass
// ---------------------------------------------------------------------------

// Reverse-mode sweep from a scalar loss. Gradients accumulate into every
// reachable tensor with requires_grad set; call zero_grad between steps.
template <typename Scalar>
void backward(const Tensor<Scalar>& loss) {
  if (loss.rows() != 1 || loss.cols() != 1)
    throw UsageError("backward: loss must be a 1x1 scalar, got " +
                     std::to_string(loss.rows()) + "x" +
                     std::to_string(loss.cols()));
  if (!std::isfinite(static_cast<double>(loss.value()(0, 0))))
    throw UsageError("backward: loss is not finite");

  using NodeT = detail::TensorNode<Scalar>;
  std::vector<NodeT*> order;
  std::unordered_set<NodeT*> seen;
  std::vector<std::pair<NodeT*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      NodeT* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  // order is post-order: parents before children; walk it backwards.
  loss.node()->ensure_grad()(0, 0) += Scalar(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    NodeT* node = *it;
    if (node->backprop && node->grad.size() > 0) node->backprop(*node);
  }
}

}  // namespace cslr
