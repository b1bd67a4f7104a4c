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

#include <cmath>
#include <filesystem>
#include <functional>
#include <string>

#include "cslr/rng.hpp"
#include "cslr/tensor.hpp"

namespace cslr_test {

inline cslr::DenseMatrix<double> random_matrix(cslr::Rng& rng, Eigen::Index r,
                                               Eigen::Index c, double lo = -1.0,
                                               double hi = 1.0) {
  cslr::DenseMatrix<double> m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.uniform(lo, hi);
  return m;
}

// |a - b| relative to the larger magnitude, floored so that two near-zero
// values compare equal.
inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

// Central finite difference of f with respect to entry (i, j) of m.
inline double central_diff(cslr::DenseMatrix<double>& m, Eigen::Index i,
                           Eigen::Index j, const std::function<double()>& f,
                           double h = 1e-5) {
  const double saved = m(i, j);
  m(i, j) = saved + h;
  const double up = f();
  m(i, j) = saved - h;
  const double dn = f();
  m(i, j) = saved;
  return (up - dn) / (2.0 * h);
}

// Compares the analytic gradient of loss_fn with central differences over
// every entry of x, returning the max relative error. loss_fn must build a
// fresh graph from x each call (x requires grad).
inline double max_grad_rel_err(cslr::Tensor<double>& x,
                               const std::function<cslr::Tensor<double>()>& loss_fn,
                               double h = 1e-5) {
  x.set_requires_grad(true);
  x.zero_grad();
  cslr::Tensor<double> loss = loss_fn();
  cslr::backward(loss);
  cslr::DenseMatrix<double> analytic = x.grad();

  double worst = 0.0;
  auto eval = [&]() { return loss_fn().value()(0, 0); };
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double fd = central_diff(x.mutable_value(), i, j, eval, h);
      worst = std::max(worst, rel_err(analytic(i, j), fd));
    }
  return worst;
}

// Scratch directory for file-format tests; unique per tag, recreated fresh.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() / ("cslr_test_" + tag);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace cslr_test
