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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <sstream>

#include "cslr/checkpoint.hpp"
#include "cslr/tensor.hpp"
#include "helpers.hpp"

using cslr::DenseMatrix;
using cslr::Rng;
using cslr::Tensor;
using cslr_test::random_matrix;
using cslr_test::rel_err;

using Mat = DenseMatrix<double>;

TEST_CASE("matmul identity and hand arithmetic") {
  Mat a(2, 2);
  a << 1, 2, 3, 4;
  Tensor<double> ta(a), ident(Mat::Identity(2, 2));
  CHECK(cslr::matmul(ident, ta).value().isApprox(a));

  Mat b(2, 1);
  b << 1, 1;
  Mat prod = cslr::matmul(ta, Tensor<double>(b)).value();
  CHECK(prod(0, 0) == doctest::Approx(3));
  CHECK(prod(1, 0) == doctest::Approx(7));
}

TEST_CASE("matmul gradient of sum equals ones * b^T and finite differences") {
  Rng rng(7);
  Tensor<double> a(random_matrix(rng, 5, 4), true);
  Tensor<double> b(random_matrix(rng, 4, 3), true);
  Tensor<double> loss = cslr::sum(cslr::matmul(a, b));
  cslr::backward(loss);
  Mat expected = Mat::Ones(5, 3) * b.value().transpose();
  CHECK(a.grad().isApprox(expected, 1e-12));

  Tensor<double> a2(random_matrix(rng, 5, 4));
  const Mat bv = b.value();
  double err = cslr_test::max_grad_rel_err(a2, [&]() {
    return cslr::sum(cslr::matmul(a2, Tensor<double>(bv)));
  });
  CHECK(err < 1e-4);
}

TEST_CASE("matmul shape mismatch raises a dimension error") {
  Tensor<double> a(Mat::Zero(2, 3)), b(Mat::Zero(4, 2));
  CHECK_THROWS_AS((void)cslr::matmul(a, b), cslr::ShapeError);
}

TEST_CASE("depthwise conv: impulse kernel is identity, constant input scales") {
  Rng rng(11);
  const int t = 9, c = 4, w = 5;
  Tensor<double> x(random_matrix(rng, t, c));

  Mat impulse = Mat::Zero(c, w);
  impulse.col((w - 1) / 2).setOnes();
  CHECK(cslr::conv1d_depthwise(x, Tensor<double>(impulse)).value().isApprox(
      x.value(), 1e-12));

  Mat kernel = random_matrix(rng, c, w);
  Mat constant = Mat::Constant(t, c, 2.5);
  Mat out = cslr::conv1d_depthwise(Tensor<double>(constant),
                                   Tensor<double>(kernel))
                .value();
  for (int ch = 0; ch < c; ++ch) {
    const double s = kernel.row(ch).sum();
    for (int i = (w - 1) / 2; i < t - (w - 1) / 2; ++i)
      CHECK(out(i, ch) == doctest::Approx(2.5 * s).epsilon(1e-10));
  }
}

TEST_CASE("depthwise conv matches the direct summation oracle") {
  Rng rng(13);
  const int t = 12, c = 3, w = 7, h = (w - 1) / 2;
  Mat x = random_matrix(rng, t, c), k = random_matrix(rng, c, w);
  Mat got = cslr::conv1d_depthwise(Tensor<double>(x), Tensor<double>(k)).value();

  // Independent O(T*C*W) evaluation.
  for (int i = 0; i < t; ++i)
    for (int ch = 0; ch < c; ++ch) {
      double acc = 0;
      for (int j = 0; j < w; ++j) {
        const int src = i + j - h;
        if (src >= 0 && src < t) acc += x(src, ch) * k(ch, j);
      }
      CHECK(got(i, ch) == doctest::Approx(acc).epsilon(1e-12));
    }
}

TEST_CASE("depthwise conv rejects even kernel width") {
  Tensor<double> x(Mat::Zero(4, 2)), k(Mat::Zero(2, 4));
  CHECK_THROWS_AS((void)cslr::conv1d_depthwise(x, k), cslr::ConfigError);
}

TEST_CASE("layer_norm hand cases") {
  Tensor<double> gain(Mat::Ones(1, 4)), bias(Mat::Zero(1, 4));

  Mat constant = Mat::Constant(1, 4, 3.7);
  Mat out = cslr::layer_norm(Tensor<double>(constant), gain, bias, 1e-5).value();
  CHECK(out.cwiseAbs().maxCoeff() < 1e-8);

  Tensor<double> g2(Mat::Ones(1, 2)), b2(Mat::Zero(1, 2));
  Mat row(1, 2);
  row << 1, -1;
  Mat out2 = cslr::layer_norm(Tensor<double>(row), g2, b2, 1e-10).value();
  CHECK(out2(0, 0) == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(out2(0, 1) == doctest::Approx(-1.0).epsilon(1e-4));

  // With unit gain, the row mean of the output is the bias mean.
  Rng rng(3);
  Mat x = random_matrix(rng, 5, 4);
  Mat bv = random_matrix(rng, 1, 4);
  Mat out3 =
      cslr::layer_norm(Tensor<double>(x), gain, Tensor<double>(bv), 1e-8)
          .value();
  for (int i = 0; i < 5; ++i)
    CHECK(out3.row(i).mean() == doctest::Approx(bv.mean()).epsilon(1e-6));
}

TEST_CASE("softmax, swish, glu basics") {
  Mat z(1, 2);
  z << 0, 0;
  Mat sm = cslr::softmax_rows(Tensor<double>(z)).value();
  CHECK(sm(0, 0) == doctest::Approx(0.5));
  CHECK(sm(0, 1) == doctest::Approx(0.5));

  Rng rng(5);
  Mat x = random_matrix(rng, 3, 4, -4, 4);
  Mat sw = cslr::swish(Tensor<double>(x)).value();
  for (int i = 0; i < x.size(); ++i) {
    const double v = x.data()[i];
    CHECK(sw.data()[i] ==
          doctest::Approx(v / (1.0 + std::exp(-v))).epsilon(1e-12));
  }

  Mat g = random_matrix(rng, 3, 6);
  Mat gl = cslr::glu(Tensor<double>(g)).value();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const double gate = 1.0 / (1.0 + std::exp(-g(i, j + 3)));
      CHECK(gl(i, j) == doctest::Approx(g(i, j) * gate).epsilon(1e-12));
    }
  CHECK_THROWS_AS((void)cslr::glu(Tensor<double>(Mat::Zero(2, 3))),
                  cslr::ShapeError);
}

TEST_CASE("softmax rows sum to one; masked softmax zeroes invalid columns") {
  Rng rng(17);
  Mat x = random_matrix(rng, 6, 5, -3, 3);
  Mat sm = cslr::softmax_rows(Tensor<double>(x)).value();
  for (int i = 0; i < 6; ++i) CHECK(sm.row(i).sum() == doctest::Approx(1.0));

  Mat msm = cslr::masked_softmax_rows(Tensor<double>(x), 3).value();
  for (int i = 0; i < 6; ++i) {
    CHECK(msm.row(i).head(3).sum() == doctest::Approx(1.0));
    CHECK(msm(i, 3) == 0.0);
    CHECK(msm(i, 4) == 0.0);
  }
}

TEST_CASE("dropout identity cases and Monte Carlo survivor fraction") {
  Rng rng(19);
  Mat x = random_matrix(rng, 4, 4);
  Tensor<double> tx(x);

  Rng r0(1);
  CHECK(cslr::dropout(tx, 0.0, true, r0).value() == x);
  CHECK(cslr::dropout(tx, 0.7, false, r0).value() == x);
  CHECK_THROWS_AS((void)cslr::dropout(tx, 1.0, true, r0), cslr::ConfigError);
  CHECK_THROWS_AS((void)cslr::dropout(tx, -0.1, true, r0), cslr::ConfigError);

  // Survivor fraction over 1e6 elements within 3 sigma of 1-p.
  const double p = 0.3;
  const int n = 1000000;
  Tensor<double> big(Mat::Ones(1000, 1000));
  Rng r1(20240817);
  Mat dropped = cslr::dropout(big, p, true, r1).value();
  const int survivors = static_cast<int>((dropped.array() != 0.0).count());
  const double sigma = std::sqrt(p * (1 - p) * n);
  CHECK(std::abs(survivors - (1 - p) * n) < 3 * sigma);
  // Survivors are rescaled by 1/(1-p).
  CHECK(dropped.maxCoeff() == doctest::Approx(1.0 / (1 - p)));
}

TEST_CASE("dropout is reproducible from the rng seed") {
  Mat x = Mat::Ones(8, 8);
  Rng a(99), b(99);
  Mat ya = cslr::dropout(Tensor<double>(x), 0.5, true, a).value();
  Mat yb = cslr::dropout(Tensor<double>(x), 0.5, true, b).value();
  CHECK(ya == yb);
}

TEST_CASE("backward: sum and quadratic leaf gradients") {
  Rng rng(23);
  Tensor<double> x(random_matrix(rng, 3, 4), true);
  cslr::backward(cslr::sum(x));
  CHECK(x.grad() == Mat::Ones(3, 4));

  Tensor<double> y(random_matrix(rng, 3, 4), true);
  cslr::backward(cslr::sum(cslr::mul(y, y)));
  CHECK(y.grad().isApprox(2.0 * y.value(), 1e-12));
}

TEST_CASE("backward rejects non-scalar and non-finite losses") {
  Tensor<double> x(Mat::Ones(2, 2), true);
  CHECK_THROWS_AS(cslr::backward(x), cslr::UsageError);
  Mat inf = Mat::Constant(1, 1, std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(cslr::backward(Tensor<double>(inf, true)), cslr::UsageError);
}

TEST_CASE("repeated backward accumulates gradients") {
  Tensor<double> x(Mat::Ones(2, 2), true);
  auto loss1 = cslr::sum(x);
  cslr::backward(loss1);
  auto loss2 = cslr::sum(x);
  cslr::backward(loss2);
  CHECK(x.grad() == 2.0 * Mat::Ones(2, 2));
  x.zero_grad();
  CHECK(x.grad() == Mat::Zero(2, 2));
}

TEST_CASE("composite graph gradient matches finite differences") {
  Rng rng(29);
  Mat w = random_matrix(rng, 4, 6);
  Tensor<double> gain(Mat::Ones(1, 6)), bias(Mat::Zero(1, 6));
  Tensor<double> x(random_matrix(rng, 3, 4));

  double err = cslr_test::max_grad_rel_err(x, [&]() {
    auto h = cslr::matmul(x, Tensor<double>(w));
    auto s = cslr::swish(h);
    auto n = cslr::layer_norm(s, gain, bias, 1e-5);
    return cslr::sum(n);
  });
  CHECK(err < 1e-4);
}

TEST_CASE("every differentiable op passes the finite-difference check") {
  Rng rng(31);
  const double tol = 1e-4;

  auto weighted = [&](Tensor<double> t, const Mat& w) {
    return cslr::sum(cslr::mul_const(t, w));
  };

  {
    Tensor<double> x(random_matrix(rng, 4, 5));
    Mat w = random_matrix(rng, 4, 5);
    CHECK(cslr_test::max_grad_rel_err(
              x, [&]() { return weighted(cslr::swish(x), w); }) < tol);
    CHECK(cslr_test::max_grad_rel_err(
              x, [&]() { return weighted(cslr::softmax_rows(x), w); }) < tol);
    CHECK(cslr_test::max_grad_rel_err(
              x, [&]() { return weighted(cslr::log_softmax_rows(x), w); }) <
          tol);
    CHECK(cslr_test::max_grad_rel_err(x, [&]() {
            return weighted(cslr::masked_softmax_rows(x, 3), w);
          }) < tol);
    CHECK(cslr_test::max_grad_rel_err(x, [&]() {
            return weighted(cslr::scale(x, 1.7), w);
          }) < tol);
  }
  {
    Tensor<double> x(random_matrix(rng, 4, 6));
    Mat w = random_matrix(rng, 4, 3);
    CHECK(cslr_test::max_grad_rel_err(
              x, [&]() { return weighted(cslr::glu(x), w); }) < tol);
    Mat ws = random_matrix(rng, 4, 2);
    CHECK(cslr_test::max_grad_rel_err(x, [&]() {
            return weighted(cslr::slice_cols(x, 2, 2), ws);
          }) < tol);
  }
  {
    Tensor<double> x(random_matrix(rng, 5, 3));
    Mat other = random_matrix(rng, 5, 3);
    Mat w = random_matrix(rng, 5, 3);
    CHECK(cslr_test::max_grad_rel_err(x, [&]() {
            return weighted(cslr::add(x, Tensor<double>(other)), w);
          }) < tol);
    CHECK(cslr_test::max_grad_rel_err(x, [&]() {
            return weighted(cslr::mul(x, Tensor<double>(other)), w);
          }) < tol);
    Mat w2 = random_matrix(rng, 5, 6);
    CHECK(cslr_test::max_grad_rel_err(x, [&]() {
            return weighted(
                cslr::concat_cols<double>({x, Tensor<double>(other)}), w2);
          }) < tol);
  }
  {
    // Bias gradient through add_rowvec.
    Tensor<double> b(random_matrix(rng, 1, 4));
    Mat a = random_matrix(rng, 6, 4);
    Mat w = random_matrix(rng, 6, 4);
    CHECK(cslr_test::max_grad_rel_err(b, [&]() {
            return weighted(cslr::add_rowvec(Tensor<double>(a), b), w);
          }) < tol);
  }
  {
    Tensor<double> x(random_matrix(rng, 7, 3));
    Mat k = random_matrix(rng, 3, 5);
    Mat w = random_matrix(rng, 7, 3);
    CHECK(cslr_test::max_grad_rel_err(x, [&]() {
            return weighted(cslr::conv1d_depthwise(x, Tensor<double>(k)), w);
          }) < tol);
    Tensor<double> tk(k);
    CHECK(cslr_test::max_grad_rel_err(tk, [&]() {
            return weighted(
                cslr::conv1d_depthwise(Tensor<double>(x.value()), tk), w);
          }) < tol);
  }
  {
    Tensor<double> x(random_matrix(rng, 9, 2));
    Mat w = random_matrix(rng, 5, 6);
    CHECK(cslr_test::max_grad_rel_err(x, [&]() {
            return weighted(cslr::time_unfold(x, 3, 2), w);
          }) < tol);
  }
  {
    Tensor<double> a(random_matrix(rng, 3, 4));
    Mat b = random_matrix(rng, 5, 4);
    Mat w = random_matrix(rng, 3, 5);
    CHECK(cslr_test::max_grad_rel_err(a, [&]() {
            return weighted(cslr::matmul_nt(a, Tensor<double>(b)), w);
          }) < tol);
  }
  {
    Tensor<double> gn(random_matrix(rng, 1, 5, 0.5, 1.5));
    Mat x = random_matrix(rng, 4, 5);
    Mat bias = random_matrix(rng, 1, 5);
    Mat w = random_matrix(rng, 4, 5);
    CHECK(cslr_test::max_grad_rel_err(gn, [&]() {
            return weighted(cslr::layer_norm(Tensor<double>(x), gn,
                                             Tensor<double>(bias), 1e-5),
                            w);
          }) < tol);
  }
}

TEST_CASE("ops are pure: identical inputs give bit-identical outputs") {
  Rng rng(37);
  Mat x = random_matrix(rng, 5, 5);
  Mat k = random_matrix(rng, 5, 3);
  Mat a1 = cslr::conv1d_depthwise(Tensor<double>(x), Tensor<double>(k)).value();
  Mat a2 = cslr::conv1d_depthwise(Tensor<double>(x), Tensor<double>(k)).value();
  CHECK(a1 == a2);
  Mat s1 = cslr::softmax_rows(Tensor<double>(x)).value();
  Mat s2 = cslr::softmax_rows(Tensor<double>(x)).value();
  CHECK(s1 == s2);
}

TEST_CASE("time_unfold length law ceil(T/2) per stage") {
  for (int t = 1; t <= 40; ++t) {
    Tensor<double> x(Mat::Zero(t, 3));
    auto u = cslr::time_unfold(x, 3, 2);
    CHECK(u.rows() == (t + 1) / 2);
  }
}

TEST_CASE("no-grad guard suppresses graph recording") {
  Tensor<double> x(Mat::Ones(2, 2), true);
  {
    cslr::NoGradGuard guard;
    auto y = cslr::sum(cslr::mul(x, x));
    CHECK_FALSE(y.requires_grad());
  }
  auto y = cslr::sum(cslr::mul(x, x));
  CHECK(y.requires_grad());
}

TEST_CASE("tensor container round-trips bit-exactly in both precisions") {
  Rng rng(41);
  cslr::TensorMap<double> m64;
  m64.emplace("layer.weight", Tensor<double>(random_matrix(rng, 4, 7)));
  m64.emplace("layer.bias", Tensor<double>(random_matrix(rng, 1, 7)));
  std::stringstream buf64;
  cslr::write_tensors(buf64, m64);
  auto back64 = cslr::read_tensors<double>(buf64);
  REQUIRE(back64.size() == 2);
  CHECK(back64.at("layer.weight").value() == m64.at("layer.weight").value());
  CHECK(back64.at("layer.bias").value() == m64.at("layer.bias").value());

  cslr::TensorMap<float> m32;
  cslr::DenseMatrix<float> f =
      random_matrix(rng, 3, 3).cast<float>();
  m32.emplace("w", Tensor<float>(f));
  std::stringstream buf32;
  cslr::write_tensors(buf32, m32);
  auto back32 = cslr::read_tensors<float>(buf32);
  CHECK(back32.at("w").value() == f);

  // Serialized twice -> identical bytes (deterministic index order).
  std::stringstream again;
  cslr::write_tensors(again, m64);
  CHECK(again.str() == buf64.str());
}

TEST_CASE("tensor container rejects bad magic and truncated payload") {
  std::stringstream bad("JUNK\n");
  CHECK_THROWS_AS((void)cslr::read_tensors<double>(bad), cslr::ParseError);

  cslr::TensorMap<double> m;
  m.emplace("w", Tensor<double>(Mat::Ones(2, 2)));
  std::stringstream buf;
  cslr::write_tensors(buf, m);
  std::string s = buf.str();
  std::stringstream cut(s.substr(0, s.size() - 8));
  CHECK_THROWS_AS((void)cslr::read_tensors<double>(cut), cslr::ParseError);
}
