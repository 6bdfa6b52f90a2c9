#include "doctest.h"

#include <cmath>
#include <tuple>

#include "test_oracles.hpp"
#include "vagan/ops.hpp"
#include "vagan/rng.hpp"

using namespace vagan;

namespace {

template <typename T>
Tensor<T> random_tensor(int n, int c, int h, int w, Rng& rng, double scale = 1.0) {
  Tensor<T> t(n, c, h, w);
  for (size_t i = 0; i < t.size(); ++i) t[i] = T(rng.normal() * scale);
  return t;
}

}  // namespace

TEST_CASE("conv2d forward matches the direct-loop reference") {
  Rng rng(7);
  const std::tuple<int, int, int, int, int> cases[] = {
      {1, 4, 3, 1, 8}, {3, 2, 3, 1, 12}, {2, 5, 1, 0, 6}, {4, 3, 3, 1, 5}};
  for (auto [cin, cout, k, pad, h] : cases) {
    auto x = random_tensor<double>(2, cin, h, h, rng);
    auto w = random_tensor<double>(cout, cin, k, k, rng);
    auto b = random_tensor<double>(1, cout, 1, 1, rng);
    Tensor<double> out;
    ops::conv2d_forward(x, w, b, ops::ConvGeom{k, 1, pad}, out);
    auto ref = oracle::conv2d(x, w, b, 1, pad);
    REQUIRE(out.same_shape(ref));
    for (size_t i = 0; i < out.size(); ++i) CHECK(out[i] == doctest::Approx(ref[i]).epsilon(1e-12));
  }
}

TEST_CASE("deconv2d forward matches the direct-loop reference") {
  Rng rng(8);
  auto x = random_tensor<double>(2, 3, 5, 5, rng);
  auto w = random_tensor<double>(3, 4, 4, 4, rng);
  auto b = random_tensor<double>(1, 4, 1, 1, rng);
  Tensor<double> out;
  ops::deconv2d_forward(x, w, b, ops::ConvGeom{4, 2, 1}, out);
  auto ref = oracle::deconv2d(x, w, b, 2, 1);
  REQUIRE(out.same_shape(ref));
  CHECK(out.h() == 10);
  for (size_t i = 0; i < out.size(); ++i) CHECK(out[i] == doctest::Approx(ref[i]).epsilon(1e-12));
}

TEST_CASE("conv2d backward agrees with finite differences") {
  Rng rng(9);
  auto x = random_tensor<double>(2, 2, 6, 6, rng);
  auto w = random_tensor<double>(3, 2, 3, 3, rng);
  auto b = random_tensor<double>(1, 3, 1, 1, rng);
  const ops::ConvGeom g{3, 1, 1};
  // Scalar objective: weighted sum of outputs, weights fixed.
  auto seedv = random_tensor<double>(2, 3, 6, 6, rng);
  auto objective = [&]() {
    Tensor<double> out;
    ops::conv2d_forward(x, w, b, g, out);
    double s = 0;
    for (size_t i = 0; i < out.size(); ++i) s += out[i] * seedv[i];
    return s;
  };
  Tensor<double> gw(3, 2, 3, 3), gb(1, 3, 1, 1), gin(2, 2, 6, 6);
  ops::conv2d_backward_params(seedv, x, g, gw, gb, true);
  ops::conv2d_backward_input(seedv, w, g, gin);

  Rng pick(10);
  for (int trial = 0; trial < 12; ++trial) {
    size_t wi = size_t(pick.uniform_int(0, int64_t(w.size()) - 1));
    double fd = oracle::central_diff(&w[wi], objective, 1e-6);
    CHECK(oracle::rel_err(fd, gw[wi]) < 1e-6);
    size_t xi = size_t(pick.uniform_int(0, int64_t(x.size()) - 1));
    fd = oracle::central_diff(&x[xi], objective, 1e-6);
    CHECK(oracle::rel_err(fd, gin[xi]) < 1e-6);
    size_t bi = size_t(pick.uniform_int(0, int64_t(b.size()) - 1));
    fd = oracle::central_diff(&b[bi], objective, 1e-6);
    CHECK(oracle::rel_err(fd, gb[bi]) < 1e-6);
  }
}

TEST_CASE("deconv2d backward agrees with finite differences") {
  Rng rng(11);
  auto x = random_tensor<double>(1, 3, 4, 4, rng);
  auto w = random_tensor<double>(3, 2, 4, 4, rng);
  auto b = random_tensor<double>(1, 2, 1, 1, rng);
  const ops::ConvGeom g{4, 2, 1};
  auto seedv = random_tensor<double>(1, 2, 8, 8, rng);
  auto objective = [&]() {
    Tensor<double> out;
    ops::deconv2d_forward(x, w, b, g, out);
    double s = 0;
    for (size_t i = 0; i < out.size(); ++i) s += out[i] * seedv[i];
    return s;
  };
  Tensor<double> gw(3, 2, 4, 4), gb(1, 2, 1, 1), gin(1, 3, 4, 4);
  gw.zero();
  gb.zero();
  ops::deconv2d_backward_params(seedv, x, g, gw, gb, true);
  ops::deconv2d_backward_input(seedv, w, g, gin);
  Rng pick(12);
  for (int trial = 0; trial < 10; ++trial) {
    size_t wi = size_t(pick.uniform_int(0, int64_t(w.size()) - 1));
    CHECK(oracle::rel_err(oracle::central_diff(&w[wi], objective, 1e-5), gw[wi]) < 1e-5);
    size_t xi = size_t(pick.uniform_int(0, int64_t(x.size()) - 1));
    CHECK(oracle::rel_err(oracle::central_diff(&x[xi], objective, 1e-5), gin[xi]) < 1e-5);
  }
}

TEST_CASE("maxpool routes values and gradients to the argmax") {
  Tensor<double> x(1, 1, 4, 4);
  double vals[16] = {1, 2, 5, 3, 4, 0, 1, 2, 7, 1, 0, 0, 2, 3, 1, 9};
  for (int i = 0; i < 16; ++i) x[size_t(i)] = vals[i];
  Tensor<double> out;
  std::vector<uint8_t> argmax;
  ops::maxpool2_forward(x, out, argmax);
  CHECK(out.at(0, 0, 0, 0) == 4);
  CHECK(out.at(0, 0, 0, 1) == 5);
  CHECK(out.at(0, 0, 1, 0) == 7);
  CHECK(out.at(0, 0, 1, 1) == 9);

  Tensor<double> gout(1, 1, 2, 2);
  gout.fill(1.0);
  Tensor<double> gin(1, 1, 4, 4);
  ops::maxpool2_backward(gout, argmax, 4, 4, gin);
  double total = 0;
  for (size_t i = 0; i < gin.size(); ++i) total += gin[i];
  CHECK(total == 4.0);
  CHECK(gin.at(0, 0, 1, 0) == 1.0);  // the 4
  CHECK(gin.at(0, 0, 2, 0) == 1.0);  // the 7
  CHECK(gin.at(0, 0, 3, 3) == 1.0);  // the 9

  // Tangent gather picks the same winners.
  Tensor<double> tx(1, 1, 4, 4);
  for (int i = 0; i < 16; ++i) tx[size_t(i)] = 100 + i;
  Tensor<double> tout;
  ops::maxpool2_gather(tx, argmax, tout);
  CHECK(tout.at(0, 0, 0, 0) == 104);
  CHECK(tout.at(0, 0, 1, 1) == 115);
}

TEST_CASE("batchnorm training-mode backward agrees with finite differences") {
  Rng rng(13);
  auto x = random_tensor<double>(3, 2, 4, 4, rng);
  Tensor<double> gamma(1, 2, 1, 1), beta(1, 2, 1, 1), rm(1, 2, 1, 1), rv(1, 2, 1, 1);
  gamma[0] = 1.3;
  gamma[1] = 0.7;
  beta[0] = 0.1;
  beta[1] = -0.2;
  rv.fill(1.0);
  auto seedv = random_tensor<double>(3, 2, 4, 4, rng);
  const double eps = 1e-5;
  auto objective = [&]() {
    Tensor<double> out;
    ops::BnCache<double> cache;
    Tensor<double> rm2 = rm, rv2 = rv;
    ops::bn_forward(x, gamma, beta, rm2, rv2, eps, 0.99, true, false, out, cache);
    double s = 0;
    for (size_t i = 0; i < out.size(); ++i) s += out[i] * seedv[i];
    return s;
  };
  Tensor<double> out;
  ops::BnCache<double> cache;
  ops::bn_forward(x, gamma, beta, rm, rv, eps, 0.99, true, false, out, cache);
  Tensor<double> gin, ggamma(1, 2, 1, 1), gbeta(1, 2, 1, 1);
  ops::bn_backward(seedv, gamma, cache, rv, eps, gin, ggamma, gbeta, true);

  Rng pick(14);
  for (int trial = 0; trial < 10; ++trial) {
    size_t xi = size_t(pick.uniform_int(0, int64_t(x.size()) - 1));
    CHECK(oracle::rel_err(oracle::central_diff(&x[xi], objective, 1e-6), gin[xi]) < 1e-5);
  }
  CHECK(oracle::rel_err(oracle::central_diff(&gamma[0], objective, 1e-6), ggamma[0]) < 1e-6);
  CHECK(oracle::rel_err(oracle::central_diff(&beta[1], objective, 1e-6), gbeta[1]) < 1e-6);
}

TEST_CASE("softmax rows sum to one and cross-entropy gradient is (p - onehot)/N") {
  Rng rng(15);
  auto logits = random_tensor<double>(4, 2, 1, 1, rng, 2.0);
  Tensor<double> probs;
  ops::softmax(logits, probs);
  for (int n = 0; n < 4; ++n)
    CHECK(probs.sample(n)[0] + probs.sample(n)[1] == doctest::Approx(1.0).epsilon(1e-12));

  std::vector<int> labels = {0, 1, 1, 0};
  Tensor<double> dlogits;
  double loss = ops::cross_entropy(logits, labels, &dlogits);
  CHECK(std::isfinite(loss));
  auto objective = [&]() {
    return double(ops::cross_entropy(logits, labels, static_cast<Tensor<double>*>(nullptr)));
  };
  Rng pick(16);
  for (int trial = 0; trial < 6; ++trial) {
    size_t i = size_t(pick.uniform_int(0, int64_t(logits.size()) - 1));
    CHECK(oracle::rel_err(oracle::central_diff(&logits[i], objective, 1e-6), dlogits[i]) < 1e-6);
  }
}

TEST_CASE("gap averages and distributes gradients uniformly") {
  Rng rng(17);
  auto x = random_tensor<double>(2, 3, 4, 4, rng);
  Tensor<double> out;
  ops::gap_forward(x, out);
  double manual = 0;
  for (int i = 0; i < 16; ++i) manual += x.data()[i];
  CHECK(out.at(0, 0, 0, 0) == doctest::Approx(manual / 16.0).epsilon(1e-12));
  Tensor<double> gout(2, 3, 1, 1);
  gout.fill(1.0);
  Tensor<double> gin;
  ops::gap_backward(gout, 4, 4, gin);
  CHECK(gin[0] == doctest::Approx(1.0 / 16).epsilon(1e-12));
}
