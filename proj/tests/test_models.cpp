#include "doctest.h"

#include <cmath>

#include "test_oracles.hpp"
#include "vagan/errors.hpp"
#include "vagan/networks.hpp"

using namespace vagan;
using namespace vagan::models;

namespace {

template <typename T>
Tensor<T> random_tensor(int n, int c, int h, int w, Rng& rng, double scale = 1.0) {
  Tensor<T> t(n, c, h, w);
  for (size_t i = 0; i < t.size(); ++i) t[i] = T(rng.normal() * scale);
  return t;
}

NetworkSpec make_spec(NetKind kind, int hw, double cf) {
  NetworkSpec s;
  s.kind = kind;
  s.input_h = s.input_w = hw;
  s.channel_factor = cf;
  return s;
}

}  // namespace

TEST_CASE("generator channel counts follow the declared progression") {
  Rng rng(1);
  Generator<double> gen(make_spec(NetKind::map_generator, 16, 1.0), rng);
  auto inv = shape_inventory(gen.params());
  auto find = [&](const std::string& name) -> std::array<int, 4> {
    for (auto& p : inv)
      if (p.name == name) return p.shape;
    FAIL("missing param ", name);
    return {};
  };
  CHECK(find("generator/conv1_1/w") == std::array<int, 4>{16, 1, 3, 3});
  CHECK(find("generator/conv2_1/w") == std::array<int, 4>{32, 16, 3, 3});
  CHECK(find("generator/conv3_1/w") == std::array<int, 4>{64, 32, 3, 3});
  CHECK(find("generator/conv4_1/w") == std::array<int, 4>{128, 64, 3, 3});
  CHECK(find("generator/conv4_2/w") == std::array<int, 4>{128, 128, 3, 3});
  // decoder works on concatenated skip channels
  CHECK(find("generator/conv5_1/w") == std::array<int, 4>{64, 128, 3, 3});
  CHECK(find("generator/map/w") == std::array<int, 4>{1, 16, 3, 3});
}

TEST_CASE("critic final stage is 256 -> 1 channels then a scalar") {
  Rng rng(2);
  Critic<double> critic(make_spec(NetKind::critic, 16, 1.0), rng);
  auto inv = shape_inventory(critic.params());
  bool saw54 = false, saw51 = false;
  for (auto& p : inv) {
    if (p.name == "critic/conv5_4/w") {
      CHECK(p.shape == std::array<int, 4>{1, 256, 1, 1});
      saw54 = true;
    }
    if (p.name == "critic/conv5_1/w") {
      CHECK(p.shape == std::array<int, 4>{256, 128, 3, 3});
      saw51 = true;
    }
  }
  CHECK(saw54);
  CHECK(saw51);

  Rng xr(3);
  auto x = random_tensor<double>(3, 1, 16, 16, xr);
  Pass<double> pass;
  const auto& d = critic.forward(x, pass);
  CHECK(d.n() == 3);
  CHECK(d.c() == 1);
  CHECK(d.h() == 1);
  CHECK(d.w() == 1);
}

TEST_CASE("channel_factor scales channel counts, rounding up to at least one") {
  Rng rng(4);
  Generator<double> gen(make_spec(NetKind::map_generator, 16, 0.5), rng);
  auto inv = shape_inventory(gen.params());
  for (auto& p : inv) {
    if (p.name == "generator/conv1_1/w") CHECK(p.shape[0] == 8);
    if (p.name == "generator/conv4_1/w") CHECK(p.shape[0] == 64);
  }
  NetworkSpec tiny = make_spec(NetKind::critic, 16, 0.01);
  CHECK(tiny.scaled(16) == 1);
  CHECK(tiny.scaled(256) == 3);  // ceil(2.56)
}

TEST_CASE("indivisible input sizes are rejected with the required divisor") {
  Rng rng(5);
  CHECK_THROWS_WITH_AS(Generator<double>(make_spec(NetKind::map_generator, 12, 1.0), rng),
                       doctest::Contains("divisible by 8"), ValidationError);
  CHECK_THROWS_WITH_AS(Critic<double>(make_spec(NetKind::critic, 24, 1.0), rng),
                       doctest::Contains("divisible by 16"), ValidationError);
}

TEST_CASE("generator output shape equals input shape; zero final layer gives M = 0") {
  Rng rng(6);
  Generator<float> gen(make_spec(NetKind::map_generator, 24, 0.25), rng);
  Rng xr(7);
  auto x = random_tensor<float>(2, 1, 24, 24, xr);
  Generator<float>::Trace tr;
  const auto& m = gen.forward(x, tr, FwdOpts{.training = true});
  CHECK(m.n() == 2);
  CHECK(m.c() == 1);
  CHECK(m.h() == 24);
  CHECK(m.w() == 24);
  double meanabs = 0;
  for (size_t i = 0; i < m.size(); ++i) meanabs += std::abs(double(m[i]));
  meanabs /= double(m.size());
  CHECK(std::isfinite(meanabs));
  CHECK(meanabs > 0.0);  // freshly initialized net produces a nonzero map

  // Zeroing the final conv makes the map identically zero (y = x).
  for (auto& p : gen.params().params) {
    if (p.name == "generator/map/w" || p.name == "generator/map/b") p.value->zero();
  }
  Generator<float>::Trace tr2;
  const auto& m2 = gen.forward(x, tr2, FwdOpts{.training = true});
  for (size_t i = 0; i < m2.size(); ++i) CHECK(m2[i] == 0.0f);
}

TEST_CASE("rebuilding from the same spec yields identical shape inventories") {
  Rng rng1(8), rng2(9);
  Classifier<double> a(make_spec(NetKind::classifier_cam, 32, 0.5), rng1);
  Classifier<double> b(make_spec(NetKind::classifier_cam, 32, 0.5), rng2);
  CHECK(shape_inventory(a.params()) == shape_inventory(b.params()));
}

TEST_CASE("critic has no cross-sample coupling and permutes with the batch") {
  Rng rng(10);
  Critic<double> critic(make_spec(NetKind::critic, 16, 0.25), rng);
  Rng xr(11);
  auto x = random_tensor<double>(4, 1, 16, 16, xr);
  Pass<double> pass;
  Tensor<double> d = critic.forward(x, pass);

  // Reverse the batch; outputs must follow.
  Tensor<double> xr2(4, 1, 16, 16);
  for (int n = 0; n < 4; ++n)
    std::copy(x.sample(3 - n), x.sample(3 - n) + x.sample_size(), xr2.sample(n));
  Pass<double> pass2;
  Tensor<double> d2 = critic.forward(xr2, pass2);
  for (int n = 0; n < 4; ++n) CHECK(d2[size_t(n)] == d[size_t(3 - n)]);

  // Evaluating a single sample alone matches its in-batch value.
  Tensor<double> solo(1, 1, 16, 16);
  std::copy(x.sample(2), x.sample(2) + x.sample_size(), solo.sample(0));
  Pass<double> pass3;
  Tensor<double> d3 = critic.forward(solo, pass3);
  CHECK(d3[0] == doctest::Approx(d[2]).epsilon(1e-12));
}

TEST_CASE("critic input gradient matches central finite differences at 1e-3") {
  // The object penalized during training, checked on a tiny instance.
  Rng rng(12);
  Critic<double> critic(make_spec(NetKind::critic, 16, 0.25), rng);
  Rng xr(13);
  auto x = random_tensor<double>(2, 1, 16, 16, xr);
  Pass<double> pass;
  critic.forward(x, pass);
  Tensor<double> seed(2, 1, 1, 1);
  seed.fill(1.0);
  Tensor<double> g = critic.input_gradient(seed, pass);

  auto objective = [&]() {
    Pass<double> p;
    const Tensor<double>& d = critic.forward(x, p);
    return d[0] + d[1];
  };
  Rng pick(14);
  int checked = 0;
  for (int trial = 0; trial < 40 && checked < 20; ++trial) {
    size_t i = size_t(pick.uniform_int(0, int64_t(x.size()) - 1));
    double fd = oracle::central_diff(&x[i], objective, 1e-3);
    if (std::abs(fd) < 1e-8 && std::abs(g[i]) < 1e-8) continue;  // dead relu region
    CHECK(oracle::rel_err(fd, g[i]) < 1e-3);
    ++checked;
  }
  CHECK(checked >= 10);
}

TEST_CASE("classifier probabilities sum to one and duplicate rows agree") {
  Rng rng(15);
  Classifier<double> cls(make_spec(NetKind::classifier_dense, 16, 0.25), rng);
  Rng xr(16);
  auto x = random_tensor<double>(3, 1, 16, 16, xr);
  // duplicate sample 0 into slot 2
  std::copy(x.sample(0), x.sample(0) + x.sample_size(), x.sample(2));
  Classifier<double>::Forward fw;
  cls.forward(x, fw, FwdOpts{});  // inference mode
  for (int n = 0; n < 3; ++n)
    CHECK(fw.probs.sample(n)[0] + fw.probs.sample(n)[1] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(fw.probs.sample(2)[0] == doctest::Approx(fw.probs.sample(0)[0]).epsilon(1e-12));
  CHECK(fw.logits.sample(2)[1] == doctest::Approx(fw.logits.sample(0)[1]).epsilon(1e-12));
}

TEST_CASE("cam classifier keeps feature maps at input/4; gap at input/16") {
  Rng rng(17);
  Classifier<double> cam(make_spec(NetKind::classifier_cam, 32, 0.25), rng);
  Rng xr(18);
  auto x = random_tensor<double>(1, 1, 32, 32, xr);
  Classifier<double>::Forward fw;
  cam.forward(x, fw, FwdOpts{});
  CHECK(cam.feature_maps(fw).h() == 8);
  CHECK(cam.feature_maps(fw).w() == 8);

  Classifier<double> gap(make_spec(NetKind::classifier_gap, 32, 0.25), rng);
  Classifier<double>::Forward fw2;
  gap.forward(x, fw2, FwdOpts{});
  CHECK(gap.feature_maps(fw2).h() == 2);
  CHECK(gap.feature_maps(fw2).w() == 2);
}
