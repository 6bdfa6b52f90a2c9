#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "test_oracles.hpp"
#include "vagan/checkpoint.hpp"
#include "vagan/wgan.hpp"

using namespace vagan;
using namespace vagan::train;

namespace {

template <typename T>
Tensor<T> random_tensor(int n, int c, int h, int w, Rng& rng, double scale = 1.0) {
  Tensor<T> t(n, c, h, w);
  for (size_t i = 0; i < t.size(); ++i) t[i] = T(rng.normal() * scale);
  return t;
}

models::NetworkSpec tiny_spec(models::NetKind kind, int hw, double cf) {
  models::NetworkSpec s;
  s.kind = kind;
  s.input_h = s.input_w = hw;
  s.channel_factor = cf;
  return s;
}

// Reference critic D(x) = <v, x> used for the exact penalty identity; it
// satisfies the same interface gradient_penalty drives on the real critic.
struct LinearCritic {
  Tensor<double> v;  // (1,1,H,W)

  const Tensor<double>& forward(const Tensor<double>& x, models::Pass<double>& pass) {
    pass.input = x;
    pass.ctx.resize(1);
    pass.ctx[0].out = Tensor<double>(x.n(), 1, 1, 1);
    for (int i = 0; i < x.n(); ++i) {
      double acc = 0;
      const double* p = x.sample(i);
      for (size_t j = 0; j < x.sample_size(); ++j) acc += p[j] * v[j];
      pass.ctx[0].out[size_t(i)] = acc;
    }
    return pass.ctx[0].out;
  }
  Tensor<double> input_gradient(const Tensor<double>& seed, models::Pass<double>& pass) {
    Tensor<double> g(pass.input.n(), 1, pass.input.h(), pass.input.w());
    for (int i = 0; i < g.n(); ++i) {
      double* p = g.sample(i);
      for (size_t j = 0; j < g.sample_size(); ++j) p[j] = seed[size_t(i)] * v[j];
    }
    return g;
  }
  const Tensor<double>& jvp(const Tensor<double>& u, models::Pass<double>& pass) {
    pass.tangent_seed = u;
    pass.ctx[0].tangent = Tensor<double>(u.n(), 1, 1, 1);
    for (int i = 0; i < u.n(); ++i) {
      double acc = 0;
      const double* p = u.sample(i);
      for (size_t j = 0; j < u.sample_size(); ++j) acc += p[j] * v[j];
      pass.ctx[0].tangent[size_t(i)] = acc;
    }
    return pass.ctx[0].tangent;
  }
  void backward_tangent(const Tensor<double>&, models::Pass<double>&) {}
};

synthgen::Dataset tiny_dataset(int n = 16, uint64_t seed = 5) {
  synthgen::DatasetSpec spec;
  spec.num_images = n;
  spec.image_size = 16;
  spec.square_size = 4;
  spec.max_offset = 2;
  spec.blur_sigma = 1.0;
  spec.split_fractions = {0.5, 0.25, 0.25};
  spec.seed = seed;
  return synthgen::generate_dataset(spec);
}

TrainConfig tiny_train_config(int iters) {
  TrainConfig cfg;
  cfg.total_generator_iters = iters;
  cfg.n_critic = 1;
  cfg.critic_boost = 3;
  cfg.boost_initial_iters = 2;
  cfg.boost_every = 4;
  cfg.grad_agg_batches = 2;
  cfg.batch_size_per_side = 2;
  cfg.lambda_reg = 1e-3;
  cfg.checkpoint_every = 1000;
  cfg.seed = 11;
  return cfg;
}

}  // namespace

TEST_CASE("unit-norm linear critic gives exactly zero penalty") {
  // One-hot v: the gradient norm is exactly 1 in floating point.
  LinearCritic lc;
  lc.v = Tensor<double>(1, 1, 8, 8);
  lc.v[17] = 1.0;
  Rng rng(3);
  auto xhat = random_tensor<double>(4, 1, 8, 8, rng);
  double penalty = gradient_penalty(lc, xhat, 10.0, false);
  CHECK(penalty == 0.0);

  // A normalized dense direction lands on zero to roundoff.
  for (size_t i = 0; i < lc.v.size(); ++i) lc.v[i] = (i % 3 == 0) ? 0.5 : 0.0;
  double norm = 0;
  for (size_t i = 0; i < lc.v.size(); ++i) norm += lc.v[i] * lc.v[i];
  norm = std::sqrt(norm);
  for (size_t i = 0; i < lc.v.size(); ++i) lc.v[i] /= norm;
  penalty = gradient_penalty(lc, xhat, 10.0, false);
  CHECK(penalty < 1e-28);
}

TEST_CASE("constant critic: zero raw term and penalty exactly one") {
  Rng rng(4);
  models::Critic<double> critic(tiny_spec(models::NetKind::critic, 16, 0.25), rng);
  for (auto& p : critic.params().params) p.value->zero();

  Rng xr(5);
  auto x0 = random_tensor<double>(3, 1, 16, 16, xr);
  auto y = random_tensor<double>(3, 1, 16, 16, xr);
  std::vector<double> eps = {0.3, 0.6, 0.9};
  auto terms = critic_objective(critic, x0, y, eps, 10.0, false);
  CHECK(terms.wasserstein == 0.0);
  CHECK(terms.penalty == 1.0);
  CHECK(terms.total == 10.0);
}

TEST_CASE("critic objective parameter gradients match finite differences (double backprop)") {
  Rng rng(6);
  models::Critic<double> critic(tiny_spec(models::NetKind::critic, 16, 0.25), rng);
  Rng xr(7);
  auto x0 = random_tensor<double>(2, 1, 16, 16, xr);
  auto y = random_tensor<double>(2, 1, 16, 16, xr);
  const std::vector<double> eps = {0.25, 0.75};
  const double gp = 10.0;

  critic.params().zero_grads();
  critic_objective(critic, x0, y, eps, gp, true);

  auto loss = [&]() { return double(critic_objective(critic, x0, y, eps, gp, false).total); };

  int outliers = 0, checked = 0;
  uint64_t salt = 1;
  for (auto& p : critic.params().params) {
    Rng pick(100 + salt++);
    const int trials = p.value->size() > 4 ? 3 : 1;
    for (int t = 0; t < trials; ++t) {
      size_t i = size_t(pick.uniform_int(0, int64_t(p.value->size()) - 1));
      double fd = oracle::central_diff(&(*p.value)[i], loss, 1e-6);
      double an = (*p.grad)[i];
      if (std::abs(fd) < 1e-10 && std::abs(an) < 1e-10) continue;
      ++checked;
      if (oracle::rel_err(fd, an) > 1e-4) ++outliers;  // relu/pool kinks can flip under FD
    }
  }
  CHECK(checked > 25);
  CHECK(outliers <= 2);
}

TEST_CASE("penalty-only parameter gradients match finite differences") {
  Rng rng(16);
  models::Critic<double> critic(tiny_spec(models::NetKind::critic, 16, 0.25), rng);
  Rng xr(17);
  auto xhat = random_tensor<double>(2, 1, 16, 16, xr);
  const double gp = 10.0;
  critic.params().zero_grads();
  gradient_penalty(critic, xhat, gp, true);
  auto loss = [&]() { return gp * gradient_penalty(critic, xhat, gp, false); };

  int outliers = 0, checked = 0;
  uint64_t salt = 1;
  for (auto& p : critic.params().params) {
    Rng pick(200 + salt++);
    const int trials = p.value->size() > 4 ? 3 : 1;
    for (int t = 0; t < trials; ++t) {
      size_t i = size_t(pick.uniform_int(0, int64_t(p.value->size()) - 1));
      double fd = oracle::central_diff(&(*p.value)[i], loss, 1e-6);
      double an = (*p.grad)[i];
      if (std::abs(fd) < 1e-10 && std::abs(an) < 1e-10) continue;
      ++checked;
      if (oracle::rel_err(fd, an) > 1e-4) ++outliers;
    }
  }
  CHECK(checked > 20);
  CHECK(outliers <= 2);
}

TEST_CASE("generator objective: identities and adversarial-path gradients") {
  Rng rng(8);
  models::Generator<double> gen(tiny_spec(models::NetKind::map_generator, 16, 0.25), rng);
  models::Critic<double> critic(tiny_spec(models::NetKind::critic, 16, 0.25), rng);
  Rng xr(9);
  auto x1 = random_tensor<double>(2, 1, 16, 16, xr);
  const auto opts = models::FwdOpts{.training = true, .update_running = false};

  SUBCASE("zero map reduces the loss to -mean D(x1)") {
    for (auto& p : gen.params().params)
      if (p.name == "generator/map/w" || p.name == "generator/map/b") p.value->zero();
    auto terms = generator_objective(critic, gen, x1, 5.0, false, opts);
    CHECK(terms.map_l1 == 0.0);
    models::Pass<double> pass;
    const auto& d = critic.forward(x1, pass);
    CHECK(terms.total == doctest::Approx(-(d[0] + d[1]) / 2.0).epsilon(1e-12));
  }

  SUBCASE("lambda scales the regularization component linearly and exactly") {
    auto t0 = generator_objective(critic, gen, x1, 0.0, false, opts);
    auto t1 = generator_objective(critic, gen, x1, 2.5, false, opts);
    auto t2 = generator_objective(critic, gen, x1, 5.0, false, opts);
    CHECK(t1.adversarial == t0.adversarial);  // adversarial term untouched
    CHECK(t2.map_l1 == t1.map_l1);
    CHECK(t2.total - t2.adversarial ==
          doctest::Approx(2.0 * (t1.total - t1.adversarial)).epsilon(1e-12));
  }

  SUBCASE("adversarial-path parameter gradients match finite differences") {
    gen.params().zero_grads();
    generator_objective(critic, gen, x1, 0.0, true, opts);
    auto loss = [&]() {
      return double(generator_objective(critic, gen, x1, 0.0, false, opts).total);
    };
    int outliers = 0, checked = 0;
    uint64_t salt = 1;
    for (auto& p : gen.params().params) {
      Rng pick(300 + salt++);
      size_t i = size_t(pick.uniform_int(0, int64_t(p.value->size()) - 1));
      double fd = oracle::central_diff(&(*p.value)[i], loss, 1e-6);
      double an = (*p.grad)[i];
      if (std::abs(fd) < 1e-10 && std::abs(an) < 1e-10) continue;
      ++checked;
      if (oracle::rel_err(fd, an) > 1e-4) ++outliers;
    }
    CHECK(checked > 20);
    CHECK(outliers <= 2);
  }
}

TEST_CASE("gradient aggregation equals the union-batch gradient on the critic") {
  // No batch normalization in the critic, so per-sample means aggregate
  // exactly: mean of 6 per-batch gradients == gradient on the 6x union.
  Rng rng(10);
  models::Critic<double> critic(tiny_spec(models::NetKind::critic, 16, 0.25), rng);
  Rng xr(11);
  const int agg = 6, B = 2;
  std::vector<Tensor<double>> x0s, ys;
  std::vector<std::vector<double>> epss;
  Rng er(12);
  for (int a = 0; a < agg; ++a) {
    x0s.push_back(random_tensor<double>(B, 1, 16, 16, xr));
    ys.push_back(random_tensor<double>(B, 1, 16, 16, xr));
    epss.push_back({er.uniform(), er.uniform()});
  }

  critic.params().zero_grads();
  for (int a = 0; a < agg; ++a)
    critic_objective(critic, x0s[size_t(a)], ys[size_t(a)], epss[size_t(a)], 10.0, true);
  std::vector<std::vector<double>> agg_grads;
  for (auto& p : critic.params().params) {
    auto g = p.grad->vec();
    for (auto& v : g) v /= double(agg);
    agg_grads.push_back(std::move(g));
  }

  Tensor<double> x0u(agg * B, 1, 16, 16), yu(agg * B, 1, 16, 16);
  std::vector<double> epsu;
  for (int a = 0; a < agg; ++a) {
    std::copy(x0s[size_t(a)].data(), x0s[size_t(a)].data() + x0s[size_t(a)].size(),
              x0u.sample(a * B));
    std::copy(ys[size_t(a)].data(), ys[size_t(a)].data() + ys[size_t(a)].size(), yu.sample(a * B));
    for (double e : epss[size_t(a)]) epsu.push_back(e);
  }
  critic.params().zero_grads();
  critic_objective(critic, x0u, yu, epsu, 10.0, true);

  double num = 0, den = 0;
  size_t k = 0;
  for (auto& p : critic.params().params) {
    for (size_t i = 0; i < p.grad->size(); ++i) {
      const double d = (*p.grad)[i] - agg_grads[k][i];
      num += d * d;
      den += (*p.grad)[i] * (*p.grad)[i];
    }
    ++k;
  }
  CHECK(std::sqrt(num) <= 1e-6 * std::sqrt(den));
}

TEST_CASE("trainer follows the boosted critic schedule and logs it") {
  auto data = tiny_dataset();
  TrainConfig cfg = tiny_train_config(6);
  models::NetworkSpec gs = tiny_spec(models::NetKind::map_generator, 16, 0.125);
  models::NetworkSpec cs = tiny_spec(models::NetKind::critic, 16, 0.125);
  VaganTrainer trainer(cfg, gs, cs);
  const std::string dir = "wgan_test_run";
  std::filesystem::remove_all(dir);
  TrainResult res = trainer.run(data, dir);
  REQUIRE(res.completed);
  REQUIRE(res.log.size() == 6);
  // boost_initial_iters=2, boost_every=4, boost=3, n_critic=1:
  // iters 0,1 boosted; 4 boosted (4 % 4 == 0); 2,3,5 regular.
  const int expected[] = {3, 3, 1, 1, 3, 1};
  int total = 0;
  for (int i = 0; i < 6; ++i) {
    CHECK(res.log[size_t(i)].critic_updates == expected[i]);
    total += res.log[size_t(i)].critic_updates;
  }
  CHECK(total == 12);

  // The JSONL log carries the same schedule.
  std::ifstream f(dir + "/train_log.jsonl");
  REQUIRE(bool(f));
  int from_log = 0, lines = 0;
  std::string line;
  while (std::getline(f, line)) {
    auto pos = line.find("\"critic_updates\":");
    REQUIRE(pos != std::string::npos);
    from_log += std::stoi(line.substr(pos + 17));
    ++lines;
  }
  CHECK(lines == 6);
  CHECK(from_log == 12);
  CHECK(std::filesystem::exists(dir + "/final.ckpt"));
  CHECK(std::filesystem::exists(dir + "/best.ckpt"));
}

TEST_CASE("resume from checkpoint reproduces the trajectory bit-exactly") {
  auto data = tiny_dataset();
  models::NetworkSpec gs = tiny_spec(models::NetKind::map_generator, 16, 0.125);
  models::NetworkSpec cs = tiny_spec(models::NetKind::critic, 16, 0.125);

  const std::string dir_a = "wgan_resume_a", dir_b = "wgan_resume_b";
  std::filesystem::remove_all(dir_a);
  std::filesystem::remove_all(dir_b);

  // Uninterrupted: 6 iterations.
  TrainConfig cfg = tiny_train_config(6);
  VaganTrainer full(cfg, gs, cs);
  TrainResult res_full = full.run(data, dir_a);
  REQUIRE(res_full.completed);

  // Interrupted: 3 iterations, then resume to 6.
  TrainConfig cfg_half = cfg;
  cfg_half.total_generator_iters = 3;
  VaganTrainer half(cfg_half, gs, cs);
  TrainResult res_half = half.run(data, dir_b);
  REQUIRE(res_half.completed);

  VaganTrainer resumed(dir_b + "/final.ckpt");
  REQUIRE(resumed.iteration() == 3);
  const_cast<TrainConfig&>(resumed.config()).total_generator_iters = 6;
  TrainResult res_resumed = resumed.run(data, dir_b);
  REQUIRE(res_resumed.completed);

  REQUIRE(res_resumed.log.size() == 3);
  for (int i = 0; i < 3; ++i) {
    const auto& a = res_full.log[size_t(3 + i)];
    const auto& b = res_resumed.log[size_t(i)];
    CHECK(a.critic_loss == b.critic_loss);  // float-exact equality
    CHECK(a.gen_loss == b.gen_loss);
    CHECK(a.val_estimate == b.val_estimate);
  }

  // Final parameters agree bit-for-bit.
  models::CheckpointReader ra(dir_a + "/final.ckpt");
  models::CheckpointReader rb(dir_b + "/final.ckpt");
  for (const auto& name : ra.names()) {
    auto ta = ra.get<float>(name);
    auto tb = rb.get<float>(name);
    REQUIRE(ta.size() == tb.size());
    size_t diff = 0;
    for (size_t i = 0; i < ta.size(); ++i)
      if (ta[i] != tb[i]) ++diff;
    CHECK(diff == 0);
  }
}

TEST_CASE("schedule helper matches the boost rule") {
  TrainConfig cfg;
  CHECK(cfg.critic_updates_for_iter(0) == 100);
  CHECK(cfg.critic_updates_for_iter(24) == 100);
  CHECK(cfg.critic_updates_for_iter(25) == 5);
  CHECK(cfg.critic_updates_for_iter(57) == 5);
  CHECK(cfg.critic_updates_for_iter(100) == 100);
  CHECK(cfg.critic_updates_for_iter(2900) == 100);
  CHECK(cfg.critic_updates_for_iter(2901) == 5);
}

TEST_CASE("vagan attribution is a single inference forward pass") {
  Rng rng(20);
  models::Generator<float> gen(tiny_spec(models::NetKind::map_generator, 16, 0.125), rng);
  Rng xr(21);
  auto x = random_tensor<float>(2, 1, 16, 16, xr);
  Tensor<float> m1 = attribute_vagan(gen, x);
  Tensor<float> m2 = attribute_vagan(gen, x);
  CHECK(m1.same_shape(x));
  for (size_t i = 0; i < m1.size(); ++i) CHECK(m1[i] == m2[i]);  // deterministic
}
