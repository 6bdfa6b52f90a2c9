#include "vagan/wgan.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "vagan/checkpoint.hpp"
#include "vagan/errors.hpp"

namespace vagan::train {

namespace fs = std::filesystem;
using nlohmann::json;

void TrainConfig::validate() const {
  if (learning_rate <= 0) throw ValidationError("TrainConfig.learning_rate must be positive");
  if (adam_beta1 < 0 || adam_beta1 >= 1 || adam_beta2 <= 0 || adam_beta2 >= 1)
    throw ValidationError("TrainConfig.adam betas must lie in [0,1)");
  if (lambda_reg < 0) throw ValidationError("TrainConfig.lambda_reg must be nonnegative");
  if (gp_weight < 0) throw ValidationError("TrainConfig.gp_weight must be nonnegative");
  if (n_critic < 1) throw ValidationError("TrainConfig.n_critic must be >= 1");
  if (critic_boost < 1) throw ValidationError("TrainConfig.critic_boost must be >= 1");
  if (boost_initial_iters < 0) throw ValidationError("TrainConfig.boost_initial_iters must be >= 0");
  if (boost_every < 0) throw ValidationError("TrainConfig.boost_every must be >= 0");
  if (grad_agg_batches < 1) throw ValidationError("TrainConfig.grad_agg_batches must be >= 1");
  if (batch_size_per_side < 1) throw ValidationError("TrainConfig.batch_size_per_side must be >= 1");
  if (total_generator_iters < 1)
    throw ValidationError("TrainConfig.total_generator_iters must be >= 1");
  if (checkpoint_every < 1) throw ValidationError("TrainConfig.checkpoint_every must be >= 1");
  if (val_ema < 0 || val_ema >= 1) throw ValidationError("TrainConfig.val_ema must be in [0,1)");
}

template <typename T>
CriticLossTerms<T> critic_objective(models::Critic<T>& critic, const Tensor<T>& x0,
                                    const Tensor<T>& y, const std::vector<T>& eps, T gp_weight,
                                    bool with_param_grads) {
  if (x0.n() == 0 || x0.n() != y.n())
    throw ValidationError("critic_objective requires equal nonempty batches");
  if (int(eps.size()) != x0.n())
    throw ValidationError("critic_objective: one interpolation coefficient per pair required");
  const int B = x0.n();

  // Real and generated samples share one forward pass.
  Tensor<T> both(2 * B, 1, x0.h(), x0.w());
  std::copy(x0.data(), x0.data() + x0.size(), both.data());
  std::copy(y.data(), y.data() + y.size(), both.data() + x0.size());
  models::Pass<T> pass;
  const Tensor<T>& d = critic.forward(both, pass);

  T mean_real = 0, mean_fake = 0;
  for (int i = 0; i < B; ++i) mean_real += d[size_t(i)];
  for (int i = 0; i < B; ++i) mean_fake += d[size_t(B + i)];
  mean_real /= T(B);
  mean_fake /= T(B);
  const T wasserstein = mean_real - mean_fake;

  if (with_param_grads) {
    Tensor<T> seed(2 * B, 1, 1, 1);
    for (int i = 0; i < B; ++i) seed[size_t(i)] = -T(1) / T(B);
    for (int i = 0; i < B; ++i) seed[size_t(B + i)] = T(1) / T(B);
    critic.backward_params(seed, pass);
  }

  Tensor<T> xhat(B, 1, x0.h(), x0.w());
  for (int i = 0; i < B; ++i) {
    const T e = eps[size_t(i)];
    const T* a = x0.sample(i);
    const T* b = y.sample(i);
    T* o = xhat.sample(i);
    for (size_t j = 0; j < xhat.sample_size(); ++j) o[j] = e * a[j] + (T(1) - e) * b[j];
  }
  const T penalty = gradient_penalty(critic, xhat, gp_weight, with_param_grads);

  CriticLossTerms<T> terms;
  terms.wasserstein = wasserstein;
  terms.penalty = penalty;
  terms.total = -wasserstein + gp_weight * penalty;
  return terms;
}

template <typename T>
CriticLossTerms<T> critic_objective(models::Critic<T>& critic, models::Generator<T>& generator,
                                    const Tensor<T>& x0, const Tensor<T>& x1, Rng& rng, T gp_weight,
                                    bool with_param_grads, const models::FwdOpts& gen_opts) {
  typename models::Generator<T>::Trace tr;
  const Tensor<T>& m = generator.forward(x1, tr, gen_opts);
  Tensor<T> y = add(x1, m);
  std::vector<T> eps(size_t(x1.n()));
  for (auto& e : eps) e = T(rng.uniform());
  return critic_objective(critic, x0, y, eps, gp_weight, with_param_grads);
}

template <typename T>
GeneratorLossTerms<T> generator_objective(models::Critic<T>& critic,
                                          models::Generator<T>& generator, const Tensor<T>& x1,
                                          T lambda, bool with_param_grads,
                                          const models::FwdOpts& gen_opts) {
  if (x1.n() == 0) throw ValidationError("generator_objective requires a nonempty batch");
  const int B = x1.n();
  typename models::Generator<T>::Trace tr;
  const Tensor<T>& m = generator.forward(x1, tr, gen_opts);
  Tensor<T> y = add(x1, m);

  models::Pass<T> pass;
  const Tensor<T>& d = critic.forward(y, pass);
  T mean_d = 0;
  for (int i = 0; i < B; ++i) mean_d += d[size_t(i)];
  mean_d /= T(B);

  std::vector<T> l1 = abs_sum_per_sample(m);
  T mean_l1 = 0;
  for (T v : l1) mean_l1 += v;
  mean_l1 /= T(B);

  GeneratorLossTerms<T> terms;
  terms.adversarial = -mean_d;
  terms.map_l1 = mean_l1;
  terms.total = terms.adversarial + lambda * mean_l1;

  if (with_param_grads) {
    Tensor<T> seed(B, 1, 1, 1);
    seed.fill(-T(1) / T(B));
    Tensor<T> dy = critic.input_gradient(seed, pass);  // critic params untouched
    // dL/dm = dL/dy + (lambda/B) * sign(m)
    for (int i = 0; i < B; ++i) {
      const T* mp = m.sample(i);
      T* gp = dy.sample(i);
      for (size_t j = 0; j < m.sample_size(); ++j) {
        if (mp[j] > T(0))
          gp[j] += lambda / T(B);
        else if (mp[j] < T(0))
          gp[j] -= lambda / T(B);
      }
    }
    generator.backward(dy, tr, models::BwdOpts{.param_grads = true});
  }
  return terms;
}

// ---- trainer ----

namespace {

json config_to_json(const TrainConfig& c) {
  return json{{"learning_rate", c.learning_rate},
              {"adam_beta1", c.adam_beta1},
              {"adam_beta2", c.adam_beta2},
              {"lambda_reg", c.lambda_reg},
              {"gp_weight", c.gp_weight},
              {"n_critic", c.n_critic},
              {"critic_boost", c.critic_boost},
              {"boost_initial_iters", c.boost_initial_iters},
              {"boost_every", c.boost_every},
              {"grad_agg_batches", c.grad_agg_batches},
              {"batch_size_per_side", c.batch_size_per_side},
              {"total_generator_iters", c.total_generator_iters},
              {"seed", c.seed},
              {"val_subset_per_side", c.val_subset_per_side},
              {"checkpoint_every", c.checkpoint_every},
              {"val_ema", c.val_ema}};
}

TrainConfig config_from_json(const json& j) {
  TrainConfig c;
  c.learning_rate = j.at("learning_rate").get<double>();
  c.adam_beta1 = j.at("adam_beta1").get<double>();
  c.adam_beta2 = j.at("adam_beta2").get<double>();
  c.lambda_reg = j.at("lambda_reg").get<double>();
  c.gp_weight = j.at("gp_weight").get<double>();
  c.n_critic = j.at("n_critic").get<int>();
  c.critic_boost = j.at("critic_boost").get<int>();
  c.boost_initial_iters = j.at("boost_initial_iters").get<int>();
  c.boost_every = j.at("boost_every").get<int>();
  c.grad_agg_batches = j.at("grad_agg_batches").get<int>();
  c.batch_size_per_side = j.at("batch_size_per_side").get<int>();
  c.total_generator_iters = j.at("total_generator_iters").get<int>();
  c.seed = j.at("seed").get<uint64_t>();
  c.val_subset_per_side = j.at("val_subset_per_side").get<int>();
  c.checkpoint_every = j.at("checkpoint_every").get<int>();
  c.val_ema = j.at("val_ema").get<double>();
  return c;
}

json netspec_to_json(const models::NetworkSpec& s) {
  return json{{"kind", models::net_kind_name(s.kind)},
              {"input_h", s.input_h},
              {"input_w", s.input_w},
              {"channel_factor", s.channel_factor},
              {"num_classes", s.num_classes},
              {"in_channels", s.in_channels}};
}

models::NetworkSpec netspec_from_json(const json& j) {
  models::NetworkSpec s;
  s.kind = models::net_kind_from_name(j.at("kind").get<std::string>());
  s.input_h = j.at("input_h").get<int>();
  s.input_w = j.at("input_w").get<int>();
  s.channel_factor = j.at("channel_factor").get<double>();
  s.num_classes = j.at("num_classes").get<int>();
  s.in_channels = j.at("in_channels").get<int>();
  return s;
}

void scale_grads(models::ParamTable<float>& table, float s) {
  for (auto& p : table.params) scale(*p.grad, s);
}

bool grads_finite(const models::ParamTable<float>& table) {
  for (const auto& p : table.params)
    if (!all_finite(*p.grad)) return false;
  return true;
}

void add_adam_state(models::CheckpointWriter& w, const std::string& prefix,
                    const models::Adam<float>& opt) {
  for (size_t i = 0; i < opt.m.size(); ++i) {
    w.add_flat(prefix + "/m" + std::to_string(i), opt.m[i]);
    w.add_flat(prefix + "/v" + std::to_string(i), opt.v[i]);
  }
}

void load_adam_state(const models::CheckpointReader& r, const std::string& prefix,
                     models::Adam<float>& opt) {
  for (size_t i = 0; i < opt.m.size(); ++i) {
    opt.m[i] = r.get_flat<float>(prefix + "/m" + std::to_string(i));
    opt.v[i] = r.get_flat<float>(prefix + "/v" + std::to_string(i));
  }
}

}  // namespace

VaganTrainer::VaganTrainer(const TrainConfig& cfg, const models::NetworkSpec& gen_spec,
                           const models::NetworkSpec& critic_spec)
    : cfg_(cfg), gen_spec_(gen_spec), critic_spec_(critic_spec), train_rng_(0) {
  cfg_.validate();
  Rng init_gen = Rng::stream(cfg_.seed, 0x67656e);   // generator init stream
  Rng init_cri = Rng::stream(cfg_.seed, 0x637269);   // critic init stream
  gen_ = std::make_unique<models::Generator<float>>(gen_spec_, init_gen);
  critic_ = std::make_unique<models::Critic<float>>(critic_spec_, init_cri);
  opt_gen_ = models::Adam<float>(gen_->params(), float(cfg_.learning_rate), float(cfg_.adam_beta1),
                                 float(cfg_.adam_beta2));
  opt_critic_ = models::Adam<float>(critic_->params(), float(cfg_.learning_rate),
                                    float(cfg_.adam_beta1), float(cfg_.adam_beta2));
  train_rng_ = Rng::stream(cfg_.seed, 0x747261696e);  // training stream
}

VaganTrainer::VaganTrainer(const std::string& checkpoint_path) : train_rng_(0) {
  models::CheckpointReader r(checkpoint_path);
  const json& meta = r.meta();
  if (meta.value("kind", "") != "vagan_train")
    throw ValidationError("not a training checkpoint: " + checkpoint_path);
  cfg_ = config_from_json(meta.at("config"));
  gen_spec_ = netspec_from_json(meta.at("generator_spec"));
  critic_spec_ = netspec_from_json(meta.at("critic_spec"));
  Rng dummy1(0), dummy2(0);
  gen_ = std::make_unique<models::Generator<float>>(gen_spec_, dummy1);
  critic_ = std::make_unique<models::Critic<float>>(critic_spec_, dummy2);
  r.load_table(gen_->params());
  r.load_table(critic_->params());
  opt_gen_ = models::Adam<float>(gen_->params(), float(cfg_.learning_rate), float(cfg_.adam_beta1),
                                 float(cfg_.adam_beta2));
  opt_critic_ = models::Adam<float>(critic_->params(), float(cfg_.learning_rate),
                                    float(cfg_.adam_beta1), float(cfg_.adam_beta2));
  load_adam_state(r, "opt_gen", opt_gen_);
  load_adam_state(r, "opt_critic", opt_critic_);
  opt_gen_.t = meta.at("opt_gen_t").get<int64_t>();
  opt_critic_.t = meta.at("opt_critic_t").get<int64_t>();
  iter_ = meta.at("iteration").get<int>();
  val_ema_ = meta.at("val_ema").get<double>();
  ema_init_ = meta.at("val_ema_initialized").get<bool>();
  best_val_ema_ = meta.at("best_val_ema").get<double>();
  best_iter_ = meta.at("best_iter").get<int>();
  val_history_ = meta.at("val_history").get<std::vector<double>>();
  train_rng_.load_state(meta.at("rng_state").get<std::string>());
}

void VaganTrainer::save_checkpoint(const std::string& path) const {
  models::CheckpointWriter w;
  w.meta["kind"] = "vagan_train";
  w.meta["config"] = config_to_json(cfg_);
  w.meta["generator_spec"] = netspec_to_json(gen_spec_);
  w.meta["critic_spec"] = netspec_to_json(critic_spec_);
  w.meta["iteration"] = iter_;
  w.meta["val_ema"] = val_ema_;
  w.meta["val_ema_initialized"] = ema_init_;
  w.meta["best_val_ema"] = best_val_ema_;
  w.meta["best_iter"] = best_iter_;
  w.meta["val_history"] = val_history_;
  w.meta["rng_state"] = train_rng_.save_state();
  w.meta["opt_gen_t"] = opt_gen_.t;
  w.meta["opt_critic_t"] = opt_critic_.t;
  w.meta["init_scheme"] = "he_normal";
  w.add_table(gen_->params());
  w.add_table(critic_->params());
  add_adam_state(w, "opt_gen", opt_gen_);
  add_adam_state(w, "opt_critic", opt_critic_);
  w.write(path);
}

Tensor<float> VaganTrainer::sample_batch(const synthgen::Dataset& data,
                                         const std::vector<int>& ids, int count) {
  const int hw = data.image_size();
  Tensor<float> out(count, 1, hw, hw);
  for (int i = 0; i < count; ++i) {
    const int id = ids[size_t(train_rng_.uniform_int(0, int64_t(ids.size()) - 1))];
    std::copy(data.images.sample(id), data.images.sample(id) + data.images.sample_size(),
              out.sample(i));
  }
  return out;
}

double VaganTrainer::validation_estimate(const synthgen::Dataset& data) {
  // Evaluated in inference mode; deterministic, consumes no training RNG.
  std::vector<int> v0 = data.manifest.class_ids(synthgen::Split::validation, 0);
  std::vector<int> v1 = data.manifest.class_ids(synthgen::Split::validation, 1);
  if (cfg_.val_subset_per_side > 0) {
    v0.resize(std::min(v0.size(), size_t(cfg_.val_subset_per_side)));
    v1.resize(std::min(v1.size(), size_t(cfg_.val_subset_per_side)));
  }
  const int hw = data.image_size();
  const int chunk = 32;
  auto mean_d = [&](const std::vector<int>& ids, bool through_generator) {
    double acc = 0;
    for (size_t pos = 0; pos < ids.size(); pos += chunk) {
      const int b = int(std::min(size_t(chunk), ids.size() - pos));
      Tensor<float> x(b, 1, hw, hw);
      for (int i = 0; i < b; ++i) {
        const int id = ids[pos + size_t(i)];
        std::copy(data.images.sample(id), data.images.sample(id) + data.images.sample_size(),
                  x.sample(i));
      }
      Tensor<float> in = x;
      if (through_generator) {
        typename models::Generator<float>::Trace tr;
        const Tensor<float>& m = gen_->forward(x, tr, models::FwdOpts{.training = false});
        in = add(x, m);
      }
      models::Pass<float> pass;
      const Tensor<float>& d = critic_->forward(in, pass);
      for (int i = 0; i < b; ++i) acc += double(d[size_t(i)]);
    }
    return ids.empty() ? 0.0 : acc / double(ids.size());
  };
  return mean_d(v0, false) - mean_d(v1, true);
}

TrainResult VaganTrainer::run(const synthgen::Dataset& data, const std::string& out_dir) {
  fs::create_directories(out_dir);
  TrainResult result;

  std::vector<int> train0 = data.manifest.class_ids(synthgen::Split::train, 0);
  std::vector<int> train1 = data.manifest.class_ids(synthgen::Split::train, 1);
  if (train0.empty() || train1.empty())
    throw ValidationError("training split must contain both classes");

  std::ofstream log(out_dir + "/train_log.jsonl", iter_ == 0 ? std::ios::trunc : std::ios::app);
  if (!log) throw std::runtime_error("cannot open training log in " + out_dir);

  const int B = cfg_.batch_size_per_side;
  const auto gen_mode_critic =
      models::FwdOpts{.training = true, .update_running = false};  // fakes for the critic
  const auto gen_mode_update = models::FwdOpts{.training = true, .update_running = true};

  std::string last_snapshot;
  auto params_finite = [&]() {
    for (const auto& p : gen_->params().params)
      if (!all_finite(*p.value)) return false;
    for (const auto& p : critic_->params().params)
      if (!all_finite(*p.value)) return false;
    return true;
  };
  auto divergence_stop = [&](const char* what) {
    result.diverged = true;
    result.stopped_at_iter = iter_;
    if (params_finite()) {
      const std::string path = out_dir + "/diverged_last_good.ckpt";
      save_checkpoint(path);
      result.final_checkpoint = path;
    } else {
      // Parameters already carry the blow-up; the newest on-disk snapshot
      // is the last good state.
      result.final_checkpoint = last_snapshot;
    }
    log << json{{"event", "divergence"},
                {"iteration", iter_},
                {"stage", what},
                {"last_good_checkpoint", result.final_checkpoint}}
               .dump()
        << "\n";
  };

  while (iter_ < cfg_.total_generator_iters) {
    const int n_updates = cfg_.critic_updates_for_iter(iter_);
    CriticLossTerms<float> last_critic{};

    for (int u = 0; u < n_updates; ++u) {
      critic_->params().zero_grads();
      CriticLossTerms<float> acc{};
      for (int a = 0; a < cfg_.grad_agg_batches; ++a) {
        Tensor<float> x0 = sample_batch(data, train0, B);
        Tensor<float> x1 = sample_batch(data, train1, B);
        CriticLossTerms<float> t = critic_objective(*critic_, *gen_, x0, x1, train_rng_,
                                                    float(cfg_.gp_weight), true, gen_mode_critic);
        acc.total += t.total;
        acc.wasserstein += t.wasserstein;
        acc.penalty += t.penalty;
      }
      const float inv = 1.0f / float(cfg_.grad_agg_batches);
      acc.total *= inv;
      acc.wasserstein *= inv;
      acc.penalty *= inv;
      if (!std::isfinite(acc.total) || !grads_finite(critic_->params())) {
        divergence_stop("critic");
        result.log.push_back({iter_, u, acc.total, acc.wasserstein, acc.penalty, 0, 0, 0, 0, 0});
        return result;
      }
      scale_grads(critic_->params(), inv);
      opt_critic_.step(critic_->params());
      last_critic = acc;
    }

    GeneratorLossTerms<float> gen_terms{};
    gen_->params().zero_grads();
    for (int a = 0; a < cfg_.grad_agg_batches; ++a) {
      Tensor<float> x1 = sample_batch(data, train1, B);
      // Running statistics move only on the first aggregation batch so the
      // batch-stat path stays identical across aggregation positions.
      GeneratorLossTerms<float> t =
          generator_objective(*critic_, *gen_, x1, float(cfg_.lambda_reg), true,
                              a == 0 ? gen_mode_update : gen_mode_critic);
      gen_terms.total += t.total;
      gen_terms.adversarial += t.adversarial;
      gen_terms.map_l1 += t.map_l1;
    }
    const float ginv = 1.0f / float(cfg_.grad_agg_batches);
    gen_terms.total *= ginv;
    gen_terms.adversarial *= ginv;
    gen_terms.map_l1 *= ginv;
    if (!std::isfinite(gen_terms.total) || !grads_finite(gen_->params())) {
      divergence_stop("generator");
      result.log.push_back({iter_, n_updates, last_critic.total, last_critic.wasserstein,
                            last_critic.penalty, gen_terms.total, gen_terms.adversarial,
                            gen_terms.map_l1, 0, 0});
      return result;
    }
    scale_grads(gen_->params(), ginv);
    opt_gen_.step(gen_->params());

    const double val = validation_estimate(data);
    val_history_.push_back(val);
    if (!ema_init_) {
      val_ema_ = val;
      ema_init_ = true;
    } else {
      val_ema_ = cfg_.val_ema * val_ema_ + (1.0 - cfg_.val_ema) * val;
    }
    ++iter_;

    TrainLogRecord rec{iter_ - 1,
                       n_updates,
                       double(last_critic.total),
                       double(last_critic.wasserstein),
                       double(last_critic.penalty),
                       double(gen_terms.total),
                       double(gen_terms.adversarial),
                       double(gen_terms.map_l1),
                       val,
                       val_ema_};
    result.log.push_back(rec);
    log << json{{"iteration", rec.iter},
                {"critic_updates", rec.critic_updates},
                {"critic_loss", rec.critic_loss},
                {"wasserstein", rec.wasserstein},
                {"penalty", rec.penalty},
                {"gen_loss", rec.gen_loss},
                {"gen_adversarial", rec.gen_adversarial},
                {"gen_map_l1", rec.gen_map_l1},
                {"val_estimate", rec.val_estimate},
                {"val_estimate_ema", rec.val_estimate_ema}}
               .dump()
        << "\n";
    log.flush();

    // Best model: smallest smoothed validation Wasserstein estimate, once
    // past the initial boost window (the critic is uninformative before).
    if (iter_ > cfg_.boost_initial_iters &&
        (best_iter_ < 0 || val_ema_ < best_val_ema_)) {
      best_val_ema_ = val_ema_;
      best_iter_ = iter_;
      save_checkpoint(out_dir + "/best.ckpt");
    }
    if (iter_ % cfg_.checkpoint_every == 0 && iter_ < cfg_.total_generator_iters) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "iter%06d.ckpt", iter_);
      last_snapshot = out_dir + "/" + buf;
      save_checkpoint(last_snapshot);
    }
  }

  save_checkpoint(out_dir + "/final.ckpt");
  result.completed = true;
  result.stopped_at_iter = iter_;
  result.best_iter = best_iter_;
  result.best_val_ema = best_val_ema_;
  result.final_checkpoint = out_dir + "/final.ckpt";
  result.best_checkpoint = best_iter_ >= 0 ? out_dir + "/best.ckpt" : out_dir + "/final.ckpt";
  return result;
}

template <typename T>
Tensor<T> attribute_vagan(models::Generator<T>& generator, const Tensor<T>& x) {
  typename models::Generator<T>::Trace tr;
  return generator.forward(x, tr, models::FwdOpts{.training = false});
}

#define VAGAN_INSTANTIATE_WGAN(T)                                                                  \
  template CriticLossTerms<T> critic_objective<T>(models::Critic<T>&, const Tensor<T>&,            \
                                                  const Tensor<T>&, const std::vector<T>&, T,      \
                                                  bool);                                           \
  template CriticLossTerms<T> critic_objective<T>(models::Critic<T>&, models::Generator<T>&,       \
                                                  const Tensor<T>&, const Tensor<T>&, Rng&, T,     \
                                                  bool, const models::FwdOpts&);                   \
  template GeneratorLossTerms<T> generator_objective<T>(models::Critic<T>&, models::Generator<T>&, \
                                                        const Tensor<T>&, T, bool,                 \
                                                        const models::FwdOpts&);                   \
  template Tensor<T> attribute_vagan<T>(models::Generator<T>&, const Tensor<T>&);

VAGAN_INSTANTIATE_WGAN(float)
VAGAN_INSTANTIATE_WGAN(double)
#undef VAGAN_INSTANTIATE_WGAN

}  // namespace vagan::train
