#include "vagan/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace vagan::models {

template <typename T>
void init_variance_scaling(Tensor<T>& w, size_t fan_in, Rng& rng) {
  const double std = std::sqrt(2.0 / double(fan_in));
  for (size_t i = 0; i < w.size(); ++i) w[i] = T(rng.normal() * std);
}

template <typename T>
void Layer<T>::jvp(const Tensor<T>&, LayerCtx<T>&) {
  throw std::logic_error("jvp unsupported for layer kind " + kind());
}

template <typename T>
Tensor<T> Layer<T>::backward_tangent(const Tensor<T>&, const Tensor<T>&, LayerCtx<T>&) {
  throw std::logic_error("backward_tangent unsupported for layer kind " + kind());
}

// ---- Conv2d ----

template <typename T>
Conv2d<T>::Conv2d(std::string name_, int in_ch, int out_ch, int k, int pad, Rng& rng, bool bias)
    : w(out_ch, in_ch, k, k),
      b(bias ? 1 : 0, bias ? out_ch : 0, 1, 1),
      gw(out_ch, in_ch, k, k),
      gb(bias ? 1 : 0, bias ? out_ch : 0, 1, 1),
      name(std::move(name_)),
      geom{k, 1, pad},
      has_bias(bias) {
  init_variance_scaling(w, size_t(in_ch) * k * k, rng);
}

template <typename T>
void Conv2d<T>::forward(const Tensor<T>& x, LayerCtx<T>& ctx, const FwdOpts&) {
  ops::conv2d_forward(x, w, b, geom, ctx.out);
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& gout, const Tensor<T>& x, LayerCtx<T>&,
                              const BwdOpts& o) {
  if (o.param_grads) ops::conv2d_backward_params(gout, x, geom, gw, gb, has_bias);
  Tensor<T> gin(x.n(), x.c(), x.h(), x.w());
  ops::conv2d_backward_input(gout, w, geom, gin);
  return gin;
}

template <typename T>
void Conv2d<T>::jvp(const Tensor<T>& tx, LayerCtx<T>& ctx) {
  Tensor<T> no_bias;
  ops::conv2d_forward(tx, w, no_bias, geom, ctx.tangent);
}

template <typename T>
Tensor<T> Conv2d<T>::backward_tangent(const Tensor<T>& gout, const Tensor<T>& tx, LayerCtx<T>&) {
  // d<seed, tangent_out>/dW contracts the co-state with tangent inputs;
  // the bias does not appear in the tangent path.
  Tensor<T> dummy_gb(gb.n(), gb.c(), 1, 1);
  ops::conv2d_backward_params(gout, tx, geom, gw, dummy_gb, false);
  Tensor<T> gin(tx.n(), tx.c(), tx.h(), tx.w());
  ops::conv2d_backward_input(gout, w, geom, gin);
  return gin;
}

template <typename T>
void Conv2d<T>::collect(ParamTable<T>& table, const std::string& prefix) {
  table.params.push_back({prefix + name + "/w", &w, &gw});
  if (has_bias) table.params.push_back({prefix + name + "/b", &b, &gb});
}

// ---- Deconv2d ----

template <typename T>
Deconv2d<T>::Deconv2d(std::string name_, int in_ch, int out_ch, Rng& rng)
    : w(in_ch, out_ch, 4, 4),
      b(1, out_ch, 1, 1),
      gw(in_ch, out_ch, 4, 4),
      gb(1, out_ch, 1, 1),
      name(std::move(name_)),
      geom{4, 2, 1} {
  init_variance_scaling(w, size_t(in_ch) * 4 * 4, rng);
}

template <typename T>
void Deconv2d<T>::forward(const Tensor<T>& x, LayerCtx<T>& ctx, const FwdOpts&) {
  ops::deconv2d_forward(x, w, b, geom, ctx.out);
}

template <typename T>
Tensor<T> Deconv2d<T>::backward(const Tensor<T>& gout, const Tensor<T>& x, LayerCtx<T>&,
                                const BwdOpts& o) {
  if (o.param_grads) ops::deconv2d_backward_params(gout, x, geom, gw, gb, true);
  Tensor<T> gin(x.n(), x.c(), x.h(), x.w());
  ops::deconv2d_backward_input(gout, w, geom, gin);
  return gin;
}

template <typename T>
void Deconv2d<T>::collect(ParamTable<T>& table, const std::string& prefix) {
  table.params.push_back({prefix + name + "/w", &w, &gw});
  table.params.push_back({prefix + name + "/b", &b, &gb});
}

// ---- BatchNorm2d ----

template <typename T>
BatchNorm2d<T>::BatchNorm2d(std::string name_, int ch, T eps_, T momentum_)
    : gamma(1, ch, 1, 1),
      beta(1, ch, 1, 1),
      ggamma(1, ch, 1, 1),
      gbeta(1, ch, 1, 1),
      run_mean(1, ch, 1, 1),
      run_var(1, ch, 1, 1),
      name(std::move(name_)),
      eps(eps_),
      momentum(momentum_) {
  gamma.fill(T(1));
  run_var.fill(T(1));
}

template <typename T>
void BatchNorm2d<T>::forward(const Tensor<T>& x, LayerCtx<T>& ctx, const FwdOpts& o) {
  ops::bn_forward(x, gamma, beta, run_mean, run_var, eps, momentum, o.training, o.update_running,
                  ctx.out, ctx.bn);
}

template <typename T>
Tensor<T> BatchNorm2d<T>::backward(const Tensor<T>& gout, const Tensor<T>& x, LayerCtx<T>& ctx,
                                   const BwdOpts& o) {
  Tensor<T> gin(x.n(), x.c(), x.h(), x.w());
  ops::bn_backward(gout, gamma, ctx.bn, run_var, eps, gin, ggamma, gbeta, o.param_grads);
  return gin;
}

template <typename T>
void BatchNorm2d<T>::collect(ParamTable<T>& table, const std::string& prefix) {
  table.params.push_back({prefix + name + "/gamma", &gamma, &ggamma});
  table.params.push_back({prefix + name + "/beta", &beta, &gbeta});
  table.buffers.push_back({prefix + name + "/running_mean", &run_mean});
  table.buffers.push_back({prefix + name + "/running_var", &run_var});
}

// ---- ReLU ----

template <typename T>
void ReLU<T>::forward(const Tensor<T>& x, LayerCtx<T>& ctx, const FwdOpts&) {
  ops::relu_forward(x, ctx.out, ctx.mask);
}

template <typename T>
Tensor<T> ReLU<T>::backward(const Tensor<T>& gout, const Tensor<T>&, LayerCtx<T>& ctx,
                            const BwdOpts& o) {
  Tensor<T> gin;
  ops::relu_backward(gout, ctx.mask, gin, o.guided_relu);
  return gin;
}

template <typename T>
void ReLU<T>::jvp(const Tensor<T>& tx, LayerCtx<T>& ctx) {
  ops::relu_backward(tx, ctx.mask, ctx.tangent, false);  // tangent gated by the primal mask
}

template <typename T>
Tensor<T> ReLU<T>::backward_tangent(const Tensor<T>& gout, const Tensor<T>&, LayerCtx<T>& ctx) {
  Tensor<T> gin;
  ops::relu_backward(gout, ctx.mask, gin, false);
  return gin;
}

// ---- MaxPool2 ----

template <typename T>
void MaxPool2<T>::forward(const Tensor<T>& x, LayerCtx<T>& ctx, const FwdOpts&) {
  ops::maxpool2_forward(x, ctx.out, ctx.argmax);
}

template <typename T>
Tensor<T> MaxPool2<T>::backward(const Tensor<T>& gout, const Tensor<T>& x, LayerCtx<T>& ctx,
                                const BwdOpts&) {
  Tensor<T> gin(x.n(), x.c(), x.h(), x.w());
  ops::maxpool2_backward(gout, ctx.argmax, x.h(), x.w(), gin);
  return gin;
}

template <typename T>
void MaxPool2<T>::jvp(const Tensor<T>& tx, LayerCtx<T>& ctx) {
  ops::maxpool2_gather(tx, ctx.argmax, ctx.tangent);
}

template <typename T>
Tensor<T> MaxPool2<T>::backward_tangent(const Tensor<T>& gout, const Tensor<T>& tx,
                                        LayerCtx<T>& ctx) {
  Tensor<T> gin(tx.n(), tx.c(), tx.h(), tx.w());
  ops::maxpool2_backward(gout, ctx.argmax, tx.h(), tx.w(), gin);
  return gin;
}

// ---- GlobalAvgPool ----

template <typename T>
void GlobalAvgPool<T>::forward(const Tensor<T>& x, LayerCtx<T>& ctx, const FwdOpts&) {
  ops::gap_forward(x, ctx.out);
}

template <typename T>
Tensor<T> GlobalAvgPool<T>::backward(const Tensor<T>& gout, const Tensor<T>& x, LayerCtx<T>&,
                                     const BwdOpts&) {
  Tensor<T> gin;
  ops::gap_backward(gout, x.h(), x.w(), gin);
  return gin;
}

template <typename T>
void GlobalAvgPool<T>::jvp(const Tensor<T>& tx, LayerCtx<T>& ctx) {
  ops::gap_forward(tx, ctx.tangent);
}

template <typename T>
Tensor<T> GlobalAvgPool<T>::backward_tangent(const Tensor<T>& gout, const Tensor<T>& tx,
                                             LayerCtx<T>&) {
  Tensor<T> gin;
  ops::gap_backward(gout, tx.h(), tx.w(), gin);
  return gin;
}

// ---- Flatten ----

template <typename T>
void Flatten<T>::forward(const Tensor<T>& x, LayerCtx<T>& ctx, const FwdOpts&) {
  ctx.out = x.as_flat();
}

template <typename T>
Tensor<T> Flatten<T>::backward(const Tensor<T>& gout, const Tensor<T>& x, LayerCtx<T>&,
                               const BwdOpts&) {
  return gout.reshaped(x.n(), x.c(), x.h(), x.w());
}

// ---- Sequential ----

template <typename T>
const Tensor<T>& Sequential<T>::forward(const Tensor<T>& x, Pass<T>& pass, const FwdOpts& o) const {
  pass.input = x;
  pass.ctx.resize(layers_.size());
  const Tensor<T>* cur = &pass.input;
  for (size_t i = 0; i < layers_.size(); ++i) {
    layers_[i]->forward(*cur, pass.ctx[i], o);
    cur = &pass.ctx[i].out;
  }
  return *cur;
}

template <typename T>
Tensor<T> Sequential<T>::backward(const Tensor<T>& gout, Pass<T>& pass, const BwdOpts& o) const {
  Tensor<T> g = gout;
  for (size_t i = layers_.size(); i-- > 0;) {
    const Tensor<T>& x = (i == 0) ? pass.input : pass.ctx[i - 1].out;
    g = layers_[i]->backward(g, x, pass.ctx[i], o);
  }
  return g;
}

template <typename T>
const Tensor<T>& Sequential<T>::jvp(const Tensor<T>& tx, Pass<T>& pass) const {
  pass.tangent_seed = tx;
  const Tensor<T>* cur = &pass.tangent_seed;
  for (size_t i = 0; i < layers_.size(); ++i) {
    layers_[i]->jvp(*cur, pass.ctx[i]);
    cur = &pass.ctx[i].tangent;
  }
  return *cur;
}

template <typename T>
void Sequential<T>::backward_tangent(const Tensor<T>& gout, Pass<T>& pass) const {
  Tensor<T> g = gout;
  for (size_t i = layers_.size(); i-- > 0;) {
    const Tensor<T>& tx = (i == 0) ? pass.tangent_seed : pass.ctx[i - 1].tangent;
    g = layers_[i]->backward_tangent(g, tx, pass.ctx[i]);
  }
}

template <typename T>
void Sequential<T>::collect(ParamTable<T>& table, const std::string& prefix) {
  for (auto& l : layers_) l->collect(table, prefix);
}

#define VAGAN_INSTANTIATE_LAYERS(T)          \
  template class Layer<T>;                   \
  template class Conv2d<T>;                  \
  template class Deconv2d<T>;                \
  template class BatchNorm2d<T>;             \
  template class ReLU<T>;                    \
  template class MaxPool2<T>;                \
  template class GlobalAvgPool<T>;           \
  template class Flatten<T>;                 \
  template class Sequential<T>;              \
  template void init_variance_scaling<T>(Tensor<T>&, size_t, Rng&);

VAGAN_INSTANTIATE_LAYERS(float)
VAGAN_INSTANTIATE_LAYERS(double)
#undef VAGAN_INSTANTIATE_LAYERS

}  // namespace vagan::models
