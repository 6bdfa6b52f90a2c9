#pragma once

#include <memory>
#include <string>
#include <vector>

#include "vagan/ops.hpp"
#include "vagan/rng.hpp"
#include "vagan/tensor.hpp"

namespace vagan::models {

// One named parameter array with its gradient accumulator. Buffers are
// state that is serialized but not optimized (batch-norm running stats).
template <typename T>
struct ParamRef {
  std::string name;
  Tensor<T>* value = nullptr;
  Tensor<T>* grad = nullptr;
};

template <typename T>
struct BufferRef {
  std::string name;
  Tensor<T>* value = nullptr;
};

template <typename T>
struct ParamTable {
  std::vector<ParamRef<T>> params;
  std::vector<BufferRef<T>> buffers;

  void zero_grads() {
    for (auto& p : params) p.grad->zero();
  }
  size_t param_count() const {
    size_t n = 0;
    for (auto& p : params) n += p.value->size();
    return n;
  }
};

// Per-layer activation record for one forward pass. A Pass owns one slot
// per layer, so several passes through the same network can coexist
// (e.g. the critic evaluated on real, generated and interpolated batches).
template <typename T>
struct LayerCtx {
  Tensor<T> out;               // primal output
  Tensor<T> tangent;           // tangent output (jvp pass)
  std::vector<uint8_t> mask;   // relu
  std::vector<uint8_t> argmax; // maxpool
  ops::BnCache<T> bn;
};

struct FwdOpts {
  bool training = false;        // batch statistics vs running averages
  bool update_running = false;  // commit batch stats into running averages
};

struct BwdOpts {
  bool param_grads = true;
  bool guided_relu = false;
};

template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual std::string kind() const = 0;

  virtual void forward(const Tensor<T>& x, LayerCtx<T>& ctx, const FwdOpts& o) = 0;
  // Returns dL/dx given dL/dout; x is the layer's forward input.
  virtual Tensor<T> backward(const Tensor<T>& gout, const Tensor<T>& x, LayerCtx<T>& ctx,
                             const BwdOpts& o) = 0;

  // Forward-mode tangent propagation (dual of the primal pass recorded in
  // ctx). Only layers on the critic path support it.
  virtual void jvp(const Tensor<T>& tx, LayerCtx<T>& ctx);
  // Reverse pass over the tangent graph: like backward, but weight
  // gradients contract against tangent activations and biases get none.
  // tx is the layer's tangent input.
  virtual Tensor<T> backward_tangent(const Tensor<T>& gout, const Tensor<T>& tx, LayerCtx<T>& ctx);

  virtual void collect(ParamTable<T>& table, const std::string& prefix) {}
};

template <typename T>
class Conv2d : public Layer<T> {
 public:
  Conv2d(std::string name, int in_ch, int out_ch, int k, int pad, Rng& rng, bool bias = true);
  std::string kind() const override { return "conv2d"; }
  void forward(const Tensor<T>& x, LayerCtx<T>& ctx, const FwdOpts& o) override;
  Tensor<T> backward(const Tensor<T>& gout, const Tensor<T>& x, LayerCtx<T>& ctx,
                     const BwdOpts& o) override;
  void jvp(const Tensor<T>& tx, LayerCtx<T>& ctx) override;
  Tensor<T> backward_tangent(const Tensor<T>& gout, const Tensor<T>& tx, LayerCtx<T>& ctx) override;
  void collect(ParamTable<T>& table, const std::string& prefix) override;

  Tensor<T> w, b, gw, gb;
  std::string name;
  ops::ConvGeom geom;
  bool has_bias;
};

template <typename T>
class Deconv2d : public Layer<T> {
 public:
  Deconv2d(std::string name, int in_ch, int out_ch, Rng& rng);  // kernel 4, stride 2, pad 1
  std::string kind() const override { return "deconv2d"; }
  void forward(const Tensor<T>& x, LayerCtx<T>& ctx, const FwdOpts& o) override;
  Tensor<T> backward(const Tensor<T>& gout, const Tensor<T>& x, LayerCtx<T>& ctx,
                     const BwdOpts& o) override;
  void collect(ParamTable<T>& table, const std::string& prefix) override;

  Tensor<T> w, b, gw, gb;  // w: (C_in, C_out, 4, 4)
  std::string name;
  ops::ConvGeom geom;
};

template <typename T>
class BatchNorm2d : public Layer<T> {
 public:
  BatchNorm2d(std::string name, int ch, T eps = T(1e-5), T momentum = T(0.99));
  std::string kind() const override { return "batchnorm2d"; }
  void forward(const Tensor<T>& x, LayerCtx<T>& ctx, const FwdOpts& o) override;
  Tensor<T> backward(const Tensor<T>& gout, const Tensor<T>& x, LayerCtx<T>& ctx,
                     const BwdOpts& o) override;
  void collect(ParamTable<T>& table, const std::string& prefix) override;

  Tensor<T> gamma, beta, ggamma, gbeta;
  Tensor<T> run_mean, run_var;
  std::string name;
  T eps, momentum;
};

template <typename T>
class ReLU : public Layer<T> {
 public:
  std::string kind() const override { return "relu"; }
  void forward(const Tensor<T>& x, LayerCtx<T>& ctx, const FwdOpts& o) override;
  Tensor<T> backward(const Tensor<T>& gout, const Tensor<T>& x, LayerCtx<T>& ctx,
                     const BwdOpts& o) override;
  void jvp(const Tensor<T>& tx, LayerCtx<T>& ctx) override;
  Tensor<T> backward_tangent(const Tensor<T>& gout, const Tensor<T>& tx, LayerCtx<T>& ctx) override;
};

template <typename T>
class MaxPool2 : public Layer<T> {
 public:
  std::string kind() const override { return "maxpool2"; }
  void forward(const Tensor<T>& x, LayerCtx<T>& ctx, const FwdOpts& o) override;
  Tensor<T> backward(const Tensor<T>& gout, const Tensor<T>& x, LayerCtx<T>& ctx,
                     const BwdOpts& o) override;
  void jvp(const Tensor<T>& tx, LayerCtx<T>& ctx) override;
  Tensor<T> backward_tangent(const Tensor<T>& gout, const Tensor<T>& tx, LayerCtx<T>& ctx) override;
};

template <typename T>
class GlobalAvgPool : public Layer<T> {
 public:
  std::string kind() const override { return "gap"; }
  void forward(const Tensor<T>& x, LayerCtx<T>& ctx, const FwdOpts& o) override;
  Tensor<T> backward(const Tensor<T>& gout, const Tensor<T>& x, LayerCtx<T>& ctx,
                     const BwdOpts& o) override;
  void jvp(const Tensor<T>& tx, LayerCtx<T>& ctx) override;
  Tensor<T> backward_tangent(const Tensor<T>& gout, const Tensor<T>& tx, LayerCtx<T>& ctx) override;
};

// Reshape to (N, C*H*W, 1, 1); dense heads are 1x1 convolutions after this.
template <typename T>
class Flatten : public Layer<T> {
 public:
  std::string kind() const override { return "flatten"; }
  void forward(const Tensor<T>& x, LayerCtx<T>& ctx, const FwdOpts& o) override;
  Tensor<T> backward(const Tensor<T>& gout, const Tensor<T>& x, LayerCtx<T>& ctx,
                     const BwdOpts& o) override;
};

// A pass through one Sequential: the input plus one ctx slot per layer.
// tangent_seed holds the tangent fed to jvp(); the bottom layer's
// backward_tangent contracts against it.
template <typename T>
struct Pass {
  Tensor<T> input;
  Tensor<T> tangent_seed;
  std::vector<LayerCtx<T>> ctx;
  const Tensor<T>& out() const { return ctx.back().out; }
};

template <typename T>
class Sequential {
 public:
  Sequential() = default;
  void add(std::unique_ptr<Layer<T>> layer) { layers_.push_back(std::move(layer)); }
  size_t size() const { return layers_.size(); }
  Layer<T>* layer(size_t i) { return layers_[i].get(); }
  const Layer<T>* layer(size_t i) const { return layers_[i].get(); }

  const Tensor<T>& forward(const Tensor<T>& x, Pass<T>& pass, const FwdOpts& o) const;
  // Backward from the last layer; returns dL/d(input).
  Tensor<T> backward(const Tensor<T>& gout, Pass<T>& pass, const BwdOpts& o) const;
  // Tangent forward; tangent activations are recorded in the same pass.
  const Tensor<T>& jvp(const Tensor<T>& tx, Pass<T>& pass) const;
  // Reverse over the tangent graph; accumulates parameter gradients.
  void backward_tangent(const Tensor<T>& gout, Pass<T>& pass) const;

  void collect(ParamTable<T>& table, const std::string& prefix);

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

// He-style variance scaling: normal with std sqrt(2 / fan_in).
template <typename T>
void init_variance_scaling(Tensor<T>& w, size_t fan_in, Rng& rng);

}  // namespace vagan::models
