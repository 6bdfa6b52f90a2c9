#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "vagan/layers.hpp"
#include "vagan/rng.hpp"

namespace vagan::models {

enum class NetKind { map_generator, critic, classifier_dense, classifier_cam, classifier_gap };

std::string net_kind_name(NetKind k);
NetKind net_kind_from_name(const std::string& s);

// Declarative architecture description. channel_factor scales every channel
// count (ceil, floor of 1).
struct NetworkSpec {
  NetKind kind = NetKind::map_generator;
  int input_h = 112;
  int input_w = 112;
  double channel_factor = 1.0;
  int num_classes = 2;
  int in_channels = 1;

  void validate() const;  // throws ValidationError naming the required divisibility
  int scaled(int base_channels) const;
};

// Shape inventory entry; rebuilt inventories from equal specs must match.
struct ParamShape {
  std::string name;
  std::array<int, 4> shape;
  bool operator==(const ParamShape&) const = default;
};

// The additive-map U-Net: three pooling levels, skip concatenations across
// the bottleneck, batch-normalized layers everywhere except the final
// 1-channel convolution (identity activation).
template <typename T>
class Generator {
 public:
  Generator(const NetworkSpec& spec, Rng& rng);

  struct Trace {
    Pass<T> enc1, enc2, enc3, mid, up3, dec3, up2, dec2, up1, dec1;
    LayerCtx<T> pool1, pool2, pool3;
    Tensor<T> cat3, cat2, cat1;
  };

  // Returns M(x); x spatial dims must match the spec.
  const Tensor<T>& forward(const Tensor<T>& x, Trace& tr, const FwdOpts& o);
  // Accumulates parameter gradients for dL/dM; returns dL/dx (rarely used).
  Tensor<T> backward(const Tensor<T>& gmap, Trace& tr, const BwdOpts& o);

  ParamTable<T>& params() { return table_; }
  const NetworkSpec& spec() const { return spec_; }

 private:
  NetworkSpec spec_;
  Sequential<T> enc1_, enc2_, enc3_, mid_, up3_, dec3_, up2_, dec2_, up1_, dec1_;
  MaxPool2<T> pool_;
  ParamTable<T> table_;
  int c1_, c2_, c3_;  // encoder channel counts (skip widths)
};

// Fully convolutional critic: conv stacks with four max-pools, a 1x1
// convolution down to one map and global average pooling to a scalar.
// No normalization layers.
template <typename T>
class Critic {
 public:
  Critic(const NetworkSpec& spec, Rng& rng);

  // Returns per-image scalars as (N,1,1,1).
  const Tensor<T>& forward(const Tensor<T>& x, Pass<T>& pass) const;
  // Accumulate parameter gradients; seed holds dL/d(scalar) per image.
  void backward_params(const Tensor<T>& seed, Pass<T>& pass);
  // dD/dx for the given output seed; no parameter gradients.
  Tensor<T> input_gradient(const Tensor<T>& seed, Pass<T>& pass);
  // Forward-mode directional derivative along u; records tangents in pass.
  // Returns per-image <grad_x D, u> as (N,1,1,1).
  const Tensor<T>& jvp(const Tensor<T>& u, Pass<T>& pass) const;
  // Reverse pass over the tangent graph; accumulates parameter gradients of
  // sum_i seed_i * <grad D, u>_i.
  void backward_tangent(const Tensor<T>& seed, Pass<T>& pass);

  ParamTable<T>& params() { return table_; }
  const NetworkSpec& spec() const { return spec_; }

 private:
  NetworkSpec spec_;
  Sequential<T> net_;
  ParamTable<T> table_;
};

enum class ClassifierVariant { dense, cam, gap };

std::string classifier_variant_name(ClassifierVariant v);
ClassifierVariant classifier_variant_from_name(const std::string& s);

// Classifier variants sharing the critic trunk:
//  dense: four pools, flatten, two dense layers (batch norm everywhere).
//  cam:   last two pools omitted, global average pooling, single dense layer.
//  gap:   four pools, global average pooling, single dense layer.
template <typename T>
class Classifier {
 public:
  Classifier(const NetworkSpec& spec, Rng& rng);

  struct Forward {
    Pass<T> pass;
    Tensor<T> logits;        // (N, num_classes, 1, 1)
    Tensor<T> probs;         // softmax(logits)
    int feature_layer = -1;  // index of the last conv feature map (pre-GAP)
  };

  void forward(const Tensor<T>& x, Forward& fw, const FwdOpts& o) const;
  // Backward from dL/dlogits; returns dL/dx.
  Tensor<T> backward(const Tensor<T>& dlogits, Forward& fw, const BwdOpts& o);

  // Final conv feature maps (input to GAP); cam/gap variants only.
  const Tensor<T>& feature_maps(const Forward& fw) const;
  // Final dense weights as (num_classes, C) view; cam/gap variants only.
  const Tensor<T>& final_dense_weights() const;

  ClassifierVariant variant() const { return variant_; }
  ParamTable<T>& params() { return table_; }
  const NetworkSpec& spec() const { return spec_; }

 private:
  NetworkSpec spec_;
  ClassifierVariant variant_;
  Sequential<T> net_;
  ParamTable<T> table_;
  int feature_layer_ = -1;
  Conv2d<T>* final_dense_ = nullptr;
};

// Stable shape inventory for a table (serialization order).
template <typename T>
std::vector<ParamShape> shape_inventory(const ParamTable<T>& table);

}  // namespace vagan::models
