#include "vagan/networks.hpp"

#include <cmath>
#include <cstring>

#include "vagan/errors.hpp"

namespace vagan::models {

std::string net_kind_name(NetKind k) {
  switch (k) {
    case NetKind::map_generator: return "map_generator";
    case NetKind::critic: return "critic";
    case NetKind::classifier_dense: return "classifier_dense";
    case NetKind::classifier_cam: return "classifier_cam";
    case NetKind::classifier_gap: return "classifier_gap";
  }
  return "?";
}

NetKind net_kind_from_name(const std::string& s) {
  if (s == "map_generator") return NetKind::map_generator;
  if (s == "critic") return NetKind::critic;
  if (s == "classifier_dense") return NetKind::classifier_dense;
  if (s == "classifier_cam") return NetKind::classifier_cam;
  if (s == "classifier_gap") return NetKind::classifier_gap;
  throw ValidationError("unknown network kind: " + s);
}

void NetworkSpec::validate() const {
  if (channel_factor <= 0) throw ValidationError("channel_factor must be > 0");
  int div = 16;
  if (kind == NetKind::map_generator) div = 8;        // 3 pooling levels
  else if (kind == NetKind::classifier_cam) div = 4;  // 2 pooling levels
  if (input_h % div != 0 || input_w % div != 0)
    throw ValidationError("input size " + std::to_string(input_h) + "x" + std::to_string(input_w) +
                          " must be divisible by " + std::to_string(div) + " for " +
                          net_kind_name(kind));
}

int NetworkSpec::scaled(int base_channels) const {
  return std::max(1, int(std::ceil(double(base_channels) * channel_factor)));
}

namespace {

template <typename T>
void add_conv_bn_relu(Sequential<T>& seq, const std::string& name, int in_ch, int out_ch, Rng& rng) {
  seq.add(std::make_unique<Conv2d<T>>(name, in_ch, out_ch, 3, 1, rng));
  seq.add(std::make_unique<BatchNorm2d<T>>(name + "_bn", out_ch));
  seq.add(std::make_unique<ReLU<T>>());
}

template <typename T>
void add_conv_relu(Sequential<T>& seq, const std::string& name, int in_ch, int out_ch, Rng& rng) {
  seq.add(std::make_unique<Conv2d<T>>(name, in_ch, out_ch, 3, 1, rng));
  seq.add(std::make_unique<ReLU<T>>());
}

}  // namespace

// ---- Generator ----

template <typename T>
Generator<T>::Generator(const NetworkSpec& spec, Rng& rng) : spec_(spec) {
  spec_.validate();
  if (spec_.kind != NetKind::map_generator) throw ValidationError("spec kind is not map_generator");
  c1_ = spec_.scaled(16);
  c2_ = spec_.scaled(32);
  c3_ = spec_.scaled(64);
  const int cb = spec_.scaled(128);

  add_conv_bn_relu(enc1_, "conv1_1", spec_.in_channels, c1_, rng);
  add_conv_bn_relu(enc1_, "conv1_2", c1_, c1_, rng);
  add_conv_bn_relu(enc2_, "conv2_1", c1_, c2_, rng);
  add_conv_bn_relu(enc2_, "conv2_2", c2_, c2_, rng);
  add_conv_bn_relu(enc3_, "conv3_1", c2_, c3_, rng);
  add_conv_bn_relu(enc3_, "conv3_2", c3_, c3_, rng);
  add_conv_bn_relu(mid_, "conv4_1", c3_, cb, rng);
  add_conv_bn_relu(mid_, "conv4_2", cb, cb, rng);

  up3_.add(std::make_unique<Deconv2d<T>>("upconv3", cb, c3_, rng));
  up3_.add(std::make_unique<BatchNorm2d<T>>("upconv3_bn", c3_));
  up3_.add(std::make_unique<ReLU<T>>());
  add_conv_bn_relu(dec3_, "conv5_1", c3_ + c3_, c3_, rng);
  add_conv_bn_relu(dec3_, "conv5_2", c3_, c3_, rng);

  up2_.add(std::make_unique<Deconv2d<T>>("upconv2", c3_, c2_, rng));
  up2_.add(std::make_unique<BatchNorm2d<T>>("upconv2_bn", c2_));
  up2_.add(std::make_unique<ReLU<T>>());
  add_conv_bn_relu(dec2_, "conv6_1", c2_ + c2_, c2_, rng);
  add_conv_bn_relu(dec2_, "conv6_2", c2_, c2_, rng);

  up1_.add(std::make_unique<Deconv2d<T>>("upconv1", c2_, c1_, rng));
  up1_.add(std::make_unique<BatchNorm2d<T>>("upconv1_bn", c1_));
  up1_.add(std::make_unique<ReLU<T>>());
  add_conv_bn_relu(dec1_, "conv8_1", c1_ + c1_, c1_, rng);
  dec1_.add(std::make_unique<Conv2d<T>>("map", c1_, 1, 3, 1, rng));  // identity activation

  const std::string p = "generator/";
  enc1_.collect(table_, p);
  enc2_.collect(table_, p);
  enc3_.collect(table_, p);
  mid_.collect(table_, p);
  up3_.collect(table_, p);
  dec3_.collect(table_, p);
  up2_.collect(table_, p);
  dec2_.collect(table_, p);
  up1_.collect(table_, p);
  dec1_.collect(table_, p);
}

namespace {

// Concatenate along channels: [a | b].
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  Tensor<T> out(a.n(), a.c() + b.c(), a.h(), a.w());
  const size_t pa = a.sample_size(), pb = b.sample_size();
  for (int n = 0; n < a.n(); ++n) {
    std::memcpy(out.sample(n), a.sample(n), pa * sizeof(T));
    std::memcpy(out.sample(n) + pa, b.sample(n), pb * sizeof(T));
  }
  return out;
}

// Split a channel-concat gradient back into its two parts.
template <typename T>
void split_channels(const Tensor<T>& g, int ca, Tensor<T>& ga, Tensor<T>& gb) {
  const int cb = g.c() - ca;
  ga = Tensor<T>(g.n(), ca, g.h(), g.w());
  gb = Tensor<T>(g.n(), cb, g.h(), g.w());
  const size_t pa = ga.sample_size(), pb = gb.sample_size();
  for (int n = 0; n < g.n(); ++n) {
    std::memcpy(ga.sample(n), g.sample(n), pa * sizeof(T));
    std::memcpy(gb.sample(n), g.sample(n) + pa, pb * sizeof(T));
  }
}

}  // namespace

template <typename T>
const Tensor<T>& Generator<T>::forward(const Tensor<T>& x, Trace& tr, const FwdOpts& o) {
  if (x.h() != spec_.input_h || x.w() != spec_.input_w)
    throw ValidationError("generator input " + x.shape_str() + " does not match spec " +
                          std::to_string(spec_.input_h) + "x" + std::to_string(spec_.input_w));
  const Tensor<T>& e1 = enc1_.forward(x, tr.enc1, o);
  pool_.forward(e1, tr.pool1, o);
  const Tensor<T>& e2 = enc2_.forward(tr.pool1.out, tr.enc2, o);
  pool_.forward(e2, tr.pool2, o);
  const Tensor<T>& e3 = enc3_.forward(tr.pool2.out, tr.enc3, o);
  pool_.forward(e3, tr.pool3, o);
  mid_.forward(tr.pool3.out, tr.mid, o);

  const Tensor<T>& u3 = up3_.forward(tr.mid.out(), tr.up3, o);
  tr.cat3 = concat_channels(u3, e3);
  dec3_.forward(tr.cat3, tr.dec3, o);
  const Tensor<T>& u2 = up2_.forward(tr.dec3.out(), tr.up2, o);
  tr.cat2 = concat_channels(u2, e2);
  dec2_.forward(tr.cat2, tr.dec2, o);
  const Tensor<T>& u1 = up1_.forward(tr.dec2.out(), tr.up1, o);
  tr.cat1 = concat_channels(u1, e1);
  return dec1_.forward(tr.cat1, tr.dec1, o);
}

template <typename T>
Tensor<T> Generator<T>::backward(const Tensor<T>& gmap, Trace& tr, const BwdOpts& o) {
  Tensor<T> gcat1 = dec1_.backward(gmap, tr.dec1, o);
  Tensor<T> gu1, ge1_skip;
  split_channels(gcat1, c1_, gu1, ge1_skip);
  Tensor<T> gd2 = up1_.backward(gu1, tr.up1, o);

  Tensor<T> gcat2 = dec2_.backward(gd2, tr.dec2, o);
  Tensor<T> gu2, ge2_skip;
  split_channels(gcat2, c2_, gu2, ge2_skip);
  Tensor<T> gd3 = up2_.backward(gu2, tr.up2, o);

  Tensor<T> gcat3 = dec3_.backward(gd3, tr.dec3, o);
  Tensor<T> gu3, ge3_skip;
  split_channels(gcat3, c3_, gu3, ge3_skip);
  Tensor<T> gmid = up3_.backward(gu3, tr.up3, o);

  Tensor<T> gp3 = mid_.backward(gmid, tr.mid, o);
  Tensor<T> ge3 = pool_.backward(gp3, tr.enc3.out(), tr.pool3, o);
  axpy(T(1), ge3_skip, ge3);  // skip and pool paths join at the encoder output
  Tensor<T> gp2 = enc3_.backward(ge3, tr.enc3, o);

  Tensor<T> ge2 = pool_.backward(gp2, tr.enc2.out(), tr.pool2, o);
  axpy(T(1), ge2_skip, ge2);
  Tensor<T> gp1 = enc2_.backward(ge2, tr.enc2, o);

  Tensor<T> ge1 = pool_.backward(gp1, tr.enc1.out(), tr.pool1, o);
  axpy(T(1), ge1_skip, ge1);
  return enc1_.backward(ge1, tr.enc1, o);
}

// ---- Critic ----

template <typename T>
Critic<T>::Critic(const NetworkSpec& spec, Rng& rng) : spec_(spec) {
  spec_.validate();
  if (spec_.kind != NetKind::critic) throw ValidationError("spec kind is not critic");
  const int c1 = spec_.scaled(16), c2 = spec_.scaled(32), c3 = spec_.scaled(64),
            c4 = spec_.scaled(128), c5 = spec_.scaled(256);
  add_conv_relu(net_, "conv1_1", spec_.in_channels, c1, rng);
  net_.add(std::make_unique<MaxPool2<T>>());
  add_conv_relu(net_, "conv2_1", c1, c2, rng);
  net_.add(std::make_unique<MaxPool2<T>>());
  add_conv_relu(net_, "conv3_1", c2, c3, rng);
  add_conv_relu(net_, "conv3_2", c3, c3, rng);
  net_.add(std::make_unique<MaxPool2<T>>());
  add_conv_relu(net_, "conv4_1", c3, c4, rng);
  add_conv_relu(net_, "conv4_2", c4, c4, rng);
  net_.add(std::make_unique<MaxPool2<T>>());
  add_conv_relu(net_, "conv5_1", c4, c5, rng);
  add_conv_relu(net_, "conv5_2", c5, c5, rng);
  add_conv_relu(net_, "conv5_3", c5, c5, rng);
  net_.add(std::make_unique<Conv2d<T>>("conv5_4", c5, 1, 1, 0, rng));  // 1x1, identity
  net_.add(std::make_unique<GlobalAvgPool<T>>());
  net_.collect(table_, "critic/");
}

template <typename T>
const Tensor<T>& Critic<T>::forward(const Tensor<T>& x, Pass<T>& pass) const {
  if (x.h() % 16 != 0 || x.w() % 16 != 0)
    throw ValidationError("critic input " + x.shape_str() + " must be divisible by 16");
  return net_.forward(x, pass, FwdOpts{});
}

template <typename T>
void Critic<T>::backward_params(const Tensor<T>& seed, Pass<T>& pass) {
  (void)net_.backward(seed, pass, BwdOpts{.param_grads = true});
}

template <typename T>
Tensor<T> Critic<T>::input_gradient(const Tensor<T>& seed, Pass<T>& pass) {
  return net_.backward(seed, pass, BwdOpts{.param_grads = false});
}

template <typename T>
const Tensor<T>& Critic<T>::jvp(const Tensor<T>& u, Pass<T>& pass) const {
  return net_.jvp(u, pass);
}

template <typename T>
void Critic<T>::backward_tangent(const Tensor<T>& seed, Pass<T>& pass) {
  net_.backward_tangent(seed, pass);
}

// ---- Classifier ----

std::string classifier_variant_name(ClassifierVariant v) {
  switch (v) {
    case ClassifierVariant::dense: return "dense";
    case ClassifierVariant::cam: return "cam";
    case ClassifierVariant::gap: return "gap";
  }
  return "?";
}

ClassifierVariant classifier_variant_from_name(const std::string& s) {
  if (s == "dense") return ClassifierVariant::dense;
  if (s == "cam") return ClassifierVariant::cam;
  if (s == "gap") return ClassifierVariant::gap;
  throw UsageError("unknown classifier variant: " + s + " (expected dense|cam|gap)");
}

template <typename T>
Classifier<T>::Classifier(const NetworkSpec& spec, Rng& rng) : spec_(spec) {
  spec_.validate();
  switch (spec_.kind) {
    case NetKind::classifier_dense: variant_ = ClassifierVariant::dense; break;
    case NetKind::classifier_cam: variant_ = ClassifierVariant::cam; break;
    case NetKind::classifier_gap: variant_ = ClassifierVariant::gap; break;
    default: throw ValidationError("spec kind is not a classifier");
  }
  const int c1 = spec_.scaled(16), c2 = spec_.scaled(32), c3 = spec_.scaled(64),
            c4 = spec_.scaled(128), c5 = spec_.scaled(256);
  const bool keep_late_pools = variant_ != ClassifierVariant::cam;

  add_conv_bn_relu(net_, "conv1_1", spec_.in_channels, c1, rng);
  net_.add(std::make_unique<MaxPool2<T>>());
  add_conv_bn_relu(net_, "conv2_1", c1, c2, rng);
  net_.add(std::make_unique<MaxPool2<T>>());
  add_conv_bn_relu(net_, "conv3_1", c2, c3, rng);
  add_conv_bn_relu(net_, "conv3_2", c3, c3, rng);
  if (keep_late_pools) net_.add(std::make_unique<MaxPool2<T>>());
  add_conv_bn_relu(net_, "conv4_1", c3, c4, rng);
  add_conv_bn_relu(net_, "conv4_2", c4, c4, rng);
  if (keep_late_pools) net_.add(std::make_unique<MaxPool2<T>>());
  add_conv_bn_relu(net_, "conv5_1", c4, c5, rng);
  add_conv_bn_relu(net_, "conv5_2", c5, c5, rng);
  add_conv_bn_relu(net_, "conv5_3", c5, c5, rng);
  feature_layer_ = int(net_.size()) - 1;  // relu output of conv5_3

  if (variant_ == ClassifierVariant::dense) {
    const int hidden = 256;
    net_.add(std::make_unique<Flatten<T>>());
    const int fh = spec_.input_h / 16, fw = spec_.input_w / 16;
    auto fc1 = std::make_unique<Conv2d<T>>("fc1", c5 * fh * fw, hidden, 1, 0, rng);
    net_.add(std::move(fc1));
    net_.add(std::make_unique<BatchNorm2d<T>>("fc1_bn", hidden));
    net_.add(std::make_unique<ReLU<T>>());
    auto fc2 = std::make_unique<Conv2d<T>>("fc2", hidden, spec_.num_classes, 1, 0, rng);
    final_dense_ = fc2.get();
    net_.add(std::move(fc2));
  } else {
    net_.add(std::make_unique<GlobalAvgPool<T>>());
    auto fc = std::make_unique<Conv2d<T>>("fc", c5, spec_.num_classes, 1, 0, rng);
    final_dense_ = fc.get();
    net_.add(std::move(fc));
  }
  net_.collect(table_, "classifier_" + classifier_variant_name(variant_) + "/");
}

template <typename T>
void Classifier<T>::forward(const Tensor<T>& x, Forward& fw, const FwdOpts& o) const {
  fw.logits = net_.forward(x, fw.pass, o);
  fw.feature_layer = feature_layer_;
  ops::softmax(fw.logits, fw.probs);
}

template <typename T>
Tensor<T> Classifier<T>::backward(const Tensor<T>& dlogits, Forward& fw, const BwdOpts& o) {
  return net_.backward(dlogits, fw.pass, o);
}

template <typename T>
const Tensor<T>& Classifier<T>::feature_maps(const Forward& fw) const {
  if (variant_ == ClassifierVariant::dense)
    throw UsageError("feature maps for CAM require the cam or gap classifier variant");
  return fw.pass.ctx[size_t(feature_layer_)].out;
}

template <typename T>
const Tensor<T>& Classifier<T>::final_dense_weights() const {
  if (variant_ == ClassifierVariant::dense)
    throw UsageError("final dense weights view requires the cam or gap classifier variant");
  return final_dense_->w;
}

template <typename T>
std::vector<ParamShape> shape_inventory(const ParamTable<T>& table) {
  std::vector<ParamShape> out;
  out.reserve(table.params.size() + table.buffers.size());
  for (const auto& p : table.params)
    out.push_back({p.name, {p.value->n(), p.value->c(), p.value->h(), p.value->w()}});
  for (const auto& b : table.buffers)
    out.push_back({b.name, {b.value->n(), b.value->c(), b.value->h(), b.value->w()}});
  return out;
}

#define VAGAN_INSTANTIATE_NETS(T)                                     \
  template class Generator<T>;                                        \
  template class Critic<T>;                                           \
  template class Classifier<T>;                                       \
  template std::vector<ParamShape> shape_inventory<T>(const ParamTable<T>&);

VAGAN_INSTANTIATE_NETS(float)
VAGAN_INSTANTIATE_NETS(double)
#undef VAGAN_INSTANTIATE_NETS

}  // namespace vagan::models
