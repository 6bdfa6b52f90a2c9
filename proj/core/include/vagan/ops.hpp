#pragma once

#include <cstdint>
#include <vector>

#include "vagan/tensor.hpp"

namespace vagan::ops {

// Spatial convolution primitives, NCHW, square kernels. Implemented as
// per-image im2col + GEMM; the col matrix is (H_out*W_out) x (C_in*K*K)
// column-major so each (ci,kh,kw) row of patches is contiguous.

struct ConvGeom {
  int k = 3, stride = 1, pad = 1;
  int out_dim(int in) const { return (in + 2 * pad - k) / stride + 1; }
};

// w: (C_out, C_in, K, K); bias optional (C_out) or empty.
template <typename T>
void conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias, ConvGeom g,
                    Tensor<T>& out);

// Gradient w.r.t. input only.
template <typename T>
void conv2d_backward_input(const Tensor<T>& gout, const Tensor<T>& w, ConvGeom g, Tensor<T>& gin);

// Accumulate parameter gradients. `x` is the forward input; pass
// accumulate=false to overwrite.
template <typename T>
void conv2d_backward_params(const Tensor<T>& gout, const Tensor<T>& x, ConvGeom g, Tensor<T>& gw,
                            Tensor<T>& gb, bool with_bias);

// Transposed convolution, weight layout (C_in, C_out, K, K).
// Output spatial size: (H-1)*stride - 2*pad + K.
template <typename T>
void deconv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias, ConvGeom g,
                      Tensor<T>& out);

template <typename T>
void deconv2d_backward_input(const Tensor<T>& gout, const Tensor<T>& w, ConvGeom g, Tensor<T>& gin);

template <typename T>
void deconv2d_backward_params(const Tensor<T>& gout, const Tensor<T>& x, ConvGeom g, Tensor<T>& gw,
                              Tensor<T>& gb, bool with_bias);

// 2x2 max pooling, stride 2. argmax records the winning offset (0..3) per
// output element for the backward scatter and the tangent gather.
template <typename T>
void maxpool2_forward(const Tensor<T>& x, Tensor<T>& out, std::vector<uint8_t>& argmax);

template <typename T>
void maxpool2_backward(const Tensor<T>& gout, const std::vector<uint8_t>& argmax, int in_h, int in_w,
                       Tensor<T>& gin);

// Routes a tangent through the primal argmax.
template <typename T>
void maxpool2_gather(const Tensor<T>& tx, const std::vector<uint8_t>& argmax, Tensor<T>& tout);

// Global average pooling (N,C,H,W) -> (N,C,1,1).
template <typename T>
void gap_forward(const Tensor<T>& x, Tensor<T>& out);

template <typename T>
void gap_backward(const Tensor<T>& gout, int in_h, int in_w, Tensor<T>& gin);

// ReLU; mask is 1 where input was positive.
template <typename T>
void relu_forward(const Tensor<T>& x, Tensor<T>& out, std::vector<uint8_t>& mask);

// guided=true additionally zeroes entries whose incoming gradient is
// negative (the deconvnet-style gate used by guided backprop).
template <typename T>
void relu_backward(const Tensor<T>& gout, const std::vector<uint8_t>& mask, Tensor<T>& gin,
                   bool guided);

// Batch normalization over (N,H,W) per channel.
struct BnCacheIdx {};  // marker only; caches live in layer contexts

template <typename T>
struct BnCache {
  std::vector<T> mean, invstd;  // per channel
  Tensor<T> xhat;               // normalized input (training mode)
  bool training = false;
};

template <typename T>
void bn_forward(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                Tensor<T>& run_mean, Tensor<T>& run_var, T eps, T momentum, bool training,
                bool update_running, Tensor<T>& out, BnCache<T>& cache);

template <typename T>
void bn_backward(const Tensor<T>& gout, const Tensor<T>& gamma, const BnCache<T>& cache,
                 const Tensor<T>& run_var, T eps, Tensor<T>& gin, Tensor<T>& ggamma,
                 Tensor<T>& gbeta, bool param_grads);

// Row-wise softmax on (N, C, 1, 1) logits.
template <typename T>
void softmax(const Tensor<T>& logits, Tensor<T>& probs);

// Mean cross-entropy against integer labels; also fills dlogits = (p - onehot)/N.
template <typename T>
T cross_entropy(const Tensor<T>& logits, const std::vector<int>& labels, Tensor<T>* dlogits);

}  // namespace vagan::ops
