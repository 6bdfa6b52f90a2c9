#pragma once

// Test-only reference implementations, kept independent of the library's
// im2col/GEMM code paths. Deliberately naive loops.

#include <cmath>
#include <vector>

#include "vagan/tensor.hpp"

namespace oracle {

using vagan::Tensor;

// Direct convolution, weight (C_out, C_in, K, K), zero padding.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride, int pad) {
  const int k = w.h();
  const int oh = (x.h() + 2 * pad - k) / stride + 1;
  const int ow = (x.w() + 2 * pad - k) / stride + 1;
  Tensor<T> out(x.n(), w.n(), oh, ow);
  for (int n = 0; n < x.n(); ++n)
    for (int co = 0; co < w.n(); ++co)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          T acc = b.size() ? b[size_t(co)] : T(0);
          for (int ci = 0; ci < x.c(); ++ci)
            for (int kh = 0; kh < k; ++kh)
              for (int kw = 0; kw < k; ++kw) {
                int iy = oy * stride - pad + kh;
                int ix = ox * stride - pad + kw;
                if (iy < 0 || iy >= x.h() || ix < 0 || ix >= x.w()) continue;
                acc += x.at(n, ci, iy, ix) * w.at(co, ci, kh, kw);
              }
          out.at(n, co, oy, ox) = acc;
        }
  return out;
}

// Direct transposed convolution, weight (C_in, C_out, K, K).
template <typename T>
Tensor<T> deconv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride, int pad) {
  const int k = w.h();
  const int oh = (x.h() - 1) * stride - 2 * pad + k;
  const int ow = (x.w() - 1) * stride - 2 * pad + k;
  Tensor<T> out(x.n(), w.c(), oh, ow);
  for (int n = 0; n < x.n(); ++n) {
    for (int co = 0; co < w.c(); ++co)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) out.at(n, co, oy, ox) = b.size() ? b[size_t(co)] : T(0);
    for (int ci = 0; ci < x.c(); ++ci)
      for (int iy = 0; iy < x.h(); ++iy)
        for (int ix = 0; ix < x.w(); ++ix) {
          T v = x.at(n, ci, iy, ix);
          for (int co = 0; co < w.c(); ++co)
            for (int kh = 0; kh < k; ++kh)
              for (int kw = 0; kw < k; ++kw) {
                int oy = iy * stride - pad + kh;
                int ox = ix * stride - pad + kw;
                if (oy < 0 || oy >= oh || ox < 0 || ox >= ow) continue;
                out.at(n, co, oy, ox) += v * w.at(ci, co, kh, kw);
              }
        }
  }
  return out;
}

// Central finite difference of scalar_fn w.r.t. buf[i].
template <typename T, typename Fn>
double central_diff(T* slot, Fn scalar_fn, double h) {
  const T keep = *slot;
  *slot = T(double(keep) + h);
  const double fp = scalar_fn();
  *slot = T(double(keep) - h);
  const double fm = scalar_fn();
  *slot = keep;
  return (fp - fm) / (2.0 * h);
}

inline double rel_err(double a, double b) {
  const double denom = std::max(std::abs(a), std::abs(b));
  return denom == 0 ? 0.0 : std::abs(a - b) / denom;
}

}  // namespace oracle
