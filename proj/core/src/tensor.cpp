#include "vagan/tensor.hpp"

#include <cassert>
#include <cmath>

namespace vagan {

template <typename T>
void axpy(T alpha, const Tensor<T>& x, Tensor<T>& y) {
  assert(x.size() == y.size());
  const T* xs = x.data();
  T* ys = y.data();
  for (size_t i = 0; i < x.size(); ++i) ys[i] += alpha * xs[i];
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  assert(a.same_shape(b));
  Tensor<T> out = a;
  const T* bs = b.data();
  T* os = out.data();
  for (size_t i = 0; i < out.size(); ++i) os[i] += bs[i];
  return out;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  assert(a.same_shape(b));
  Tensor<T> out = a;
  const T* bs = b.data();
  T* os = out.data();
  for (size_t i = 0; i < out.size(); ++i) os[i] -= bs[i];
  return out;
}

template <typename T>
void scale(Tensor<T>& a, T s) {
  T* as = a.data();
  for (size_t i = 0; i < a.size(); ++i) as[i] *= s;
}

template <typename T>
T abs_sum(const Tensor<T>& a) {
  T acc = 0;
  for (size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i]);
  return acc;
}

template <typename T>
bool all_finite(const Tensor<T>& a) {
  for (size_t i = 0; i < a.size(); ++i)
    if (!std::isfinite(a[i])) return false;
  return true;
}

template <typename T>
std::vector<T> abs_sum_per_sample(const Tensor<T>& a) {
  std::vector<T> out(a.n(), T(0));
  const size_t ss = a.sample_size();
  for (int n = 0; n < a.n(); ++n) {
    const T* p = a.sample(n);
    T acc = 0;
    for (size_t i = 0; i < ss; ++i) acc += std::abs(p[i]);
    out[n] = acc;
  }
  return out;
}

template <typename T>
std::vector<T> l2_norm_per_sample(const Tensor<T>& a) {
  std::vector<T> out(a.n(), T(0));
  const size_t ss = a.sample_size();
  for (int n = 0; n < a.n(); ++n) {
    const T* p = a.sample(n);
    T acc = 0;
    for (size_t i = 0; i < ss; ++i) acc += p[i] * p[i];
    out[n] = std::sqrt(acc);
  }
  return out;
}

#define VAGAN_INSTANTIATE(T)                                        \
  template void axpy<T>(T, const Tensor<T>&, Tensor<T>&);           \
  template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);    \
  template Tensor<T> sub<T>(const Tensor<T>&, const Tensor<T>&);    \
  template void scale<T>(Tensor<T>&, T);                            \
  template T abs_sum<T>(const Tensor<T>&);                          \
  template bool all_finite<T>(const Tensor<T>&);                    \
  template std::vector<T> abs_sum_per_sample<T>(const Tensor<T>&);  \
  template std::vector<T> l2_norm_per_sample<T>(const Tensor<T>&);

VAGAN_INSTANTIATE(float)
VAGAN_INSTANTIATE(double)
#undef VAGAN_INSTANTIATE

}  // namespace vagan
