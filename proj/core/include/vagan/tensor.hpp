#pragma once

#include <cassert>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace vagan {

// Dense NCHW tensor. Dense layers and per-image scalars reuse the same
// container with degenerate spatial dims (H = W = 1).
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  Tensor(int n, int c, int h, int w) : n_(n), c_(c), h_(h), w_(w), data_(size_t(n) * c * h * w) {}

  static Tensor zeros_like(const Tensor& other) { return Tensor(other.n_, other.c_, other.h_, other.w_); }

  int n() const { return n_; }
  int c() const { return c_; }
  int h() const { return h_; }
  int w() const { return w_; }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  size_t plane() const { return size_t(h_) * w_; }          // pixels per channel
  size_t sample_size() const { return size_t(c_) * plane(); }  // values per sample

  bool same_shape(const Tensor& o) const {
    return n_ == o.n_ && c_ == o.c_ && h_ == o.h_ && w_ == o.w_;
  }
  std::string shape_str() const {
    return "(" + std::to_string(n_) + "," + std::to_string(c_) + "," + std::to_string(h_) + "," +
           std::to_string(w_) + ")";
  }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& vec() { return data_; }
  const std::vector<T>& vec() const { return data_; }

  T& operator[](size_t i) { return data_[i]; }
  const T& operator[](size_t i) const { return data_[i]; }

  T& at(int n, int c, int h, int w) { return data_[idx(n, c, h, w)]; }
  const T& at(int n, int c, int h, int w) const { return data_[idx(n, c, h, w)]; }

  size_t idx(int n, int c, int h, int w) const {
    assert(n < n_ && c < c_ && h < h_ && w < w_);
    return ((size_t(n) * c_ + c) * h_ + h) * w_ + w;
  }

  T* sample(int n) { return data_.data() + size_t(n) * sample_size(); }
  const T* sample(int n) const { return data_.data() + size_t(n) * sample_size(); }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
  void zero() { fill(T(0)); }

  // Reinterpret as (N, C*H*W, 1, 1) without copying. Used to feed dense heads.
  Tensor flattened() && = delete;
  Tensor as_flat() const {
    Tensor out = *this;
    out.c_ = int(sample_size());
    out.h_ = 1;
    out.w_ = 1;
    return out;
  }
  // Reinterpret flat data with a new shape of identical total size.
  Tensor reshaped(int n, int c, int h, int w) const {
    assert(size_t(n) * c * h * w == size());
    Tensor out = *this;
    out.n_ = n;
    out.c_ = c;
    out.h_ = h;
    out.w_ = w;
    return out;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(n_, c_, h_, w_);
    for (size_t i = 0; i < size(); ++i) out[i] = static_cast<U>(data_[i]);
    return out;
  }

 private:
  int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
  std::vector<T> data_;
};

// Elementwise helpers shared by trainers and attribution code.
template <typename T>
void axpy(T alpha, const Tensor<T>& x, Tensor<T>& y);  // y += alpha * x

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
void scale(Tensor<T>& a, T s);

template <typename T>
T abs_sum(const Tensor<T>& a);

template <typename T>
bool all_finite(const Tensor<T>& a);

// Per-sample sum of |values|; returns one value per batch entry.
template <typename T>
std::vector<T> abs_sum_per_sample(const Tensor<T>& a);

// Per-sample Euclidean norm.
template <typename T>
std::vector<T> l2_norm_per_sample(const Tensor<T>& a);

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace vagan
