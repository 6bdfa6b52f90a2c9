#include "vagan/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace vagan::models {

template <typename T>
Adam<T>::Adam(const ParamTable<T>& table, T lr_, T beta1_, T beta2_, T eps_)
    : lr(lr_), beta1(beta1_), beta2(beta2_), eps(eps_) {
  m.resize(table.params.size());
  v.resize(table.params.size());
  for (size_t i = 0; i < table.params.size(); ++i) {
    m[i].assign(table.params[i].value->size(), T(0));
    v[i].assign(table.params[i].value->size(), T(0));
  }
}

template <typename T>
void Adam<T>::step(ParamTable<T>& table) {
  if (m.size() != table.params.size()) throw std::logic_error("adam: state/table mismatch");
  ++t;
  const T bc1 = T(1) - T(std::pow(double(beta1), double(t)));
  const T bc2 = T(1) - T(std::pow(double(beta2), double(t)));
  for (size_t i = 0; i < table.params.size(); ++i) {
    T* p = table.params[i].value->data();
    const T* g = table.params[i].grad->data();
    T* mi = m[i].data();
    T* vi = v[i].data();
    const size_t n = table.params[i].value->size();
    for (size_t j = 0; j < n; ++j) {
      mi[j] = beta1 * mi[j] + (T(1) - beta1) * g[j];
      vi[j] = beta2 * vi[j] + (T(1) - beta2) * g[j] * g[j];
      const T mhat = mi[j] / bc1;
      const T vhat = vi[j] / bc2;
      p[j] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

template class Adam<float>;
template class Adam<double>;

}  // namespace vagan::models
