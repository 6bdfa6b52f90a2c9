#pragma once

#include <string>
#include <vector>

#include "vagan/layers.hpp"

namespace vagan::models {

// Adam over a ParamTable. Moment arrays are kept in table order; the step
// counter is part of the serialized state.
template <typename T>
class Adam {
 public:
  Adam() = default;
  Adam(const ParamTable<T>& table, T lr, T beta1, T beta2, T eps = T(1e-8));

  // Applies one update from the accumulated gradients (does not clear them).
  void step(ParamTable<T>& table);

  T lr = T(1e-3), beta1 = T(0.9), beta2 = T(0.999), eps = T(1e-8);
  int64_t t = 0;
  std::vector<std::vector<T>> m, v;  // one slab per parameter
};

}  // namespace vagan::models
