#pragma once

#include "rcabs/types.hpp"

namespace rcabs {

/// Elementwise tanh via the vectorized exponential, tanh(u) = 1 - 2/(e^{2u}+1).
/// Absolute error is a few ulp of 1; saturates cleanly to +-1.
inline void tanh_inplace(Eigen::Ref<Vec> u) {
  u = 1.0 - 2.0 / ((2.0 * u.array()).exp() + 1.0);
}

/// False for any entry that is NaN or exceeds kDivergenceBound in magnitude.
template <typename Derived>
bool bounded(const Eigen::DenseBase<Derived>& m) {
  return (m.derived().array().abs() <= kDivergenceBound).all();
}

}  // namespace rcabs
