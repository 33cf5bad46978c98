#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "gere/layers.hpp"

namespace gere::testing {

inline double relative_error(double analytic, double numeric) {
  double scale = std::max(std::abs(analytic), std::abs(numeric));
  if (scale < 1e-10) return 0.0;
  return std::abs(analytic - numeric) / scale;
}

// Largest relative error between `analytic` and central differences of
// `loss` with respect to every entry of `param`.
inline double max_fd_error(Matrix<double>& param, const Matrix<double>& analytic,
                           const std::function<double()>& loss, double eps = 1e-6) {
  double worst = 0;
  for (Eigen::Index i = 0; i < param.size(); ++i) {
    const double saved = param.data()[i];
    param.data()[i] = saved + eps;
    const double up = loss();
    param.data()[i] = saved - eps;
    const double down = loss();
    param.data()[i] = saved;
    worst = std::max(worst, relative_error(analytic.data()[i], (up - down) / (2 * eps)));
  }
  return worst;
}

}  // namespace gere::testing
