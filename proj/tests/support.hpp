#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>

#include "rgbdseg/tensor.hpp"

namespace testing {

using rgbdseg::Shape;
using rgbdseg::Tensor;

inline std::mt19937_64 rng_for(std::uint64_t seed) { return std::mt19937_64(seed); }

inline Tensor random_tensor(const Shape& shape, std::mt19937_64& rng, double lo = -1.0,
                            double hi = 1.0) {
  Tensor t(shape);
  std::uniform_real_distribution<double> u(lo, hi);
  for (double& v : t.values()) v = u(rng);
  return t;
}

/// |a - n| / max(|a|, |n|, 1e-8).
inline double rel_err(double analytic, double numeric) {
  return std::fabs(analytic - numeric) /
         std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
}

/// Central difference of `f` with respect to `x`, restoring x afterwards.
inline double central_diff(const std::function<double()>& f, double& x, double step = 1e-5) {
  const double saved = x;
  x = saved + step;
  const double up = f();
  x = saved - step;
  const double down = f();
  x = saved;
  return (up - down) / (2.0 * step);
}

/// Largest rel_err between `analytic` and central differences of `f` over
/// every entry of `param`.
inline double max_grad_error(const std::function<double()>& f, Tensor& param, const Tensor& analytic,
                             double step = 1e-5) {
  double worst = 0.0;
  for (std::size_t i = 0; i < param.size(); ++i) {
    worst = std::max(worst, rel_err(analytic[i], central_diff(f, param[i], step)));
  }
  return worst;
}

/// Sum of elementwise products, the scalar probe used by gradient checks.
inline double dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

}  // namespace testing
