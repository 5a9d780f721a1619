#include "pairq/normal.hpp"

#include <cmath>
#include <numbers>

#include "pairq/errors.hpp"

namespace pairq {

double std_normal_cdf(double z) {
  if (!std::isfinite(z)) throw ValidationError("std_normal_cdf: non-finite input");
  return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

double std_normal_pdf(double z) {
  return std::exp(-0.5 * z * z) * (0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
}

}  // namespace pairq
