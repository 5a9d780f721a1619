#pragma once

namespace pairq {

// Standard normal CDF via the complementary error function,
// Phi(z) = erfc(-z / sqrt(2)) / 2. Absolute error is at the level of double
// rounding (well under 1e-7); throws ValidationError on non-finite input.
double std_normal_cdf(double z);

// Standard normal density.
double std_normal_pdf(double z);

}  // namespace pairq
