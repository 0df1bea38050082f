// SPDX-License-Identifier: Apache-2.0
#include "clda/special_functions.hpp"

#include <cmath>
#include <stdexcept>

// Polygamma evaluation via upward recurrence into the asymptotic regime,
// then a Bernoulli-number tail. Self-contained and accurate to well below
// the 1e-10 / 1e-8 targets on (0, inf).

namespace clda {

namespace {
// Bernoulli numbers B2, B4, ..., B14.
constexpr double kB[7] = {1.0 / 6.0,   -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0,
                          5.0 / 66.0, -691.0 / 2730.0, 7.0 / 6.0};
constexpr double kShift = 12.0;

void check_positive(double x, const char* fn) {
  if (!(x > 0.0)) {
    throw std::domain_error(std::string(fn) + ": argument must be positive");
  }
}
}  // namespace

double digamma(double x) {
  check_positive(x, "digamma");
  double result = 0.0;
  while (x < kShift) {
    result -= 1.0 / x;
    x += 1.0;
  }
  // psi(x) ~ ln x - 1/(2x) - sum B_{2n} / (2n x^{2n})
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  double term = inv2;
  result += std::log(x) - 0.5 * inv;
  for (int n = 0; n < 7; ++n) {
    result -= kB[n] * term / (2.0 * (n + 1));
    term *= inv2;
  }
  return result;
}

double trigamma(double x) {
  check_positive(x, "trigamma");
  double result = 0.0;
  while (x < kShift) {
    result += 1.0 / (x * x);
    x += 1.0;
  }
  // psi'(x) ~ 1/x + 1/(2x^2) + sum B_{2n} / x^{2n+1}
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  double term = inv * inv2;
  result += inv + 0.5 * inv2;
  for (int n = 0; n < 7; ++n) {
    result += kB[n] * term;
    term *= inv2;
  }
  return result;
}

double tetragamma(double x) {
  check_positive(x, "tetragamma");
  double result = 0.0;
  while (x < kShift) {
    result -= 2.0 / (x * x * x);
    x += 1.0;
  }
  // psi''(x) ~ -1/x^2 - 1/x^3 - sum (2n+1) B_{2n} / x^{2n+2}
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  double term = inv2 * inv2;
  result += -inv2 - inv * inv2;
  for (int n = 0; n < 7; ++n) {
    result -= (2.0 * n + 3.0) * kB[n] * term;
    term *= inv2;
  }
  return result;
}

}  // namespace clda
