// SPDX-License-Identifier: Apache-2.0
#include "clda/simplex.hpp"

#include <cmath>
#include <stdexcept>

namespace clda {

SimplexVector::SimplexVector(std::vector<double> values) : v_(std::move(values)) {
  if (v_.empty()) throw std::domain_error("SimplexVector: empty vector");
  double sum = 0.0;
  for (double x : v_) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
      throw std::domain_error("SimplexVector: entries must be finite and non-negative");
    }
    sum += x;
  }
  if (sum <= 0.0) throw std::domain_error("SimplexVector: entries sum to zero");
  for (double& x : v_) x /= sum;
}

SimplexVector SimplexVector::uniform(std::size_t dim) {
  return SimplexVector(std::vector<double>(dim, 1.0));
}

bool is_unit_simplex(std::span<const double> v, double tol) {
  double sum = 0.0;
  for (double x : v) {
    if (x < 0.0 || !std::isfinite(x)) return false;
    sum += x;
  }
  return std::abs(sum - 1.0) <= tol;
}

double l1_distance(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]);
  return d;
}

}  // namespace clda
