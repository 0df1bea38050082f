// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace clda {

/// A point on the probability simplex: non-negative entries summing to one.
/// The constructor renormalizes, so the invariant holds for any valid input;
/// negative or all-zero input throws std::domain_error.
class SimplexVector {
 public:
  explicit SimplexVector(std::vector<double> values);

  static SimplexVector uniform(std::size_t dim);

  double operator[](std::size_t k) const { return v_[k]; }
  std::size_t size() const { return v_.size(); }
  const std::vector<double>& values() const { return v_; }

  bool operator==(const SimplexVector&) const = default;

 private:
  std::vector<double> v_;
};

/// Checks the simplex invariant to the given absolute tolerance.
bool is_unit_simplex(std::span<const double> v, double tol = 1e-12);

/// L1 distance between two vectors of equal length.
double l1_distance(std::span<const double> a, std::span<const double> b);

}  // namespace clda
