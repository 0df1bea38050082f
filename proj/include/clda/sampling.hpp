// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>

#include "clda/rng.hpp"
#include "clda/simplex.hpp"

namespace clda {

/// Dirichlet draw as a simplex point; every parameter must be > 0.
inline SimplexVector sample_dirichlet(Rng& rng, std::span<const double> params) {
  return SimplexVector(rng.dirichlet(params));
}

/// Categorical index draw proportional to the (unnormalized) weights.
inline int sample_categorical(Rng& rng, std::span<const double> weights) {
  return rng.categorical(weights);
}

}  // namespace clda
