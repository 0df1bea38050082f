// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace clda {

/// Deterministic random stream (xoshiro256++ core, splitmix64 seeding).
///
/// The same seed and the same call sequence reproduce bit-identical output
/// on any platform; all variate transforms are implemented here rather than
/// delegated to <random> distributions, whose algorithms are not pinned by
/// the standard. Sub-streams for chains, collections, or replicates are
/// derived with split(), which depends only on the original seed and the
/// stream id, never on how much the parent has consumed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();

  /// Standard normal (Box-Muller, one variate per call).
  double normal();

  /// Gamma(shape, 1), shape > 0 (Marsaglia-Tsang squeeze).
  double gamma(double shape);

  /// Bernoulli(p).
  bool bernoulli(double p);

  /// Index k with probability weights[k] / sum(weights). Weights must be
  /// non-negative and not all zero; throws std::domain_error otherwise.
  int categorical(std::span<const double> weights);

  /// Dirichlet draw by gamma normalization; every parameter must be > 0.
  std::vector<double> dirichlet(std::span<const double> params);

  /// Independent sub-stream identified by `stream`, derived from the
  /// original seed only.
  Rng split(std::uint64_t stream) const;

  std::uint64_t seed() const { return seed_; }

  /// State serialization for bit-exact checkpoint/resume.
  std::array<std::string, 5> serialize() const;
  static Rng deserialize(const std::array<std::string, 5>& fields);

  bool operator==(const Rng&) const = default;

 private:
  Rng() = default;
  std::uint64_t seed_ = 0;
  std::array<std::uint64_t, 4> state_{};
};

}  // namespace clda
