// SPDX-License-Identifier: Apache-2.0
#include "clda/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace clda {

namespace {

std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed) {
  std::uint64_t x = seed;
  for (auto& s : state_) s = splitmix64(x);
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::gamma(double shape) {
  if (!(shape > 0.0)) {
    throw std::domain_error("Rng::gamma: shape must be positive");
  }
  if (shape < 1.0) {
    // Boost a Gamma(shape + 1) draw down.
    const double g = gamma(shape + 1.0);
    const double u = 1.0 - uniform();
    return g * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x;
    double v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = 1.0 - uniform();  // (0, 1], safe to log
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

bool Rng::bernoulli(double p) { return uniform() < p; }

int Rng::categorical(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0 || !std::isfinite(w)) {
      throw std::domain_error("Rng::categorical: weights must be finite and non-negative");
    }
    total += w;
  }
  if (total <= 0.0) {
    throw std::domain_error("Rng::categorical: weights sum to zero");
  }
  const double target = uniform() * total;
  double cum = 0.0;
  for (std::size_t k = 0; k + 1 < weights.size(); ++k) {
    cum += weights[k];
    if (target < cum) return static_cast<int>(k);
  }
  return static_cast<int>(weights.size()) - 1;
}

std::vector<double> Rng::dirichlet(std::span<const double> params) {
  for (double a : params) {
    if (!(a > 0.0)) {
      throw std::domain_error("Rng::dirichlet: parameters must be positive");
    }
  }
  std::vector<double> draw(params.size());
  for (int attempt = 0; attempt < 100; ++attempt) {
    double sum = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
      draw[i] = gamma(params[i]);
      sum += draw[i];
    }
    if (sum > 0.0) {
      for (double& v : draw) v /= sum;
      return draw;
    }
    // All gamma draws underflowed (tiny shapes); retry.
  }
  throw std::domain_error("Rng::dirichlet: degenerate draw");
}

Rng Rng::split(std::uint64_t stream) const {
  std::uint64_t x = seed_ ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
  return Rng(splitmix64(x));
}

std::array<std::string, 5> Rng::serialize() const {
  return {std::to_string(seed_), std::to_string(state_[0]),
          std::to_string(state_[1]), std::to_string(state_[2]),
          std::to_string(state_[3])};
}

Rng Rng::deserialize(const std::array<std::string, 5>& fields) {
  Rng r;
  r.seed_ = std::stoull(fields[0]);
  for (int i = 0; i < 4; ++i) r.state_[i] = std::stoull(fields[i + 1]);
  return r;
}

}  // namespace clda
