// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "clda/mat.hpp"
#include "clda/model.hpp"

namespace clda {

/// Loop control shared by the Gibbs chains.
struct ChainConfig {
  int iterations = 1000;
  int burn_in = 500;
  int save_every = 10;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Saved post-burn-in state: the collection mixtures plus the sufficient
/// statistics of z. Everything downstream (perplexity, hyperparameter
/// estimation, mixture estimates) consumes these rather than raw labels.
struct ChainSample {
  int iteration = 0;
  MatD pi;
  MatI doc_topic;
  std::vector<int> doc_total;
  MatI topic_term;
  std::vector<int> topic_total;
};

struct TraceRow {
  int iteration = 0;
  double log_joint = 0.0;
  double seconds = 0.0;
  double acceptance_rate = -1.0;  // MGS only
  double epsilon = -1.0;          // MGS only
};

struct MgsDiagnostics {
  long long proposals = 0;
  long long accepts = 0;
  double acceptance_rate() const {
    return proposals == 0 ? 0.0 : static_cast<double>(accepts) / static_cast<double>(proposals);
  }
};

/// Optional warm start; absent pieces are drawn from the model prior.
struct ChainInit {
  std::optional<std::vector<std::vector<int>>> z;
  std::optional<MatD> pi;
  std::optional<std::array<std::string, 5>> rng_state;
  int start_iteration = 0;
  std::optional<std::vector<double>> epsilons;  // per-collection step sizes
  /// Unconstrained mixture state; bit-exact resume of the Langevin chain
  /// needs it because pi only preserves varphi up to scale and sign.
  std::optional<MatD> varphi;
};

struct ChainTrace {
  std::vector<TraceRow> rows;
  std::vector<ChainSample> samples;
  std::vector<MatD> pi_history;  // one entry per iteration
  MatD final_pi;
  std::vector<std::vector<int>> final_z;
  std::array<std::string, 5> final_rng_state;
  std::vector<double> final_epsilons;
  MatD final_varphi;  // Langevin chains only
  MgsDiagnostics diagnostics;

  /// Columns: iteration, log_joint, [acceptance_rate, epsilon,] seconds.
  /// Timing stays in the last column so diff-based checks can strip it.
  void write_csv(const std::string& path, bool mgs_columns) const;

  void write_pi_history_csv(const std::string& path) const;
};

}  // namespace clda
