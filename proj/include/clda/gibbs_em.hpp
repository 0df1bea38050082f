// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "clda/chain.hpp"
#include "clda/corpus.hpp"

namespace clda {

/// Fixed-point map for the topic smoothing parameter:
///   eta' = (eta/V) * sum over samples, topics, terms of
///          [psi(m_kv + eta) - psi(eta)]
///        / sum over samples, topics of [psi(m_k + V eta) - psi(V eta)]
/// Throws DataError when every count is zero (the ratio degenerates).
double fixed_point_eta(const std::vector<ChainSample>& samples, double eta,
                       int vocab_size);

/// Fixed-point map for the document concentration:
///   gamma' = gamma * sum_{s,j,d,k} pi_jk [psi(n_jdk + gamma pi_jk) - psi(gamma pi_jk)]
///          / sum_{s,j,d} [psi(n_jd + gamma) - psi(gamma)]
/// `collection_of` maps documents to collections for the pi lookup.
double fixed_point_gamma(const std::vector<ChainSample>& samples, double gamma,
                         const std::vector<int>& collection_of);

struct GibbsEmConfig {
  int samples_per_estep = 5;
  int inner_burn_in = 200;
  int inner_thin = 10;
  int outer_max_iterations = 30;
  double tol = 1e-3;        // outer relative change on (eta, gamma)
  double inner_tol = 1e-6;  // fixed-point convergence inside the M-step
  double alpha = 1.0;       // held fixed throughout
  double eta0 = 1.0;
  double gamma0 = 1.0;
  std::uint64_t seed = 0;
};

struct GibbsEmResult {
  /// One entry per outer iteration (eta_t, gamma_t), starting at t = 1.
  std::vector<std::pair<double, double>> trajectory;
  double eta = 0.0;
  double gamma = 0.0;
  bool converged = false;
};

/// Alternates sampling the collapsed chain at the current hyperparameters
/// with fixed-point maximization of (eta, gamma) over the collected samples.
/// The chain state persists across outer iterations; every E-step re-burns
/// `inner_burn_in` sweeps under the new hyperparameters before collecting.
GibbsEmResult gibbs_em_run(const Corpus& corpus, int K,
                           const GibbsEmConfig& config);

struct LdaHyperEstimate {
  double eta = 0.0;
  double alpha = 0.0;
  bool converged = false;
};

/// The analogous estimation for the flat baseline model: eta from the
/// topic-term counts and alpha from the document-topic counts, both via the
/// same symmetric-Dirichlet fixed point.
LdaHyperEstimate lda_estimate_hyper(const Corpus& corpus, int K,
                                    const GibbsEmConfig& config);

}  // namespace clda
