// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "clda/chain.hpp"
#include "clda/corpus.hpp"
#include "clda/model.hpp"
#include "clda/rng.hpp"

namespace clda {

// Collection mixtures are updated in an unconstrained parameterization:
// pi_k = |varphi_k| / sum_k |varphi_k|, with iid Gamma(alpha, 1) priors on
// |varphi_k|. Magnitudes are clamped below at kVarphiFloor inside target,
// gradient, and metric evaluations; the 1/|varphi| terms are unstable next
// to the simplex boundary.
inline constexpr double kVarphiFloor = 1e-10;

/// Unnormalized log conditional density of varphi for one collection, given
/// that collection's document-topic counts.
double log_target_varphi(std::span<const double> varphi,
                         const CountStatistics& counts,
                         std::span<const int> collection_docs,
                         const Hyperparameters& h);

/// Exact gradient of log_target_varphi.
std::vector<double> grad_log_target(std::span<const double> varphi,
                                    const CountStatistics& counts,
                                    std::span<const int> collection_docs,
                                    const Hyperparameters& h);

/// Drift of the preconditioned Langevin proposal:
///   mu_k = varphi_k + (eps^2/2) |varphi_k| grad_k + (eps^2/2) sign(varphi_k)
std::vector<double> mmala_mean(std::span<const double> varphi,
                               std::span<const double> grad, double eps);

struct MmalaProposal {
  std::vector<double> varphi;
  std::vector<double> xi;  // the standard normal draws used
};

/// Draws varphi* = mu + eps * diag(|varphi|)^{1/2} xi.
MmalaProposal mmala_propose(Rng& rng, std::span<const double> varphi,
                            std::span<const double> grad, double eps);

/// log q(to <- from) under the proposal N(mu(from), eps^2 diag(|from|)),
/// including the determinant factor prod_k |from_k|^{-1/2}.
double mmala_log_density(std::span<const double> to,
                         std::span<const double> from,
                         std::span<const double> grad_from, double eps);

/// Everything that entered one accept/reject decision, so a logged decision
/// can be replayed from logged quantities.
struct MgsStepInfo {
  bool accepted = false;
  double log_target_current = 0.0;
  double log_target_proposal = 0.0;
  double log_q_forward = 0.0;
  double log_q_reverse = 0.0;
  double uniform_draw = 0.0;
};

/// One Metropolis-Hastings step on a collection's varphi; mutates varphi on
/// acceptance. Detailed balance w.r.t. log_target_varphi.
MgsStepInfo mgs_step(Rng& rng, std::vector<double>& varphi,
                     const CountStatistics& counts,
                     std::span<const int> collection_docs,
                     const Hyperparameters& h, double eps);

struct MgsConfig : ChainConfig {
  double epsilon = 0.01;
  /// Dual-averaging adaptation of epsilon during burn-in, frozen afterwards.
  bool adapt_epsilon = false;
  double target_acceptance = 0.574;
};

/// Collapsed Gibbs chain on (pi, z) with Langevin Metropolis-Hastings
/// updates for pi; the z-sweep is shared with the auxiliary-variable chain.
ChainTrace mgs_run(const Corpus& corpus, int K, const Hyperparameters& h,
                   const MgsConfig& config, const ChainInit& init = {});

}  // namespace clda
