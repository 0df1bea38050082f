// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>

#include "clda/chain.hpp"
#include "clda/corpus.hpp"
#include "clda/model.hpp"
#include "clda/rng.hpp"

namespace clda {

/// Unnormalized conditional weights for the topic label of one token, given
/// counts with that token's own contribution removed:
///   w_k = (gamma pi_jk + n_jdk) / (gamma + n_jd) * (eta + m_kv) / (V eta + m_k)
/// Strictly positive for pi > 0.
void z_conditional_weights(const CountStatistics& counts_minus_token, int doc,
                           int word, std::span<const double> pi_row,
                           const Hyperparameters& h, std::span<double> out);

/// Table-count draw: s = sum of n Bernoulli(c / (c + l - 1)) trials,
/// l = 1..n. The first trial always succeeds, so s >= 1 whenever n >= 1.
int antoniak_sample(Rng& rng, int n, double concentration);

/// Conjugate mixture draw given table totals summed over a collection's
/// documents: Dir(table_totals + alpha).
std::vector<double> sample_pi(Rng& rng, std::span<const int> table_totals,
                              double alpha);

/// One systematic-scan sweep over all tokens, resampling each label under
/// z_conditional_weights with decrement/increment count maintenance.
/// Shared by the collection-level update schemes.
void sweep_z(Rng& rng, const Corpus& corpus, const Hyperparameters& h,
             const MatD& pi, CountStatistics& counts,
             std::vector<std::vector<int>>& z);

/// Collapsed Gibbs chain on (pi, z) with auxiliary-variable Dirichlet
/// updates for pi.
ChainTrace ags_run(const Corpus& corpus, int K, const Hyperparameters& h,
                   const ChainConfig& config, const ChainInit& init = {});

}  // namespace clda
