// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "clda/chain.hpp"
#include "clda/corpus.hpp"
#include "clda/model.hpp"
#include "clda/rng.hpp"

namespace clda {

/// Token weights for the baseline collapsed Gibbs sampler:
///   w_k = (alpha + n_dk) * (eta + m_kv) / (V eta + m_k)
void lda_token_weights(const CountStatistics& counts_minus_token, int doc,
                       int word, double alpha, double eta,
                       std::span<double> out);

/// Baseline LDA collapsed Gibbs chain. Collections are ignored; the corpus
/// is treated as flat. Samples carry pi as a 0x0 matrix.
ChainTrace cgs_run(const Corpus& corpus, int K, double alpha, double eta,
                   const ChainConfig& config, const ChainInit& init = {});

/// Normalized topic-frequency histogram of each collection's token labels;
/// how a flat model yields collection-level mixtures. Throws DataError for
/// an empty collection.
MatD estimate_collection_mixture_from_z(const std::vector<std::vector<int>>& z,
                                        const std::vector<int>& collection_of,
                                        int num_collections, int K);

}  // namespace clda
