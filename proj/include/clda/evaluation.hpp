// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "clda/chain.hpp"
#include "clda/corpus.hpp"
#include "clda/mat.hpp"
#include "clda/model.hpp"

namespace clda {

/// Conditional-expectation estimates given one saved (pi, z) sample:
///   theta_dk = (n_dk + gamma pi_jk) / (n_d + gamma)
///   beta_kv  = (m_kv + eta) / (m_k + V eta)
/// Rows are valid simplex vectors by construction.
MatD rao_blackwell_theta(const ChainSample& sample,
                         const std::vector<int>& collection_of,
                         const Hyperparameters& h);
MatD rao_blackwell_beta(const ChainSample& sample, double eta);

/// Flat-model analogue with theta_dk = (n_dk + alpha) / (n_d + K alpha).
MatD rao_blackwell_theta_lda(const ChainSample& sample, double alpha);

/// Per-word held-out perplexity, exp(-mean log p), with the predictive
/// probability of each test word averaged over the saved samples of a chain
/// trained on the training words only. Throws DataError on an empty test
/// set.
double perplexity_clda(const Corpus& corpus, const HeldOutSplit& split,
                       const std::vector<ChainSample>& samples,
                       const Hyperparameters& h);

double perplexity_lda(const Corpus& corpus, const HeldOutSplit& split,
                      const std::vector<ChainSample>& samples, double alpha,
                      double eta);

/// Document frequencies over the given documents (all documents when `docs`
/// is empty): df(v) counts documents containing v, and postings give the
/// sorted document list per term for co-frequency queries.
struct DocumentFrequencies {
  std::vector<std::vector<int>> postings;

  int df(int term) const { return static_cast<int>(postings[term].size()); }
  int codf(int term_a, int term_b) const;
};

DocumentFrequencies document_frequencies(const Corpus& corpus,
                                         const std::vector<int>& docs = {});

/// Top-m term ids of a topic row, probability descending, ties broken by
/// ascending term id.
std::vector<int> top_terms(std::span<const double> beta_row, int m);

/// Co-document-frequency coherence of one topic's top-m terms:
///   sum_{i=2..m} sum_{j<i} log((codf(v_i, v_j) + 1) / df(v_j))
/// Throws DataError if a top term appears in no document.
double topic_coherence(std::span<const double> beta_row,
                       const DocumentFrequencies& freqs, int m);

/// Tokens assigned to each topic, from the final counts of a sample.
std::vector<int> topic_size(const ChainSample& sample);

/// Matches candidate rows to reference rows by greedy minimum-L1 pairing
/// without replacement; falls back to the identity permutation when that is
/// no worse. Returns perm with perm[r] = candidate row assigned to reference
/// row r; always a bijection, and the total matched distance never exceeds
/// the identity assignment's.
std::vector<int> align_topics(const MatD& reference, const MatD& candidate);

/// Symmetric K x K matrix of L1 distances between topic rows.
MatD topic_distance_matrix(const MatD& beta);

/// Mean of a quantity over saved samples (e.g. averaged RB beta rows).
MatD average_rao_blackwell_beta(const std::vector<ChainSample>& samples,
                                double eta);
MatD average_rao_blackwell_theta(const std::vector<ChainSample>& samples,
                                 const std::vector<int>& collection_of,
                                 const Hyperparameters& h);

}  // namespace clda
