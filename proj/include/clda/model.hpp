// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "clda/corpus.hpp"
#include "clda/mat.hpp"
#include "clda/rng.hpp"
#include "clda/simplex.hpp"

namespace clda {

/// Model hyperparameters; all strictly positive.
struct Hyperparameters {
  double alpha = 1.0;
  double gamma = 1.0;
  double eta = 1.0;

  void validate() const;
};

/// Sufficient statistics maintained incrementally during sampling.
/// doc_topic(d, k) counts tokens of document d assigned to topic k,
/// topic_term(k, v) counts corpus tokens of term v assigned to topic k.
/// The per-(doc, topic, term) tensor is never materialized; every algorithm
/// only consumes these marginals.
struct CountStatistics {
  MatI doc_topic;               // D x K
  std::vector<int> doc_total;   // D
  MatI topic_term;              // K x V
  std::vector<int> topic_total; // K

  CountStatistics() = default;
  CountStatistics(std::size_t num_docs, std::size_t num_topics, std::size_t vocab);

  void add(int doc, int topic, int word);
  void remove(int doc, int topic, int word);

  /// Checks the count identities exactly (integer arithmetic).
  bool consistent() const;

  bool operator==(const CountStatistics&) const = default;
};

/// Builds counts from scratch; the oracle against incremental maintenance.
CountStatistics recompute_counts(const Corpus& corpus,
                                 const std::vector<std::vector<int>>& z, int K);

/// Full latent state: topics, collection and document mixtures, and token
/// topic labels (0-based, aligned with corpus token positions).
struct ModelState {
  int K = 0;
  std::vector<SimplexVector> beta;   // K rows over V
  std::vector<SimplexVector> pi;     // J rows over K
  std::vector<SimplexVector> theta;  // one row per document
  std::vector<std::vector<int>> z;
};

/// Unnormalized log posterior density of the full state (additive constants
/// dropped; all uses are ratios or differences). Throws NumericError if the
/// result is not finite.
double log_joint(const Corpus& corpus, const ModelState& state,
                 const Hyperparameters& h);

/// Unnormalized log posterior of (pi, z) with theta and beta integrated out.
/// This is the density the collapsed chains target and the quantity traced
/// per iteration.
double log_collapsed_posterior(const Corpus& corpus,
                               const CountStatistics& counts, const MatD& pi,
                               const Hyperparameters& h);

/// One exact conditional draw of (theta, beta) given counts and pi; augments
/// a chain on (pi, z) to the full state.
void sample_theta_beta(Rng& rng, const CountStatistics& counts, const MatD& pi,
                       const std::vector<int>& collection_of,
                       const Hyperparameters& h, MatD* theta, MatD* beta);

/// Everything needed to resume a chain bit-exactly.
struct Checkpoint {
  std::string algo;
  int K = 0;
  Hyperparameters h;
  int iteration = 0;
  std::vector<std::vector<int>> z;
  MatD pi;
  std::array<std::string, 5> rng_state;
  std::vector<double> epsilons;  // MGS per-collection step sizes in effect
  MatD varphi;                   // MGS unconstrained state (empty otherwise)
};

void save_checkpoint(const Checkpoint& cp, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace clda
