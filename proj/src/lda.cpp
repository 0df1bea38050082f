// SPDX-License-Identifier: Apache-2.0
#include "clda/lda.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "clda/errors.hpp"

namespace clda {

void lda_token_weights(const CountStatistics& counts, int doc, int word,
                       double alpha, double eta, std::span<double> out) {
  const auto V = counts.topic_term.cols();
  const double term_prior = static_cast<double>(V) * eta;
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = (alpha + counts.doc_topic(doc, k)) *
             (eta + counts.topic_term(k, word)) /
             (term_prior + counts.topic_total[k]);
  }
}

namespace {

double lda_log_collapsed(const CountStatistics& counts, double alpha, double eta) {
  const auto K = counts.topic_term.rows();
  const auto V = counts.topic_term.cols();
  double total = 0.0;
  const double lg_alpha = std::lgamma(alpha);
  for (std::size_t d = 0; d < counts.doc_topic.rows(); ++d) {
    for (std::size_t k = 0; k < K; ++k) {
      const int n = counts.doc_topic(d, k);
      if (n > 0) total += std::lgamma(alpha + n) - lg_alpha;
    }
    total -= std::lgamma(static_cast<double>(K) * alpha + counts.doc_total[d]);
  }
  const double lg_eta = std::lgamma(eta);
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t v = 0; v < V; ++v) {
      const int m = counts.topic_term(k, v);
      if (m > 0) total += std::lgamma(eta + m) - lg_eta;
    }
    total -= std::lgamma(static_cast<double>(V) * eta + counts.topic_total[k]);
  }
  return total;
}

}  // namespace

ChainTrace cgs_run(const Corpus& corpus, int K, double alpha, double eta,
                   const ChainConfig& config, const ChainInit& init) {
  if (K < 1) throw std::invalid_argument("cgs_run: K must be >= 1");
  if (!(alpha > 0.0) || !(eta > 0.0)) {
    throw std::invalid_argument("cgs_run: hyperparameters must be positive");
  }
  config.validate();
  corpus.validate();

  Rng rng = init.rng_state ? Rng::deserialize(*init.rng_state) : Rng(config.seed);
  std::vector<std::vector<int>> z;
  if (init.z) {
    z = *init.z;
  } else {
    z.resize(corpus.num_docs());
    for (std::size_t d = 0; d < corpus.num_docs(); ++d) {
      z[d].resize(corpus.docs[d].size());
      for (auto& label : z[d]) label = static_cast<int>(rng.uniform() * K);
    }
  }
  auto counts = recompute_counts(corpus, z, K);

  ChainTrace trace;
  std::vector<double> weights(K);
  const auto start = std::chrono::steady_clock::now();
  for (int iter = init.start_iteration + 1; iter <= config.iterations; ++iter) {
    for (std::size_t d = 0; d < corpus.num_docs(); ++d) {
      const int doc = static_cast<int>(d);
      const auto& words = corpus.docs[d];
      auto& labels = z[d];
      for (std::size_t i = 0; i < words.size(); ++i) {
        const int v = words[i];
        counts.remove(doc, labels[i], v);
        lda_token_weights(counts, doc, v, alpha, eta, weights);
        const int k = rng.categorical(weights);
        counts.add(doc, k, v);
        labels[i] = k;
      }
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    trace.rows.push_back({iter, lda_log_collapsed(counts, alpha, eta), seconds});
    if (iter > config.burn_in && (iter - config.burn_in) % config.save_every == 0) {
      trace.samples.push_back({iter, MatD{}, counts.doc_topic, counts.doc_total,
                               counts.topic_term, counts.topic_total});
    }
  }
  trace.final_z = std::move(z);
  trace.final_rng_state = rng.serialize();
  return trace;
}

MatD estimate_collection_mixture_from_z(const std::vector<std::vector<int>>& z,
                                        const std::vector<int>& collection_of,
                                        int num_collections, int K) {
  MatD mixture(num_collections, K, 0.0);
  std::vector<long long> totals(num_collections, 0);
  for (std::size_t d = 0; d < z.size(); ++d) {
    const int j = collection_of[d];
    for (int label : z[d]) {
      mixture(j, label) += 1.0;
      ++totals[j];
    }
  }
  for (int j = 0; j < num_collections; ++j) {
    if (totals[j] == 0) {
      throw DataError("estimate_collection_mixture_from_z: collection " +
                      std::to_string(j + 1) + " is empty");
    }
    for (int k = 0; k < K; ++k) mixture(j, k) /= static_cast<double>(totals[j]);
  }
  return mixture;
}

}  // namespace clda
