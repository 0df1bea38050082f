// SPDX-License-Identifier: Apache-2.0
#include "clda/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "clda/errors.hpp"
#include "clda/simplex.hpp"

namespace clda {

MatD rao_blackwell_theta(const ChainSample& sample,
                         const std::vector<int>& collection_of,
                         const Hyperparameters& h) {
  const auto D = sample.doc_topic.rows();
  const auto K = sample.doc_topic.cols();
  MatD theta(D, K);
  for (std::size_t d = 0; d < D; ++d) {
    const int j = collection_of[d];
    const double denom = sample.doc_total[d] + h.gamma;
    for (std::size_t k = 0; k < K; ++k) {
      theta(d, k) = (sample.doc_topic(d, k) + h.gamma * sample.pi(j, k)) / denom;
    }
  }
  return theta;
}

MatD rao_blackwell_beta(const ChainSample& sample, double eta) {
  const auto K = sample.topic_term.rows();
  const auto V = sample.topic_term.cols();
  MatD beta(K, V);
  for (std::size_t k = 0; k < K; ++k) {
    const double denom = sample.topic_total[k] + static_cast<double>(V) * eta;
    for (std::size_t v = 0; v < V; ++v) {
      beta(k, v) = (sample.topic_term(k, v) + eta) / denom;
    }
  }
  return beta;
}

MatD rao_blackwell_theta_lda(const ChainSample& sample, double alpha) {
  const auto D = sample.doc_topic.rows();
  const auto K = sample.doc_topic.cols();
  MatD theta(D, K);
  for (std::size_t d = 0; d < D; ++d) {
    const double denom = sample.doc_total[d] + static_cast<double>(K) * alpha;
    for (std::size_t k = 0; k < K; ++k) {
      theta(d, k) = (sample.doc_topic(d, k) + alpha) / denom;
    }
  }
  return theta;
}

namespace {

double perplexity_from_estimates(
    const Corpus& corpus, const HeldOutSplit& split,
    const std::vector<MatD>& thetas, const std::vector<MatD>& betas) {
  if (split.heldout_docs.empty() || split.num_test_tokens() == 0) {
    throw DataError("perplexity: empty test set");
  }
  const auto S = thetas.size();
  const auto K = betas.front().rows();
  double log_sum = 0.0;
  std::size_t count = 0;
  for (int d : split.heldout_docs) {
    for (int position : split.test_positions[d]) {
      const int v = corpus.docs[d][position];
      double p = 0.0;
      for (std::size_t s = 0; s < S; ++s) {
        double p_s = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
          p_s += thetas[s](d, k) * betas[s](k, v);
        }
        p += p_s;
      }
      log_sum += std::log(p / static_cast<double>(S));
      ++count;
    }
  }
  return std::exp(-log_sum / static_cast<double>(count));
}

}  // namespace

double perplexity_clda(const Corpus& corpus, const HeldOutSplit& split,
                       const std::vector<ChainSample>& samples,
                       const Hyperparameters& h) {
  if (samples.empty()) throw DataError("perplexity_clda: no samples");
  std::vector<MatD> thetas;
  std::vector<MatD> betas;
  thetas.reserve(samples.size());
  betas.reserve(samples.size());
  for (const auto& s : samples) {
    thetas.push_back(rao_blackwell_theta(s, corpus.collection_of, h));
    betas.push_back(rao_blackwell_beta(s, h.eta));
  }
  return perplexity_from_estimates(corpus, split, thetas, betas);
}

double perplexity_lda(const Corpus& corpus, const HeldOutSplit& split,
                      const std::vector<ChainSample>& samples, double alpha,
                      double eta) {
  if (samples.empty()) throw DataError("perplexity_lda: no samples");
  std::vector<MatD> thetas;
  std::vector<MatD> betas;
  thetas.reserve(samples.size());
  betas.reserve(samples.size());
  for (const auto& s : samples) {
    thetas.push_back(rao_blackwell_theta_lda(s, alpha));
    betas.push_back(rao_blackwell_beta(s, eta));
  }
  return perplexity_from_estimates(corpus, split, thetas, betas);
}

int DocumentFrequencies::codf(int term_a, int term_b) const {
  const auto& a = postings[term_a];
  const auto& b = postings[term_b];
  int count = 0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] < b[j]) {
      ++i;
    } else if (a[i] > b[j]) {
      ++j;
    } else {
      ++count;
      ++i;
      ++j;
    }
  }
  return count;
}

DocumentFrequencies document_frequencies(const Corpus& corpus,
                                         const std::vector<int>& docs) {
  DocumentFrequencies freqs;
  freqs.postings.resize(corpus.vocab_size());
  std::vector<int> all;
  if (docs.empty()) {
    all.resize(corpus.num_docs());
    std::iota(all.begin(), all.end(), 0);
  }
  const auto& doc_ids = docs.empty() ? all : docs;
  std::vector<char> seen(corpus.vocab_size(), 0);
  for (int d : doc_ids) {
    std::fill(seen.begin(), seen.end(), 0);
    for (int v : corpus.docs[d]) {
      if (!seen[v]) {
        seen[v] = 1;
        freqs.postings[v].push_back(d);
      }
    }
  }
  return freqs;
}

std::vector<int> top_terms(std::span<const double> beta_row, int m) {
  std::vector<int> order(beta_row.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (beta_row[a] != beta_row[b]) return beta_row[a] > beta_row[b];
    return a < b;
  });
  order.resize(std::min<std::size_t>(m, order.size()));
  return order;
}

double topic_coherence(std::span<const double> beta_row,
                       const DocumentFrequencies& freqs, int m) {
  if (m < 1) throw std::invalid_argument("topic_coherence: m must be >= 1");
  const auto top = top_terms(beta_row, m);
  double score = 0.0;
  for (std::size_t i = 1; i < top.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      const int df_j = freqs.df(top[j]);
      if (df_j == 0) {
        throw DataError("topic_coherence: top term " + std::to_string(top[j]) +
                        " appears in no document");
      }
      score += std::log((freqs.codf(top[i], top[j]) + 1.0) / df_j);
    }
  }
  return score;
}

std::vector<int> topic_size(const ChainSample& sample) {
  return sample.topic_total;
}

std::vector<int> align_topics(const MatD& reference, const MatD& candidate) {
  if (reference.rows() != candidate.rows() ||
      reference.cols() != candidate.cols()) {
    throw std::invalid_argument("align_topics: dimension mismatch");
  }
  const auto K = reference.rows();
  MatD dist(K, K);
  for (std::size_t r = 0; r < K; ++r) {
    for (std::size_t c = 0; c < K; ++c) {
      dist(r, c) = l1_distance(reference.row(r), candidate.row(c));
    }
  }

  // Greedy: repeatedly lock in the globally closest unmatched pair.
  std::vector<int> perm(K, -1);
  std::vector<char> ref_used(K, 0);
  std::vector<char> cand_used(K, 0);
  double greedy_total = 0.0;
  for (std::size_t step = 0; step < K; ++step) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_r = 0;
    std::size_t best_c = 0;
    for (std::size_t r = 0; r < K; ++r) {
      if (ref_used[r]) continue;
      for (std::size_t c = 0; c < K; ++c) {
        if (cand_used[c]) continue;
        if (dist(r, c) < best) {
          best = dist(r, c);
          best_r = r;
          best_c = c;
        }
      }
    }
    perm[best_r] = static_cast<int>(best_c);
    ref_used[best_r] = 1;
    cand_used[best_c] = 1;
    greedy_total += best;
  }

  double identity_total = 0.0;
  for (std::size_t r = 0; r < K; ++r) identity_total += dist(r, r);
  if (identity_total < greedy_total) {
    std::iota(perm.begin(), perm.end(), 0);
  }
  return perm;
}

MatD topic_distance_matrix(const MatD& beta) {
  const auto K = beta.rows();
  MatD dist(K, K, 0.0);
  for (std::size_t a = 0; a < K; ++a) {
    for (std::size_t b = a + 1; b < K; ++b) {
      const double d = l1_distance(beta.row(a), beta.row(b));
      dist(a, b) = d;
      dist(b, a) = d;
    }
  }
  return dist;
}

MatD average_rao_blackwell_beta(const std::vector<ChainSample>& samples,
                                double eta) {
  if (samples.empty()) throw DataError("average_rao_blackwell_beta: no samples");
  MatD mean = rao_blackwell_beta(samples.front(), eta);
  for (std::size_t s = 1; s < samples.size(); ++s) {
    const auto beta = rao_blackwell_beta(samples[s], eta);
    for (std::size_t i = 0; i < mean.data().size(); ++i) {
      mean.data()[i] += beta.data()[i];
    }
  }
  for (auto& x : mean.data()) x /= static_cast<double>(samples.size());
  return mean;
}

MatD average_rao_blackwell_theta(const std::vector<ChainSample>& samples,
                                 const std::vector<int>& collection_of,
                                 const Hyperparameters& h) {
  if (samples.empty()) throw DataError("average_rao_blackwell_theta: no samples");
  MatD mean = rao_blackwell_theta(samples.front(), collection_of, h);
  for (std::size_t s = 1; s < samples.size(); ++s) {
    const auto theta = rao_blackwell_theta(samples[s], collection_of, h);
    for (std::size_t i = 0; i < mean.data().size(); ++i) {
      mean.data()[i] += theta.data()[i];
    }
  }
  for (auto& x : mean.data()) x /= static_cast<double>(samples.size());
  return mean;
}

}  // namespace clda
