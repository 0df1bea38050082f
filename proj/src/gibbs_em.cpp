// SPDX-License-Identifier: Apache-2.0
#include "clda/gibbs_em.hpp"

#include <cmath>
#include <stdexcept>

#include "clda/ags.hpp"
#include "clda/errors.hpp"
#include "clda/lda.hpp"
#include "clda/special_functions.hpp"

namespace clda {

namespace {

// Shared form of the symmetric-Dirichlet fixed point: counts is a stack of
// count matrices with row totals `totals`, dim the Dirichlet dimension.
double symmetric_fixed_point(const std::vector<const MatI*>& counts,
                             const std::vector<const std::vector<int>*>& totals,
                             double x, int dim, const char* what) {
  if (!(x > 0.0)) throw std::domain_error(std::string(what) + ": estimate must stay positive");
  double numer = 0.0;
  double denom = 0.0;
  const double psi_x = digamma(x);
  const double psi_dx = digamma(dim * x);
  for (std::size_t s = 0; s < counts.size(); ++s) {
    const MatI& m = *counts[s];
    for (std::size_t r = 0; r < m.rows(); ++r) {
      for (std::size_t c = 0; c < m.cols(); ++c) {
        if (m(r, c) > 0) numer += digamma(m(r, c) + x) - psi_x;
      }
      const int total = (*totals[s])[r];
      if (total > 0) denom += digamma(total + dim * x) - psi_dx;
    }
  }
  if (denom == 0.0) {
    throw DataError(std::string(what) + ": all counts are zero");
  }
  return x / dim * numer / denom;
}

}  // namespace

double fixed_point_eta(const std::vector<ChainSample>& samples, double eta,
                       int vocab_size) {
  if (samples.empty()) throw DataError("fixed_point_eta: no samples");
  std::vector<const MatI*> counts;
  std::vector<const std::vector<int>*> totals;
  for (const auto& s : samples) {
    counts.push_back(&s.topic_term);
    totals.push_back(&s.topic_total);
  }
  return symmetric_fixed_point(counts, totals, eta, vocab_size, "fixed_point_eta");
}

double fixed_point_gamma(const std::vector<ChainSample>& samples, double gamma,
                         const std::vector<int>& collection_of) {
  if (samples.empty()) throw DataError("fixed_point_gamma: no samples");
  if (!(gamma > 0.0)) {
    throw std::domain_error("fixed_point_gamma: estimate must stay positive");
  }
  double numer = 0.0;
  double denom = 0.0;
  const double psi_g = digamma(gamma);
  for (const auto& s : samples) {
    for (std::size_t d = 0; d < s.doc_topic.rows(); ++d) {
      const int j = collection_of[d];
      for (std::size_t k = 0; k < s.doc_topic.cols(); ++k) {
        const int n = s.doc_topic(d, k);
        if (n > 0) {
          const double gp = gamma * s.pi(j, k);
          numer += s.pi(j, k) * (digamma(n + gp) - digamma(gp));
        }
      }
      if (s.doc_total[d] > 0) {
        denom += digamma(s.doc_total[d] + gamma) - psi_g;
      }
    }
  }
  if (denom == 0.0) throw DataError("fixed_point_gamma: all counts are zero");
  return gamma * numer / denom;
}

GibbsEmResult gibbs_em_run(const Corpus& corpus, int K,
                           const GibbsEmConfig& config) {
  if (config.samples_per_estep < 1) {
    throw std::invalid_argument("gibbs_em: samples_per_estep must be >= 1");
  }
  GibbsEmResult result;
  double eta = config.eta0;
  double gamma = config.gamma0;

  ChainInit chain_state;  // persists across outer iterations
  Rng rng(config.seed);
  for (int outer = 1; outer <= config.outer_max_iterations; ++outer) {
    // E-step: re-burn under the current hyperparameters, then collect
    // thinned samples of (counts, pi).
    Hyperparameters h{config.alpha, gamma, eta};
    ChainConfig inner;
    inner.iterations = config.inner_burn_in +
                       config.samples_per_estep * config.inner_thin;
    inner.burn_in = config.inner_burn_in;
    inner.save_every = config.inner_thin;
    inner.seed = rng.split(outer).seed();
    if (chain_state.z) {
      chain_state.start_iteration = 0;
    }
    auto trace = ags_run(corpus, K, h, inner, chain_state);
    chain_state.z = trace.final_z;
    chain_state.pi = trace.final_pi;

    // M-step: iterate both maps jointly to convergence.
    double eta_new = eta;
    double gamma_new = gamma;
    for (int round = 0; round < 200; ++round) {
      const double eta_next =
          fixed_point_eta(trace.samples, eta_new, static_cast<int>(corpus.vocab_size()));
      const double gamma_next =
          fixed_point_gamma(trace.samples, gamma_new, corpus.collection_of);
      const double rel = std::max(std::abs(eta_next - eta_new) / eta_new,
                                  std::abs(gamma_next - gamma_new) / gamma_new);
      eta_new = eta_next;
      gamma_new = gamma_next;
      if (rel < config.inner_tol) break;
    }

    const double rel = std::max(std::abs(eta_new - eta) / eta,
                                std::abs(gamma_new - gamma) / gamma);
    eta = eta_new;
    gamma = gamma_new;
    result.trajectory.emplace_back(eta, gamma);
    if (rel < config.tol) {
      result.converged = true;
      break;
    }
  }
  result.eta = eta;
  result.gamma = gamma;
  return result;
}

LdaHyperEstimate lda_estimate_hyper(const Corpus& corpus, int K,
                                    const GibbsEmConfig& config) {
  LdaHyperEstimate result;
  double eta = config.eta0;
  double alpha = config.alpha;

  ChainInit chain_state;
  Rng rng(config.seed);
  for (int outer = 1; outer <= config.outer_max_iterations; ++outer) {
    ChainConfig inner;
    inner.iterations = config.inner_burn_in +
                       config.samples_per_estep * config.inner_thin;
    inner.burn_in = config.inner_burn_in;
    inner.save_every = config.inner_thin;
    inner.seed = rng.split(outer).seed();
    auto trace = cgs_run(corpus, K, alpha, eta, inner, chain_state);
    chain_state.z = trace.final_z;

    double eta_new = eta;
    double alpha_new = alpha;
    for (int round = 0; round < 200; ++round) {
      const double eta_next =
          fixed_point_eta(trace.samples, eta_new, static_cast<int>(corpus.vocab_size()));
      // The document-topic table plays the count role for alpha.
      std::vector<const MatI*> counts;
      std::vector<const std::vector<int>*> totals;
      for (const auto& s : trace.samples) {
        counts.push_back(&s.doc_topic);
        totals.push_back(&s.doc_total);
      }
      const double alpha_next =
          symmetric_fixed_point(counts, totals, alpha_new, K, "lda_estimate_hyper");
      const double rel = std::max(std::abs(eta_next - eta_new) / eta_new,
                                  std::abs(alpha_next - alpha_new) / alpha_new);
      eta_new = eta_next;
      alpha_new = alpha_next;
      if (rel < config.inner_tol) break;
    }

    const double rel = std::max(std::abs(eta_new - eta) / eta,
                                std::abs(alpha_new - alpha) / alpha);
    eta = eta_new;
    alpha = alpha_new;
    if (rel < config.tol) {
      result.converged = true;
      break;
    }
  }
  result.eta = eta;
  result.alpha = alpha;
  return result;
}

}  // namespace clda
