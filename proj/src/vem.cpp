// SPDX-License-Identifier: Apache-2.0
#include "clda/vem.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <stdexcept>

#include "clda/errors.hpp"
#include "clda/rng.hpp"
#include "clda/special_functions.hpp"

namespace clda {

void update_phi(std::span<const double> rho_row, const MatD& lambda, int word,
                std::span<double> out) {
  const auto K = rho_row.size();
  double rho_sum = 0.0;
  for (double r : rho_row) rho_sum += r;
  const double psi_rho_sum = digamma(rho_sum);

  double max_logit = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < K; ++k) {
    double lambda_sum = 0.0;
    for (std::size_t v = 0; v < lambda.cols(); ++v) lambda_sum += lambda(k, v);
    out[k] = digamma(rho_row[k]) - psi_rho_sum + digamma(lambda(k, word)) -
             digamma(lambda_sum);
    max_logit = std::max(max_logit, out[k]);
  }
  double total = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    out[k] = std::exp(out[k] - max_logit);
    total += out[k];
  }
  for (std::size_t k = 0; k < K; ++k) out[k] /= total;
}

void update_rho(const MatD& phi_doc, double /*a_j*/,
                std::span<const double> omega_row, double gamma,
                std::span<double> out) {
  // gamma tau_jk / tau_j. = gamma omega_jk since tau = a omega.
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = gamma * omega_row[k];
    for (std::size_t i = 0; i < phi_doc.rows(); ++i) out[k] += phi_doc(i, k);
  }
}

MatD update_lambda(const Corpus& corpus, const std::vector<MatD>& phi,
                   double eta) {
  const auto K = phi.front().cols();
  MatD lambda(K, corpus.vocab_size(), eta);
  for (std::size_t d = 0; d < corpus.num_docs(); ++d) {
    const auto& words = corpus.docs[d];
    for (std::size_t i = 0; i < words.size(); ++i) {
      for (std::size_t k = 0; k < K; ++k) {
        lambda(k, words[i]) += phi[d](i, k);
      }
    }
  }
  return lambda;
}

CollectionStats collect_tau_stats(const MatD& rho,
                                  std::span<const int> collection_docs, int K) {
  CollectionStats stats;
  stats.psi_rho_k.assign(K, 0.0);
  stats.num_docs = static_cast<int>(collection_docs.size());
  for (int d : collection_docs) {
    double rho_sum = 0.0;
    for (int k = 0; k < K; ++k) {
      stats.psi_rho_k[k] += digamma(rho(d, k));
      rho_sum += rho(d, k);
    }
    stats.psi_rho_dot += digamma(rho_sum);
  }
  return stats;
}

double tau_objective(double a, std::span<const double> omega,
                     const CollectionStats& stats, const Hyperparameters& h) {
  const auto K = omega.size();
  const double D = stats.num_docs;
  const double psi_a = digamma(a);
  const double log_a = std::log(a);

  double value = -std::lgamma(a);
  for (std::size_t k = 0; k < K; ++k) {
    const double ak = a * omega[k];
    value += (h.alpha - ak) * (digamma(ak) - psi_a) + std::lgamma(ak);
  }
  value -= h.gamma / a * (static_cast<double>(K) - 1.0) * D +
           (h.gamma - static_cast<double>(K)) *
               (D * log_a - D * psi_a + stats.psi_rho_dot);
  for (std::size_t k = 0; k < K; ++k) {
    const double ak = a * omega[k];
    value -= D * std::lgamma(h.gamma * omega[k]) +
             (1.0 - h.gamma * omega[k]) *
                 (D * std::log(ak) - D * digamma(ak) + stats.psi_rho_k[k]);
  }
  return value;
}

double omega_objective(double a, double omega_k, double psi_rho_k,
                       int num_docs, const Hyperparameters& h) {
  const double D = num_docs;
  const double ak = a * omega_k;
  const double bracket = h.alpha + D - ak - h.gamma * D * omega_k;
  return digamma(ak) * bracket + h.gamma * omega_k * psi_rho_k +
         std::lgamma(ak) -
         D * (std::lgamma(h.gamma * omega_k) +
              (1.0 - h.gamma * omega_k) * std::log(ak));
}

double omega_grad(double a, double omega_k, double psi_rho_k, int num_docs,
                  const Hyperparameters& h) {
  const double D = num_docs;
  const double ak = a * omega_k;
  const double bracket = h.alpha + D - ak - h.gamma * D * omega_k;
  return a * trigamma(ak) * bracket - h.gamma * D * digamma(ak) +
         h.gamma * psi_rho_k -
         D * (h.gamma * digamma(h.gamma * omega_k) + 1.0 / omega_k - h.gamma -
              h.gamma * std::log(ak));
}

double omega_hess(double a, double omega_k, int num_docs,
                  const Hyperparameters& h) {
  const double D = num_docs;
  const double ak = a * omega_k;
  const double bracket = h.alpha + D - ak - h.gamma * D * omega_k;
  return a * a * tetragamma(ak) * bracket -
         a * trigamma(ak) * (a + 2.0 * h.gamma * D) -
         D * (h.gamma * h.gamma * trigamma(h.gamma * omega_k) -
              1.0 / (omega_k * omega_k) - h.gamma / omega_k);
}

double a_grad(double a, std::span<const double> omega, int num_docs,
              const Hyperparameters& h) {
  const double D = num_docs;
  const double K = static_cast<double>(omega.size());
  const double psi1_a = trigamma(a);
  double value = (K - 1.0) * h.gamma * D / (a * a);
  for (double w : omega) {
    const double ak = a * w;
    value += (w * trigamma(ak) - psi1_a) *
             (h.alpha + D - ak - h.gamma * D * w);
  }
  return value;
}

double a_hess(double a, std::span<const double> omega, int num_docs,
              const Hyperparameters& h) {
  const double D = num_docs;
  const double K = static_cast<double>(omega.size());
  const double psi1_a = trigamma(a);
  const double psi2_a = tetragamma(a);
  double value = -2.0 * (K - 1.0) * h.gamma * D / (a * a * a);
  for (double w : omega) {
    const double ak = a * w;
    value += (w * w * tetragamma(ak) - psi2_a) *
                 (h.alpha + D - ak - h.gamma * D * w) -
             w * (w * trigamma(ak) - psi1_a);
  }
  return value;
}

std::vector<double> constrained_newton_step(std::span<const double> grad,
                                            std::span<const double> hess) {
  const auto K = grad.size();
  std::vector<double> step(K);
  double sum_g_over_h = 0.0;
  double sum_inv_h = 0.0;
  std::vector<double> h_used(K);
  for (std::size_t k = 0; k < K; ++k) {
    // The objective should be locally concave; force the curvature sign so a
    // stray non-concave coordinate cannot flip the direction. Backtracking
    // on the objective guards the step length.
    h_used[k] = hess[k] < -1e-12 ? hess[k] : -std::max(std::abs(hess[k]), 1e-12);
    sum_g_over_h += grad[k] / h_used[k];
    sum_inv_h += 1.0 / h_used[k];
  }
  const double dual = sum_g_over_h / sum_inv_h;
  for (std::size_t k = 0; k < K; ++k) {
    step[k] = dual / h_used[k] - grad[k] / h_used[k];
  }
  return step;
}

TauUpdateResult update_tau(double a0, std::span<const double> omega0,
                           const CollectionStats& stats,
                           const Hyperparameters& h) {
  constexpr int kMaxRounds = 100;
  constexpr int kMaxBacktracks = 50;
  constexpr double kTol = 1e-8;

  TauUpdateResult result;
  result.a = a0;
  result.omega.assign(omega0.begin(), omega0.end());
  const auto K = result.omega.size();

  std::vector<double> grad(K);
  std::vector<double> hess(K);
  for (int round = 1; round <= kMaxRounds; ++round) {
    result.rounds = round;
    const double a_prev = result.a;
    const auto omega_prev = result.omega;

    // Constrained Newton step on omega.
    for (std::size_t k = 0; k < K; ++k) {
      grad[k] = omega_grad(result.a, result.omega[k], stats.psi_rho_k[k],
                           stats.num_docs, h);
      hess[k] = omega_hess(result.a, result.omega[k], stats.num_docs, h);
    }
    const auto step = constrained_newton_step(grad, hess);
    double f0 = tau_objective(result.a, result.omega, stats, h);
    bool omega_moved = false;
    double t = 1.0;
    for (int bt = 0; bt < kMaxBacktracks; ++bt, t *= 0.5) {
      auto candidate = omega_prev;
      bool positive = true;
      for (std::size_t k = 0; k < K; ++k) {
        candidate[k] += t * step[k];
        positive = positive && candidate[k] > 0.0;
      }
      if (!positive) continue;
      if (tau_objective(result.a, candidate, stats, h) >= f0 - 1e-12) {
        result.omega = std::move(candidate);
        omega_moved = true;
        break;
      }
    }

    // 1-D Newton step on a.
    const double g = a_grad(result.a, result.omega, stats.num_docs, h);
    const double hh = a_hess(result.a, result.omega, stats.num_docs, h);
    const double delta = hh < -1e-12 ? -g / hh : (g > 0 ? 0.5 : -0.5) * result.a;
    f0 = tau_objective(result.a, result.omega, stats, h);
    bool a_moved = false;
    t = 1.0;
    for (int bt = 0; bt < kMaxBacktracks; ++bt, t *= 0.5) {
      const double candidate = result.a + t * delta;
      if (!(candidate > 0.0)) continue;
      if (tau_objective(candidate, result.omega, stats, h) >= f0 - 1e-12) {
        result.a = candidate;
        a_moved = true;
        break;
      }
    }

    if (!omega_moved && !a_moved) {
      result.newton_failed = true;
      break;
    }
    double rel = std::abs(result.a - a_prev) / std::max(1.0, std::abs(a_prev));
    for (std::size_t k = 0; k < K; ++k) {
      rel = std::max(rel, std::abs(result.omega[k] - omega_prev[k]));
    }
    if (rel < kTol) {
      result.converged = true;
      break;
    }
  }
  // Remove the float drift the zero-sum steps cannot (sum stays 1 to ~1e-14).
  double sum = 0.0;
  for (double w : result.omega) sum += w;
  for (double& w : result.omega) w /= sum;
  return result;
}

const std::vector<std::string>& ElboReport::term_names() {
  static const std::vector<std::string> names = {
      "beta_log_prior", "pi_log_prior",   "theta_log_prior_bound",
      "z_log_likelihood", "word_log_likelihood", "neg_q_beta",
      "neg_q_pi",       "neg_q_theta",    "neg_q_phi"};
  return names;
}

std::vector<double> ElboReport::term_values() const {
  return {beta_log_prior, pi_log_prior,   theta_log_prior_bound,
          z_log_likelihood, word_log_likelihood, neg_q_beta,
          neg_q_pi,       neg_q_theta,    neg_q_phi};
}

namespace {

void check_finite(double value, const char* term) {
  if (!std::isfinite(value)) {
    throw NumericError(std::string("compute_elbo: non-finite term ") + term);
  }
}

double dirichlet_entropy_term(std::span<const double> params) {
  // E[log q] for a Dirichlet with the given parameters.
  double sum = 0.0;
  for (double p : params) sum += p;
  const double psi_sum = digamma(sum);
  double value = std::lgamma(sum);
  for (double p : params) {
    value += -std::lgamma(p) + (p - 1.0) * (digamma(p) - psi_sum);
  }
  return value;
}

}  // namespace

ElboReport compute_elbo(const Corpus& corpus, const VariationalParams& params,
                        const Hyperparameters& h) {
  ElboReport report;
  const auto K = params.lambda.rows();
  const auto V = params.lambda.cols();
  const auto J = params.omega.rows();

  // Topic prior and topic entropy share the digamma table for lambda.
  MatD elog_beta(K, V);
  for (std::size_t k = 0; k < K; ++k) {
    double lambda_sum = 0.0;
    for (std::size_t v = 0; v < V; ++v) lambda_sum += params.lambda(k, v);
    const double psi_sum = digamma(lambda_sum);
    double prior = std::lgamma(static_cast<double>(V) * h.eta) -
                   static_cast<double>(V) * std::lgamma(h.eta);
    for (std::size_t v = 0; v < V; ++v) {
      elog_beta(k, v) = digamma(params.lambda(k, v)) - psi_sum;
      prior += (h.eta - 1.0) * elog_beta(k, v);
    }
    report.beta_log_prior += prior;
    report.neg_q_beta -= dirichlet_entropy_term(params.lambda.row(k));
  }

  std::vector<double> tau_row(K);
  for (std::size_t j = 0; j < J; ++j) {
    const double a = params.a[j];
    const double psi_a = digamma(a);
    double prior = std::lgamma(static_cast<double>(K) * h.alpha) -
                   static_cast<double>(K) * std::lgamma(h.alpha);
    for (std::size_t k = 0; k < K; ++k) {
      tau_row[k] = params.tau(static_cast<int>(j), static_cast<int>(k));
      prior += (h.alpha - 1.0) * (digamma(tau_row[k]) - psi_a);
    }
    report.pi_log_prior += prior;
    report.neg_q_pi -= dirichlet_entropy_term(tau_row);
  }

  const auto by_coll = corpus.docs_of_collection();
  for (int j = 0; j < corpus.num_collections; ++j) {
    const double a = params.a[j];
    const double psi_a = digamma(a);
    const double log_a = std::log(a);
    for (int d : by_coll[j]) {
      double rho_sum = 0.0;
      for (std::size_t k = 0; k < K; ++k) rho_sum += params.rho(d, k);
      const double psi_rho_sum = digamma(rho_sum);

      double term = std::lgamma(h.gamma) -
                    h.gamma / a * (static_cast<double>(K) - 1.0) -
                    (h.gamma - static_cast<double>(K)) *
                        (log_a - psi_a + psi_rho_sum);
      for (std::size_t k = 0; k < K; ++k) {
        const double tau_k = a * params.omega(j, k);
        term -= std::lgamma(h.gamma * params.omega(j, k)) +
                (1.0 - h.gamma * params.omega(j, k)) *
                    (std::log(tau_k) - digamma(tau_k) +
                     digamma(params.rho(d, k)));
      }
      report.theta_log_prior_bound += term;
      report.neg_q_theta -= dirichlet_entropy_term(params.rho.row(d));

      const auto& phi_doc = params.phi[d];
      const auto& words = corpus.docs[d];
      for (std::size_t i = 0; i < words.size(); ++i) {
        for (std::size_t k = 0; k < K; ++k) {
          const double p = phi_doc(i, k);
          if (p > 0.0) {
            report.z_log_likelihood +=
                p * (digamma(params.rho(d, k)) - psi_rho_sum);
            report.word_log_likelihood += p * elog_beta(k, words[i]);
            report.neg_q_phi -= p * std::log(p);
          }
        }
      }
    }
  }

  check_finite(report.beta_log_prior, "beta_log_prior");
  check_finite(report.pi_log_prior, "pi_log_prior");
  check_finite(report.theta_log_prior_bound, "theta_log_prior_bound");
  check_finite(report.z_log_likelihood, "z_log_likelihood");
  check_finite(report.word_log_likelihood, "word_log_likelihood");
  check_finite(report.neg_q_beta, "neg_q_beta");
  check_finite(report.neg_q_pi, "neg_q_pi");
  check_finite(report.neg_q_theta, "neg_q_theta");
  check_finite(report.neg_q_phi, "neg_q_phi");
  for (double v : report.term_values()) report.total += v;
  return report;
}

namespace {

// Safeguarded 1-D Newton ascent with positivity projection.
double newton_1d(double x0, const std::function<double(double)>& objective,
                 const std::function<double(double)>& grad,
                 const std::function<double(double)>& hess) {
  double x = x0;
  for (int it = 0; it < 50; ++it) {
    const double g = grad(x);
    const double hh = hess(x);
    double delta = hh < -1e-12 ? -g / hh : (g > 0 ? 0.5 : -0.5) * x;
    const double f0 = objective(x);
    double t = 1.0;
    bool moved = false;
    for (int bt = 0; bt < 60; ++bt, t *= 0.5) {
      const double candidate = x + t * delta;
      if (!(candidate > 0.0)) continue;
      if (objective(candidate) >= f0 - 1e-12) {
        if (std::abs(candidate - x) / x < 1e-6) return candidate;
        x = candidate;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  return x;
}

}  // namespace

Hyperparameters optimize_hyperparameters(const Corpus& corpus,
                                         const VariationalParams& params,
                                         const Hyperparameters& h) {
  const auto K = params.lambda.rows();
  const auto V = params.lambda.cols();
  const auto J = params.omega.rows();
  const double Kd = static_cast<double>(K);
  const double Vd = static_cast<double>(V);
  const double Jd = static_cast<double>(J);

  // Sufficient statistics shared by the three objectives.
  double sum_elog_pi = 0.0;
  for (std::size_t j = 0; j < J; ++j) {
    const double psi_a = digamma(params.a[j]);
    for (std::size_t k = 0; k < K; ++k) {
      sum_elog_pi += digamma(params.tau(static_cast<int>(j), static_cast<int>(k))) - psi_a;
    }
  }
  double sum_elog_beta = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    double lambda_sum = 0.0;
    for (std::size_t v = 0; v < V; ++v) lambda_sum += params.lambda(k, v);
    const double psi_sum = digamma(lambda_sum);
    for (std::size_t v = 0; v < V; ++v) {
      sum_elog_beta += digamma(params.lambda(k, v)) - psi_sum;
    }
  }

  Hyperparameters out = h;
  out.alpha = newton_1d(
      h.alpha,
      [&](double a) {
        return Jd * std::lgamma(Kd * a) - Jd * Kd * std::lgamma(a) + a * sum_elog_pi;
      },
      [&](double a) {
        return Jd * Kd * (digamma(Kd * a) - digamma(a)) + sum_elog_pi;
      },
      [&](double a) {
        return Jd * Kd * Kd * trigamma(Kd * a) - Jd * Kd * trigamma(a);
      });

  out.eta = newton_1d(
      h.eta,
      [&](double e) {
        return Kd * std::lgamma(Vd * e) - Kd * Vd * std::lgamma(e) + e * sum_elog_beta;
      },
      [&](double e) {
        return Kd * Vd * (digamma(Vd * e) - digamma(e)) + sum_elog_beta;
      },
      [&](double e) {
        return Kd * Vd * Vd * trigamma(Vd * e) - Kd * Vd * trigamma(e);
      });

  const auto by_coll = corpus.docs_of_collection();
  // gamma statistics: linear coefficient and the per-k ratio table.
  double lin = 0.0;        // sum_jd [log tau_j. - psi(tau_j.) + psi(rho_jd.)]
  double docs_total = 0.0; // sum_j D_j
  std::vector<double> inv_a(J);
  for (std::size_t j = 0; j < J; ++j) inv_a[j] = 1.0 / params.a[j];
  std::vector<double> doc_count(J, 0.0);
  MatD inner(J, K);  // log tau_jk - psi(tau_jk) + mean-free psi(rho) added per doc
  for (std::size_t j = 0; j < J; ++j) {
    for (std::size_t k = 0; k < K; ++k) {
      const double tau_k = params.tau(static_cast<int>(j), static_cast<int>(k));
      inner(j, k) = std::log(tau_k) - digamma(tau_k);
    }
  }
  MatD sum_psi_rho(J, K, 0.0);
  for (int j = 0; j < corpus.num_collections; ++j) {
    doc_count[j] = static_cast<double>(by_coll[j].size());
    docs_total += doc_count[j];
    for (int d : by_coll[j]) {
      double rho_sum = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        sum_psi_rho(j, k) += digamma(params.rho(d, k));
        rho_sum += params.rho(d, k);
      }
      lin += std::log(params.a[j]) - digamma(params.a[j]) + digamma(rho_sum);
    }
  }

  auto gamma_objective = [&](double g) {
    double value = -g * lin;
    for (std::size_t j = 0; j < J; ++j) {
      value += doc_count[j] * (std::lgamma(g) - g * inv_a[j] * (Kd - 1.0));
      for (std::size_t k = 0; k < K; ++k) {
        const double w = params.omega(j, k);
        value -= doc_count[j] * std::lgamma(g * w) -
                 g * w * (doc_count[j] * inner(j, k) + sum_psi_rho(j, k));
      }
    }
    return value;
  };
  auto gamma_grad = [&](double g) {
    double value = -lin;
    for (std::size_t j = 0; j < J; ++j) {
      value += doc_count[j] * (digamma(g) - inv_a[j] * (Kd - 1.0));
      for (std::size_t k = 0; k < K; ++k) {
        const double w = params.omega(j, k);
        value -= doc_count[j] * w * digamma(g * w) -
                 w * (doc_count[j] * inner(j, k) + sum_psi_rho(j, k));
      }
    }
    return value;
  };
  auto gamma_hess = [&](double g) {
    double value = docs_total * trigamma(g);
    for (std::size_t j = 0; j < J; ++j) {
      for (std::size_t k = 0; k < K; ++k) {
        const double w = params.omega(j, k);
        value -= doc_count[j] * w * w * trigamma(g * w);
      }
    }
    return value;
  };
  out.gamma = newton_1d(h.gamma, gamma_objective, gamma_grad, gamma_hess);
  out.validate();
  return out;
}

VemResult vem_run(const Corpus& corpus, int K, const Hyperparameters& h_init,
                  const VemConfig& config) {
  if (K < 1) throw std::invalid_argument("vem_run: K must be >= 1");
  h_init.validate();
  corpus.validate();

  const auto V = corpus.vocab_size();
  const auto D = corpus.num_docs();
  const int J = corpus.num_collections;
  const auto by_coll = corpus.docs_of_collection();

  VemResult result;
  result.h = h_init;
  auto& params = result.params;
  Rng rng(config.seed);

  // lambda starts at the prior plus term-count-scaled jitter; tau starts at
  // the prior scale with a uniform base measure.
  std::vector<double> term_count(V, 0.0);
  for (const auto& doc : corpus.docs) {
    for (int w : doc) term_count[w] += 1.0;
  }
  params.lambda = MatD(K, V);
  for (int k = 0; k < K; ++k) {
    for (std::size_t v = 0; v < V; ++v) {
      params.lambda(k, v) =
          result.h.eta + term_count[v] / K * (0.5 + rng.uniform());
    }
  }
  params.a.assign(J, K * result.h.alpha);
  params.omega = MatD(J, K, 1.0 / K);
  params.rho = MatD(D, K, 0.0);
  params.phi.resize(D);
  for (std::size_t d = 0; d < D; ++d) {
    params.phi[d] = MatD(corpus.docs[d].size(), K);
  }

  double prev_elbo = 0.0;
  for (int iter = 1; iter <= config.max_iterations; ++iter) {
    // E-step. Digamma tables for lambda are fixed across the step.
    MatD elog_beta(K, V);
    for (int k = 0; k < K; ++k) {
      double lambda_sum = 0.0;
      for (std::size_t v = 0; v < V; ++v) lambda_sum += params.lambda(k, v);
      const double psi_sum = digamma(lambda_sum);
      for (std::size_t v = 0; v < V; ++v) {
        elog_beta(k, v) = digamma(params.lambda(k, v)) - psi_sum;
      }
    }

    std::vector<double> elog_theta(K);
    std::vector<double> rho_new(K);
    for (std::size_t d = 0; d < D; ++d) {
      const int j = corpus.collection_of[d];
      const auto& words = corpus.docs[d];
      auto& phi_doc = params.phi[d];
      const double n_d = static_cast<double>(words.size());

      for (int k = 0; k < K; ++k) {
        params.rho(d, k) = result.h.gamma * params.omega(j, k) + n_d / K;
      }
      for (int inner = 0; inner < config.doc_max_iterations; ++inner) {
        double rho_sum = 0.0;
        for (int k = 0; k < K; ++k) rho_sum += params.rho(d, k);
        const double psi_rho_sum = digamma(rho_sum);
        for (int k = 0; k < K; ++k) {
          elog_theta[k] = digamma(params.rho(d, k)) - psi_rho_sum;
        }
        for (std::size_t i = 0; i < words.size(); ++i) {
          double max_logit = -std::numeric_limits<double>::infinity();
          for (int k = 0; k < K; ++k) {
            phi_doc(i, k) = elog_theta[k] + elog_beta(k, words[i]);
            max_logit = std::max(max_logit, phi_doc(i, k));
          }
          double total = 0.0;
          for (int k = 0; k < K; ++k) {
            phi_doc(i, k) = std::exp(phi_doc(i, k) - max_logit);
            total += phi_doc(i, k);
          }
          for (int k = 0; k < K; ++k) phi_doc(i, k) /= total;
        }
        double max_rel = 0.0;
        for (int k = 0; k < K; ++k) {
          rho_new[k] = result.h.gamma * params.omega(j, k);
          for (std::size_t i = 0; i < words.size(); ++i) {
            rho_new[k] += phi_doc(i, k);
          }
          max_rel = std::max(max_rel, std::abs(rho_new[k] - params.rho(d, k)) /
                                          params.rho(d, k));
          params.rho(d, k) = rho_new[k];
        }
        if (max_rel < config.doc_tol) break;
      }
    }

    params.lambda = update_lambda(corpus, params.phi, result.h.eta);

    // M-step: per-collection Newton updates on (a, omega).
    for (int j = 0; j < J; ++j) {
      const auto stats = collect_tau_stats(params.rho, by_coll[j], K);
      const auto update =
          update_tau(params.a[j], params.omega.row(j), stats, result.h);
      if (update.newton_failed) ++result.tau_failures;
      params.a[j] = update.a;
      for (int k = 0; k < K; ++k) params.omega(j, k) = update.omega[k];
    }

    if (config.optimize_hyperparameters) {
      result.h = optimize_hyperparameters(corpus, params, result.h);
    }

    auto report = compute_elbo(corpus, params, result.h);
    report.iteration = iter;
    result.history.push_back(report);
    if (iter > 1) {
      const double rel = std::abs(report.total - prev_elbo) /
                         std::max(1.0, std::abs(prev_elbo));
      if (rel < config.elbo_tol) {
        result.converged = true;
        break;
      }
    }
    prev_elbo = report.total;
  }
  return result;
}

void write_elbo_csv(const std::vector<ElboReport>& history,
                    const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "iteration";
  for (const auto& name : ElboReport::term_names()) out << ',' << name;
  out << ",total\n";
  char buf[32];
  for (const auto& report : history) {
    out << report.iteration;
    for (double v : report.term_values()) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out << ',' << buf;
    }
    std::snprintf(buf, sizeof(buf), "%.17g", report.total);
    out << ',' << buf << '\n';
  }
}

}  // namespace clda
