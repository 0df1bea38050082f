// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "clda/corpus.hpp"
#include "clda/mat.hpp"
#include "clda/model.hpp"

namespace clda {

/// Mean-field variational parameters. The collection Dirichlet tau_j is kept
/// decomposed as a scale a_j > 0 and a base measure omega_j on the simplex
/// (tau_jk = a_j * omega_jk), which is what the equality-constrained Newton
/// update works on. phi holds one responsibility row per token.
struct VariationalParams {
  MatD lambda;                 // K x V
  std::vector<double> a;       // J
  MatD omega;                  // J x K
  MatD rho;                    // D x K
  std::vector<MatD> phi;       // per document: n_d x K

  double tau(int j, int k) const { return a[j] * omega(j, k); }
  /// E[pi_jk] under q, i.e. tau_jk / tau_j. = omega_jk.
  double expected_pi(int j, int k) const { return omega(j, k); }
};

/// One token's responsibility row:
///   phi_k ∝ exp(psi(rho_k) - psi(rho.) + psi(lambda_kv) - psi(lambda_k.))
/// computed with log-sum-exp stabilization.
void update_phi(std::span<const double> rho_row, const MatD& lambda, int word,
                std::span<double> out);

/// Closed-form document Dirichlet update:
///   rho_k = gamma tau_jk / tau_j. + sum_i phi_ik
void update_rho(const MatD& phi_doc, double a_j,
                std::span<const double> omega_row, double gamma,
                std::span<double> out);

/// Closed-form topic Dirichlet update: lambda_kv = eta + sum over tokens of
/// phi_ik for tokens with word id v.
MatD update_lambda(const Corpus& corpus, const std::vector<MatD>& phi,
                   double eta);

/// Pieces of the collection update, exposed for verification. `psi_rho_k` is
/// sum over the collection's documents of psi(rho_jdk); `psi_rho_dot` of
/// psi(rho_jd.); num_docs is D_j.
struct CollectionStats {
  std::vector<double> psi_rho_k;
  double psi_rho_dot = 0.0;
  int num_docs = 0;
};

CollectionStats collect_tau_stats(const MatD& rho,
                                  std::span<const int> collection_docs, int K);

/// Objective for (a_j, omega_j): the tau-dependent part of the bound, with
/// the intractable collection-mixture expectation replaced by its explicit
/// lower bound. Constants independent of (a, omega) are dropped.
double tau_objective(double a, std::span<const double> omega,
                     const CollectionStats& stats, const Hyperparameters& h);

/// Single-coordinate objective for omega_k (terms constant under the
/// sum-to-one constraint dropped), and its first two derivatives.
double omega_objective(double a, double omega_k, double psi_rho_k,
                       int num_docs, const Hyperparameters& h);
double omega_grad(double a, double omega_k, double psi_rho_k, int num_docs,
                  const Hyperparameters& h);
double omega_hess(double a, double omega_k, int num_docs,
                  const Hyperparameters& h);

/// First two derivatives of the objective in a.
double a_grad(double a, std::span<const double> omega, int num_docs,
              const Hyperparameters& h);
double a_hess(double a, std::span<const double> omega, int num_docs,
              const Hyperparameters& h);

/// Equality-constrained Newton direction: solves the bordered system with
/// diagonal Hessian h and dual variable for sum(delta) = 0. The returned
/// direction sums to zero by construction.
std::vector<double> constrained_newton_step(std::span<const double> grad,
                                            std::span<const double> hess);

struct TauUpdateResult {
  double a = 0.0;
  std::vector<double> omega;
  bool converged = false;
  int rounds = 0;
  bool newton_failed = false;  // kept previous value after failed backtracks
};

/// Alternating maximization of the collection objective: constrained Newton
/// on omega, then 1-D Newton on a, with step-halving backtracking that keeps
/// omega positive and never decreases the objective. Stops at relative
/// change < 1e-8 or 100 rounds.
TauUpdateResult update_tau(double a0, std::span<const double> omega0,
                           const CollectionStats& stats,
                           const Hyperparameters& h);

/// The bound, term by term. total equals the sum of all terms.
struct ElboReport {
  int iteration = 0;
  double beta_log_prior = 0.0;
  double pi_log_prior = 0.0;
  double theta_log_prior_bound = 0.0;
  double z_log_likelihood = 0.0;
  double word_log_likelihood = 0.0;
  double neg_q_beta = 0.0;
  double neg_q_pi = 0.0;
  double neg_q_theta = 0.0;
  double neg_q_phi = 0.0;
  double total = 0.0;

  static const std::vector<std::string>& term_names();
  std::vector<double> term_values() const;
};

/// Evaluates the bound for the given parameters; throws NumericError naming
/// the offending term if any piece is non-finite.
ElboReport compute_elbo(const Corpus& corpus, const VariationalParams& params,
                        const Hyperparameters& h);

struct VemConfig {
  int max_iterations = 200;
  double elbo_tol = 1e-5;
  int doc_max_iterations = 50;
  double doc_tol = 1e-6;
  bool optimize_hyperparameters = false;
  std::uint64_t seed = 0;
};

struct VemResult {
  VariationalParams params;
  std::vector<ElboReport> history;
  Hyperparameters h;  // final values (changed only when optimizing)
  bool converged = false;
  int tau_failures = 0;
};

/// Full variational EM loop: per-document E-step to convergence, closed-form
/// lambda update, per-collection (a, omega) Newton updates, optional
/// hyperparameter Newton updates, until the relative bound change falls
/// below elbo_tol.
VemResult vem_run(const Corpus& corpus, int K, const Hyperparameters& h,
                  const VemConfig& config);

/// Newton updates of (alpha, gamma, eta) against the current bound, with
/// positivity-preserving step halving.
Hyperparameters optimize_hyperparameters(const Corpus& corpus,
                                         const VariationalParams& params,
                                         const Hyperparameters& h);

void write_elbo_csv(const std::vector<ElboReport>& history,
                    const std::string& path);

}  // namespace clda
