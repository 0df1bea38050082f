// SPDX-License-Identifier: Apache-2.0
#include <stdexcept>
#include <cmath>
#include <numeric>
#include <vector>

#include "clda/special_functions.hpp"
#include "clda/synthetic.hpp"
#include "clda/vem.hpp"
#include "doctest.h"

using namespace clda;

namespace {

Corpus two_token_corpus() {
  Corpus corpus;
  corpus.vocab.terms = {"a", "b"};
  corpus.docs = {{0, 1}};
  corpus.collection_of = {0};
  corpus.num_collections = 1;
  return corpus;
}

VariationalParams two_token_params() {
  VariationalParams params;
  params.lambda = MatD(2, 2);
  params.lambda(0, 0) = 1.5;
  params.lambda(0, 1) = 0.5;
  params.lambda(1, 0) = 0.8;
  params.lambda(1, 1) = 1.2;
  params.a = {2.0};
  params.omega = MatD(1, 2);
  params.omega(0, 0) = 0.6;
  params.omega(0, 1) = 0.4;
  params.rho = MatD(1, 2);
  params.rho(0, 0) = 1.3;
  params.rho(0, 1) = 0.7;
  params.phi.resize(1);
  params.phi[0] = MatD(2, 2);
  params.phi[0](0, 0) = 0.7;
  params.phi[0](0, 1) = 0.3;
  params.phi[0](1, 0) = 0.2;
  params.phi[0](1, 1) = 0.8;
  return params;
}

CollectionStats random_stats(Rng& rng, int K) {
  CollectionStats stats;
  stats.num_docs = 1 + static_cast<int>(rng.uniform() * 6);
  stats.psi_rho_k.resize(K);
  // psi values of plausible positive rho entries
  stats.psi_rho_dot = 0.0;
  for (int d = 0; d < stats.num_docs; ++d) {
    double rho_sum = 0.0;
    for (int k = 0; k < K; ++k) {
      const double rho = 0.3 + 8.0 * rng.uniform();
      if (d == 0) stats.psi_rho_k[k] = 0.0;
      stats.psi_rho_k[k] += digamma(rho);
      rho_sum += rho;
    }
    stats.psi_rho_dot += digamma(rho_sum);
  }
  return stats;
}

}  // namespace

TEST_CASE("update_phi: symmetric inputs give a uniform row") {
  MatD lambda(2, 3, 1.0);
  const std::vector<double> rho{2.0, 2.0};
  std::vector<double> phi(2);
  update_phi(rho, lambda, 1, phi);
  CHECK(phi[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(phi[1] == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("update_phi: K = 2 hand-normalized pair") {
  MatD lambda(2, 2);
  lambda(0, 0) = 1.5;
  lambda(0, 1) = 0.5;
  lambda(1, 0) = 0.8;
  lambda(1, 1) = 1.2;
  const std::vector<double> rho{1.3, 0.7};
  std::vector<double> phi(2);
  update_phi(rho, lambda, 0, phi);
  const double logit0 = digamma(1.3) - digamma(2.0) + digamma(1.5) - digamma(2.0);
  const double logit1 = digamma(0.7) - digamma(2.0) + digamma(0.8) - digamma(2.0);
  const double e0 = std::exp(logit0);
  const double e1 = std::exp(logit1);
  CHECK(phi[0] == doctest::Approx(e0 / (e0 + e1)).epsilon(1e-12));
  CHECK(phi[1] == doctest::Approx(e1 / (e0 + e1)).epsilon(1e-12));
  CHECK(phi[0] + phi[1] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("update_rho closed form") {
  SUBCASE("all responsibility on topic 1") {
    MatD phi(3, 2, 0.0);
    for (int i = 0; i < 3; ++i) phi(i, 0) = 1.0;
    const std::vector<double> omega{0.5, 0.5};
    std::vector<double> rho(2);
    update_rho(phi, 2.0, omega, 1.0, rho);
    CHECK(rho[0] == doctest::Approx(0.5 + 3.0).epsilon(1e-15));
    CHECK(rho[1] == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("row sum identity: sum rho - gamma = n") {
    Rng rng(5);
    for (int rep = 0; rep < 30; ++rep) {
      const int K = 2 + static_cast<int>(rng.uniform() * 4);
      const int n = 1 + static_cast<int>(rng.uniform() * 10);
      MatD phi(n, K);
      for (int i = 0; i < n; ++i) {
        std::vector<double> params(K, 1.0);
        auto row = rng.dirichlet(params);
        for (int k = 0; k < K; ++k) phi(i, k) = row[k];
      }
      std::vector<double> params(K, 0.7);
      auto omega = rng.dirichlet(params);
      const double gamma = 0.2 + 2.0 * rng.uniform();
      std::vector<double> rho(K);
      update_rho(phi, 1.5, omega, gamma, rho);
      const double total = std::accumulate(rho.begin(), rho.end(), 0.0);
      CHECK(total - gamma == doctest::Approx(n).epsilon(1e-10));
      // independent recomputation
      for (int k = 0; k < K; ++k) {
        double expected = gamma * omega[k];
        for (int i = 0; i < n; ++i) expected += phi(i, k);
        CHECK(rho[k] == doctest::Approx(expected).epsilon(1e-14));
      }
    }
  }
}

TEST_CASE("update_lambda closed form") {
  SUBCASE("uniform responsibilities spread counts evenly") {
    Corpus corpus;
    corpus.vocab.terms = {"a", "b", "c"};
    corpus.docs = {{0, 0, 1}, {2}};
    corpus.collection_of = {0, 0};
    corpus.num_collections = 1;
    std::vector<MatD> phi{MatD(3, 2, 0.5), MatD(1, 2, 0.5)};
    auto lambda = update_lambda(corpus, phi, 0.3);
    CHECK(lambda(0, 0) == doctest::Approx(0.3 + 2.0 / 2).epsilon(1e-14));
    CHECK(lambda(1, 0) == doctest::Approx(0.3 + 2.0 / 2).epsilon(1e-14));
    CHECK(lambda(0, 1) == doctest::Approx(0.3 + 0.5).epsilon(1e-14));
    CHECK(lambda(0, 2) == doctest::Approx(0.3 + 0.5).epsilon(1e-14));
  }
  SUBCASE("single token with deterministic responsibility") {
    Corpus corpus;
    corpus.vocab.terms = {"a", "b"};
    corpus.docs = {{1}};
    corpus.collection_of = {0};
    corpus.num_collections = 1;
    std::vector<MatD> phi{MatD(1, 2, 0.0)};
    phi[0](0, 0) = 1.0;
    auto lambda = update_lambda(corpus, phi, 0.5);
    CHECK(lambda(0, 1) == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(lambda(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(lambda(1, 1) == doctest::Approx(0.5).epsilon(1e-15));
  }
}

TEST_CASE("constrained Newton step sums to zero") {
  Rng rng(9);
  for (int rep = 0; rep < 200; ++rep) {
    const int K = 2 + static_cast<int>(rng.uniform() * 7);
    std::vector<double> grad(K);
    std::vector<double> hess(K);
    for (int k = 0; k < K; ++k) {
      grad[k] = (rng.uniform() - 0.5) * 20.0;
      hess[k] = -(0.01 + 10.0 * rng.uniform());
    }
    const auto step = constrained_newton_step(grad, hess);
    const double sum = std::accumulate(step.begin(), step.end(), 0.0);
    CHECK(std::abs(sum) < 1e-12);
  }
}

TEST_CASE("omega and a derivatives match finite differences on 120 random states") {
  Rng rng(17);
  int grad_checks = 0;
  for (int rep = 0; rep < 120; ++rep) {
    const int K = 2 + static_cast<int>(rng.uniform() * 4);
    const Hyperparameters h{0.2 + rng.uniform(), 0.3 + 2.0 * rng.uniform(),
                            0.2 + rng.uniform()};
    auto stats = random_stats(rng, K);
    std::vector<double> params(K, 1.0);
    auto omega = rng.dirichlet(params);
    for (auto& w : omega) w = std::max(w, 0.02);
    double norm = std::accumulate(omega.begin(), omega.end(), 0.0);
    for (auto& w : omega) w /= norm;
    const double a = 0.5 + 5.0 * rng.uniform();

    // Per-coordinate gradient against the single-coordinate objective.
    for (int k = 0; k < K; ++k) {
      const double step = 1e-6;
      const double fd = (omega_objective(a, omega[k] + step, stats.psi_rho_k[k],
                                         stats.num_docs, h) -
                         omega_objective(a, omega[k] - step, stats.psi_rho_k[k],
                                         stats.num_docs, h)) /
                        (2.0 * step);
      CHECK(omega_grad(a, omega[k], stats.psi_rho_k[k], stats.num_docs, h) ==
            doctest::Approx(fd).epsilon(1e-5));
      ++grad_checks;
    }

    // Directional derivative of the assembled objective along a zero-sum
    // direction equals g . d (the constraint kills the shared constant).
    std::vector<double> direction(K);
    double mean = 0.0;
    for (auto& d : direction) {
      d = rng.uniform() - 0.5;
      mean += d;
    }
    mean /= K;
    for (auto& d : direction) d -= mean;
    const double t = 1e-6;
    auto hi = omega;
    auto lo = omega;
    for (int k = 0; k < K; ++k) {
      hi[k] += t * direction[k];
      lo[k] -= t * direction[k];
    }
    const double fd_dir = (tau_objective(a, hi, stats, h) -
                           tau_objective(a, lo, stats, h)) /
                          (2.0 * t);
    double analytic = 0.0;
    for (int k = 0; k < K; ++k) {
      analytic += omega_grad(a, omega[k], stats.psi_rho_k[k], stats.num_docs, h) *
                  direction[k];
    }
    CHECK(fd_dir == doctest::Approx(analytic).epsilon(1e-5));

    // a-gradient against the assembled objective, a-Hessian against the
    // a-gradient.
    const double step_a = 1e-6 * (1.0 + a);
    const double fd_a = (tau_objective(a + step_a, omega, stats, h) -
                         tau_objective(a - step_a, omega, stats, h)) /
                        (2.0 * step_a);
    CHECK(a_grad(a, omega, stats.num_docs, h) ==
          doctest::Approx(fd_a).epsilon(1e-5));
    const double fd_ah = (a_grad(a + step_a, omega, stats.num_docs, h) -
                          a_grad(a - step_a, omega, stats.num_docs, h)) /
                         (2.0 * step_a);
    CHECK(a_hess(a, omega, stats.num_docs, h) ==
          doctest::Approx(fd_ah).epsilon(1e-5));

    // omega-Hessian against the omega-gradient.
    const int k0 = static_cast<int>(rng.uniform() * K);
    const double fd_h =
        (omega_grad(a, omega[k0] + 1e-6, stats.psi_rho_k[k0], stats.num_docs, h) -
         omega_grad(a, omega[k0] - 1e-6, stats.psi_rho_k[k0], stats.num_docs, h)) /
        2e-6;
    CHECK(omega_hess(a, omega[k0], stats.num_docs, h) ==
          doctest::Approx(fd_h).epsilon(1e-5));
  }
  CHECK(grad_checks >= 100);
}

TEST_CASE("update_tau keeps a symmetric configuration uniform") {
  const int K = 4;
  CollectionStats stats;
  stats.num_docs = 3;
  stats.psi_rho_k.assign(K, 3.0 * digamma(1.7));  // identical documents
  stats.psi_rho_dot = 3.0 * digamma(1.7 * K);
  const Hyperparameters h{0.6, 1.2, 0.4};
  const std::vector<double> omega0(K, 1.0 / K);
  auto result = update_tau(2.3, omega0, stats, h);
  for (int k = 0; k < K; ++k) {
    CHECK(result.omega[k] == doctest::Approx(1.0 / K).epsilon(1e-12));
  }
}

TEST_CASE("update_tau improves the objective and keeps feasibility") {
  Rng rng(23);
  for (int rep = 0; rep < 25; ++rep) {
    const int K = 2 + static_cast<int>(rng.uniform() * 4);
    const Hyperparameters h{0.3 + rng.uniform(), 0.3 + rng.uniform(),
                            0.2 + rng.uniform()};
    auto stats = random_stats(rng, K);
    std::vector<double> params(K, 2.0);
    auto omega0 = rng.dirichlet(params);
    for (auto& w : omega0) w = std::max(w, 0.05);
    double norm = std::accumulate(omega0.begin(), omega0.end(), 0.0);
    for (auto& w : omega0) w /= norm;
    const double a0 = 0.5 + 4.0 * rng.uniform();

    auto result = update_tau(a0, omega0, stats, h);
    CHECK(result.a > 0.0);
    double sum = 0.0;
    for (double w : result.omega) {
      CHECK(w > 0.0);
      sum += w;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(tau_objective(result.a, result.omega, stats, h) >=
          tau_objective(a0, omega0, stats, h) - 1e-9);
  }
}

TEST_CASE("elbo matches a hand-expanded two-token evaluation") {
  auto corpus = two_token_corpus();
  auto params = two_token_params();
  const Hyperparameters h{0.5, 1.5, 0.4};
  const auto report = compute_elbo(corpus, params, h);

  const double tau0 = 2.0 * 0.6;
  const double tau1 = 2.0 * 0.4;
  // topic prior
  double beta_prior = 0.0;
  for (int k = 0; k < 2; ++k) {
    const double sum = params.lambda(k, 0) + params.lambda(k, 1);
    beta_prior += std::lgamma(2 * 0.4) - 2 * std::lgamma(0.4) +
                  (0.4 - 1) * (digamma(params.lambda(k, 0)) - digamma(sum)) +
                  (0.4 - 1) * (digamma(params.lambda(k, 1)) - digamma(sum));
  }
  CHECK(report.beta_log_prior == doctest::Approx(beta_prior).epsilon(1e-12));

  const double pi_prior =
      std::lgamma(2 * 0.5) - 2 * std::lgamma(0.5) +
      (0.5 - 1) * (digamma(tau0) - digamma(2.0)) +
      (0.5 - 1) * (digamma(tau1) - digamma(2.0));
  CHECK(report.pi_log_prior == doctest::Approx(pi_prior).epsilon(1e-12));

  const double theta_bound =
      std::lgamma(1.5) - 1.5 / 2.0 * (2 - 1) -
      (1.5 - 2) * (std::log(2.0) - digamma(2.0) + digamma(1.3 + 0.7)) -
      (std::lgamma(1.5 * 0.6) +
       (1 - 1.5 * 0.6) * (std::log(tau0) - digamma(tau0) + digamma(1.3))) -
      (std::lgamma(1.5 * 0.4) +
       (1 - 1.5 * 0.4) * (std::log(tau1) - digamma(tau1) + digamma(0.7)));
  CHECK(report.theta_log_prior_bound == doctest::Approx(theta_bound).epsilon(1e-12));

  const double elog_theta0 = digamma(1.3) - digamma(2.0);
  const double elog_theta1 = digamma(0.7) - digamma(2.0);
  const double z_ll = 0.7 * elog_theta0 + 0.3 * elog_theta1 +
                      0.2 * elog_theta0 + 0.8 * elog_theta1;
  CHECK(report.z_log_likelihood == doctest::Approx(z_ll).epsilon(1e-12));

  const double w_ll =
      0.7 * (digamma(1.5) - digamma(2.0)) + 0.3 * (digamma(0.8) - digamma(2.0)) +
      0.2 * (digamma(0.5) - digamma(2.0)) + 0.8 * (digamma(1.2) - digamma(2.0));
  CHECK(report.word_log_likelihood == doctest::Approx(w_ll).epsilon(1e-12));

  auto neg_entropy = [](std::vector<double> p) {
    const double sum = std::accumulate(p.begin(), p.end(), 0.0);
    double value = std::lgamma(sum);
    for (double x : p) {
      value += -std::lgamma(x) + (x - 1) * (digamma(x) - digamma(sum));
    }
    return -value;
  };
  CHECK(report.neg_q_beta ==
        doctest::Approx(neg_entropy({1.5, 0.5}) + neg_entropy({0.8, 1.2}))
            .epsilon(1e-12));
  CHECK(report.neg_q_pi == doctest::Approx(neg_entropy({tau0, tau1})).epsilon(1e-12));
  CHECK(report.neg_q_theta == doctest::Approx(neg_entropy({1.3, 0.7})).epsilon(1e-12));

  const double neg_q_phi = -(0.7 * std::log(0.7) + 0.3 * std::log(0.3) +
                             0.2 * std::log(0.2) + 0.8 * std::log(0.8));
  CHECK(report.neg_q_phi == doctest::Approx(neg_q_phi).epsilon(1e-12));

  const double total = beta_prior + pi_prior + theta_bound + z_ll + w_ll +
                       report.neg_q_beta + report.neg_q_pi + report.neg_q_theta +
                       neg_q_phi;
  CHECK(report.total == doctest::Approx(total).epsilon(1e-12));
}

TEST_CASE("uniform responsibilities contribute log K per token to the entropy") {
  auto corpus = two_token_corpus();
  auto params = two_token_params();
  params.phi[0] = MatD(2, 2, 0.5);
  const Hyperparameters h{0.5, 1.5, 0.4};
  const auto report = compute_elbo(corpus, params, h);
  CHECK(report.neg_q_phi == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("closed-form updates are coordinate ascent on the bound") {
  SynthConfig sc;
  sc.num_collections = 2;
  sc.num_topics = 3;
  sc.vocab_size = 8;
  sc.docs_per_collection = 4;
  sc.words_per_doc = 10;
  sc.seed = 97;
  auto data = generate(sc);
  const Hyperparameters h{0.5, 1.2, 0.4};
  const int K = 3;

  // Arbitrary but valid starting parameters.
  Rng rng(3);
  VariationalParams params;
  params.lambda = MatD(K, data.corpus.vocab_size());
  for (auto& x : params.lambda.data()) x = 0.2 + rng.uniform();
  params.a.assign(2, 1.7);
  params.omega = MatD(2, K);
  for (int j = 0; j < 2; ++j) {
    auto row = rng.dirichlet(std::vector<double>(K, 2.0));
    for (int k = 0; k < K; ++k) params.omega(j, k) = row[k];
  }
  params.rho = MatD(data.corpus.num_docs(), K);
  for (auto& x : params.rho.data()) x = 0.5 + 2.0 * rng.uniform();
  params.phi.resize(data.corpus.num_docs());
  for (std::size_t d = 0; d < data.corpus.num_docs(); ++d) {
    params.phi[d] = MatD(data.corpus.docs[d].size(), K);
    for (std::size_t i = 0; i < data.corpus.docs[d].size(); ++i) {
      auto row = rng.dirichlet(std::vector<double>(K, 1.0));
      for (int k = 0; k < K; ++k) params.phi[d](i, k) = row[k];
    }
  }

  const double elbo0 = compute_elbo(data.corpus, params, h).total;
  Rng prng(7);

  // phi update holding the rest fixed; immediately afterwards, perturbing
  // any row must not raise the bound (rows are independent maximizers given
  // rho and lambda).
  for (std::size_t d = 0; d < data.corpus.num_docs(); ++d) {
    for (std::size_t i = 0; i < data.corpus.docs[d].size(); ++i) {
      std::vector<double> row(K);
      update_phi(params.rho.row(d), params.lambda, data.corpus.docs[d][i], row);
      for (int k = 0; k < K; ++k) params.phi[d](i, k) = row[k];
    }
  }
  const double elbo1 = compute_elbo(data.corpus, params, h).total;
  CHECK(elbo1 >= elbo0 - 1e-8);
  for (int rep = 0; rep < 10; ++rep) {
    auto perturbed = params;
    const int d = static_cast<int>(prng.uniform() * data.corpus.num_docs());
    const int i = static_cast<int>(prng.uniform() * data.corpus.docs[d].size());
    auto noise = prng.dirichlet(std::vector<double>(K, 1.0));
    for (int k = 0; k < K; ++k) {
      perturbed.phi[d](i, k) = 0.98 * params.phi[d](i, k) + 0.02 * noise[k];
    }
    CHECK(compute_elbo(data.corpus, perturbed, h).total <= elbo1 + 1e-10);
  }

  // rho update from the new phi, then its perturbation check.
  for (std::size_t d = 0; d < data.corpus.num_docs(); ++d) {
    const int j = data.corpus.collection_of[d];
    std::vector<double> row(K);
    update_rho(params.phi[d], params.a[j], params.omega.row(j), h.gamma, row);
    for (int k = 0; k < K; ++k) params.rho(d, k) = row[k];
  }
  const double elbo2 = compute_elbo(data.corpus, params, h).total;
  CHECK(elbo2 >= elbo1 - 1e-8);
  for (int rep = 0; rep < 10; ++rep) {
    auto perturbed = params;
    const int d = static_cast<int>(prng.uniform() * data.corpus.num_docs());
    for (int k = 0; k < K; ++k) {
      perturbed.rho(d, k) *= 1.0 + 0.02 * (prng.uniform() - 0.5);
    }
    CHECK(compute_elbo(data.corpus, perturbed, h).total <= elbo2 + 1e-10);
  }

  // lambda update from the new phi, then its perturbation check.
  params.lambda = update_lambda(data.corpus, params.phi, h.eta);
  const double elbo3 = compute_elbo(data.corpus, params, h).total;
  CHECK(elbo3 >= elbo2 - 1e-8);
  for (int rep = 0; rep < 10; ++rep) {
    auto perturbed = params;
    for (auto& x : perturbed.lambda.data()) {
      x *= 1.0 + 0.02 * (prng.uniform() - 0.5);
    }
    CHECK(compute_elbo(data.corpus, perturbed, h).total <= elbo3 + 1e-10);
  }
}

TEST_CASE("vem_run terminates with valid parameters") {
  SynthConfig sc;
  sc.num_collections = 2;
  sc.num_topics = 3;
  sc.vocab_size = 15;
  sc.docs_per_collection = 10;
  sc.words_per_doc = 20;
  sc.seed = 101;
  auto data = generate(sc);
  VemConfig config;
  config.max_iterations = 60;
  config.seed = 2;
  auto result = vem_run(data.corpus, 3, {0.5, 1.0, 0.4}, config);
  REQUIRE(!result.history.empty());

  const auto& params = result.params;
  for (int j = 0; j < 2; ++j) {
    CHECK(params.a[j] > 0.0);
    double sum = 0.0;
    for (int k = 0; k < 3; ++k) {
      CHECK(params.omega(j, k) > 0.0);
      sum += params.omega(j, k);
      CHECK(params.expected_pi(j, k) ==
            doctest::Approx(params.tau(j, k) /
                            (params.a[j])).epsilon(1e-12));
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
  for (std::size_t d = 0; d < data.corpus.num_docs(); ++d) {
    double rho_sum = 0.0;
    for (int k = 0; k < 3; ++k) {
      CHECK(params.rho(d, k) > 0.0);
      rho_sum += params.rho(d, k);
    }
    CHECK(rho_sum == doctest::Approx(1.0 + data.corpus.docs[d].size()).epsilon(1e-9));
    for (std::size_t i = 0; i < data.corpus.docs[d].size(); ++i) {
      double row = 0.0;
      for (int k = 0; k < 3; ++k) row += params.phi[d](i, k);
      CHECK(row == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("vem_run with hyperparameter optimization keeps h positive") {
  SynthConfig sc;
  sc.num_collections = 2;
  sc.num_topics = 2;
  sc.vocab_size = 10;
  sc.docs_per_collection = 6;
  sc.words_per_doc = 15;
  sc.seed = 103;
  auto data = generate(sc);
  VemConfig config;
  config.max_iterations = 15;
  config.optimize_hyperparameters = true;
  config.seed = 4;
  auto result = vem_run(data.corpus, 2, {0.5, 1.0, 0.4}, config);
  CHECK(result.h.alpha > 0.0);
  CHECK(result.h.gamma > 0.0);
  CHECK(result.h.eta > 0.0);
}
