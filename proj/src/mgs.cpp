// SPDX-License-Identifier: Apache-2.0
#include "clda/mgs.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "clda/ags.hpp"
#include "clda/special_functions.hpp"

namespace clda {

namespace {

double abs_clamped(double x) { return std::max(std::abs(x), kVarphiFloor); }

double sign_of(double x) { return x < 0.0 ? -1.0 : 1.0; }

}  // namespace

double log_target_varphi(std::span<const double> varphi,
                         const CountStatistics& counts,
                         std::span<const int> collection_docs,
                         const Hyperparameters& h) {
  const auto K = varphi.size();
  double total_mag = 0.0;
  double prior = 0.0;
  for (double phi : varphi) {
    const double mag = abs_clamped(phi);
    total_mag += mag;
    prior += (h.alpha - 1.0) * std::log(mag) - mag;
  }
  double data = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    const double gp = h.gamma * abs_clamped(varphi[k]) / total_mag;
    const double lg_gp = std::lgamma(gp);
    for (int d : collection_docs) {
      const int n = counts.doc_topic(d, k);
      if (n > 0) data += std::lgamma(gp + n) - lg_gp;
    }
  }
  return prior + data;
}

std::vector<double> grad_log_target(std::span<const double> varphi,
                                    const CountStatistics& counts,
                                    std::span<const int> collection_docs,
                                    const Hyperparameters& h) {
  const auto K = varphi.size();
  double total_mag = 0.0;
  for (double phi : varphi) total_mag += abs_clamped(phi);

  // B_k = sum_d [psi(gamma u_k) - psi(gamma u_k + n_dk)];
  // A   = sum_k |varphi_k| B_k.
  std::vector<double> b(K, 0.0);
  double a_sum = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    const double mag = abs_clamped(varphi[k]);
    const double gp = h.gamma * mag / total_mag;
    const double psi_gp = digamma(gp);
    for (int d : collection_docs) {
      const int n = counts.doc_topic(d, k);
      if (n > 0) b[k] += psi_gp - digamma(gp + n);
    }
    a_sum += mag * b[k];
  }

  std::vector<double> grad(K);
  for (std::size_t k = 0; k < K; ++k) {
    const double mag = abs_clamped(varphi[k]);
    grad[k] = sign_of(varphi[k]) *
              (h.gamma / (total_mag * total_mag) * a_sum -
               h.gamma / total_mag * b[k] + (h.alpha - 1.0) / mag - 1.0);
  }
  return grad;
}

std::vector<double> mmala_mean(std::span<const double> varphi,
                               std::span<const double> grad, double eps) {
  std::vector<double> mu(varphi.size());
  const double half_eps2 = 0.5 * eps * eps;
  for (std::size_t k = 0; k < varphi.size(); ++k) {
    mu[k] = varphi[k] + half_eps2 * abs_clamped(varphi[k]) * grad[k] +
            half_eps2 * sign_of(varphi[k]);
  }
  return mu;
}

MmalaProposal mmala_propose(Rng& rng, std::span<const double> varphi,
                            std::span<const double> grad, double eps) {
  MmalaProposal prop;
  prop.varphi = mmala_mean(varphi, grad, eps);
  prop.xi.resize(varphi.size());
  for (std::size_t k = 0; k < varphi.size(); ++k) {
    prop.xi[k] = rng.normal();
    prop.varphi[k] += eps * std::sqrt(abs_clamped(varphi[k])) * prop.xi[k];
  }
  return prop;
}

double mmala_log_density(std::span<const double> to,
                         std::span<const double> from,
                         std::span<const double> grad_from, double eps) {
  const auto mu = mmala_mean(from, grad_from, eps);
  double log_q = 0.0;
  for (std::size_t k = 0; k < to.size(); ++k) {
    const double var = eps * eps * abs_clamped(from[k]);
    const double diff = to[k] - mu[k];
    log_q += -0.5 * std::log(2.0 * std::numbers::pi * var) -
             diff * diff / (2.0 * var);
  }
  return log_q;
}

MgsStepInfo mgs_step(Rng& rng, std::vector<double>& varphi,
                     const CountStatistics& counts,
                     std::span<const int> collection_docs,
                     const Hyperparameters& h, double eps) {
  MgsStepInfo info;
  info.log_target_current = log_target_varphi(varphi, counts, collection_docs, h);
  const auto grad_cur = grad_log_target(varphi, counts, collection_docs, h);
  const auto prop = mmala_propose(rng, varphi, grad_cur, eps);

  info.log_target_proposal =
      log_target_varphi(prop.varphi, counts, collection_docs, h);
  const auto grad_prop = grad_log_target(prop.varphi, counts, collection_docs, h);
  info.log_q_forward = mmala_log_density(prop.varphi, varphi, grad_cur, eps);
  info.log_q_reverse = mmala_log_density(varphi, prop.varphi, grad_prop, eps);

  const double log_ratio = info.log_target_proposal - info.log_target_current +
                           info.log_q_reverse - info.log_q_forward;
  info.uniform_draw = rng.uniform();
  info.accepted =
      std::isfinite(log_ratio) && std::log(info.uniform_draw) < std::min(0.0, log_ratio);
  if (info.accepted) varphi = prop.varphi;
  return info;
}

namespace {

// Dual averaging on log(eps), frozen after burn-in.
struct StepSizeAdapter {
  double mu = 0.0;
  double log_eps = 0.0;
  double log_eps_bar = 0.0;
  double h_bar = 0.0;
  int t = 0;

  explicit StepSizeAdapter(double eps0)
      : mu(std::log(eps0)), log_eps(std::log(eps0)), log_eps_bar(std::log(eps0)) {}

  void update(double accept_prob, double target) {
    ++t;
    constexpr double kT0 = 10.0;
    constexpr double kGamma = 0.05;
    constexpr double kKappa = 0.75;
    h_bar += (target - accept_prob - h_bar) / (t + kT0);
    log_eps = mu - std::sqrt(static_cast<double>(t)) / kGamma * h_bar;
    log_eps = std::clamp(log_eps, std::log(1e-8), std::log(10.0));
    const double w = std::pow(static_cast<double>(t), -kKappa);
    log_eps_bar = w * log_eps + (1.0 - w) * log_eps_bar;
  }

  double current() const { return std::exp(log_eps); }
  double frozen() const { return std::exp(log_eps_bar); }
};

}  // namespace

ChainTrace mgs_run(const Corpus& corpus, int K, const Hyperparameters& h,
                   const MgsConfig& config, const ChainInit& init) {
  if (K < 1) throw std::invalid_argument("mgs_run: K must be >= 1");
  if (!(config.epsilon > 0.0)) {
    throw std::invalid_argument("mgs_run: epsilon must be positive");
  }
  h.validate();
  config.validate();
  corpus.validate();

  Rng rng = init.rng_state ? Rng::deserialize(*init.rng_state) : Rng(config.seed);
  const int J = corpus.num_collections;

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

  // varphi restored exactly when given; reparameterized from supplied
  // mixtures on a warm start; otherwise drawn from the prior.
  std::vector<std::vector<double>> varphi(J, std::vector<double>(K));
  if (init.varphi) {
    for (int j = 0; j < J; ++j) {
      for (int k = 0; k < K; ++k) varphi[j][k] = (*init.varphi)(j, k);
    }
  } else if (init.pi) {
    for (int j = 0; j < J; ++j) {
      for (int k = 0; k < K; ++k) varphi[j][k] = (*init.pi)(j, k);
    }
  } else {
    for (auto& row : varphi) {
      for (auto& phi : row) phi = rng.gamma(h.alpha);
    }
  }
  MatD pi(J, K);
  auto refresh_pi = [&](int j) {
    double total = 0.0;
    for (int k = 0; k < K; ++k) total += abs_clamped(varphi[j][k]);
    for (int k = 0; k < K; ++k) pi(j, k) = abs_clamped(varphi[j][k]) / total;
  };
  for (int j = 0; j < J; ++j) refresh_pi(j);

  auto counts = recompute_counts(corpus, z, K);
  const auto by_coll = corpus.docs_of_collection();

  std::vector<double> epsilons(J, config.epsilon);
  if (init.epsilons) epsilons = *init.epsilons;
  std::vector<StepSizeAdapter> adapters;
  for (int j = 0; j < J; ++j) adapters.emplace_back(epsilons[j]);

  ChainTrace trace;
  const auto start = std::chrono::steady_clock::now();
  for (int iter = init.start_iteration + 1; iter <= config.iterations; ++iter) {
    sweep_z(rng, corpus, h, pi, counts, z);

    for (int j = 0; j < J; ++j) {
      const auto info = mgs_step(rng, varphi[j], counts, by_coll[j], h, epsilons[j]);
      ++trace.diagnostics.proposals;
      if (info.accepted) ++trace.diagnostics.accepts;
      if (config.adapt_epsilon && iter <= config.burn_in) {
        const double log_ratio = info.log_target_proposal - info.log_target_current +
                                 info.log_q_reverse - info.log_q_forward;
        const double accept_prob =
            std::isfinite(log_ratio) ? std::min(1.0, std::exp(log_ratio)) : 0.0;
        adapters[j].update(accept_prob, config.target_acceptance);
        epsilons[j] = iter == config.burn_in ? adapters[j].frozen()
                                             : adapters[j].current();
      }
      refresh_pi(j);
    }

    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    double eps_mean = 0.0;
    for (double e : epsilons) eps_mean += e;
    eps_mean /= J;
    trace.rows.push_back({iter,
                          log_collapsed_posterior(corpus, counts, pi, h), seconds,
                          trace.diagnostics.acceptance_rate(), eps_mean});
    trace.pi_history.push_back(pi);
    if (iter > config.burn_in && (iter - config.burn_in) % config.save_every == 0) {
      trace.samples.push_back({iter, pi, counts.doc_topic, counts.doc_total,
                               counts.topic_term, counts.topic_total});
    }
  }
  trace.final_pi = pi;
  trace.final_z = std::move(z);
  trace.final_rng_state = rng.serialize();
  trace.final_epsilons = epsilons;
  trace.final_varphi = MatD(J, K);
  for (int j = 0; j < J; ++j) {
    for (int k = 0; k < K; ++k) trace.final_varphi(j, k) = varphi[j][k];
  }
  return trace;
}

}  // namespace clda
