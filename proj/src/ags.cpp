// SPDX-License-Identifier: Apache-2.0
#include "clda/ags.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace clda {

void z_conditional_weights(const CountStatistics& counts, int doc, int word,
                           std::span<const double> pi_row,
                           const Hyperparameters& h, std::span<double> out) {
  const auto K = pi_row.size();
  const auto V = counts.topic_term.cols();
  const double doc_denom = h.gamma + counts.doc_total[doc];
  const double term_prior = static_cast<double>(V) * h.eta;
  for (std::size_t k = 0; k < K; ++k) {
    out[k] = (h.gamma * pi_row[k] + counts.doc_topic(doc, k)) / doc_denom *
             (h.eta + counts.topic_term(k, word)) /
             (term_prior + counts.topic_total[k]);
  }
}

int antoniak_sample(Rng& rng, int n, double concentration) {
  if (n < 0) throw std::invalid_argument("antoniak_sample: n must be >= 0");
  if (n == 0) return 0;
  int s = 1;  // l = 1 succeeds with probability c / c
  for (int l = 2; l <= n; ++l) {
    if (rng.uniform() < concentration / (concentration + l - 1.0)) ++s;
  }
  return s;
}

std::vector<double> sample_pi(Rng& rng, std::span<const int> table_totals,
                              double alpha) {
  std::vector<double> params(table_totals.size());
  for (std::size_t k = 0; k < params.size(); ++k) {
    params[k] = table_totals[k] + alpha;
  }
  return rng.dirichlet(params);
}

void sweep_z(Rng& rng, const Corpus& corpus, const Hyperparameters& h,
             const MatD& pi, CountStatistics& counts,
             std::vector<std::vector<int>>& z) {
  const auto K = pi.cols();
  std::vector<double> weights(K);
  for (std::size_t d = 0; d < corpus.num_docs(); ++d) {
    const int doc = static_cast<int>(d);
    const auto pi_row = pi.row(corpus.collection_of[d]);
    const auto& words = corpus.docs[d];
    auto& labels = z[d];
    for (std::size_t i = 0; i < words.size(); ++i) {
      const int v = words[i];
      counts.remove(doc, labels[i], v);
      z_conditional_weights(counts, doc, v, pi_row, h, weights);
      const int k = rng.categorical(weights);
      counts.add(doc, k, v);
      labels[i] = k;
    }
  }
}

namespace {

// Uniform-random z; pi from its Dirichlet prior. Pieces supplied by `init`
// are taken as-is.
struct ChainState {
  Rng rng;
  std::vector<std::vector<int>> z;
  MatD pi;
  CountStatistics counts;
};

ChainState init_chain(const Corpus& corpus, int K, const Hyperparameters& h,
                      const ChainConfig& config, const ChainInit& init) {
  ChainState state{init.rng_state ? Rng::deserialize(*init.rng_state)
                                  : Rng(config.seed),
                   {}, {}, {}};
  if (init.z) {
    state.z = *init.z;
  } else {
    state.z.resize(corpus.num_docs());
    for (std::size_t d = 0; d < corpus.num_docs(); ++d) {
      state.z[d].resize(corpus.docs[d].size());
      for (auto& label : state.z[d]) {
        label = static_cast<int>(state.rng.uniform() * K);
      }
    }
  }
  if (init.pi) {
    state.pi = *init.pi;
  } else {
    state.pi = MatD(corpus.num_collections, K);
    const std::vector<double> prior(K, h.alpha);
    for (int j = 0; j < corpus.num_collections; ++j) {
      auto draw = state.rng.dirichlet(prior);
      for (int k = 0; k < K; ++k) state.pi(j, k) = draw[k];
    }
  }
  state.counts = recompute_counts(corpus, state.z, K);
  return state;
}

}  // namespace

ChainTrace ags_run(const Corpus& corpus, int K, const Hyperparameters& h,
                   const ChainConfig& config, const ChainInit& init) {
  if (K < 1) throw std::invalid_argument("ags_run: K must be >= 1");
  h.validate();
  config.validate();
  corpus.validate();

  auto state = init_chain(corpus, K, h, config, init);
  const auto by_coll = corpus.docs_of_collection();

  ChainTrace trace;
  const auto start = std::chrono::steady_clock::now();
  std::vector<int> tables(K);
  for (int iter = init.start_iteration + 1; iter <= config.iterations; ++iter) {
    sweep_z(state.rng, corpus, h, state.pi, state.counts, state.z);

    for (int j = 0; j < corpus.num_collections; ++j) {
      std::fill(tables.begin(), tables.end(), 0);
      for (int d : by_coll[j]) {
        for (int k = 0; k < K; ++k) {
          const int n = state.counts.doc_topic(d, k);
          if (n > 0) {
            const double c = std::max(h.gamma * state.pi(j, k), 1e-300);
            tables[k] += antoniak_sample(state.rng, n, c);
          }
        }
      }
      auto draw = sample_pi(state.rng, tables, h.alpha);
      for (int k = 0; k < K; ++k) state.pi(j, k) = draw[k];
    }

    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    trace.rows.push_back({iter,
                          log_collapsed_posterior(corpus, state.counts, state.pi, h),
                          seconds});
    trace.pi_history.push_back(state.pi);
    if (iter > config.burn_in && (iter - config.burn_in) % config.save_every == 0) {
      trace.samples.push_back({iter, state.pi, state.counts.doc_topic,
                               state.counts.doc_total, state.counts.topic_term,
                               state.counts.topic_total});
    }
  }
  trace.final_pi = state.pi;
  trace.final_z = std::move(state.z);
  trace.final_rng_state = state.rng.serialize();
  return trace;
}

}  // namespace clda
