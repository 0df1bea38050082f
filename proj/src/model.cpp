// SPDX-License-Identifier: Apache-2.0
#include "clda/model.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "clda/errors.hpp"
#include "json.hpp"

namespace clda {

void Hyperparameters::validate() const {
  if (!(alpha > 0.0) || !(gamma > 0.0) || !(eta > 0.0)) {
    throw std::domain_error("hyperparameters must be strictly positive");
  }
}

CountStatistics::CountStatistics(std::size_t num_docs, std::size_t num_topics,
                                 std::size_t vocab)
    : doc_topic(num_docs, num_topics),
      doc_total(num_docs, 0),
      topic_term(num_topics, vocab),
      topic_total(num_topics, 0) {}

void CountStatistics::add(int doc, int topic, int word) {
  ++doc_topic(doc, topic);
  ++doc_total[doc];
  ++topic_term(topic, word);
  ++topic_total[topic];
}

void CountStatistics::remove(int doc, int topic, int word) {
  --doc_topic(doc, topic);
  --doc_total[doc];
  --topic_term(topic, word);
  --topic_total[topic];
}

bool CountStatistics::consistent() const {
  long long grand_doc = 0;
  for (std::size_t d = 0; d < doc_topic.rows(); ++d) {
    long long row = 0;
    for (std::size_t k = 0; k < doc_topic.cols(); ++k) {
      if (doc_topic(d, k) < 0) return false;
      row += doc_topic(d, k);
    }
    if (row != doc_total[d]) return false;
    grand_doc += row;
  }
  long long grand_topic = 0;
  for (std::size_t k = 0; k < topic_term.rows(); ++k) {
    long long row = 0;
    for (std::size_t v = 0; v < topic_term.cols(); ++v) {
      if (topic_term(k, v) < 0) return false;
      row += topic_term(k, v);
    }
    if (row != topic_total[k]) return false;
    grand_topic += row;
  }
  return grand_doc == grand_topic;
}

CountStatistics recompute_counts(const Corpus& corpus,
                                 const std::vector<std::vector<int>>& z, int K) {
  if (z.size() != corpus.num_docs()) {
    throw std::invalid_argument("recompute_counts: z does not cover the corpus");
  }
  CountStatistics counts(corpus.num_docs(), K, corpus.vocab_size());
  for (std::size_t d = 0; d < corpus.num_docs(); ++d) {
    if (z[d].size() != corpus.docs[d].size()) {
      throw std::invalid_argument("recompute_counts: z does not cover document " +
                                  std::to_string(d));
    }
    for (std::size_t i = 0; i < z[d].size(); ++i) {
      counts.add(static_cast<int>(d), z[d][i], corpus.docs[d][i]);
    }
  }
  return counts;
}

double log_joint(const Corpus& corpus, const ModelState& state,
                 const Hyperparameters& h) {
  h.validate();
  const int K = state.K;
  const auto V = corpus.vocab_size();
  const auto counts = recompute_counts(corpus, state.z, K);

  double total = 0.0;
  // Document factor: prod_k theta^{n + gamma pi - 1} / prod_k Gamma(gamma pi)
  for (std::size_t d = 0; d < corpus.num_docs(); ++d) {
    const int j = corpus.collection_of[d];
    for (int k = 0; k < K; ++k) {
      const double gp = h.gamma * state.pi[j][k];
      total += (counts.doc_topic(static_cast<int>(d), k) + gp - 1.0) *
                   std::log(state.theta[d][k]) -
               std::lgamma(gp);
    }
  }
  // Collection factor: prod_jk pi^{alpha - 1}
  for (const auto& pi_j : state.pi) {
    for (int k = 0; k < K; ++k) {
      total += (h.alpha - 1.0) * std::log(pi_j[k]);
    }
  }
  // Topic factor: prod_kv beta^{m + eta - 1}
  for (int k = 0; k < K; ++k) {
    for (std::size_t v = 0; v < V; ++v) {
      total += (counts.topic_term(k, v) + h.eta - 1.0) * std::log(state.beta[k][v]);
    }
  }
  if (!std::isfinite(total)) throw NumericError("log_joint: non-finite result");
  return total;
}

double log_collapsed_posterior(const Corpus& corpus,
                               const CountStatistics& counts, const MatD& pi,
                               const Hyperparameters& h) {
  const auto K = pi.cols();
  const auto V = counts.topic_term.cols();
  double total = 0.0;
  for (std::size_t d = 0; d < corpus.num_docs(); ++d) {
    const int j = corpus.collection_of[d];
    for (std::size_t k = 0; k < K; ++k) {
      const int n = counts.doc_topic(d, k);
      if (n > 0) {
        const double gp = h.gamma * pi(j, k);
        total += std::lgamma(gp + n) - std::lgamma(gp);
      }
    }
  }
  for (std::size_t j = 0; j < pi.rows(); ++j) {
    for (std::size_t k = 0; k < K; ++k) {
      total += (h.alpha - 1.0) * std::log(pi(j, k));
    }
  }
  const double lg_eta = std::lgamma(h.eta);
  for (std::size_t k = 0; k < K; ++k) {
    double row = 0.0;
    std::size_t zeros = 0;
    for (std::size_t v = 0; v < V; ++v) {
      const int m = counts.topic_term(k, v);
      if (m > 0) {
        row += std::lgamma(m + h.eta);
      } else {
        ++zeros;
      }
    }
    row += static_cast<double>(zeros) * lg_eta;
    total += row - std::lgamma(counts.topic_total[k] + static_cast<double>(V) * h.eta);
  }
  if (!std::isfinite(total)) {
    throw NumericError("log_collapsed_posterior: non-finite result");
  }
  return total;
}

void sample_theta_beta(Rng& rng, const CountStatistics& counts, const MatD& pi,
                       const std::vector<int>& collection_of,
                       const Hyperparameters& h, MatD* theta, MatD* beta) {
  const auto D = counts.doc_topic.rows();
  const auto K = counts.doc_topic.cols();
  const auto V = counts.topic_term.cols();
  if (theta) {
    *theta = MatD(D, K);
    std::vector<double> params(K);
    for (std::size_t d = 0; d < D; ++d) {
      const int j = collection_of[d];
      for (std::size_t k = 0; k < K; ++k) {
        params[k] = counts.doc_topic(d, k) + h.gamma * pi(j, k);
      }
      auto draw = rng.dirichlet(params);
      for (std::size_t k = 0; k < K; ++k) (*theta)(d, k) = draw[k];
    }
  }
  if (beta) {
    *beta = MatD(K, V);
    std::vector<double> params(V);
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t v = 0; v < V; ++v) {
        params[v] = counts.topic_term(k, v) + h.eta;
      }
      auto draw = rng.dirichlet(params);
      for (std::size_t v = 0; v < V; ++v) (*beta)(k, v) = draw[v];
    }
  }
}

namespace {

nlohmann::json mat_to_json(const MatD& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    rows.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
  }
  return rows;
}

MatD mat_from_json(const nlohmann::json& j) {
  const auto rows = j.size();
  if (rows == 0) return {};
  const auto cols = j[0].size();
  MatD m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

}  // namespace

void save_checkpoint(const Checkpoint& cp, const std::string& path) {
  nlohmann::json j;
  j["version"] = 1;
  j["algo"] = cp.algo;
  j["K"] = cp.K;
  j["h"] = {{"alpha", cp.h.alpha}, {"gamma", cp.h.gamma}, {"eta", cp.h.eta}};
  j["iteration"] = cp.iteration;
  j["z"] = cp.z;
  j["pi"] = mat_to_json(cp.pi);
  j["rng"] = cp.rng_state;
  j["epsilons"] = cp.epsilons;
  if (cp.varphi.rows() > 0) j["varphi"] = mat_to_json(cp.varphi);
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump() << '\n';
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  Checkpoint cp;
  cp.algo = j.at("algo").get<std::string>();
  cp.K = j.at("K").get<int>();
  cp.h.alpha = j.at("h").at("alpha").get<double>();
  cp.h.gamma = j.at("h").at("gamma").get<double>();
  cp.h.eta = j.at("h").at("eta").get<double>();
  cp.iteration = j.at("iteration").get<int>();
  cp.z = j.at("z").get<std::vector<std::vector<int>>>();
  cp.pi = mat_from_json(j.at("pi"));
  cp.rng_state = j.at("rng").get<std::array<std::string, 5>>();
  cp.epsilons = j.value("epsilons", std::vector<double>{});
  if (j.contains("varphi")) cp.varphi = mat_from_json(j.at("varphi"));
  return cp;
}

}  // namespace clda
