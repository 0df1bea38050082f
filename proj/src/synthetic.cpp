// SPDX-License-Identifier: Apache-2.0
#include "clda/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "clda/errors.hpp"
#include "clda/rng.hpp"
#include "json.hpp"

namespace clda {

void SynthConfig::validate() const {
  if (num_collections < 1 || num_topics < 1 || vocab_size < 1 ||
      docs_per_collection < 1 || words_per_doc < 1) {
    throw std::invalid_argument("synthetic: all dimensions must be positive");
  }
  h.validate();
}

SynthConfig synth_preset(const std::string& name) {
  SynthConfig config;
  if (name == "synth-3.2") {
    config.h = {0.1, 1.0, 0.25};
  } else if (name == "synth-3.3") {
    config.h = {1.0, 0.8, 0.5};
  } else {
    throw DataError("unknown preset: " + name);
  }
  return config;
}

SyntheticData generate(const SynthConfig& config) {
  config.validate();
  Rng rng(config.seed);
  const int J = config.num_collections;
  const int K = config.num_topics;
  const int V = config.vocab_size;
  const int D = J * config.docs_per_collection;

  SyntheticData data;
  data.beta = MatD(K, V);
  if (config.fixed_beta) {
    data.beta = *config.fixed_beta;
  } else {
    const std::vector<double> eta_prior(V, config.h.eta);
    for (int k = 0; k < K; ++k) {
      auto row = rng.dirichlet(eta_prior);
      for (int v = 0; v < V; ++v) data.beta(k, v) = row[v];
    }
  }
  data.pi = MatD(J, K);
  if (config.fixed_pi) {
    data.pi = *config.fixed_pi;
  } else {
    const std::vector<double> alpha_prior(K, config.h.alpha);
    for (int j = 0; j < J; ++j) {
      auto row = rng.dirichlet(alpha_prior);
      for (int k = 0; k < K; ++k) data.pi(j, k) = row[k];
    }
  }

  data.theta = MatD(D, K);
  data.z.resize(D);
  data.corpus.docs.resize(D);
  data.corpus.collection_of.resize(D);
  data.corpus.num_collections = J;
  for (int v = 0; v < V; ++v) {
    data.corpus.vocab.terms.push_back("w" + std::to_string(v));
  }

  std::vector<double> theta_prior(K);
  int doc = 0;
  for (int j = 0; j < J; ++j) {
    for (int d = 0; d < config.docs_per_collection; ++d, ++doc) {
      data.corpus.collection_of[doc] = j;
      for (int k = 0; k < K; ++k) {
        theta_prior[k] = std::max(config.h.gamma * data.pi(j, k), 1e-300);
      }
      auto theta_row = rng.dirichlet(theta_prior);
      for (int k = 0; k < K; ++k) data.theta(doc, k) = theta_row[k];

      int length = config.words_per_doc;
      if (config.poisson_lengths) {
        // Knuth's method is fine at these rates.
        const double limit = std::exp(-static_cast<double>(config.words_per_doc));
        double p = 1.0;
        length = 0;
        do {
          ++length;
          p *= rng.uniform();
        } while (p > limit);
        length = std::max(1, length - 1);
      }

      std::vector<std::pair<int, int>> tokens(length);  // (word, label)
      for (auto& [word, label] : tokens) {
        label = rng.categorical(theta_row);
        word = rng.categorical(data.beta.row(label));
      }
      // Canonical ascending-id order keeps bag-of-words round-trips exact;
      // labels travel with their words (pairs are exchangeable within a doc).
      std::stable_sort(tokens.begin(), tokens.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first; });
      data.corpus.docs[doc].resize(length);
      data.z[doc].resize(length);
      for (int i = 0; i < length; ++i) {
        data.corpus.docs[doc][i] = tokens[i].first;
        data.z[doc][i] = tokens[i].second;
      }
    }
  }
  data.corpus.validate();
  return data;
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
  MatD m(rows, j[0].size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

}  // namespace

void save_synthetic(const SyntheticData& data, const std::string& dir) {
  std::filesystem::create_directories(dir);
  save_corpus(data.corpus, dir);
  nlohmann::json truth;
  truth["J"] = data.pi.rows();
  truth["K"] = data.pi.cols();
  truth["V"] = data.beta.cols();
  truth["beta"] = mat_to_json(data.beta);
  truth["pi"] = mat_to_json(data.pi);
  truth["theta"] = mat_to_json(data.theta);
  truth["z"] = data.z;
  std::ofstream out(dir + "/truth.json");
  if (!out) throw DataError("cannot write " + dir + "/truth.json");
  out << truth.dump() << '\n';
}

GroundTruth load_truth(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  GroundTruth truth;
  truth.beta = mat_from_json(j.at("beta"));
  truth.pi = mat_from_json(j.at("pi"));
  truth.theta = mat_from_json(j.at("theta"));
  truth.z = j.at("z").get<std::vector<std::vector<int>>>();
  return truth;
}

}  // namespace clda
