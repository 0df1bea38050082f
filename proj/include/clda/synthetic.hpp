// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "clda/corpus.hpp"
#include "clda/mat.hpp"
#include "clda/model.hpp"

namespace clda {

/// Forward-simulation configuration. Document length is fixed per config; a
/// Poisson length option exists but is off by default.
struct SynthConfig {
  int num_collections = 2;
  int num_topics = 3;
  int vocab_size = 40;
  int docs_per_collection = 100;
  int words_per_doc = 200;
  Hyperparameters h;
  std::uint64_t seed = 0;
  bool poisson_lengths = false;
  std::optional<MatD> fixed_beta;  // K x V override
  std::optional<MatD> fixed_pi;    // J x K override

  void validate() const;
};

/// Named presets for the two standard recovery setups:
///   synth-3.2: J=2, K=3, V=40, 100 docs/collection, 200 words/doc,
///              h = (alpha, gamma, eta) = (0.1, 1, 0.25)
///   synth-3.3: same shape with h = (1, 0.8, 0.5)
SynthConfig synth_preset(const std::string& name);

struct SyntheticData {
  Corpus corpus;
  MatD beta;    // K x V
  MatD pi;      // J x K
  MatD theta;   // D x K
  std::vector<std::vector<int>> z;
};

/// Simulates the generative process: topics, collection mixtures, document
/// mixtures, labels, words. Deterministic under the config seed. Tokens are
/// stored in ascending word-id order within each document ((word, label)
/// pairs sorted together), so saving and reloading the bag-of-words file
/// reproduces the corpus exactly and the persisted labels stay aligned.
SyntheticData generate(const SynthConfig& config);

/// Writes corpus files plus truth.json (beta, pi, theta, z, dims).
void save_synthetic(const SyntheticData& data, const std::string& dir);

/// Reads truth.json back.
struct GroundTruth {
  MatD beta;
  MatD pi;
  MatD theta;
  std::vector<std::vector<int>> z;
};
GroundTruth load_truth(const std::string& path);

}  // namespace clda
