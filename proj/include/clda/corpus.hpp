// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <unordered_set>
#include <vector>

#include "clda/rng.hpp"

namespace clda {

/// Ordered list of unique terms; the index of a term is stable across
/// save/load.
struct Vocabulary {
  std::vector<std::string> terms;

  std::size_t size() const { return terms.size(); }
  bool operator==(const Vocabulary&) const = default;
};

/// A corpus of token-expanded documents partitioned into collections.
///
/// Documents are stored as word-id sequences because the samplers assign a
/// topic to every token occurrence. collection_of holds 0-based collection
/// indices; labels in files are 1-based.
struct Corpus {
  Vocabulary vocab;
  std::vector<std::vector<int>> docs;
  std::vector<int> collection_of;
  int num_collections = 0;

  std::size_t num_docs() const { return docs.size(); }
  std::size_t vocab_size() const { return vocab.size(); }
  std::size_t total_tokens() const;
  std::vector<std::vector<int>> docs_of_collection() const;

  /// Validates the stated invariants; throws DataError on violation.
  void validate() const;

  bool operator==(const Corpus&) const = default;
};

/// Bag equality: same vocabulary, labels, and per-document token multisets.
/// The bag-of-words file format does not preserve token order, so this is
/// the equality save/load round-trips guarantee.
bool equal_as_bags(const Corpus& a, const Corpus& b);

/// Tokenize, filter, and index raw documents.
///
/// Tokens are lowercased and split on any non-alphanumeric character.
/// Tokens that are stopwords, shorter than min_len, purely numeric, or whose
/// corpus frequency is below min_count are dropped; documents left empty are
/// removed. `labels` gives a 1-based collection label per raw document (empty
/// means one collection). kept_docs, when non-null, receives the indices of
/// surviving raw documents. Throws DataError if nothing survives.
Corpus preprocess(const std::vector<std::string>& raw_docs,
                  const std::unordered_set<std::string>& stopwords,
                  int min_count, int min_len,
                  const std::vector<int>& labels = {},
                  std::vector<int>* kept_docs = nullptr);

/// Reads a corpus from an LDA-C style bag-of-words file
///   <num_unique> <id>:<count> ...
/// plus a labels file with one 1-based collection label per line.
/// Repeated tokens expand in ascending id order. vocab_path may be empty;
/// term strings then default to "w<id>".
Corpus load_corpus(const std::string& bow_path, const std::string& labels_path,
                   const std::string& vocab_path = "");

/// Writes corpus.bow, corpus.labels, and corpus.vocab into `dir`.
void save_corpus(const Corpus& corpus, const std::string& dir);

/// Train/test partition of the corpus: a subset of held-out documents, each
/// with a set of test token positions; all remaining tokens are training.
struct HeldOutSplit {
  /// test_positions[d] is empty for training documents and holds the sorted
  /// test positions for held-out documents.
  std::vector<std::vector<int>> test_positions;
  std::vector<int> heldout_docs;

  bool is_heldout(std::size_t doc) const {
    return !test_positions[doc].empty();
  }
  std::size_t num_test_tokens() const;
};

/// Samples a held-out split: round(doc_fraction * D_j) documents per
/// collection, and within each held-out document ceil(word_fraction * n)
/// test tokens. Deterministic under the rng seed. Throws DataError if a
/// collection would lose all training documents.
HeldOutSplit split_held_out(Rng& rng, const Corpus& corpus,
                            double doc_fraction, double word_fraction);

/// Removes the test tokens of held-out documents; document count and order
/// are unchanged.
Corpus apply_split(const Corpus& corpus, const HeldOutSplit& split);

void save_split(const HeldOutSplit& split, const std::string& path);
HeldOutSplit load_split(const std::string& path, const Corpus& corpus);

/// Reads one term per line.
std::unordered_set<std::string> load_stopwords(const std::string& path);

}  // namespace clda
