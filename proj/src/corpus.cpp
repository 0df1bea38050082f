// SPDX-License-Identifier: Apache-2.0
#include "clda/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "clda/errors.hpp"
#include "json.hpp"

namespace clda {

std::size_t Corpus::total_tokens() const {
  std::size_t n = 0;
  for (const auto& d : docs) n += d.size();
  return n;
}

std::vector<std::vector<int>> Corpus::docs_of_collection() const {
  std::vector<std::vector<int>> by_coll(num_collections);
  for (std::size_t d = 0; d < docs.size(); ++d) {
    by_coll[collection_of[d]].push_back(static_cast<int>(d));
  }
  return by_coll;
}

void Corpus::validate() const {
  if (docs.empty()) throw DataError("corpus: no documents");
  if (collection_of.size() != docs.size()) {
    throw DataError("corpus: label count does not match document count");
  }
  const int v = static_cast<int>(vocab.size());
  for (std::size_t d = 0; d < docs.size(); ++d) {
    if (docs[d].empty()) {
      throw DataError("corpus: document " + std::to_string(d) + " is empty");
    }
    for (int w : docs[d]) {
      if (w < 0 || w >= v) {
        throw DataError("corpus: word id " + std::to_string(w) +
                        " out of range in document " + std::to_string(d));
      }
    }
    if (collection_of[d] < 0 || collection_of[d] >= num_collections) {
      throw DataError("corpus: collection label out of range in document " +
                      std::to_string(d));
    }
  }
  std::vector<int> coll_docs(num_collections, 0);
  for (int c : collection_of) ++coll_docs[c];
  for (int j = 0; j < num_collections; ++j) {
    if (coll_docs[j] == 0) {
      throw DataError("corpus: collection " + std::to_string(j + 1) +
                      " has no documents");
    }
  }
}

bool equal_as_bags(const Corpus& a, const Corpus& b) {
  if (a.vocab != b.vocab || a.collection_of != b.collection_of ||
      a.num_collections != b.num_collections ||
      a.docs.size() != b.docs.size()) {
    return false;
  }
  for (std::size_t d = 0; d < a.docs.size(); ++d) {
    auto da = a.docs[d];
    auto db = b.docs[d];
    std::sort(da.begin(), da.end());
    std::sort(db.begin(), db.end());
    if (da != db) return false;
  }
  return true;
}

namespace {

std::vector<std::string> tokenize_lower(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

bool all_digits(const std::string& s) {
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isdigit(c); });
}

}  // namespace

Corpus preprocess(const std::vector<std::string>& raw_docs,
                  const std::unordered_set<std::string>& stopwords,
                  int min_count, int min_len, const std::vector<int>& labels,
                  std::vector<int>* kept_docs) {
  if (raw_docs.empty()) throw DataError("preprocess: no input documents");
  if (!labels.empty() && labels.size() != raw_docs.size()) {
    throw DataError("preprocess: label count does not match document count");
  }

  std::vector<std::vector<std::string>> token_docs(raw_docs.size());
  std::unordered_map<std::string, int> freq;
  for (std::size_t d = 0; d < raw_docs.size(); ++d) {
    for (auto& tok : tokenize_lower(raw_docs[d])) {
      if (static_cast<int>(tok.size()) < min_len) continue;
      if (all_digits(tok)) continue;
      if (stopwords.count(tok)) continue;
      ++freq[tok];
      token_docs[d].push_back(std::move(tok));
    }
  }

  Corpus corpus;
  std::unordered_map<std::string, int> index;
  int max_label = 0;
  for (std::size_t d = 0; d < token_docs.size(); ++d) {
    std::vector<int> ids;
    for (const auto& tok : token_docs[d]) {
      if (freq[tok] < min_count) continue;
      auto [it, inserted] = index.try_emplace(tok, static_cast<int>(index.size()));
      if (inserted) corpus.vocab.terms.push_back(tok);
      ids.push_back(it->second);
    }
    if (ids.empty()) continue;
    corpus.docs.push_back(std::move(ids));
    const int label = labels.empty() ? 1 : labels[d];
    if (label < 1) throw DataError("preprocess: labels must be 1-based positive integers");
    max_label = std::max(max_label, label);
    corpus.collection_of.push_back(label - 1);
    if (kept_docs) kept_docs->push_back(static_cast<int>(d));
  }
  if (corpus.docs.empty()) {
    throw DataError("preprocess: corpus empty after filtering");
  }
  corpus.num_collections = max_label;
  corpus.validate();
  return corpus;
}

Corpus load_corpus(const std::string& bow_path, const std::string& labels_path,
                   const std::string& vocab_path) {
  std::ifstream bow(bow_path);
  if (!bow) throw DataError("cannot open " + bow_path);

  Corpus corpus;
  std::string line;
  int line_no = 0;
  int max_id = -1;
  while (std::getline(bow, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream in(line);
    int unique = 0;
    if (!(in >> unique) || unique <= 0) {
      throw DataError(bow_path + ":" + std::to_string(line_no) +
                      ": expected positive entry count");
    }
    std::map<int, int> counts;  // ascending id expansion
    for (int i = 0; i < unique; ++i) {
      int id = 0;
      int count = 0;
      char colon = 0;
      if (!(in >> id >> colon >> count) || colon != ':' || id < 0 || count <= 0) {
        throw DataError(bow_path + ":" + std::to_string(line_no) +
                        ": malformed id:count pair");
      }
      counts[id] += count;
      max_id = std::max(max_id, id);
    }
    std::vector<int> doc;
    for (auto [id, count] : counts) doc.insert(doc.end(), count, id);
    corpus.docs.push_back(std::move(doc));
  }
  if (corpus.docs.empty()) throw DataError(bow_path + ": no documents");

  std::ifstream labels(labels_path);
  if (!labels) throw DataError("cannot open " + labels_path);
  line_no = 0;
  int max_label = 0;
  while (std::getline(labels, line)) {
    ++line_no;
    if (line.empty()) continue;
    int label = 0;
    try {
      label = std::stoi(line);
    } catch (const std::exception&) {
      throw DataError(labels_path + ":" + std::to_string(line_no) +
                      ": malformed label");
    }
    if (label < 1) {
      throw DataError(labels_path + ":" + std::to_string(line_no) +
                      ": labels are 1-based positive integers");
    }
    corpus.collection_of.push_back(label - 1);
    max_label = std::max(max_label, label);
  }
  if (corpus.collection_of.size() != corpus.docs.size()) {
    throw DataError(labels_path + ": " +
                    std::to_string(corpus.collection_of.size()) +
                    " labels for " + std::to_string(corpus.docs.size()) +
                    " documents");
  }
  // A label file must not skip collection ids; every collection needs a doc.
  std::vector<int> seen(max_label, 0);
  for (std::size_t d = 0; d < corpus.collection_of.size(); ++d) ++seen[corpus.collection_of[d]];
  for (int j = 0; j < max_label; ++j) {
    if (seen[j] == 0) {
      throw DataError(labels_path + ": collection " + std::to_string(j + 1) +
                      " has no documents");
    }
  }
  corpus.num_collections = max_label;

  if (!vocab_path.empty()) {
    std::ifstream vocab(vocab_path);
    if (!vocab) throw DataError("cannot open " + vocab_path);
    while (std::getline(vocab, line)) {
      if (!line.empty()) corpus.vocab.terms.push_back(line);
    }
  }
  if (corpus.vocab.terms.empty()) {
    for (int v = 0; v <= max_id; ++v) corpus.vocab.terms.push_back("w" + std::to_string(v));
  }
  if (static_cast<int>(corpus.vocab.size()) <= max_id) {
    throw DataError(bow_path + ": word id " + std::to_string(max_id) +
                    " exceeds vocabulary size " + std::to_string(corpus.vocab.size()));
  }
  corpus.validate();
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::string& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream bow(dir + "/corpus.bow");
    for (const auto& doc : corpus.docs) {
      std::map<int, int> counts;
      for (int w : doc) ++counts[w];
      bow << counts.size();
      for (auto [id, count] : counts) bow << ' ' << id << ':' << count;
      bow << '\n';
    }
  }
  {
    std::ofstream labels(dir + "/corpus.labels");
    for (int c : corpus.collection_of) labels << (c + 1) << '\n';
  }
  {
    std::ofstream vocab(dir + "/corpus.vocab");
    for (const auto& t : corpus.vocab.terms) vocab << t << '\n';
  }
}

std::size_t HeldOutSplit::num_test_tokens() const {
  std::size_t n = 0;
  for (const auto& p : test_positions) n += p.size();
  return n;
}

HeldOutSplit split_held_out(Rng& rng, const Corpus& corpus, double doc_fraction,
                            double word_fraction) {
  if (!(doc_fraction > 0.0 && doc_fraction < 1.0) ||
      !(word_fraction > 0.0 && word_fraction < 1.0)) {
    throw std::domain_error("split_held_out: fractions must lie in (0, 1)");
  }
  HeldOutSplit split;
  split.test_positions.resize(corpus.num_docs());

  const auto by_coll = corpus.docs_of_collection();
  for (int j = 0; j < corpus.num_collections; ++j) {
    auto docs = by_coll[j];
    const auto n_held =
        static_cast<std::size_t>(std::llround(doc_fraction * static_cast<double>(docs.size())));
    if (n_held >= docs.size()) {
      throw DataError("split_held_out: collection " + std::to_string(j + 1) +
                      " would lose all training documents");
    }
    // Partial Fisher-Yates selection of held-out documents.
    for (std::size_t i = 0; i < n_held; ++i) {
      const auto pick = i + static_cast<std::size_t>(rng.uniform() * static_cast<double>(docs.size() - i));
      std::swap(docs[i], docs[pick]);
      split.heldout_docs.push_back(docs[i]);
    }
  }
  std::sort(split.heldout_docs.begin(), split.heldout_docs.end());

  for (int d : split.heldout_docs) {
    const auto n = corpus.docs[d].size();
    const auto n_test =
        static_cast<std::size_t>(std::ceil(word_fraction * static_cast<double>(n)));
    std::vector<int> positions(n);
    for (std::size_t i = 0; i < n; ++i) positions[i] = static_cast<int>(i);
    for (std::size_t i = 0; i < n_test; ++i) {
      const auto pick = i + static_cast<std::size_t>(rng.uniform() * static_cast<double>(n - i));
      std::swap(positions[i], positions[pick]);
    }
    positions.resize(n_test);
    std::sort(positions.begin(), positions.end());
    split.test_positions[d] = std::move(positions);
  }
  return split;
}

Corpus apply_split(const Corpus& corpus, const HeldOutSplit& split) {
  Corpus train = corpus;
  for (int d : split.heldout_docs) {
    const auto& test = split.test_positions[d];
    std::vector<int> kept;
    kept.reserve(corpus.docs[d].size() - test.size());
    std::size_t t = 0;
    for (std::size_t i = 0; i < corpus.docs[d].size(); ++i) {
      if (t < test.size() && static_cast<int>(i) == test[t]) {
        ++t;
      } else {
        kept.push_back(corpus.docs[d][i]);
      }
    }
    if (kept.empty()) {
      throw DataError("apply_split: held-out document " + std::to_string(d) +
                      " has no training words");
    }
    train.docs[d] = std::move(kept);
  }
  return train;
}

void save_split(const HeldOutSplit& split, const std::string& path) {
  nlohmann::json j;
  j["heldout"] = nlohmann::json::array();
  for (int d : split.heldout_docs) {
    j["heldout"].push_back({{"doc", d}, {"test_positions", split.test_positions[d]}});
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump(2) << '\n';
}

HeldOutSplit load_split(const std::string& path, const Corpus& corpus) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  HeldOutSplit split;
  split.test_positions.resize(corpus.num_docs());
  for (const auto& entry : j.at("heldout")) {
    const int d = entry.at("doc").get<int>();
    if (d < 0 || d >= static_cast<int>(corpus.num_docs())) {
      throw DataError(path + ": document id out of range");
    }
    auto positions = entry.at("test_positions").get<std::vector<int>>();
    std::sort(positions.begin(), positions.end());
    for (int p : positions) {
      if (p < 0 || p >= static_cast<int>(corpus.docs[d].size())) {
        throw DataError(path + ": test position out of range for document " +
                        std::to_string(d));
      }
    }
    if (positions.size() >= corpus.docs[d].size()) {
      throw DataError(path + ": document " + std::to_string(d) +
                      " has no training words");
    }
    split.test_positions[d] = std::move(positions);
    split.heldout_docs.push_back(d);
  }
  std::sort(split.heldout_docs.begin(), split.heldout_docs.end());
  return split;
}

std::unordered_set<std::string> load_stopwords(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::unordered_set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) words.insert(line);
  }
  return words;
}

}  // namespace clda
