// SPDX-License-Identifier: Apache-2.0
//
// Batch front-end: preprocessing, simulation, training, hyperparameter
// estimation, evaluation, and export of plot-ready CSV/JSON data.
//
// Exit codes: 0 ok, 2 usage, 3 data error, 4 numeric failure.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "clda/ags.hpp"
#include "clda/errors.hpp"
#include "clda/evaluation.hpp"
#include "clda/gibbs_em.hpp"
#include "clda/lda.hpp"
#include "clda/mgs.hpp"
#include "clda/model.hpp"
#include "clda/synthetic.hpp"
#include "clda/vem.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace clda;

namespace {

// Tracks files created by one invocation so a failure leaves no partial
// outputs behind.
class OutputGuard {
 public:
  explicit OutputGuard(const std::string& out_dir) : dir_(out_dir) {
    created_dir_ = !fs::exists(dir_);
    fs::create_directories(dir_);
  }
  ~OutputGuard() {
    if (armed_) {
      for (auto it = files_.rbegin(); it != files_.rend(); ++it) {
        std::error_code ec;
        fs::remove_all(*it, ec);
      }
      if (created_dir_) {
        std::error_code ec;
        fs::remove_all(dir_, ec);
      }
    }
  }
  std::string track(const std::string& relative) {
    const auto path = (fs::path(dir_) / relative).string();
    fs::create_directories(fs::path(path).parent_path());
    files_.push_back(path);
    return path;
  }
  void disarm() { armed_ = false; }
  const std::string& dir() const { return dir_; }

 private:
  std::string dir_;
  std::vector<std::string> files_;
  bool created_dir_ = false;
  bool armed_ = true;
};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

json mat_to_json(const MatD& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    rows.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
  }
  return rows;
}

json mat_to_json(const MatI& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    rows.push_back(std::vector<int>(m.row(r).begin(), m.row(r).end()));
  }
  return rows;
}

MatD matd_from_json(const json& j) {
  if (j.empty()) return {};
  MatD m(j.size(), j[0].size());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

MatI mati_from_json(const json& j) {
  if (j.empty()) return {};
  MatI m(j.size(), j[0].size());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) m(r, c) = j[r][c].get<int>();
  }
  return m;
}

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  return j;
}

void write_json(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump() << '\n';
}

Corpus load_corpus_dir(const std::string& dir) {
  const auto vocab = fs::path(dir) / "corpus.vocab";
  return load_corpus((fs::path(dir) / "corpus.bow").string(),
                     (fs::path(dir) / "corpus.labels").string(),
                     fs::exists(vocab) ? vocab.string() : "");
}

void collapse_collections(Corpus& corpus) {
  std::fill(corpus.collection_of.begin(), corpus.collection_of.end(), 0);
  corpus.num_collections = 1;
}

void write_matrix_csv(const MatD& m, const std::string& path,
                      const std::string& row_name, const std::string& col_name) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << row_name << ',' << col_name << ",value\n";
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      out << (r + 1) << ',' << (c + 1) << ',' << fmt(m(r, c)) << '\n';
    }
  }
}

void save_samples(const std::vector<ChainSample>& samples, OutputGuard& guard) {
  for (const auto& s : samples) {
    char name[64];
    std::snprintf(name, sizeof(name), "samples/sample_%06d.json", s.iteration);
    json j;
    j["iteration"] = s.iteration;
    j["pi"] = mat_to_json(s.pi);
    j["doc_topic"] = mat_to_json(s.doc_topic);
    j["doc_total"] = s.doc_total;
    j["topic_term"] = mat_to_json(s.topic_term);
    j["topic_total"] = s.topic_total;
    write_json(j, guard.track(name));
  }
}

std::vector<ChainSample> load_samples(const std::string& model_dir) {
  std::vector<std::string> paths;
  const auto dir = fs::path(model_dir) / "samples";
  if (!fs::exists(dir)) throw DataError("no samples under " + model_dir);
  for (const auto& entry : fs::directory_iterator(dir)) {
    paths.push_back(entry.path().string());
  }
  std::sort(paths.begin(), paths.end());
  std::vector<ChainSample> samples;
  for (const auto& path : paths) {
    const auto j = load_json(path);
    ChainSample s;
    s.iteration = j.at("iteration").get<int>();
    s.pi = matd_from_json(j.at("pi"));
    s.doc_topic = mati_from_json(j.at("doc_topic"));
    s.doc_total = j.at("doc_total").get<std::vector<int>>();
    s.topic_term = mati_from_json(j.at("topic_term"));
    s.topic_total = j.at("topic_total").get<std::vector<int>>();
    samples.push_back(std::move(s));
  }
  if (samples.empty()) throw DataError("no samples under " + model_dir);
  return samples;
}

struct TrainArgs {
  std::string algo;
  std::string corpus_dir;
  std::string out_dir;
  std::string split_path;
  int k = 0;
  double alpha = 0.5;
  double gamma = 1.0;
  double eta = 0.25;
  double epsilon = 0.01;
  bool adapt_epsilon = false;
  bool optimize_hyper = false;
  bool single_collection = false;
  int iterations = 1000;
  int burn_in = -1;  // default: half
  int save_every = 10;
  int chains = 1;
  std::uint64_t seed = 42;
};

void run_one_chain(const TrainArgs& args, const Corpus& corpus,
                   std::uint64_t seed, const std::string& out_dir) {
  OutputGuard guard(out_dir);
  const Hyperparameters h{args.alpha, args.gamma, args.eta};
  const int burn_in = args.burn_in >= 0 ? args.burn_in : args.iterations / 2;

  json meta;
  meta["algo"] = args.algo;
  meta["K"] = args.k;
  meta["alpha"] = args.alpha;
  meta["gamma"] = args.gamma;
  meta["eta"] = args.eta;
  meta["iterations"] = args.iterations;
  meta["burn_in"] = burn_in;
  meta["save_every"] = args.save_every;
  meta["seed"] = seed;
  meta["corpus"] = args.corpus_dir;
  meta["split"] = args.split_path;
  meta["single_collection"] = args.single_collection;

  if (args.algo == "vem") {
    VemConfig config;
    config.optimize_hyperparameters = args.optimize_hyper;
    config.seed = seed;
    auto result = vem_run(corpus, args.k, h, config);
    write_elbo_csv(result.history, guard.track("elbo.csv"));
    json params;
    params["lambda"] = mat_to_json(result.params.lambda);
    params["a"] = result.params.a;
    params["omega"] = mat_to_json(result.params.omega);
    params["rho"] = mat_to_json(result.params.rho);
    params["alpha"] = result.h.alpha;
    params["gamma"] = result.h.gamma;
    params["eta"] = result.h.eta;
    params["converged"] = result.converged;
    write_json(params, guard.track("params.json"));
    meta["converged"] = result.converged;
    meta["em_iterations"] = result.history.size();
    write_json(meta, guard.track("meta.json"));
    std::cout << "[train] vem finished after " << result.history.size()
              << " iterations, bound " << fmt(result.history.back().total)
              << "\n";
    guard.disarm();
    return;
  }

  ChainTrace trace;
  bool mgs_columns = false;
  if (args.algo == "ags") {
    ChainConfig config;
    config.iterations = args.iterations;
    config.burn_in = burn_in;
    config.save_every = args.save_every;
    config.seed = seed;
    trace = ags_run(corpus, args.k, h, config);
  } else if (args.algo == "mgs") {
    MgsConfig config;
    config.iterations = args.iterations;
    config.burn_in = burn_in;
    config.save_every = args.save_every;
    config.seed = seed;
    config.epsilon = args.epsilon;
    config.adapt_epsilon = args.adapt_epsilon;
    trace = mgs_run(corpus, args.k, h, config);
    mgs_columns = true;
    meta["epsilon"] = args.epsilon;
    meta["adapt_epsilon"] = args.adapt_epsilon;
  } else if (args.algo == "lda-cgs") {
    ChainConfig config;
    config.iterations = args.iterations;
    config.burn_in = burn_in;
    config.save_every = args.save_every;
    config.seed = seed;
    trace = cgs_run(corpus, args.k, args.alpha, args.eta, config);
  } else {
    throw DataError("unknown algorithm: " + args.algo);
  }

  trace.write_csv(guard.track("trace.csv"), mgs_columns);
  if (!trace.pi_history.empty()) {
    trace.write_pi_history_csv(guard.track("pi_history.csv"));
  }
  save_samples(trace.samples, guard);

  Checkpoint cp;
  cp.algo = args.algo;
  cp.K = args.k;
  cp.h = h;
  cp.iteration = args.iterations;
  cp.z = trace.final_z;
  cp.pi = trace.final_pi;
  cp.rng_state = trace.final_rng_state;
  cp.epsilons = trace.final_epsilons;
  cp.varphi = trace.final_varphi;
  save_checkpoint(cp, guard.track("checkpoint.json"));
  write_json(meta, guard.track("meta.json"));

  for (const auto& s : trace.samples) {
    std::cout << "[train] " << args.algo << " checkpoint iter " << s.iteration
              << " log_joint "
              << fmt(trace.rows[s.iteration - 1].log_joint) << "\n";
  }
  guard.disarm();
}

int cmd_train(const TrainArgs& args) {
  auto corpus = load_corpus_dir(args.corpus_dir);
  if (args.single_collection) collapse_collections(corpus);
  if (!args.split_path.empty()) {
    const auto split = load_split(args.split_path, corpus);
    corpus = apply_split(corpus, split);
  }

  if (args.chains <= 1) {
    run_one_chain(args, corpus, args.seed, args.out_dir);
    return 0;
  }
  // Independent seeded chains in parallel worker threads.
  Rng root(args.seed);
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(args.chains);
  for (int c = 0; c < args.chains; ++c) {
    const auto chain_dir = (fs::path(args.out_dir) / ("chain_" + std::to_string(c))).string();
    const auto chain_seed = root.split(c).seed();
    workers.emplace_back([&, c, chain_dir, chain_seed] {
      try {
        run_one_chain(args, corpus, chain_seed, chain_dir);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return 0;
}

int cmd_evaluate(const std::string& model_dir, const std::string& corpus_dir,
                 const std::string& split_path, const std::string& metrics_csv,
                 int top_m, const std::string& out_dir) {
  const auto meta = load_json((fs::path(model_dir) / "meta.json").string());
  const auto algo = meta.at("algo").get<std::string>();
  auto corpus = load_corpus_dir(corpus_dir);
  if (meta.value("single_collection", false)) collapse_collections(corpus);

  std::vector<std::string> metrics;
  {
    std::string token;
    for (char ch : metrics_csv + ",") {
      if (ch == ',') {
        if (!token.empty()) metrics.push_back(token);
        token.clear();
      } else {
        token += ch;
      }
    }
  }
  const bool want_perplexity =
      std::find(metrics.begin(), metrics.end(), "perplexity") != metrics.end();
  const bool want_coherence =
      std::find(metrics.begin(), metrics.end(), "coherence") != metrics.end();
  const bool want_size =
      std::find(metrics.begin(), metrics.end(), "size") != metrics.end();

  OutputGuard guard(out_dir);
  const auto samples = load_samples(model_dir);
  const Hyperparameters h{meta.at("alpha").get<double>(),
                          meta.at("gamma").get<double>(),
                          meta.at("eta").get<double>()};

  json eval;
  eval["model"] = model_dir;
  eval["algo"] = algo;
  eval["num_samples"] = samples.size();

  HeldOutSplit split;
  bool have_split = false;
  if (!split_path.empty()) {
    split = load_split(split_path, corpus);
    have_split = true;
  }

  if (want_perplexity) {
    if (!have_split) throw DataError("evaluate: perplexity requires --split");
    const auto trained_split = meta.value("split", std::string{});
    if (trained_split.empty()) {
      throw DataError("evaluate: model was not trained on a held-out split");
    }
    // Scoring words the chain saw would silently corrupt perplexity; when
    // the training split is still readable, require identical content.
    if (fs::exists(trained_split)) {
      const auto original = load_split(trained_split, corpus);
      if (original.test_positions != split.test_positions) {
        throw DataError("evaluate: --split does not match the split the model was trained on (" +
                        trained_split + ")");
      }
    }
    json curve = json::array();
    std::vector<ChainSample> prefix;
    for (const auto& s : samples) {
      prefix.push_back(s);
      const double p = algo == "lda-cgs"
                           ? perplexity_lda(corpus, split, prefix,
                                            h.alpha, h.eta)
                           : perplexity_clda(corpus, split, prefix, h);
      curve.push_back({{"iteration", s.iteration}, {"perplexity", p}});
    }
    eval["perplexity"] = curve.back().at("perplexity");
    eval["per_checkpoint"] = curve;
    std::cout << "[evaluate] perplexity "
              << fmt(curve.back().at("perplexity").get<double>()) << "\n";
  }

  if (want_coherence || want_size) {
    const auto beta = average_rao_blackwell_beta(samples, h.eta);
    // Coherence counts document frequencies over training documents only.
    std::vector<int> train_docs;
    for (std::size_t d = 0; d < corpus.num_docs(); ++d) {
      if (!have_split || !split.is_heldout(d)) {
        train_docs.push_back(static_cast<int>(d));
      }
    }
    const auto freqs = document_frequencies(corpus, train_docs);
    const auto sizes = topic_size(samples.back());
    std::ofstream out(guard.track("coherence.csv"));
    out << "topic,size,coherence\n";
    for (std::size_t k = 0; k < beta.rows(); ++k) {
      const double score =
          want_coherence ? topic_coherence(beta.row(k), freqs, top_m) : 0.0;
      out << (k + 1) << ',' << sizes[k] << ',' << fmt(score) << '\n';
    }
    std::cout << "[evaluate] coherence.csv written for " << beta.rows()
              << " topics\n";
  }

  write_json(eval, guard.track("eval.json"));
  guard.disarm();
  return 0;
}

int cmd_export(const std::string& model_dir, const std::string& what,
               std::string corpus_dir, int top_m, const std::string& out_dir) {
  const auto meta = load_json((fs::path(model_dir) / "meta.json").string());
  const auto algo = meta.at("algo").get<std::string>();
  const Hyperparameters h{meta.at("alpha").get<double>(),
                          meta.at("gamma").get<double>(),
                          meta.at("eta").get<double>()};
  if (corpus_dir.empty()) corpus_dir = meta.at("corpus").get<std::string>();

  OutputGuard guard(out_dir);
  const bool is_vem = algo == "vem";

  MatD beta;
  MatD pi;
  MatD theta;
  if (is_vem) {
    const auto params = load_json((fs::path(model_dir) / "params.json").string());
    const auto lambda = matd_from_json(params.at("lambda"));
    beta = MatD(lambda.rows(), lambda.cols());
    for (std::size_t k = 0; k < lambda.rows(); ++k) {
      double sum = 0.0;
      for (std::size_t v = 0; v < lambda.cols(); ++v) sum += lambda(k, v);
      for (std::size_t v = 0; v < lambda.cols(); ++v) beta(k, v) = lambda(k, v) / sum;
    }
    pi = matd_from_json(params.at("omega"));
    const auto rho = matd_from_json(params.at("rho"));
    theta = MatD(rho.rows(), rho.cols());
    for (std::size_t d = 0; d < rho.rows(); ++d) {
      double sum = 0.0;
      for (std::size_t k = 0; k < rho.cols(); ++k) sum += rho(d, k);
      for (std::size_t k = 0; k < rho.cols(); ++k) theta(d, k) = rho(d, k) / sum;
    }
  } else {
    const auto samples = load_samples(model_dir);
    beta = average_rao_blackwell_beta(samples, h.eta);
    if (algo != "lda-cgs") {
      auto corpus = load_corpus_dir(corpus_dir);
      if (meta.value("single_collection", false)) collapse_collections(corpus);
      theta = average_rao_blackwell_theta(samples, corpus.collection_of, h);
      pi = MatD(samples.front().pi.rows(), samples.front().pi.cols(), 0.0);
      for (const auto& s : samples) {
        for (std::size_t j = 0; j < pi.rows(); ++j) {
          for (std::size_t k = 0; k < pi.cols(); ++k) pi(j, k) += s.pi(j, k);
        }
      }
      for (auto& x : pi.data()) x /= static_cast<double>(samples.size());
    } else {
      theta = rao_blackwell_theta_lda(samples.front(), h.alpha);
      for (std::size_t s = 1; s < samples.size(); ++s) {
        const auto t = rao_blackwell_theta_lda(samples[s], h.alpha);
        for (std::size_t i = 0; i < theta.data().size(); ++i) {
          theta.data()[i] += t.data()[i];
        }
      }
      for (auto& x : theta.data()) x /= static_cast<double>(samples.size());
    }
  }

  if (what == "pi") {
    if (pi.rows() == 0) throw DataError("export: model has no collection mixtures");
    write_matrix_csv(pi, guard.track("pi_final.csv"), "collection", "topic");
    const auto history = fs::path(model_dir) / "pi_history.csv";
    if (fs::exists(history)) {
      fs::copy_file(history, guard.track("pi_trajectory.csv"),
                    fs::copy_options::overwrite_existing);
    }
  } else if (what == "theta") {
    write_matrix_csv(theta, guard.track("theta.csv"), "doc", "topic");
  } else if (what == "beta") {
    write_matrix_csv(beta, guard.track("beta.csv"), "topic", "term");
  } else if (what == "top-words") {
    const auto corpus = load_corpus_dir(corpus_dir);
    std::ofstream out(guard.track("top_words.csv"));
    out << "topic,rank,term_id,term,probability\n";
    for (std::size_t k = 0; k < beta.rows(); ++k) {
      const auto top = top_terms(beta.row(k), top_m);
      for (std::size_t r = 0; r < top.size(); ++r) {
        out << (k + 1) << ',' << (r + 1) << ',' << top[r] << ','
            << corpus.vocab.terms[top[r]] << ',' << fmt(beta(k, top[r])) << '\n';
      }
    }
  } else if (what == "topic-dist") {
    write_matrix_csv(topic_distance_matrix(beta), guard.track("topic_dist.csv"),
                     "topic_a", "topic_b");
  } else {
    throw DataError("unknown export target: " + what);
  }
  std::cout << "[export] " << what << " -> " << guard.dir() << "\n";
  guard.disarm();
  return 0;
}

int cmd_compare(const std::string& method, const std::string& corpus_dir, int K,
                double alpha, double gamma, double eta, int iterations,
                std::uint64_t seed, const std::string& out_dir) {
  auto corpus = load_corpus_dir(corpus_dir);
  OutputGuard guard(out_dir);
  ChainConfig config;
  config.iterations = iterations;
  config.burn_in = iterations / 2;
  config.save_every = 10;
  config.seed = seed;

  MatD mixtures;
  if (method == "m1") {
    const Hyperparameters h{alpha, gamma, eta};
    auto trace = ags_run(corpus, K, h, config);
    mixtures = MatD(corpus.num_collections, K, 0.0);
    for (const auto& s : trace.samples) {
      for (int j = 0; j < corpus.num_collections; ++j) {
        for (int k = 0; k < K; ++k) mixtures(j, k) += s.pi(j, k);
      }
    }
    for (auto& x : mixtures.data()) x /= static_cast<double>(trace.samples.size());
  } else if (method == "m2") {
    auto trace = cgs_run(corpus, K, alpha, eta, config);
    mixtures = estimate_collection_mixture_from_z(trace.final_z,
                                                  corpus.collection_of,
                                                  corpus.num_collections, K);
  } else if (method == "m3") {
    // One flat model per collection; topics of collection j > 1 aligned to
    // collection 1's topics through the term distributions.
    const auto by_coll = corpus.docs_of_collection();
    std::vector<MatD> betas;
    mixtures = MatD(corpus.num_collections, K, 0.0);
    Rng root(seed);
    std::vector<MatD> raw(corpus.num_collections);
    for (int j = 0; j < corpus.num_collections; ++j) {
      Corpus slice;
      slice.vocab = corpus.vocab;
      slice.num_collections = 1;
      for (int d : by_coll[j]) {
        slice.docs.push_back(corpus.docs[d]);
        slice.collection_of.push_back(0);
      }
      ChainConfig sub = config;
      sub.seed = root.split(j).seed();
      auto trace = cgs_run(slice, K, alpha, eta, sub);
      raw[j] = estimate_collection_mixture_from_z(trace.final_z,
                                                  slice.collection_of, 1, K);
      betas.push_back(average_rao_blackwell_beta(trace.samples, eta));
    }
    for (int j = 0; j < corpus.num_collections; ++j) {
      if (j == 0) {
        for (int k = 0; k < K; ++k) mixtures(0, k) = raw[0](0, k);
        continue;
      }
      const auto perm = align_topics(betas[0], betas[j]);
      for (int k = 0; k < K; ++k) mixtures(j, k) = raw[j](0, perm[k]);
    }
  } else {
    throw DataError("unknown method: " + method);
  }

  std::ofstream out(guard.track("mixtures.csv"));
  out << "method,collection,topic,value\n";
  for (std::size_t j = 0; j < mixtures.rows(); ++j) {
    for (std::size_t k = 0; k < mixtures.cols(); ++k) {
      out << method << ',' << (j + 1) << ',' << (k + 1) << ','
          << fmt(mixtures(j, k)) << '\n';
    }
  }
  std::cout << "[compare] " << method << " mixtures written\n";
  guard.disarm();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"compound-LDA topic model toolkit"};
  app.require_subcommand(1);

  // preprocess
  auto* preprocess_cmd = app.add_subcommand("preprocess", "tokenize and index raw text");
  std::string pre_input;
  std::string pre_stopwords;
  std::string pre_labels;
  std::string pre_out;
  int pre_min_count = 1;
  int pre_min_len = 2;
  preprocess_cmd->add_option("--input", pre_input, "directory of .txt documents")->required();
  preprocess_cmd->add_option("--stopwords", pre_stopwords, "stopword list, one per line");
  preprocess_cmd->add_option("--labels", pre_labels, "collection labels, one per document");
  preprocess_cmd->add_option("--min-count", pre_min_count, "minimum corpus frequency");
  preprocess_cmd->add_option("--min-len", pre_min_len, "minimum token length");
  preprocess_cmd->add_option("--out", pre_out, "output corpus directory")->required();

  // generate
  auto* generate_cmd = app.add_subcommand("generate", "simulate a synthetic corpus");
  std::string gen_preset;
  std::string gen_config;
  std::string gen_out;
  std::uint64_t gen_seed = 42;
  generate_cmd->add_option("--preset", gen_preset, "synth-3.2 or synth-3.3");
  generate_cmd->add_option("--config", gen_config, "JSON config file");
  generate_cmd->add_option("--seed", gen_seed, "random seed");
  generate_cmd->add_option("--out", gen_out, "output directory")->required();

  // split
  auto* split_cmd = app.add_subcommand("split", "sample a held-out split");
  std::string split_corpus;
  std::string split_out;
  double split_doc_fraction = 0.2;
  double split_word_fraction = 0.5;
  std::uint64_t split_seed = 42;
  split_cmd->add_option("--corpus", split_corpus, "corpus directory")->required();
  split_cmd->add_option("--doc-fraction", split_doc_fraction, "held-out document fraction");
  split_cmd->add_option("--word-fraction", split_word_fraction, "test word fraction");
  split_cmd->add_option("--seed", split_seed, "random seed");
  split_cmd->add_option("--out", split_out, "output split.json path")->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "run an inference algorithm");
  TrainArgs train;
  train_cmd->add_option("--algo", train.algo, "ags|mgs|vem|lda-cgs")->required();
  train_cmd->add_option("--corpus", train.corpus_dir, "corpus directory")->required();
  train_cmd->add_option("--k", train.k, "number of topics")->required();
  train_cmd->add_option("--alpha", train.alpha, "collection-level concentration");
  train_cmd->add_option("--gamma", train.gamma, "document-level concentration");
  train_cmd->add_option("--eta", train.eta, "topic smoothing");
  train_cmd->add_option("--epsilon", train.epsilon, "MGS step size");
  train_cmd->add_flag("--adapt-epsilon", train.adapt_epsilon, "adapt MGS step size during burn-in");
  train_cmd->add_flag("--optimize-hyper", train.optimize_hyper, "VEM hyperparameter updates");
  train_cmd->add_flag("--single-collection", train.single_collection, "collapse all collections into one");
  train_cmd->add_option("--iters", train.iterations, "iterations");
  train_cmd->add_option("--burn-in", train.burn_in, "burn-in (default half)");
  train_cmd->add_option("--save-every", train.save_every, "snapshot interval");
  train_cmd->add_option("--chains", train.chains, "parallel chains");
  train_cmd->add_option("--seed", train.seed, "random seed");
  train_cmd->add_option("--split", train.split_path, "train on the split's training words only");
  train_cmd->add_option("--out", train.out_dir, "output model directory")->required();

  // estimate-hyper
  auto* hyper_cmd = app.add_subcommand("estimate-hyper", "Gibbs-EM estimation of (eta, gamma)");
  std::string hyper_corpus;
  std::string hyper_out;
  int hyper_k = 0;
  int hyper_replicates = 1;
  GibbsEmConfig hyper_config;
  hyper_cmd->add_option("--corpus", hyper_corpus, "corpus directory")->required();
  hyper_cmd->add_option("--k", hyper_k, "number of topics")->required();
  hyper_cmd->add_option("--alpha", hyper_config.alpha, "fixed alpha");
  hyper_cmd->add_option("--replicates", hyper_replicates, "independent replicate runs");
  hyper_cmd->add_option("--samples", hyper_config.samples_per_estep, "samples per E-step");
  hyper_cmd->add_option("--inner-burn-in", hyper_config.inner_burn_in, "chain burn-in per E-step");
  hyper_cmd->add_option("--thin", hyper_config.inner_thin, "thinning between samples");
  hyper_cmd->add_option("--outer-max", hyper_config.outer_max_iterations, "max outer iterations");
  hyper_cmd->add_option("--tol", hyper_config.tol, "outer relative tolerance");
  hyper_cmd->add_option("--eta0", hyper_config.eta0, "initial eta");
  hyper_cmd->add_option("--gamma0", hyper_config.gamma0, "initial gamma");
  hyper_cmd->add_option("--seed", hyper_config.seed, "random seed");
  hyper_cmd->add_option("--out", hyper_out, "output directory")->required();

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "held-out perplexity, coherence, size");
  std::string eval_model;
  std::string eval_corpus;
  std::string eval_split;
  std::string eval_metrics = "perplexity,coherence,size";
  int eval_top_m = 20;
  std::string eval_out;
  eval_cmd->add_option("--model", eval_model, "trained model directory")->required();
  eval_cmd->add_option("--corpus", eval_corpus, "corpus directory")->required();
  eval_cmd->add_option("--split", eval_split, "held-out split file");
  eval_cmd->add_option("--metrics", eval_metrics, "comma list: perplexity,coherence,size");
  eval_cmd->add_option("--top-m", eval_top_m, "top words per topic for coherence");
  eval_cmd->add_option("--out", eval_out, "output directory")->required();

  // export
  auto* export_cmd = app.add_subcommand("export", "emit model quantities as CSV");
  std::string export_model;
  std::string export_what;
  std::string export_corpus;
  int export_top_m = 20;
  std::string export_out;
  export_cmd->add_option("--model", export_model, "trained model directory")->required();
  export_cmd->add_option("--what", export_what, "pi|theta|beta|top-words|topic-dist")->required();
  export_cmd->add_option("--corpus", export_corpus, "corpus directory (default: training corpus)");
  export_cmd->add_option("--top-m", export_top_m, "top words per topic");
  export_cmd->add_option("--out", export_out, "output directory")->required();

  // compare
  auto* compare_cmd = app.add_subcommand("compare", "collection mixtures via M1/M2/M3");
  std::string cmp_method;
  std::string cmp_corpus;
  std::string cmp_out;
  int cmp_k = 0;
  double cmp_alpha = 0.5;
  double cmp_gamma = 1.0;
  double cmp_eta = 0.25;
  int cmp_iters = 1000;
  std::uint64_t cmp_seed = 42;
  compare_cmd->add_option("--method", cmp_method, "m1|m2|m3")->required();
  compare_cmd->add_option("--corpus", cmp_corpus, "corpus directory")->required();
  compare_cmd->add_option("--k", cmp_k, "number of topics")->required();
  compare_cmd->add_option("--alpha", cmp_alpha, "alpha (cLDA) / alpha (LDA)");
  compare_cmd->add_option("--gamma", cmp_gamma, "gamma (cLDA)");
  compare_cmd->add_option("--eta", cmp_eta, "eta");
  compare_cmd->add_option("--iters", cmp_iters, "iterations");
  compare_cmd->add_option("--seed", cmp_seed, "random seed");
  compare_cmd->add_option("--out", cmp_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // help exits cleanly, usage errors with 2
  }

  try {
    if (preprocess_cmd->parsed()) {
      std::vector<std::string> raw;
      std::vector<std::string> names;
      for (const auto& entry : fs::directory_iterator(pre_input)) {
        if (entry.path().extension() == ".txt") names.push_back(entry.path().string());
      }
      std::sort(names.begin(), names.end());
      if (names.empty()) throw DataError("preprocess: no .txt files under " + pre_input);
      for (const auto& name : names) {
        std::ifstream in(name);
        raw.emplace_back(std::istreambuf_iterator<char>(in),
                         std::istreambuf_iterator<char>());
      }
      std::vector<int> labels;
      if (!pre_labels.empty()) {
        std::ifstream in(pre_labels);
        if (!in) throw DataError("cannot open " + pre_labels);
        int label;
        while (in >> label) labels.push_back(label);
        if (labels.size() != raw.size()) {
          throw DataError("preprocess: " + std::to_string(labels.size()) +
                          " labels for " + std::to_string(raw.size()) + " documents");
        }
      }
      std::unordered_set<std::string> stopwords;
      if (!pre_stopwords.empty()) stopwords = load_stopwords(pre_stopwords);
      OutputGuard guard(pre_out);
      const auto corpus = preprocess(raw, stopwords, pre_min_count, pre_min_len, labels);
      guard.track("corpus.bow");
      guard.track("corpus.labels");
      guard.track("corpus.vocab");
      save_corpus(corpus, pre_out);
      std::cout << "[preprocess] " << corpus.num_docs() << " documents, "
                << corpus.vocab_size() << " terms, " << corpus.total_tokens()
                << " tokens\n";
      guard.disarm();
    } else if (generate_cmd->parsed()) {
      SynthConfig config;
      if (!gen_preset.empty()) {
        config = synth_preset(gen_preset);
      } else if (!gen_config.empty()) {
        const auto j = load_json(gen_config);
        config.num_collections = j.value("J", config.num_collections);
        config.num_topics = j.value("K", config.num_topics);
        config.vocab_size = j.value("V", config.vocab_size);
        config.docs_per_collection = j.value("docs_per_collection", config.docs_per_collection);
        config.words_per_doc = j.value("words_per_doc", config.words_per_doc);
        config.h.alpha = j.value("alpha", config.h.alpha);
        config.h.gamma = j.value("gamma", config.h.gamma);
        config.h.eta = j.value("eta", config.h.eta);
        config.poisson_lengths = j.value("poisson_lengths", false);
      } else {
        throw DataError("generate: provide --preset or --config");
      }
      config.seed = gen_seed;
      OutputGuard guard(gen_out);
      guard.track("corpus.bow");
      guard.track("corpus.labels");
      guard.track("corpus.vocab");
      guard.track("truth.json");
      const auto data = generate(config);
      save_synthetic(data, gen_out);
      std::cout << "[generate] " << data.corpus.num_docs() << " documents over "
                << config.num_collections << " collections\n";
      guard.disarm();
    } else if (split_cmd->parsed()) {
      const auto corpus = load_corpus_dir(split_corpus);
      Rng rng(split_seed);
      const auto split = split_held_out(rng, corpus, split_doc_fraction, split_word_fraction);
      save_split(split, split_out);
      std::cout << "[split] " << split.heldout_docs.size() << " held-out documents, "
                << split.num_test_tokens() << " test tokens\n";
    } else if (train_cmd->parsed()) {
      return cmd_train(train);
    } else if (hyper_cmd->parsed()) {
      const auto corpus = load_corpus_dir(hyper_corpus);
      OutputGuard guard(hyper_out);
      json summary = json::array();
      Rng root(hyper_config.seed);
      for (int r = 0; r < hyper_replicates; ++r) {
        GibbsEmConfig config = hyper_config;
        config.seed = hyper_replicates == 1 ? hyper_config.seed : root.split(r).seed();
        const auto result = gibbs_em_run(corpus, hyper_k, config);
        char name[64];
        std::snprintf(name, sizeof(name), "replicate_%03d.csv", r);
        std::ofstream out(guard.track(name));
        out << "outer_iter,eta,gamma\n";
        for (std::size_t t = 0; t < result.trajectory.size(); ++t) {
          out << (t + 1) << ',' << fmt(result.trajectory[t].first) << ','
              << fmt(result.trajectory[t].second) << '\n';
        }
        summary.push_back({{"replicate", r},
                           {"eta", result.eta},
                           {"gamma", result.gamma},
                           {"converged", result.converged}});
        std::cout << "[estimate-hyper] replicate " << r << " eta "
                  << fmt(result.eta) << " gamma " << fmt(result.gamma) << "\n";
      }
      write_json(summary, guard.track("estimates.json"));
      guard.disarm();
    } else if (eval_cmd->parsed()) {
      return cmd_evaluate(eval_model, eval_corpus, eval_split, eval_metrics,
                          eval_top_m, eval_out);
    } else if (export_cmd->parsed()) {
      return cmd_export(export_model, export_what, export_corpus, export_top_m,
                        export_out);
    } else if (compare_cmd->parsed()) {
      return cmd_compare(cmp_method, cmp_corpus, cmp_k, cmp_alpha, cmp_gamma,
                         cmp_eta, cmp_iters, cmp_seed, cmp_out);
    }
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::domain_error& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::invalid_argument& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
