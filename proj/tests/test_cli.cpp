// SPDX-License-Identifier: Apache-2.0
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "clda/ags.hpp"
#include "clda/corpus.hpp"
#include "clda/evaluation.hpp"
#include "clda/lda.hpp"
#include "clda/synthetic.hpp"
#include "doctest.h"

namespace fs = std::filesystem;
using namespace clda;

namespace {

const std::string kCli = CLDA_CLI_PATH;

int run(const std::string& args) {
  const std::string cmd = kCli + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

fs::path work_dir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "clda_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// trace.csv with the trailing seconds column removed, for byte comparisons.
std::string strip_timing(const std::string& csv) {
  std::istringstream in(csv);
  std::string out;
  std::string line;
  while (std::getline(in, line)) {
    const auto comma = line.rfind(',');
    out += line.substr(0, comma);
    out += '\n';
  }
  return out;
}

}  // namespace

TEST_CASE("generate, split, train, evaluate, export pipeline") {
  const auto dir = work_dir();
  const auto corpus_dir = (dir / "corpus").string();
  REQUIRE(run("generate --preset synth-3.2 --seed 11 --out " + corpus_dir) == 0);
  CHECK(fs::exists(corpus_dir + "/corpus.bow"));
  CHECK(fs::exists(corpus_dir + "/corpus.labels"));
  CHECK(fs::exists(corpus_dir + "/corpus.vocab"));
  CHECK(fs::exists(corpus_dir + "/truth.json"));

  const auto split_path = (dir / "split.json").string();
  REQUIRE(run("split --corpus " + corpus_dir + " --seed 3 --out " + split_path) == 0);
  CHECK(fs::exists(split_path));

  const auto model_dir = (dir / "model_ags").string();
  REQUIRE(run("train --algo ags --corpus " + corpus_dir +
              " --k 3 --alpha 0.1 --gamma 1 --eta 0.25 --iters 60 --burn-in 20"
              " --save-every 10 --seed 5 --split " + split_path +
              " --out " + model_dir) == 0);
  CHECK(fs::exists(model_dir + "/trace.csv"));
  CHECK(fs::exists(model_dir + "/pi_history.csv"));
  CHECK(fs::exists(model_dir + "/checkpoint.json"));
  CHECK(fs::exists(model_dir + "/meta.json"));
  CHECK(fs::exists(model_dir + "/samples/sample_000030.json"));

  const auto eval_dir = (dir / "eval").string();
  REQUIRE(run("evaluate --model " + model_dir + " --corpus " + corpus_dir +
              " --split " + split_path +
              " --metrics perplexity,coherence,size --out " + eval_dir) == 0);
  CHECK(fs::exists(eval_dir + "/eval.json"));
  CHECK(fs::exists(eval_dir + "/coherence.csv"));

  const auto export_dir = (dir / "export_pi").string();
  REQUIRE(run("export --model " + model_dir + " --what pi --out " + export_dir) == 0);
  CHECK(fs::exists(export_dir + "/pi_final.csv"));
  CHECK(fs::exists(export_dir + "/pi_trajectory.csv"));

  const auto words_dir = (dir / "export_words").string();
  REQUIRE(run("export --model " + model_dir + " --what top-words --corpus " +
              corpus_dir + " --top-m 5 --out " + words_dir) == 0);
  const auto words = slurp(words_dir + "/top_words.csv");
  CHECK(words.find("topic,rank,term_id,term,probability") == 0);
}

TEST_CASE("training is byte-identical under a fixed seed, timing aside") {
  const auto dir = work_dir();
  const auto corpus_dir = (dir / "corpus2").string();
  REQUIRE(run("generate --preset synth-3.3 --seed 21 --out " + corpus_dir) == 0);

  const auto model_a = (dir / "rerun_a").string();
  const auto model_b = (dir / "rerun_b").string();
  const std::string train_args =
      "train --algo mgs --corpus " + corpus_dir +
      " --k 3 --alpha 1 --gamma 0.8 --eta 0.5 --epsilon 0.05 --iters 40"
      " --burn-in 10 --save-every 10 --seed 9 --out ";
  REQUIRE(run(train_args + model_a) == 0);
  REQUIRE(run(train_args + model_b) == 0);

  CHECK(strip_timing(slurp(model_a + "/trace.csv")) ==
        strip_timing(slurp(model_b + "/trace.csv")));
  CHECK(slurp(model_a + "/pi_history.csv") == slurp(model_b + "/pi_history.csv"));
  CHECK(slurp(model_a + "/checkpoint.json") == slurp(model_b + "/checkpoint.json"));
  CHECK(slurp(model_a + "/samples/sample_000020.json") ==
        slurp(model_b + "/samples/sample_000020.json"));
}

TEST_CASE("vem training emits bound history and parameters") {
  const auto dir = work_dir();
  const auto corpus_dir = (dir / "corpus3").string();
  REQUIRE(run("generate --config " + [&] {
    const auto config_path = (dir / "gen.json").string();
    std::ofstream out(config_path);
    out << R"({"J":2,"K":3,"V":15,"docs_per_collection":10,"words_per_doc":20,)"
        << R"("alpha":0.5,"gamma":1.0,"eta":0.4})";
    return config_path;
  }() + " --seed 2 --out " + corpus_dir) == 0);

  const auto model_dir = (dir / "model_vem").string();
  REQUIRE(run("train --algo vem --corpus " + corpus_dir +
              " --k 3 --alpha 0.5 --gamma 1 --eta 0.4 --seed 1 --out " +
              model_dir) == 0);
  CHECK(fs::exists(model_dir + "/elbo.csv"));
  CHECK(fs::exists(model_dir + "/params.json"));

  const auto export_dir = (dir / "export_vem_pi").string();
  REQUIRE(run("export --model " + model_dir + " --what pi --out " + export_dir) == 0);
  CHECK(fs::exists(export_dir + "/pi_final.csv"));
}

TEST_CASE("compare m3 matches the in-process pipeline") {
  const auto dir = work_dir();
  const auto corpus_dir = (dir / "corpus4").string();
  REQUIRE(run("generate --preset synth-3.2 --seed 33 --out " + corpus_dir) == 0);

  const auto out_dir = (dir / "compare_m3").string();
  REQUIRE(run("compare --method m3 --corpus " + corpus_dir +
              " --k 3 --alpha 0.5 --eta 0.25 --iters 50 --seed 13 --out " +
              out_dir) == 0);

  // Reproduce in process: per-collection flat chains, topics aligned to
  // collection 1 via the term distributions (the CLI's seed policy derives
  // collection j's seed by splitting the root seed at stream j).
  const auto corpus = load_corpus(corpus_dir + "/corpus.bow",
                                  corpus_dir + "/corpus.labels",
                                  corpus_dir + "/corpus.vocab");
  const double alpha = 0.5;
  const double eta = 0.25;
  const int K = 3;
  ChainConfig config;
  config.iterations = 50;
  config.burn_in = 25;
  config.save_every = 10;
  Rng root(13);
  const auto by_coll = corpus.docs_of_collection();
  std::vector<MatD> raw(corpus.num_collections);
  std::vector<MatD> betas;
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
  MatD expected(corpus.num_collections, K);
  for (int k = 0; k < K; ++k) expected(0, k) = raw[0](0, k);
  for (int j = 1; j < corpus.num_collections; ++j) {
    const auto perm = align_topics(betas[0], betas[j]);
    for (int k = 0; k < K; ++k) expected(j, k) = raw[j](0, perm[k]);
  }

  // Parse mixtures.csv and compare.
  std::ifstream in(out_dir + "/mixtures.csv");
  REQUIRE(in.good());
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    std::string method;
    int j, k;
    double value;
    row >> method >> j >> k >> value;
    CHECK(value == doctest::Approx(expected(j - 1, k - 1)).epsilon(1e-12));
  }
}

TEST_CASE("--chains runs independent seeded chains in parallel") {
  const auto dir = work_dir();
  const auto corpus_dir = (dir / "corpus_chains").string();
  REQUIRE(run("generate --preset synth-3.3 --seed 51 --out " + corpus_dir) == 0);
  const auto model_dir = (dir / "model_chains").string();
  REQUIRE(run("train --algo ags --corpus " + corpus_dir +
              " --k 3 --iters 30 --burn-in 10 --save-every 10 --seed 4"
              " --chains 2 --out " + model_dir) == 0);
  REQUIRE(fs::exists(model_dir + "/chain_0/trace.csv"));
  REQUIRE(fs::exists(model_dir + "/chain_1/trace.csv"));
  // Different sub-streams: the chains must diverge.
  CHECK(slurp(model_dir + "/chain_0/checkpoint.json") !=
        slurp(model_dir + "/chain_1/checkpoint.json"));
}

TEST_CASE("--single-collection flattens a labeled corpus") {
  const auto dir = work_dir();
  const auto corpus_dir = (dir / "corpus_flat").string();
  REQUIRE(run("generate --preset synth-3.3 --seed 41 --out " + corpus_dir) == 0);
  const auto model_dir = (dir / "model_flat").string();
  REQUIRE(run("train --algo ags --corpus " + corpus_dir +
              " --k 2 --iters 30 --burn-in 10 --save-every 10 --seed 2"
              " --single-collection --out " + model_dir) == 0);
  // One collection means a single pi row regardless of the two labels.
  const auto pi_header = [&] {
    std::ifstream in(model_dir + "/pi_history.csv");
    std::string line;
    std::getline(in, line);
    return line;
  }();
  CHECK(pi_header == "iteration,pi_1_1,pi_1_2");
  CHECK(slurp(model_dir + "/meta.json").find("\"single_collection\":true") !=
        std::string::npos);
}

TEST_CASE("usage and data errors use the documented exit codes") {
  const auto dir = work_dir();
  CHECK(run("train --algo ags") == 2);                      // missing required flags
  CHECK(run("nonsense-subcommand") == 2);
  CHECK(run("generate --preset synth-9.9 --out " + (dir / "nope").string()) == 3);
  CHECK(run("train --algo ags --corpus " + (dir / "missing").string() +
            " --k 3 --out " + (dir / "nope2").string()) == 3);
  CHECK(!fs::exists(dir / "nope2"));  // partial outputs removed
  const auto corpus_dir = (dir / "corpus5").string();
  REQUIRE(run("generate --preset synth-3.3 --seed 1 --out " + corpus_dir) == 0);
  CHECK(run("train --algo ags --corpus " + corpus_dir +
            " --k 3 --alpha -1 --out " + (dir / "nope3").string()) == 4);
}

TEST_CASE("evaluate rejects a split other than the training split") {
  const auto dir = work_dir();
  const auto corpus_dir = (dir / "corpus6").string();
  REQUIRE(run("generate --preset synth-3.3 --seed 2 --out " + corpus_dir) == 0);
  const auto split_a = (dir / "split_a.json").string();
  const auto split_b = (dir / "split_b.json").string();
  REQUIRE(run("split --corpus " + corpus_dir + " --seed 1 --out " + split_a) == 0);
  REQUIRE(run("split --corpus " + corpus_dir + " --seed 2 --out " + split_b) == 0);
  const auto model_dir = (dir / "model6").string();
  REQUIRE(run("train --algo ags --corpus " + corpus_dir +
              " --k 2 --iters 20 --burn-in 5 --save-every 5 --seed 3 --split " +
              split_a + " --out " + model_dir) == 0);
  CHECK(run("evaluate --model " + model_dir + " --corpus " + corpus_dir +
            " --split " + split_b + " --metrics perplexity --out " +
            (dir / "bad_eval").string()) == 3);
  CHECK(run("evaluate --model " + model_dir + " --corpus " + corpus_dir +
            " --split " + split_a + " --metrics perplexity --out " +
            (dir / "good_eval").string()) == 0);
}
