// SPDX-License-Identifier: Apache-2.0
#include "clda/chain.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "clda/errors.hpp"

namespace clda {

void ChainConfig::validate() const {
  if (iterations < 1) throw std::invalid_argument("chain: iterations must be >= 1");
  if (burn_in < 0 || burn_in >= iterations) {
    throw std::invalid_argument("chain: burn_in must lie in [0, iterations)");
  }
  if (save_every < 1) throw std::invalid_argument("chain: save_every must be >= 1");
}

namespace {
void write_double(std::ofstream& out, double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  out << buf;
}
}  // namespace

void ChainTrace::write_csv(const std::string& path, bool mgs_columns) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "iteration,log_joint";
  if (mgs_columns) out << ",acceptance_rate,epsilon";
  out << ",seconds\n";
  for (const auto& row : rows) {
    out << row.iteration << ',';
    write_double(out, row.log_joint);
    if (mgs_columns) {
      out << ',';
      write_double(out, row.acceptance_rate);
      out << ',';
      write_double(out, row.epsilon);
    }
    out << ',';
    write_double(out, row.seconds);
    out << '\n';
  }
}

void ChainTrace::write_pi_history_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  if (pi_history.empty()) return;
  const auto J = pi_history.front().rows();
  const auto K = pi_history.front().cols();
  out << "iteration";
  for (std::size_t j = 0; j < J; ++j) {
    for (std::size_t k = 0; k < K; ++k) {
      out << ",pi_" << (j + 1) << '_' << (k + 1);
    }
  }
  out << '\n';
  for (std::size_t t = 0; t < pi_history.size(); ++t) {
    out << (t + 1);
    for (std::size_t j = 0; j < J; ++j) {
      for (std::size_t k = 0; k < K; ++k) {
        out << ',';
        write_double(out, pi_history[t](j, k));
      }
    }
    out << '\n';
  }
}

}  // namespace clda
