#ifndef IKTN_TESTS_ROUTING_ORACLE_H_
#define IKTN_TESTS_ROUTING_ORACLE_H_

// Plain-loop re-execution of the routing update, one statement per step,
// sharing nothing with the tape implementation.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace iktn::test {

struct RoutingInstance {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> votes;         // [i][j][k]
  std::vector<std::uint8_t> adjacency;  // [i][j]
  std::vector<std::uint8_t> mask;    // [i]
  int iterations = 1;
};

struct OracleStep {
  std::vector<double> logits;  // at softmax time
  std::vector<double> coupling;
  std::vector<double> outputs;
  std::vector<double> logits_after;
};

inline std::vector<OracleStep> OracleRoute(const RoutingInstance& r) {
  const std::size_t n = r.n, d = r.d;
  auto u = [&](std::size_t i, std::size_t j, std::size_t k) { return r.votes[(i * n + j) * d + k]; };
  std::vector<double> b(n * n, 0.0);
  std::vector<OracleStep> steps;
  for (int it = 0; it < r.iterations; ++it) {
    OracleStep step;
    // b += A
    for (std::size_t q = 0; q < n * n; ++q) b[q] += r.adjacency[q];
    step.logits = b;
    // c_i = softmax over unpadded targets j
    std::vector<double> c(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double top = -INFINITY;
      for (std::size_t j = 0; j < n; ++j) {
        if (r.mask[j]) top = std::max(top, b[i * n + j]);
      }
      double z = 0;
      for (std::size_t j = 0; j < n; ++j) {
        if (r.mask[j]) z += std::exp(b[i * n + j] - top);
      }
      for (std::size_t j = 0; j < n; ++j) {
        c[i * n + j] = r.mask[j] ? std::exp(b[i * n + j] - top) / z : 0.0;
      }
    }
    step.coupling = c;
    // s_j = sum over unpadded sources of c u
    std::vector<double> s(n * d, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < n; ++i) {
        if (!r.mask[i]) continue;
        for (std::size_t k = 0; k < d; ++k) s[j * d + k] += c[i * n + j] * u(i, j, k);
      }
    }
    // v_j = squash(s_j)
    std::vector<double> v(n * d, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      double sq = 0;
      for (std::size_t k = 0; k < d; ++k) sq += s[j * d + k] * s[j * d + k];
      const double norm = std::sqrt(sq);
      const double factor = sq / (1 + sq) / (norm + 1e-9);
      for (std::size_t k = 0; k < d; ++k) v[j * d + k] = factor * s[j * d + k];
    }
    step.outputs = v;
    // b += u . v
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double dot = 0;
        for (std::size_t k = 0; k < d; ++k) dot += u(i, j, k) * v[j * d + k];
        b[i * n + j] += dot;
      }
    }
    step.logits_after = b;
    steps.push_back(std::move(step));
  }
  return steps;
}

// n in [1, 10], iter in [1, 4], symmetric 0/1 adjacency with self-loops, a
// trailing run of padded tokens in about a third of the draws.
inline RoutingInstance DrawRoutingInstance(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> len(1, 10), dim(1, 8);
  std::uniform_int_distribution<int> iters(1, 4);
  std::uniform_real_distribution<double> val(-2.0, 2.0);
  std::bernoulli_distribution edge(0.3), pad(0.33);
  RoutingInstance r;
  r.n = len(rng);
  r.d = dim(rng);
  r.iterations = iters(rng);
  r.votes.resize(r.n * r.n * r.d);
  for (auto& x : r.votes) x = val(rng);
  r.mask.assign(r.n, 1);
  if (r.n > 1 && pad(rng)) {
    std::uniform_int_distribution<std::size_t> keep(1, r.n - 1);
    for (std::size_t i = keep(rng); i < r.n; ++i) r.mask[i] = 0;
  }
  r.adjacency.assign(r.n * r.n, 0);
  for (std::size_t i = 0; i < r.n; ++i) {
    if (!r.mask[i]) continue;
    r.adjacency[i * r.n + i] = 1;
    for (std::size_t j = i + 1; j < r.n; ++j) {
      if (r.mask[j] && edge(rng)) r.adjacency[i * r.n + j] = r.adjacency[j * r.n + i] = 1;
    }
  }
  return r;
}

}  // namespace iktn::test

#endif  // IKTN_TESTS_ROUTING_ORACLE_H_
