#include "iktn/routing.h"

#include <cmath>

namespace iktn {

std::string_view PeModeName(PeMode mode) {
  switch (mode) {
    case PeMode::kAddBoth: return "add-both";
    case PeMode::kAddSource: return "add-source";
    case PeMode::kOff: return "off";
  }
  return "?";
}

std::optional<PeMode> ParsePeMode(std::string_view name) {
  for (PeMode m : {PeMode::kAddBoth, PeMode::kAddSource, PeMode::kOff}) {
    if (PeModeName(m) == name) return m;
  }
  return std::nullopt;
}

template <typename T>
Tensor<T> PositionalEncoding(std::size_t n, std::size_t d_model) {
  if (d_model == 0 || d_model % 2 != 0) {
    throw ConfigError("positional encoding needs an even d_model, got " +
                      std::to_string(d_model));
  }
  if (n == 0) throw ConfigError("positional encoding needs n >= 1");
  std::vector<T> table(n * d_model);
  for (std::size_t pos = 0; pos < n; ++pos) {
    for (std::size_t p = 0; 2 * p < d_model; ++p) {
      const double angle = static_cast<double>(pos) /
                           std::pow(10000.0, static_cast<double>(2 * p) /
                                                 static_cast<double>(d_model));
      table[pos * d_model + 2 * p] = static_cast<T>(std::sin(angle));
      table[pos * d_model + 2 * p + 1] = static_cast<T>(std::cos(angle));
    }
  }
  return Tensor<T>::FromData({n, d_model}, std::move(table));
}

std::string TransferDirection::Name() const {
  return std::string(TaskName(source)) + "_to_" + std::string(TaskName(target));
}

std::size_t DirectionIndex(TransferDirection direction) {
  for (std::size_t k = 0; k < kDirections.size(); ++k) {
    if (kDirections[k] == direction) return k;
  }
  throw ContractError("not a transfer direction: " + direction.Name());
}

std::optional<TransferDirection> ParseDirection(std::string_view name) {
  for (const auto& d : kDirections) {
    const std::string src(TaskName(d.source));
    const std::string dst(TaskName(d.target));
    if (name == src + "_to_" + dst || name == src + "->" + dst) return d;
  }
  return std::nullopt;
}

template <typename T>
Tensor<T> PredictVectors(Tape<T>& tape, const Tensor<T>& h_source,
                         const Tensor<T>& weight, PeMode mode,
                         std::size_t max_len) {
  const std::size_t n = h_source.dim(0);
  const std::size_t d = h_source.dim(1);
  if (n > max_len) {
    throw ConfigError("sentence of " + std::to_string(n) +
                      " tokens exceeds routing capacity " + std::to_string(max_len));
  }
  // (h_i + PE(i) + PE(j))·W = h_i·W + PE(i)·W + PE(j)·W
  Tensor<T> source = h_source;
  Tensor<T> target = Tensor<T>::Zeros({n, d});
  if (mode != PeMode::kOff) {
    const Tensor<T> pe = PositionalEncoding<T>(n, d);
    source = Add(tape, h_source, pe);
    if (mode == PeMode::kAddBoth) target = pe;
  }
  return PairwiseSum(tape, MatMul(tape, source, weight), MatMul(tape, target, weight));
}

namespace {

template <typename T>
std::vector<double> Copy(const Tensor<T>& t) {
  return std::vector<double>(t.data().begin(), t.data().end());
}

}  // namespace

template <typename T>
RoutingResult<T> Route(Tape<T>& tape, const Tensor<T>& votes,
                       std::span<const std::uint8_t> adjacency, int iterations,
                       std::span<const std::uint8_t> mask, bool keep_trace) {
  if (iterations < 1) {
    throw ConfigError("routing needs at least one iteration, got " +
                      std::to_string(iterations));
  }
  if (votes.rank() != 3 || votes.dim(0) != votes.dim(1)) {
    throw ShapeError("route: votes must be [n×n×d], got " + ShapeToString(votes.shape()));
  }
  const std::size_t n = votes.dim(0);
  const std::size_t d = votes.dim(2);
  if (adjacency.size() != n * n) {
    throw ShapeError("route: adjacency has " + std::to_string(adjacency.size()) +
                     " entries for " + std::to_string(n) + " tokens");
  }
  std::vector<T> prior(n * n);
  for (std::size_t k = 0; k < n * n; ++k) prior[k] = adjacency[k] ? T(1) : T(0);
  const Tensor<T> prior_t = Tensor<T>::FromData({n, n}, std::move(prior));

  RoutingResult<T> result;
  Tensor<T> logits = Tensor<T>::Zeros({n, n});
  for (int it = 1; it <= iterations; ++it) {
    logits = Add(tape, logits, prior_t);
    const Tensor<T> coupling = Softmax(tape, logits, 1, mask);
    const Tensor<T> summary = WeightedSourceSum(tape, coupling, votes, mask);
    result.outputs = Squash(tape, summary);
    const Tensor<T> before = logits;
    logits = Add(tape, logits, Agreement(tape, votes, result.outputs));
    if (keep_trace) {
      RoutingSnapshot snap;
      snap.iteration = it;
      snap.n = n;
      snap.d = d;
      snap.logits = Copy(before);
      snap.coupling = Copy(coupling);
      snap.outputs = Copy(result.outputs);
      snap.logits_after = Copy(logits);
      result.trace.push_back(std::move(snap));
    }
  }
  return result;
}

nlohmann::json AgreementTrace(TransferDirection direction,
                              const std::vector<std::string>& tokens,
                              const std::vector<RoutingSnapshot>& trace) {
  if (trace.empty()) throw ContractError("agreement trace needs at least one snapshot");
  const std::size_t n = tokens.size();
  nlohmann::json out;
  out["direction"] = direction.Name();
  out["tokens"] = tokens;
  out["rows"] = "source";
  out["columns"] = "target";
  out["iterations"] = nlohmann::json::array();
  for (const auto& snap : trace) {
    if (snap.n < n) throw ContractError("trace is shorter than the token list");
    std::vector<double> c;
    c.reserve(n * n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) c.push_back(snap.coupling[i * snap.n + j]);
    }
    out["iterations"].push_back({{"iteration", snap.iteration}, {"n", n}, {"c", c}});
  }
  return out;
}

template Tensor<float> PositionalEncoding(std::size_t, std::size_t);
template Tensor<double> PositionalEncoding(std::size_t, std::size_t);
template Tensor<float> PredictVectors(Tape<float>&, const Tensor<float>&,
                                      const Tensor<float>&, PeMode, std::size_t);
template Tensor<double> PredictVectors(Tape<double>&, const Tensor<double>&,
                                       const Tensor<double>&, PeMode, std::size_t);
template RoutingResult<float> Route(Tape<float>&, const Tensor<float>&,
                                    std::span<const std::uint8_t>, int,
                                    std::span<const std::uint8_t>, bool);
template RoutingResult<double> Route(Tape<double>&, const Tensor<double>&,
                                     std::span<const std::uint8_t>, int,
                                     std::span<const std::uint8_t>, bool);

}  // namespace iktn
