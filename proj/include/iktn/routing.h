#ifndef IKTN_ROUTING_H_
#define IKTN_ROUTING_H_

// Dynamic-length routing between two token sequences of the same sentence.
//
// Every source token i casts a vote û_{j|i} for every target token j. The
// coupling c_{j|i} is a softmax over targets j of logits b_{j|i}, which start
// at zero, receive the dependency prior A_{j|i} at every iteration and grow
// by the agreement û_{j|i}·v_j with the squashed target summary v_j.
//
// Indexing convention: matrices over token pairs are stored source-major,
// entry [i][j] holds the (source i, target j) value.

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "iktn/data.h"
#include "iktn/tensor.h"
#include "json.hpp"

namespace iktn {

enum class PeMode { kAddBoth, kAddSource, kOff };

std::string_view PeModeName(PeMode mode);
std::optional<PeMode> ParsePeMode(std::string_view name);

// Sinusoidal table [n×d_model]: even columns sin(pos/10000^{2p/d}), odd
// columns cos of the same angle.
template <typename T>
Tensor<T> PositionalEncoding(std::size_t n, std::size_t d_model);

struct TransferDirection {
  Task source;
  Task target;

  std::string Name() const;  // e.g. "ote_to_asc"
  bool operator==(const TransferDirection&) const = default;
};

inline constexpr std::array<TransferDirection, 6> kDirections = {{
    {Task::kAte, Task::kOte},
    {Task::kAte, Task::kAsc},
    {Task::kOte, Task::kAte},
    {Task::kOte, Task::kAsc},
    {Task::kAsc, Task::kAte},
    {Task::kAsc, Task::kOte},
}};

std::size_t DirectionIndex(TransferDirection direction);
// Accepts "ote_to_asc" and "ote->asc".
std::optional<TransferDirection> ParseDirection(std::string_view name);

// Votes û[i][j] = (h_i + PE(i) + PE(j))·W under kAddBoth; kAddSource drops
// PE(j), kOff drops both. h_source: [n×d], weight: [d×d_route].
// Throws ConfigError if n exceeds max_len.
template <typename T>
Tensor<T> PredictVectors(Tape<T>& tape, const Tensor<T>& h_source,
                         const Tensor<T>& weight, PeMode mode,
                         std::size_t max_len);

// Values of one routing iteration, copied out of the tape.
struct RoutingSnapshot {
  int iteration = 0;  // 1-based
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> logits;        // b at softmax time, [n×n]
  std::vector<double> coupling;      // c, [n×n], rows sum to 1
  std::vector<double> outputs;       // v, [n×d]
  std::vector<double> logits_after;  // b after the agreement update
};

template <typename T>
struct RoutingResult {
  Tensor<T> outputs;  // v, [n×d_route]
  std::vector<RoutingSnapshot> trace;
};

// Runs `iterations` rounds on votes [n×n×d]. `adjacency` is n×n (0/1),
// `mask` marks real tokens (empty = all real). Padded sources are left out of
// the weighted sum and padded targets out of the softmax. Fully unrolled on
// the tape.
template <typename T>
RoutingResult<T> Route(Tape<T>& tape, const Tensor<T>& votes,
                       std::span<const std::uint8_t> adjacency, int iterations,
                       std::span<const std::uint8_t> mask = {},
                       bool keep_trace = false);

// Plot-ready coupling matrices of one direction on one sentence: rows are
// source tokens, columns target tokens, one matrix per iteration restricted
// to the first tokens.size() positions.
nlohmann::json AgreementTrace(TransferDirection direction,
                              const std::vector<std::string>& tokens,
                              const std::vector<RoutingSnapshot>& trace);

}  // namespace iktn

#endif  // IKTN_ROUTING_H_
