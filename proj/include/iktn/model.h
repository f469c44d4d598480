#ifndef IKTN_MODEL_H_
#define IKTN_MODEL_H_

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "iktn/data.h"
#include "iktn/layers.h"
#include "iktn/routing.h"
#include "iktn/tensor.h"
#include "json.hpp"

namespace iktn {

// Which knowledge paths exist. A disabled path has no parameters at all.
struct TransferFlags {
  std::array<bool, 6> directions{true, true, true, true, true, true};  // kDirections order
  bool ddc_injection = true;  // a^ddc into ATE/OTE
  bool dsc_injection = true;  // y^dsc and a^dsc into ASC
  // Merged document knowledge: every enabled document signal reaches all
  // three aspect tasks.
  bool coarse = false;

  bool Enabled(TransferDirection d) const { return directions[DirectionIndex(d)]; }
  bool operator==(const TransferFlags&) const = default;
};

enum class Ablation {
  kAspectTransfer,
  kOpinionTransfer,
  kSentimentTransfer,
  kDdcTransfer,
  kDscTransfer,
  kCoarse,
};

inline constexpr std::array<Ablation, 6> kAblations = {
    Ablation::kAspectTransfer, Ablation::kOpinionTransfer,
    Ablation::kSentimentTransfer, Ablation::kDdcTransfer,
    Ablation::kDscTransfer, Ablation::kCoarse};

std::string_view AblationName(Ablation ablation);
std::optional<Ablation> ParseAblation(std::string_view name);
void ApplyAblation(TransferFlags& flags, Ablation ablation);

struct LossWeights {
  double ate = 1.0;
  double ote = 1.0;
  double asc = 1.0;
  double ddc = 1.0;
  double dsc = 1.0;
  bool operator==(const LossWeights&) const = default;
};

struct ModelConfig {
  std::size_t d_general = 50;
  std::size_t d_domain = 30;
  std::size_t d_enc = 64;
  std::size_t d_task = 64;
  std::size_t d_route = 64;
  std::vector<std::size_t> kernel_widths{3, 5};
  std::size_t task_depth = 2;
  std::size_t task_width = 3;
  int iterations = 2;          // T
  int routing_iterations = 3;  // iter
  PeMode pe_mode = PeMode::kAddBoth;
  std::size_t max_len = 256;
  double dropout = 0.3;
  bool trainable_embeddings = false;
  TransferFlags flags;
  LossWeights weights;
  std::uint64_t seed = 1;

  // Throws ConfigError on an unusable combination.
  void Validate() const;
  nlohmann::json ToJson() const;
  static ModelConfig FromJson(const nlohmann::json& j);
  bool operator==(const ModelConfig&) const = default;
};

template <typename T>
struct IterationState {
  int t = 0;
  std::array<Tensor<T>, 3> h;                    // indexed by TaskIndex
  std::array<TokenPredictions<T>, 3> y;
  AttentionOutput<T> ddc;
  AttentionOutput<T> dsc;

  const Tensor<T>& hidden(Task task) const { return h[TaskIndex(task)]; }
  const TokenPredictions<T>& prediction(Task task) const { return y[TaskIndex(task)]; }
};

struct RunMode {
  bool train = false;
  Rng* rng = nullptr;  // dropout masks; required when train is set
};

// Routing snapshots of one direction at one transfer step.
struct DirectionTrace {
  int step = 0;  // t+1 of the produced state
  TransferDirection direction;
  std::vector<RoutingSnapshot> snapshots;
};

template <typename T>
struct DocumentOutput {
  AttentionOutput<T> ddc;
  AttentionOutput<T> dsc;
};

struct SentencePrediction {
  std::vector<int> ate_tags;
  std::vector<int> ote_tags;
  std::vector<int> asc_tags;
  std::vector<Span> ate_spans;
  std::vector<Span> ote_spans;
  std::vector<std::pair<Span, int>> pairs;
};

// Majority label of asc_tags inside `span`. Ties go to the first token's
// label when it is among the tied ones, else to the tied label seen first.
int SpanSentiment(std::span<const int> asc_tags, Span span);

template <typename T>
class Model {
 public:
  Model(const ModelConfig& config, const EmbeddingTable& general,
        const EmbeddingTable& domain, TagSchemes schemes = {});

  // Same architecture with every tensor converted to T.
  template <typename U>
  static Model Convert(const Model<U>& other);

  const ModelConfig& config() const { return config_; }
  const TagSchemes& schemes() const { return schemes_; }
  const Vocabulary& general_vocab() const { return general_vocab_; }
  const Vocabulary& domain_vocab() const { return domain_vocab_; }
  ParameterSet<T>& params() { return params_; }
  const ParameterSet<T>& params() const { return params_; }
  std::vector<Tensor<T>> TrainableParameters() const;

  // True when `target` is rewritten by transfer steps; otherwise it is
  // carried through unchanged.
  bool Aggregates(Task target) const;

  // Sentence ids under this model's vocabularies.
  void AssignIds(std::vector<Sentence>& sentences) const;
  void AssignIds(std::vector<Document>& documents) const;

  IterationState<T> InitialState(Tape<T>& tape, const SequenceInput& input,
                                 const RunMode& mode) const;
  IterationState<T> TransferAndAggregate(
      Tape<T>& tape, const IterationState<T>& state, const SequenceInput& input,
      std::vector<DirectionTrace>* traces = nullptr) const;
  // States 0..T.
  std::vector<IterationState<T>> Forward(
      Tape<T>& tape, const SequenceInput& input, const RunMode& mode,
      std::vector<DirectionTrace>* traces = nullptr) const;
  DocumentOutput<T> DocumentForward(Tape<T>& tape, const SequenceInput& input,
                                    const RunMode& mode) const;

  // Eval-mode decode of state T. Ids must be assigned.
  SentencePrediction Predict(const Sentence& sentence) const;

 private:
  template <typename U>
  friend class Model;

  // Shared encoder output for the input.
  Tensor<T> Encode(Tape<T>& tape, const SequenceInput& input, const RunMode& mode) const;
  std::vector<TransferDirection> Incoming(Task target) const;
  bool TakesDdc(Task target) const;
  bool TakesDsc(Task target) const;

  ModelConfig config_;
  TagSchemes schemes_;
  Vocabulary general_vocab_;
  Vocabulary domain_vocab_;
  ParameterSet<T> params_;
  Tensor<T> general_table_;
  Tensor<T> domain_table_;
  SharedEncoder<T> encoder_;
  std::array<TaskLayer<T>, 5> task_layers_;
  std::array<TokenDecoder<T>, 3> decoders_;
  AttentionHead<T> ddc_head_;
  AttentionHead<T> dsc_head_;
  std::array<Tensor<T>, 6> route_weights_;  // undefined when disabled
  std::array<Affine<T>, 3> fuse_;           // projection after concat
  std::array<Affine<T>, 3> aggregate_;      // f1 (ate, ote), f2 (asc)
};

// Checkpoint container: 8-byte magic, u64 little-endian header length, JSON
// header, then float32 little-endian tensor payloads.
class CheckpointError : public DataError {
 public:
  using DataError::DataError;
};

inline constexpr int kCheckpointVersion = 1;

void SaveCheckpoint(const Model<float>& model, const std::string& path);
Model<float> LoadCheckpoint(const std::string& path);
// Manifest of a checkpoint file: (name, shape) in payload order.
std::vector<std::pair<std::string, Shape>> ReadManifest(const std::string& path);

}  // namespace iktn

#endif  // IKTN_MODEL_H_
