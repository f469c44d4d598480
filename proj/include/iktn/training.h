#ifndef IKTN_TRAINING_H_
#define IKTN_TRAINING_H_

#include <array>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "iktn/data.h"
#include "iktn/metrics.h"
#include "iktn/model.h"
#include "iktn/tensor.h"

namespace iktn {

// Non-finite loss or gradient during training.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename T>
struct AspectLossParts {
  Tensor<T> total;  // λ1 L_ate + λ2 L_ote + λ3 L_asc
  Tensor<T> ate;
  Tensor<T> ote;
  Tensor<T> asc;
};

// Token-averaged cross-entropies of the final state over real tokens; ASC
// averages over labeled tokens only and is 0 when there are none.
template <typename T>
AspectLossParts<T> AspectLoss(Tape<T>& tape, const IterationState<T>& final_state,
                              const LabeledRow& row, const LossWeights& weights);

// λ4 CE(ddc) + λ5 CE(dsc) over the labels the document carries.
template <typename T>
Tensor<T> DocumentLoss(Tape<T>& tape, const DocumentOutput<T>& output,
                       const Document& document, const LossWeights& weights);

// Per-task token accuracy (ate, ote over real tokens, asc over labeled ones)
// of eval-mode predictions. Ids must be assigned.
std::array<double, 3> TokenAccuracy(const Model<float>& model,
                                    std::span<const Sentence> sentences);

std::vector<PredictionRecord> PredictCorpus(const Model<float>& model,
                                            std::span<const Sentence> sentences);
EvalReport EvaluateModel(const Model<float>& model, std::span<const Sentence> sentences);

struct Schedule {
  int epochs = 30;
  int pretrain_epochs = 2;
  int alternation = 1;  // aspect batches per document batch
  std::size_t batch_size = 32;
  double learning_rate = 1e-4;
  double clip_norm = 5.0;
  int patience = 5;  // epochs without dev improvement; 0 disables
  // Stop once train token accuracy reaches this on all three tasks
  // (0 disables). The model at that epoch is kept.
  double target_accuracy = 0.0;
  std::uint64_t seed = 1;

  void Validate() const;
};

struct TrainResult {
  std::vector<double> loss_trace;  // every optimizer step, in order
  int epochs_run = 0;
  std::optional<int> target_epoch;
  int best_epoch = 0;
  double best_f1_i = -1.0;
  std::array<double, 3> train_accuracy{};
};

// Pretraining on documents, then aspect batches alternating with document
// batches. `dev` selects the best epoch by F1-I; when empty, the training set
// is used. Ids must be assigned. `log` receives one JSON line per epoch.
TrainResult Train(Model<float>& model, const std::vector<Sentence>& train,
                  const std::vector<Sentence>& dev, const std::vector<Document>& documents,
                  const Schedule& schedule, std::ostream* log = nullptr);

// ---------------------------------------------------------------------------
// Finite-difference gradient checking (64-bit)

struct GradcheckOptions {
  double step = 1e-3;
  double tolerance = 1e-3;
  double floor = 1e-8;            // denominator floor of the relative error
  std::size_t max_entries = 0;    // per tensor; 0 checks every entry
  std::uint64_t seed = 1;         // entry sampling
};

struct GradcheckEntry {
  std::string name;
  std::size_t size = 0;
  std::size_t checked = 0;
  bool frozen = false;
  double max_abs_error = 0.0;
  double max_analytic = 0.0;
  double max_numeric = 0.0;
  // max|a - n| / max(max|a|, max|n|, floor) over the checked entries.
  double relative_error = 0.0;
  // Checked entries whose +step or -step evaluation flipped the sign of some
  // Relu input; their difference quotient spans a kink.
  std::size_t kink_crossings = 0;
  bool pass = true;
};

struct GradcheckReport {
  std::vector<GradcheckEntry> entries;
  double tolerance = 0.0;
  double seconds = 0.0;

  bool AllPass() const;
  std::vector<std::string> Failing() const;
  nlohmann::json ToJson() const;
};

using NamedTensors = std::vector<std::pair<std::string, Tensor<double>>>;

// Compares the tape gradient of `loss` with central differences for every
// named tensor. Tensors that do not require grad are reported as frozen.
GradcheckReport CheckGradients(const NamedTensors& params,
                               const std::function<Tensor<double>(Tape<double>&)>& loss,
                               const GradcheckOptions& options);

// J_a on `sentence` plus, when given, J_d on `document`, in eval mode.
GradcheckReport GradcheckModel(const Model<double>& model, const Sentence& sentence,
                               const Document* document, const GradcheckOptions& options);

}  // namespace iktn

#endif  // IKTN_TRAINING_H_
