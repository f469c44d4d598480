#include "iktn/training.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>

#include <spdlog/spdlog.h>

#include "iktn/optimizer.h"

namespace iktn {

// ---------------------------------------------------------------------------
// Losses

template <typename T>
AspectLossParts<T> AspectLoss(Tape<T>& tape, const IterationState<T>& final_state,
                              const LabeledRow& row, const LossWeights& weights) {
  const std::size_t n = row.input.length();
  std::vector<int> ate(n, -1), ote(n, -1), asc(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    if (!row.input.mask[i]) continue;
    ate[i] = row.ate[i];
    ote[i] = row.ote[i];
    asc[i] = row.asc[i];
  }
  AspectLossParts<T> parts;
  parts.ate = MaskedMeanCrossEntropy(tape, final_state.prediction(Task::kAte).logits,
                                     std::span<const int>(ate));
  parts.ote = MaskedMeanCrossEntropy(tape, final_state.prediction(Task::kOte).logits,
                                     std::span<const int>(ote));
  parts.asc = MaskedMeanCrossEntropy(tape, final_state.prediction(Task::kAsc).logits,
                                     std::span<const int>(asc));
  parts.total = Add(tape,
                    Add(tape, Scale(tape, parts.ate, static_cast<T>(weights.ate)),
                        Scale(tape, parts.ote, static_cast<T>(weights.ote))),
                    Scale(tape, parts.asc, static_cast<T>(weights.asc)));
  return parts;
}

template <typename T>
Tensor<T> DocumentLoss(Tape<T>& tape, const DocumentOutput<T>& output,
                       const Document& document, const LossWeights& weights) {
  if (!document.domain && !document.sentiment) {
    throw ContractError("document without labels has no loss");
  }
  Tensor<T> loss = Tensor<T>::Scalar(T(0));
  if (document.domain) {
    loss = Add(tape, loss,
               Scale(tape, CrossEntropy(tape, output.ddc.logits, *document.domain),
                     static_cast<T>(weights.ddc)));
  }
  if (document.sentiment) {
    loss = Add(tape, loss,
               Scale(tape, CrossEntropy(tape, output.dsc.logits, *document.sentiment),
                     static_cast<T>(weights.dsc)));
  }
  return loss;
}

template AspectLossParts<float> AspectLoss(Tape<float>&, const IterationState<float>&,
                                           const LabeledRow&, const LossWeights&);
template AspectLossParts<double> AspectLoss(Tape<double>&, const IterationState<double>&,
                                            const LabeledRow&, const LossWeights&);
template Tensor<float> DocumentLoss(Tape<float>&, const DocumentOutput<float>&,
                                    const Document&, const LossWeights&);
template Tensor<double> DocumentLoss(Tape<double>&, const DocumentOutput<double>&,
                                     const Document&, const LossWeights&);

// ---------------------------------------------------------------------------
// Evaluation helpers

std::array<double, 3> TokenAccuracy(const Model<float>& model,
                                    std::span<const Sentence> sentences) {
  std::array<long, 3> hit{}, total{};
  for (const auto& s : sentences) {
    const auto p = model.Predict(s);
    for (int i = 0; i < s.size(); ++i) {
      hit[0] += p.ate_tags[i] == s.ate[i];
      hit[1] += p.ote_tags[i] == s.ote[i];
      total[0] += 1;
      total[1] += 1;
      if (s.asc[i] >= 0) {
        hit[2] += p.asc_tags[i] == s.asc[i];
        total[2] += 1;
      }
    }
  }
  std::array<double, 3> acc{};
  for (int k = 0; k < 3; ++k) {
    acc[k] = total[k] == 0 ? 1.0 : static_cast<double>(hit[k]) / static_cast<double>(total[k]);
  }
  return acc;
}

std::vector<PredictionRecord> PredictCorpus(const Model<float>& model,
                                            std::span<const Sentence> sentences) {
  std::vector<PredictionRecord> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) {
    auto p = model.Predict(s);
    out.push_back({s.tokens, std::move(p.ate_spans), std::move(p.ote_spans),
                   std::move(p.pairs)});
  }
  return out;
}

EvalReport EvaluateModel(const Model<float>& model, std::span<const Sentence> sentences) {
  std::vector<PredictionRecord> gold;
  for (const auto& s : sentences) gold.push_back(GoldRecord(s));
  const auto predicted = PredictCorpus(model, sentences);
  return Evaluate(predicted, gold);
}

// ---------------------------------------------------------------------------
// Trainer

void Schedule::Validate() const {
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (pretrain_epochs < 0) throw ConfigError("pretrain_epochs must be >= 0");
  if (alternation < 1) throw ConfigError("alternation ratio must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(clip_norm > 0.0)) throw ConfigError("clip_norm must be positive");
  if (patience < 0) throw ConfigError("patience must be >= 0");
  if (!(target_accuracy >= 0.0 && target_accuracy <= 1.0)) {
    throw ConfigError("target_accuracy must be in [0, 1]");
  }
}

namespace {

std::uint64_t EpochSeed(std::uint64_t seed, int phase, int epoch) {
  return seed * 1000003ull + static_cast<std::uint64_t>(phase) * 7919ull +
         static_cast<std::uint64_t>(epoch);
}

class Stepper {
 public:
  Stepper(Model<float>& model, const Schedule& schedule)
      : model_(model),
        params_(model.TrainableParameters()),
        adam_(params_, AdamOptions{schedule.learning_rate}),
        clip_(schedule.clip_norm),
        rng_(schedule.seed) {}

  double AspectStep(const Batch& batch, const std::string& where) {
    Tape<float> tape;
    const RunMode mode{true, &rng_};
    Tensor<float> sum;
    for (const auto& row : batch.rows) {
      const auto states = model_.Forward(tape, row.input, mode);
      const auto parts = AspectLoss(tape, states.back(), row, model_.config().weights);
      sum = sum.defined() ? Add(tape, sum, parts.total) : parts.total;
    }
    const Tensor<float> loss =
        Scale(tape, sum, 1.0f / static_cast<float>(batch.rows.size()));
    std::string detail = where + " (sentences";
    for (const auto& row : batch.rows) detail += " " + std::to_string(row.sentence_index);
    detail += ")";
    return Apply(tape, loss, detail);
  }

  double DocumentStep(const std::vector<Document>& docs,
                      const std::vector<std::size_t>& indices, const std::string& where) {
    Tape<float> tape;
    const RunMode mode{true, &rng_};
    Tensor<float> sum;
    for (std::size_t i : indices) {
      const auto out = model_.DocumentForward(tape, DocumentInput(docs[i]), mode);
      const auto l = DocumentLoss(tape, out, docs[i], model_.config().weights);
      sum = sum.defined() ? Add(tape, sum, l) : l;
    }
    const Tensor<float> loss = Scale(tape, sum, 1.0f / static_cast<float>(indices.size()));
    std::string detail = where + " (documents";
    for (std::size_t i : indices) detail += " " + std::to_string(i);
    detail += ")";
    return Apply(tape, loss, detail);
  }

  std::vector<double> trace;

 private:
  double Apply(Tape<float>& tape, const Tensor<float>& loss, const std::string& detail) {
    const double value = loss.item();
    if (!std::isfinite(value)) {
      throw NumericalError("non-finite loss " + std::to_string(value) + " at " + detail);
    }
    tape.Backward(loss);
    const double norm = ClipGradientNorm(params_, clip_);
    if (!std::isfinite(norm)) {
      throw NumericalError("non-finite gradient norm at " + detail);
    }
    adam_.Step();
    adam_.ZeroGrad();
    trace.push_back(value);
    return value;
  }

  Model<float>& model_;
  std::vector<Tensor<float>> params_;
  Adam<float> adam_;
  double clip_;
  Rng rng_;
};

std::vector<std::vector<float>> Snapshot(const Model<float>& model) {
  std::vector<std::vector<float>> out;
  for (const auto& [name, t] : model.params().entries()) {
    out.emplace_back(t.data().begin(), t.data().end());
  }
  return out;
}

void Restore(Model<float>& model, const std::vector<std::vector<float>>& snapshot) {
  const auto& entries = model.params().entries();
  for (std::size_t k = 0; k < entries.size(); ++k) {
    std::copy(snapshot[k].begin(), snapshot[k].end(), entries[k].second.mutable_data().begin());
  }
}

double Mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / v.size();
}

}  // namespace

TrainResult Train(Model<float>& model, const std::vector<Sentence>& train,
                  const std::vector<Sentence>& dev, const std::vector<Document>& documents,
                  const Schedule& schedule, std::ostream* log) {
  schedule.Validate();
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  Stepper stepper(model, schedule);
  TrainResult result;

  for (int e = 1; e <= schedule.pretrain_epochs && !documents.empty(); ++e) {
    std::vector<double> losses;
    const auto groups =
        MakeDocumentBatches(documents.size(), schedule.batch_size, EpochSeed(schedule.seed, 1, e));
    for (std::size_t b = 0; b < groups.size(); ++b) {
      losses.push_back(stepper.DocumentStep(
          documents, groups[b],
          "pretrain epoch " + std::to_string(e) + " document batch " + std::to_string(b)));
    }
    spdlog::info("pretrain epoch {}: J_d {:.5f}", e, Mean(losses));
    if (log) {
      *log << nlohmann::json{{"epoch", e}, {"phase", "pretrain"}, {"J_a", nullptr},
                             {"J_d", Mean(losses)}, {"dev", nullptr},
                             {"wall_time_s", elapsed()}}
                  .dump()
           << '\n';
    }
  }

  const std::vector<Sentence>& selection = dev.empty() ? train : dev;
  std::vector<std::vector<float>> best;
  int since_best = 0;
  std::vector<std::vector<std::size_t>> doc_groups;
  std::size_t doc_cursor = 0;
  int doc_round = 0;
  for (int e = 1; e <= schedule.epochs; ++e) {
    std::vector<double> ja, jd;
    const auto batches = MakeBatches(train, schedule.batch_size, EpochSeed(schedule.seed, 2, e));
    for (std::size_t b = 0; b < batches.size(); ++b) {
      ja.push_back(stepper.AspectStep(
          batches[b], "epoch " + std::to_string(e) + " aspect batch " + std::to_string(b)));
      if (!documents.empty() && (b + 1) % schedule.alternation == 0) {
        if (doc_cursor == doc_groups.size()) {
          doc_groups = MakeDocumentBatches(documents.size(), schedule.batch_size,
                                           EpochSeed(schedule.seed, 3, doc_round++));
          doc_cursor = 0;
        }
        jd.push_back(stepper.DocumentStep(
            documents, doc_groups[doc_cursor++],
            "epoch " + std::to_string(e) + " document batch " + std::to_string(b)));
      }
    }
    result.epochs_run = e;
    const EvalReport report = EvaluateModel(model, selection);
    if (report.f1_i() > result.best_f1_i) {
      result.best_f1_i = report.f1_i();
      result.best_epoch = e;
      best = Snapshot(model);
      since_best = 0;
    } else {
      ++since_best;
    }
    nlohmann::json line = {{"epoch", e}, {"phase", "joint"}, {"J_a", Mean(ja)},
                           {"J_d", jd.empty() ? nlohmann::json(nullptr) : nlohmann::json(Mean(jd))},
                           {"dev", report.ToJson()}};
    bool reached = false;
    if (schedule.target_accuracy > 0.0) {
      const auto acc = TokenAccuracy(model, train);
      line["train_accuracy"] = {{"ate", acc[0]}, {"ote", acc[1]}, {"asc", acc[2]}};
      reached = std::all_of(acc.begin(), acc.end(),
                            [&](double a) { return a >= schedule.target_accuracy; });
      if (reached) result.target_epoch = e;
    }
    line["wall_time_s"] = elapsed();
    spdlog::info("epoch {}: J_a {:.5f} F1-I {:.4f}", e, Mean(ja), report.f1_i());
    if (log) *log << line.dump() << '\n';
    if (reached) break;
    if (schedule.patience > 0 && since_best >= schedule.patience) {
      spdlog::info("no F1-I improvement for {} epochs, stopping", since_best);
      break;
    }
  }
  if (!result.target_epoch && !best.empty()) Restore(model, best);
  result.loss_trace = stepper.trace;
  result.train_accuracy = TokenAccuracy(model, train);
  return result;
}

// ---------------------------------------------------------------------------
// Gradient checking

bool GradcheckReport::AllPass() const {
  return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.pass; });
}

std::vector<std::string> GradcheckReport::Failing() const {
  std::vector<std::string> out;
  for (const auto& e : entries) {
    if (!e.pass) out.push_back(e.name);
  }
  return out;
}

nlohmann::json GradcheckReport::ToJson() const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& e : entries) {
    list.push_back({{"name", e.name}, {"size", e.size}, {"checked", e.checked},
                    {"frozen", e.frozen}, {"max_abs_error", e.max_abs_error},
                    {"relative_error", e.relative_error},
                    {"kink_crossings", e.kink_crossings}, {"pass", e.pass}});
  }
  return {{"tolerance", tolerance}, {"seconds", seconds}, {"all_pass", AllPass()},
          {"failing", Failing()}, {"parameters", list}};
}

GradcheckReport CheckGradients(const NamedTensors& params,
                               const std::function<Tensor<double>(Tape<double>&)>& loss,
                               const GradcheckOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  for (const auto& [name, t] : params) {
    if (t.requires_grad()) t.zero_grad();
  }
  {
    Tape<double> tape;
    tape.Backward(loss(tape));
  }
  std::vector<std::uint8_t> base_signs, signs;
  auto evaluate = [&](std::vector<std::uint8_t>& sink) {
    sink.clear();
    testing_hooks::SetReluSignSink(&sink);
    Tape<double> tape;
    const double value = loss(tape).item();
    testing_hooks::SetReluSignSink(nullptr);
    return value;
  };
  evaluate(base_signs);

  GradcheckReport report;
  report.tolerance = options.tolerance;
  for (const auto& [name, t] : params) {
    GradcheckEntry entry;
    entry.name = name;
    entry.size = t.size();
    if (!t.requires_grad()) {
      entry.frozen = true;
      report.entries.push_back(entry);
      continue;
    }
    std::vector<std::size_t> indices(t.size());
    std::iota(indices.begin(), indices.end(), 0);
    if (options.max_entries > 0 && indices.size() > options.max_entries) {
      Rng rng(NameSeed(options.seed, name));
      std::shuffle(indices.begin(), indices.end(), rng);
      indices.resize(options.max_entries);
      std::sort(indices.begin(), indices.end());
    }
    const std::vector<double> analytic(t.grad().begin(), t.grad().end());
    auto data = t.mutable_data();
    for (std::size_t idx : indices) {
      const double original = data[idx];
      data[idx] = original + options.step;
      const double up = evaluate(signs);
      bool crossed = signs != base_signs;
      data[idx] = original - options.step;
      const double down = evaluate(signs);
      crossed = crossed || signs != base_signs;
      data[idx] = original;
      if (crossed) ++entry.kink_crossings;
      const double numeric = (up - down) / (2.0 * options.step);
      entry.max_abs_error = std::max(entry.max_abs_error, std::abs(numeric - analytic[idx]));
      entry.max_analytic = std::max(entry.max_analytic, std::abs(analytic[idx]));
      entry.max_numeric = std::max(entry.max_numeric, std::abs(numeric));
    }
    entry.checked = indices.size();
    entry.relative_error =
        entry.max_abs_error /
        std::max({entry.max_analytic, entry.max_numeric, options.floor});
    entry.pass = entry.relative_error < options.tolerance;
    report.entries.push_back(entry);
  }
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

GradcheckReport GradcheckModel(const Model<double>& model, const Sentence& sentence,
                               const Document* document, const GradcheckOptions& options) {
  const auto batches = MakeBatches(std::span<const Sentence>(&sentence, 1), 1, std::nullopt);
  const LabeledRow row = batches.front().rows.front();
  const SequenceInput doc_input = document ? DocumentInput(*document) : SequenceInput{};
  auto loss = [&](Tape<double>& tape) {
    const auto states = model.Forward(tape, row.input, RunMode{});
    Tensor<double> j = AspectLoss(tape, states.back(), row, model.config().weights).total;
    if (document) {
      j = Add(tape, j,
              DocumentLoss(tape, model.DocumentForward(tape, doc_input, RunMode{}), *document,
                           model.config().weights));
    }
    return j;
  };
  NamedTensors params(model.params().entries().begin(), model.params().entries().end());
  return CheckGradients(params, loss, options);
}

}  // namespace iktn
