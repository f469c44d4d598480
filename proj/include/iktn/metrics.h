#ifndef IKTN_METRICS_H_
#define IKTN_METRICS_H_

#include <array>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "iktn/data.h"
#include "json.hpp"

namespace iktn {

// Precision, recall and F1 from counts; every 0/0 is taken as 0.
struct Prf {
  long tp = 0;
  long fp = 0;
  long fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  static Prf FromCounts(long tp, long fp, long fn);
};

// One sentence worth of spans and (span, sentiment) pairs, predicted or gold.
struct PredictionRecord {
  std::vector<std::string> tokens;
  std::vector<Span> ate_spans;
  std::vector<Span> ote_spans;
  std::vector<std::pair<Span, int>> pairs;
};

PredictionRecord GoldRecord(const Sentence& sentence);

// Exact-match span counting, micro-averaged over sentences. Duplicate spans
// within a sentence count once.
Prf SpanF1(std::span<const std::vector<Span>> predicted,
           std::span<const std::vector<Span>> gold);

struct AscScores {
  double acc = 0.0;
  double macro_f1 = 0.0;  // always averaged over all classes
  long matched = 0;       // predicted spans that exactly match a gold span
  bool no_matched_spans = true;
  std::vector<Prf> per_class;
  std::vector<std::vector<long>> confusion;  // [gold][pred]
};

// Sentiment scores over predicted spans that exactly match a gold span.
AscScores ComputeAscScores(
    std::span<const std::vector<std::pair<Span, int>>> predicted,
    std::span<const std::vector<std::pair<Span, int>>> gold, int num_classes = 3);

// Exact (span, sentiment) tuple matching, micro-averaged.
Prf PairF1(std::span<const std::vector<std::pair<Span, int>>> predicted,
           std::span<const std::vector<std::pair<Span, int>>> gold);

struct EvalReport {
  Prf ate;
  Prf ote;
  AscScores asc;
  Prf pairs;
  std::size_t sentences = 0;

  double f1_a() const { return ate.f1; }
  double f1_o() const { return ote.f1; }
  double acc_s() const { return asc.acc; }
  double f1_s() const { return asc.macro_f1; }
  double f1_i() const { return pairs.f1; }

  // Metric values rounded to kDisplayDigits decimals, shared by Table() and
  // ToJson() so both show the same numbers.
  static constexpr int kDisplayDigits = 6;
  std::array<double, 5> Displayed() const;  // F1-a, F1-o, F1-s, acc-s, F1-I
  std::string Table() const;
  nlohmann::json ToJson() const;
};

EvalReport Evaluate(std::span<const PredictionRecord> predicted,
                    std::span<const PredictionRecord> gold);

// JSONL, one line per sentence:
// {tokens, ate_spans: [[s,e],...], ote_spans, pairs: [{span: [s,e], sentiment}]}
void WritePredictions(std::ostream& out, std::span<const PredictionRecord> records,
                      const LabelSet& sentiments);
std::vector<PredictionRecord> ReadPredictions(std::istream& in,
                                              const LabelSet& sentiments);

}  // namespace iktn

#endif  // IKTN_METRICS_H_
