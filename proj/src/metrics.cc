#include "iktn/metrics.h"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "iktn/tensor.h"

namespace iktn {

namespace {

double Ratio(long num, long den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

template <typename Item>
void CheckSizes(std::span<const std::vector<Item>> predicted,
                std::span<const std::vector<Item>> gold) {
  if (predicted.size() != gold.size()) {
    throw ContractError("prediction and gold corpora differ in size (" +
                        std::to_string(predicted.size()) + " vs " +
                        std::to_string(gold.size()) + ")");
  }
}

template <typename Item>
Prf SetF1(std::span<const std::vector<Item>> predicted,
          std::span<const std::vector<Item>> gold) {
  CheckSizes(predicted, gold);
  long tp = 0, fp = 0, fn = 0;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    const std::set<Item> p(predicted[s].begin(), predicted[s].end());
    const std::set<Item> g(gold[s].begin(), gold[s].end());
    long hit = 0;
    for (const auto& item : p) hit += g.count(item);
    tp += hit;
    fp += static_cast<long>(p.size()) - hit;
    fn += static_cast<long>(g.size()) - hit;
  }
  return Prf::FromCounts(tp, fp, fn);
}

double Round(double v, int digits) {
  const double scale = std::pow(10.0, digits);
  return std::round(v * scale) / scale;
}

nlohmann::json PrfJson(const Prf& p) {
  return {{"tp", p.tp}, {"fp", p.fp}, {"fn", p.fn},
          {"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}};
}

}  // namespace

Prf Prf::FromCounts(long tp, long fp, long fn) {
  Prf p;
  p.tp = tp;
  p.fp = fp;
  p.fn = fn;
  p.precision = Ratio(tp, tp + fp);
  p.recall = Ratio(tp, tp + fn);
  const double sum = p.precision + p.recall;
  p.f1 = sum == 0.0 ? 0.0 : 2.0 * p.precision * p.recall / sum;
  return p;
}

PredictionRecord GoldRecord(const Sentence& sentence) {
  PredictionRecord r;
  r.tokens = sentence.tokens;
  r.ate_spans = ExtractSpans(sentence.ate);
  r.ote_spans = ExtractSpans(sentence.ote);
  r.pairs = GoldPairs(sentence);
  return r;
}

Prf SpanF1(std::span<const std::vector<Span>> predicted,
           std::span<const std::vector<Span>> gold) {
  return SetF1(predicted, gold);
}

Prf PairF1(std::span<const std::vector<std::pair<Span, int>>> predicted,
           std::span<const std::vector<std::pair<Span, int>>> gold) {
  return SetF1(predicted, gold);
}

AscScores ComputeAscScores(
    std::span<const std::vector<std::pair<Span, int>>> predicted,
    std::span<const std::vector<std::pair<Span, int>>> gold, int num_classes) {
  CheckSizes(predicted, gold);
  AscScores out;
  out.confusion.assign(num_classes, std::vector<long>(num_classes, 0));
  long correct = 0;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    std::set<Span> seen;
    for (const auto& [span, label] : predicted[s]) {
      if (!seen.insert(span).second) continue;
      auto it = std::find_if(gold[s].begin(), gold[s].end(),
                             [&](const auto& g) { return g.first == span; });
      if (it == gold[s].end()) continue;
      if (label < 0 || label >= num_classes || it->second < 0 ||
          it->second >= num_classes) {
        throw ContractError("sentiment label out of range");
      }
      ++out.matched;
      ++out.confusion[it->second][label];
      if (label == it->second) ++correct;
    }
  }
  out.no_matched_spans = out.matched == 0;
  out.acc = Ratio(correct, out.matched);
  double total = 0.0;
  for (int c = 0; c < num_classes; ++c) {
    long tp = out.confusion[c][c], fp = 0, fn = 0;
    for (int o = 0; o < num_classes; ++o) {
      if (o == c) continue;
      fp += out.confusion[o][c];
      fn += out.confusion[c][o];
    }
    out.per_class.push_back(Prf::FromCounts(tp, fp, fn));
    total += out.per_class.back().f1;
  }
  out.macro_f1 = num_classes == 0 ? 0.0 : total / num_classes;
  return out;
}

EvalReport Evaluate(std::span<const PredictionRecord> predicted,
                    std::span<const PredictionRecord> gold) {
  if (predicted.size() != gold.size()) {
    throw ContractError("prediction and gold corpora differ in size");
  }
  std::vector<std::vector<Span>> pa, ga, po, go;
  std::vector<std::vector<std::pair<Span, int>>> pp, gp;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    pa.push_back(predicted[s].ate_spans);
    ga.push_back(gold[s].ate_spans);
    po.push_back(predicted[s].ote_spans);
    go.push_back(gold[s].ote_spans);
    pp.push_back(predicted[s].pairs);
    gp.push_back(gold[s].pairs);
  }
  EvalReport r;
  r.sentences = gold.size();
  r.ate = SpanF1(pa, ga);
  r.ote = SpanF1(po, go);
  r.asc = ComputeAscScores(pp, gp);
  r.pairs = PairF1(pp, gp);
  return r;
}

std::array<double, 5> EvalReport::Displayed() const {
  return {Round(f1_a(), kDisplayDigits), Round(f1_o(), kDisplayDigits),
          Round(f1_s(), kDisplayDigits), Round(acc_s(), kDisplayDigits),
          Round(f1_i(), kDisplayDigits)};
}

std::string EvalReport::Table() const {
  const auto v = Displayed();
  std::ostringstream out;
  char line[128];
  std::snprintf(line, sizeof line, "%-10s %-10s %-10s %-10s %-10s\n", "F1-a", "F1-o",
                "F1-s", "acc-s", "F1-I");
  out << line;
  std::snprintf(line, sizeof line, "%-10.*f %-10.*f %-10.*f %-10.*f %-10.*f\n",
                kDisplayDigits, v[0], kDisplayDigits, v[1], kDisplayDigits, v[2],
                kDisplayDigits, v[3], kDisplayDigits, v[4]);
  out << line;
  return out.str();
}

nlohmann::json EvalReport::ToJson() const {
  const auto v = Displayed();
  nlohmann::json per_class = nlohmann::json::array();
  for (const auto& p : asc.per_class) per_class.push_back(PrfJson(p));
  return {
      {"F1-a", v[0]},
      {"F1-o", v[1]},
      {"F1-s", v[2]},
      {"acc-s", v[3]},
      {"F1-I", v[4]},
      {"sentences", sentences},
      {"no_matched_spans", asc.no_matched_spans},
      {"counts",
       {{"ate", PrfJson(ate)},
        {"ote", PrfJson(ote)},
        {"pairs", PrfJson(pairs)},
        {"asc", {{"matched", asc.matched}, {"per_class", per_class},
                 {"confusion", asc.confusion}}}}},
  };
}

// ---------------------------------------------------------------------------
// Prediction files

namespace {

nlohmann::json SpanJson(Span s) { return nlohmann::json::array({s.start, s.end}); }

Span SpanFrom(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2) throw DataError("span must be [start, end]");
  Span s{j[0].get<int>(), j[1].get<int>()};
  if (s.start < 0 || s.start >= s.end) throw DataError("span must satisfy 0 <= start < end");
  return s;
}

}  // namespace

void WritePredictions(std::ostream& out, std::span<const PredictionRecord> records,
                      const LabelSet& sentiments) {
  for (const auto& r : records) {
    nlohmann::json ate = nlohmann::json::array(), ote = nlohmann::json::array(),
                   pairs = nlohmann::json::array();
    for (Span s : r.ate_spans) ate.push_back(SpanJson(s));
    for (Span s : r.ote_spans) ote.push_back(SpanJson(s));
    for (const auto& [s, label] : r.pairs) {
      pairs.push_back({{"span", SpanJson(s)}, {"sentiment", sentiments.Name(label)}});
    }
    out << nlohmann::json{{"tokens", r.tokens}, {"ate_spans", ate}, {"ote_spans", ote},
                          {"pairs", pairs}}
               .dump()
        << '\n';
  }
}

std::vector<PredictionRecord> ReadPredictions(std::istream& in,
                                              const LabelSet& sentiments) {
  std::vector<PredictionRecord> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      PredictionRecord r;
      r.tokens = j.at("tokens").get<std::vector<std::string>>();
      for (const auto& s : j.at("ate_spans")) r.ate_spans.push_back(SpanFrom(s));
      for (const auto& s : j.at("ote_spans")) r.ote_spans.push_back(SpanFrom(s));
      for (const auto& p : j.at("pairs")) {
        r.pairs.emplace_back(SpanFrom(p.at("span")),
                             sentiments.IndexOf(p.at("sentiment").get<std::string>(),
                                                "prediction sentiment"));
      }
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("prediction file line " + std::to_string(number) + ": " + e.what());
    } catch (const SchemaError& e) {
      throw SchemaError("prediction file line " + std::to_string(number) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("prediction file line " + std::to_string(number) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace iktn
