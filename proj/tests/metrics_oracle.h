#ifndef IKTN_TESTS_METRICS_ORACLE_H_
#define IKTN_TESTS_METRICS_ORACLE_H_

// Brute-force scoring over string keys, plus a random prediction/gold
// generator. Nothing here calls into the metrics library.

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "iktn/metrics.h"

namespace iktn::test {

struct OracleScores {
  double f1_a = 0, f1_o = 0, f1_s = 0, acc_s = 0, f1_i = 0;
};

inline std::string Key(Span s) { return std::to_string(s.start) + ":" + std::to_string(s.end); }

inline double OracleF1(long tp, long np, long ng) {
  const double p = np ? double(tp) / np : 0.0;
  const double r = ng ? double(tp) / ng : 0.0;
  return p + r > 0 ? 2 * p * r / (p + r) : 0.0;
}

inline long CountUnique(std::vector<std::string> keys) {
  std::sort(keys.begin(), keys.end());
  return std::unique(keys.begin(), keys.end()) - keys.begin();
}

inline OracleScores OracleScore(const std::vector<PredictionRecord>& pred,
                                const std::vector<PredictionRecord>& gold) {
  OracleScores out;
  auto span_f1 = [&](auto member) {
    long tp = 0, np = 0, ng = 0;
    for (std::size_t s = 0; s < gold.size(); ++s) {
      std::vector<std::string> pk, gk;
      for (Span x : pred[s].*member) pk.push_back(Key(x));
      for (Span x : gold[s].*member) gk.push_back(Key(x));
      np += CountUnique(pk);
      ng += CountUnique(gk);
      std::sort(pk.begin(), pk.end());
      pk.erase(std::unique(pk.begin(), pk.end()), pk.end());
      for (const auto& k : pk) tp += std::count(gk.begin(), gk.end(), k) > 0;
    }
    return OracleF1(tp, np, ng);
  };
  out.f1_a = span_f1(&PredictionRecord::ate_spans);
  out.f1_o = span_f1(&PredictionRecord::ote_spans);

  long tp = 0, np = 0, ng = 0;
  long matched = 0, correct = 0;
  long conf[3][3] = {};
  for (std::size_t s = 0; s < gold.size(); ++s) {
    std::vector<std::string> pk, gk;
    for (const auto& [x, l] : pred[s].pairs) pk.push_back(Key(x) + "/" + std::to_string(l));
    for (const auto& [x, l] : gold[s].pairs) gk.push_back(Key(x) + "/" + std::to_string(l));
    np += CountUnique(pk);
    ng += CountUnique(gk);
    std::sort(pk.begin(), pk.end());
    pk.erase(std::unique(pk.begin(), pk.end()), pk.end());
    for (const auto& k : pk) tp += std::count(gk.begin(), gk.end(), k) > 0;

    std::vector<std::string> used;
    for (const auto& [x, l] : pred[s].pairs) {
      if (std::count(used.begin(), used.end(), Key(x))) continue;
      used.push_back(Key(x));
      for (const auto& [gx, gl] : gold[s].pairs) {
        if (gx.start == x.start && gx.end == x.end) {
          ++matched;
          correct += gl == l;
          ++conf[gl][l];
          break;
        }
      }
    }
  }
  out.f1_i = OracleF1(tp, np, ng);
  out.acc_s = matched ? double(correct) / matched : 0.0;
  double macro = 0;
  for (int c = 0; c < 3; ++c) {
    long col = 0, row = 0;
    for (int o = 0; o < 3; ++o) {
      col += conf[o][c];
      row += conf[c][o];
    }
    macro += OracleF1(conf[c][c], col, row);
  }
  out.f1_s = macro / 3;
  return out;
}

// Disjoint spans inside a sentence of length n.
inline std::vector<Span> DrawSpans(std::mt19937_64& rng, int n) {
  std::vector<Span> spans;
  std::bernoulli_distribution open(0.3);
  std::uniform_int_distribution<int> width(1, 3);
  for (int i = 0; i < n;) {
    if (open(rng)) {
      const int e = std::min(n, i + width(rng));
      spans.push_back({i, e});
      i = e;
    } else {
      ++i;
    }
  }
  return spans;
}

// Gold records plus predictions that copy, perturb or drop gold spans and
// add spurious ones, so that partial overlap and label swaps both occur.
inline std::pair<std::vector<PredictionRecord>, std::vector<PredictionRecord>>
DrawMetricSet(std::mt19937_64& rng, int sentences) {
  std::uniform_int_distribution<int> len(1, 15), label(0, 2), choice(0, 3);
  std::vector<PredictionRecord> pred, gold;
  for (int s = 0; s < sentences; ++s) {
    const int n = len(rng);
    PredictionRecord g, p;
    g.tokens.assign(n, "w");
    p.tokens = g.tokens;
    g.ate_spans = DrawSpans(rng, n);
    g.ote_spans = DrawSpans(rng, n);
    for (Span x : g.ate_spans) g.pairs.emplace_back(x, label(rng));
    auto perturb = [&](Span x) -> std::optional<Span> {
      switch (choice(rng)) {
        case 0: return std::nullopt;
        case 1: return x.end < n ? Span{x.start, x.end + 1} : Span{x.start, x.end};
        default: return x;
      }
    };
    for (const auto& [x, l] : g.pairs) {
      if (auto y = perturb(x)) {
        p.ate_spans.push_back(*y);
        p.pairs.emplace_back(*y, choice(rng) == 0 ? label(rng) : l);
      }
    }
    for (Span x : g.ote_spans) {
      if (auto y = perturb(x)) p.ote_spans.push_back(*y);
    }
    for (Span x : DrawSpans(rng, n)) {
      if (choice(rng) != 0) continue;
      if (std::find(p.ate_spans.begin(), p.ate_spans.end(), x) != p.ate_spans.end()) continue;
      p.ate_spans.push_back(x);
      p.pairs.emplace_back(x, label(rng));
    }
    gold.push_back(std::move(g));
    pred.push_back(std::move(p));
  }
  return {pred, gold};
}

}  // namespace iktn::test

#endif  // IKTN_TESTS_METRICS_ORACLE_H_
