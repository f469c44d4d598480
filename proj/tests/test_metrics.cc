#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sstream>

#include "iktn/metrics.h"
#include "iktn/tensor.h"
#include "metrics_oracle.h"

using namespace iktn;
using namespace iktn::test;

namespace {

PredictionRecord Record(std::vector<Span> ate, std::vector<std::pair<Span, int>> pairs,
                        std::vector<Span> ote = {}) {
  PredictionRecord r;
  r.tokens.assign(6, "t");
  r.ate_spans = std::move(ate);
  r.ote_spans = std::move(ote);
  r.pairs = std::move(pairs);
  return r;
}

}  // namespace

TEST_CASE("prf from counts") {
  const auto p = Prf::FromCounts(1, 1, 1);
  CHECK(p.precision == 0.5);
  CHECK(p.recall == 0.5);
  CHECK(p.f1 == 0.5);
  const auto z = Prf::FromCounts(0, 0, 0);
  CHECK(z.precision == 0.0);
  CHECK(z.recall == 0.0);
  CHECK(z.f1 == 0.0);
  CHECK(Prf::FromCounts(0, 3, 2).f1 == 0.0);
  CHECK(Prf::FromCounts(3, 1, 0).f1 == doctest::Approx(2 * 0.75 / 1.75));
}

TEST_CASE("span matching is exact") {
  const std::vector<std::vector<Span>> gold = {{{0, 1}, {2, 4}}};
  const std::vector<std::vector<Span>> pred = {{{0, 1}, {2, 3}}};
  const auto p = SpanF1(pred, gold);
  CHECK(p.tp == 1);
  CHECK(p.fp == 1);
  CHECK(p.fn == 1);
  CHECK(p.f1 == 0.5);
  // Duplicates count once.
  const std::vector<std::vector<Span>> dup = {{{0, 1}, {0, 1}}};
  CHECK(SpanF1(dup, gold).fp == 0);
  CHECK(SpanF1(dup, gold).precision == 1.0);
  const std::vector<std::vector<Span>> empty = {{}};
  CHECK(SpanF1(empty, gold).f1 == 0.0);
  CHECK(SpanF1(empty, empty).f1 == 0.0);
  const std::vector<std::vector<Span>> two = {{}, {}};
  CHECK_THROWS_AS(SpanF1(two, gold), ContractError);
}

TEST_CASE("sentiment scores over matched spans") {
  // Gold: pos, neg, neu on three spans; predictions hit two spans, one wrong,
  // plus a spurious span that never counts toward sentiment.
  const std::vector<std::vector<std::pair<Span, int>>> gold = {
      {{{0, 1}, 0}, {{1, 2}, 1}, {{3, 5}, 2}}};
  const std::vector<std::vector<std::pair<Span, int>>> pred = {
      {{{0, 1}, 0}, {{1, 2}, 0}, {{5, 6}, 1}}};
  const auto a = ComputeAscScores(pred, gold);
  CHECK(a.matched == 2);
  CHECK(a.acc == 0.5);
  CHECK_FALSE(a.no_matched_spans);
  // pos: tp 1 fp 1 fn 0 -> 2/3; neg: tp 0 fn 1 -> 0; neu: absent -> 0.
  CHECK(a.per_class[0].f1 == doctest::Approx(2.0 / 3.0));
  CHECK(a.per_class[1].f1 == 0.0);
  CHECK(a.per_class[2].f1 == 0.0);
  CHECK(a.macro_f1 == doctest::Approx(2.0 / 9.0));
  CHECK(a.confusion[1][0] == 1);

  const auto pf = PairF1(pred, gold);
  CHECK(pf.tp == 1);
  CHECK(pf.fp == 2);
  CHECK(pf.fn == 2);

  const std::vector<std::vector<std::pair<Span, int>>> none = {{{{5, 6}, 0}}};
  const auto z = ComputeAscScores(none, gold);
  CHECK(z.no_matched_spans);
  CHECK(z.acc == 0.0);
  CHECK(z.macro_f1 == 0.0);
}

TEST_CASE("metrics agree with the brute-force oracle") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto [pred, gold] = DrawMetricSet(rng, 1 + trial % 20);
    const auto r = Evaluate(pred, gold);
    const auto o = OracleScore(pred, gold);
    CHECK(r.f1_a() == doctest::Approx(o.f1_a).epsilon(1e-12));
    CHECK(r.f1_o() == doctest::Approx(o.f1_o).epsilon(1e-12));
    CHECK(r.f1_s() == doctest::Approx(o.f1_s).epsilon(1e-12));
    CHECK(r.acc_s() == doctest::Approx(o.acc_s).epsilon(1e-12));
    CHECK(r.f1_i() == doctest::Approx(o.f1_i).epsilon(1e-12));
    CHECK(r.f1_i() <= r.f1_a() + 1e-12);
  }
}

TEST_CASE("perfect predictions score one") {
  std::mt19937_64 rng(8);
  auto [pred, gold] = DrawMetricSet(rng, 30);
  const auto r = Evaluate(gold, gold);
  CHECK(r.f1_a() == 1.0);
  CHECK(r.f1_i() == 1.0);
  CHECK(r.acc_s() == 1.0);
}

TEST_CASE("gold records come from tags") {
  Sentence s;
  s.tokens = {"the", "hard", "drive", "is", "fast"};
  s.ate = {kOutside, kBegin, kInside, kOutside, kOutside};
  s.ote = {kOutside, kOutside, kOutside, kOutside, kBegin};
  s.asc = {-1, 0, 0, -1, -1};
  const auto g = GoldRecord(s);
  REQUIRE(g.ate_spans.size() == 1);
  CHECK(g.ate_spans[0] == Span{1, 3});
  CHECK(g.ote_spans[0] == Span{4, 5});
  CHECK(g.pairs[0] == std::pair<Span, int>{{1, 3}, 0});
}

TEST_CASE("display rounding shared by table and json") {
  EvalReport r;
  r.ate = Prf::FromCounts(1, 2, 0);  // f1 = 0.5
  r.ote = Prf::FromCounts(2, 1, 0);  // f1 = 0.8
  r.pairs = Prf::FromCounts(1, 1, 1);
  r.asc.acc = 1.0 / 3.0;
  r.asc.macro_f1 = 0.1234565;
  const auto j = r.ToJson();
  CHECK(j["acc-s"].get<double>() == 0.333333);
  CHECK(j["F1-a"].get<double>() == 0.5);
  const auto table = r.Table();
  CHECK(table.find("0.333333") != std::string::npos);
  CHECK(table.find("0.800000") != std::string::npos);
  std::istringstream in(table);
  std::string header, a, o, s, acc, i;
  std::getline(in, header);
  in >> a >> o >> s >> acc >> i;
  CHECK(std::stod(a) == j["F1-a"].get<double>());
  CHECK(std::stod(o) == j["F1-o"].get<double>());
  CHECK(std::stod(s) == j["F1-s"].get<double>());
  CHECK(std::stod(acc) == j["acc-s"].get<double>());
  CHECK(std::stod(i) == j["F1-I"].get<double>());
}

TEST_CASE("prediction files round trip") {
  std::mt19937_64 rng(3);
  auto [pred, gold] = DrawMetricSet(rng, 25);
  const TagSchemes schemes;
  std::stringstream buf;
  WritePredictions(buf, pred, schemes.asc);
  const auto back = ReadPredictions(buf, schemes.asc);
  REQUIRE(back.size() == pred.size());
  for (std::size_t s = 0; s < pred.size(); ++s) {
    CHECK(back[s].tokens == pred[s].tokens);
    CHECK(back[s].ate_spans == pred[s].ate_spans);
    CHECK(back[s].ote_spans == pred[s].ote_spans);
    CHECK(back[s].pairs == pred[s].pairs);
  }
  const auto r1 = Evaluate(pred, gold), r2 = Evaluate(back, gold);
  CHECK(r1.ToJson() == r2.ToJson());

  std::istringstream bad_label(
      R"({"tokens":["a"],"ate_spans":[[0,1]],"ote_spans":[],"pairs":[{"span":[0,1],"sentiment":"meh"}]})");
  CHECK_THROWS_AS(ReadPredictions(bad_label, schemes.asc), SchemaError);
  std::istringstream bad_span("\n{\"tokens\":[],\"ate_spans\":[[2,1]],\"ote_spans\":[],\"pairs\":[]}");
  try {
    ReadPredictions(bad_span, schemes.asc);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}
