#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "bio_fuzz.h"
#include "iktn/data.h"

using namespace iktn;

namespace {

const TagSchemes kSchemes;

std::vector<Sentence> Parse(const std::string& text) {
  std::istringstream in(text);
  return ParseAspectCorpus(in, kSchemes);
}

// Spans from run ids of the lenient oracle.
std::vector<Span> OracleSpans(const std::vector<int>& tags) {
  const auto runs = test::OracleRunIds(tags);
  std::vector<Span> out;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (runs[i] < 0) continue;
    if (out.empty() || i == 0 || runs[i - 1] != runs[i]) {
      out.push_back({static_cast<int>(i), static_cast<int>(i) + 1});
    } else {
      out.back().end = static_cast<int>(i) + 1;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("span extraction") {
  CHECK(ExtractSpans(std::vector<int>{kBegin, kInside, kOutside}) == std::vector<Span>{{0, 2}});
  CHECK(ExtractSpans(std::vector<int>{kOutside, kOutside, kOutside}).empty());
  CHECK(ExtractSpans(std::vector<int>{kInside, kOutside, kBegin, kInside, kInside}) ==
        std::vector<Span>{{0, 1}, {2, 5}});
  CHECK(ExtractSpans(std::vector<int>{kBegin, kBegin, kInside}) ==
        std::vector<Span>{{0, 1}, {1, 3}});

  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> len(0, 15), tag(0, 2);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<int> tags(len(rng));
    for (auto& t : tags) t = tag(rng);
    CHECK(ExtractSpans(tags) == OracleSpans(tags));
    CHECK(IsValidBio(tags) == test::OracleValid(tags));
  }
}

TEST_CASE("tags from spans round-trips") {
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<int> len(1, 20);
  std::bernoulli_distribution open(0.3), extend(0.5);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = len(rng);
    std::vector<Span> spans;
    for (int i = 0; i < n; ++i) {
      if (!open(rng)) continue;
      int end = i + 1;
      while (end < n && extend(rng)) ++end;
      spans.push_back({i, end});
      i = end;  // leave a gap so runs stay separate
    }
    const auto tags = TagsFromSpans(spans, n);
    CHECK(IsValidBio(tags));
    CHECK(ExtractSpans(tags) == spans);
  }
}

TEST_CASE("loader accepts and rejects fuzzed BIO sequences like the oracle") {
  std::mt19937_64 rng(17);
  int valid = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto s = test::DrawFuzzSentence(rng);
    bool accepted = true;
    try {
      const auto loaded = Parse(s.text);
      REQUIRE(loaded.size() == 1);
      CHECK(loaded[0].ate == s.ate);
      CHECK(loaded[0].ote == s.ote);
    } catch (const DataError&) {
      accepted = false;
    }
    CHECK(accepted == s.valid);
    valid += s.valid;
  }
  CHECK(valid > 250);  // both outcomes well represented
  CHECK(valid < 750);
}

TEST_CASE("aspect corpus format") {
  CHECK(Parse("").empty());
  const auto plain = Parse("a\tO\tO\t_\nb\tO\tO\t_\nc\tO\tO\t_\n");
  REQUIRE(plain.size() == 1);
  CHECK(ExtractSpans(plain[0].ate).empty());
  CHECK(plain[0].adjacency == std::vector<std::uint8_t>{1, 0, 0, 0, 1, 0, 0, 0, 1});

  const auto two = Parse(
      "the\tO\tO\t_\nwine\tBA\tO\tneg\nlist\tIA\tO\tneg\nwas\tO\tO\t_\nbad\tO\tBP\t_\n\n"
      "ok\tO\tBP\t_\n");
  REQUIRE(two.size() == 2);
  CHECK(GoldPairs(two[0]) == std::vector<std::pair<Span, int>>{{{1, 3}, 1}});
  CHECK(two[1].tokens == std::vector<std::string>{"ok"});

  CHECK_THROWS_AS(Parse("a\tBA\tO\tfoo\n"), SchemaError);
  CHECK_THROWS_AS(Parse("a\tXX\tO\t_\n"), SchemaError);
  CHECK_THROWS_AS(Parse("a\tBA\tO\t_\n"), DataError);   // aspect token without sentiment
  CHECK_THROWS_AS(Parse("a\tO\tO\tpos\n"), DataError);  // sentiment outside a span
  CHECK_THROWS_AS(Parse("a\tBA\tO\tpos\nb\tIA\tO\tneg\n"), DataError);  // mixed span
  try {
    Parse("a\tO\tO\t_\n\nb\tO\tIP\t_\n");
    FAIL("expected a BIO error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("sentence 1") != std::string::npos);
  }
  try {
    Parse("a\tO\tO\n");
    FAIL("expected a format error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 1") != std::string::npos);
  }
}

TEST_CASE("written corpora load back identically") {
  auto sentences = Parse(
      "the\tO\tO\t_\nwine\tBA\tO\tneg\nlist\tIA\tO\tneg\nwas\tO\tO\t_\nbad\tO\tBP\t_\n\n"
      "good\tO\tBP\t_\nfood\tBA\tO\tpos\n");
  std::istringstream adj("0 1 3\n0 3 4\n1 0 1\n");
  ParseAdjacency(adj, sentences);
  std::ostringstream tsv, edges;
  WriteAspectCorpus(tsv, sentences, kSchemes);
  WriteAdjacency(edges, sentences);
  auto again = Parse(tsv.str());
  std::istringstream edges_in(edges.str());
  ParseAdjacency(edges_in, again);
  REQUIRE(again.size() == sentences.size());
  for (std::size_t k = 0; k < again.size(); ++k) {
    CHECK(again[k].tokens == sentences[k].tokens);
    CHECK(again[k].ate == sentences[k].ate);
    CHECK(again[k].ote == sentences[k].ote);
    CHECK(again[k].asc == sentences[k].asc);
    CHECK(again[k].adjacency == sentences[k].adjacency);
  }
}

TEST_CASE("adjacency is symmetrized with self-loops") {
  auto sentences = Parse("a\tO\tO\t_\nb\tO\tO\t_\nc\tO\tO\t_\n");
  std::istringstream adj("0 0 2\n");
  ParseAdjacency(adj, sentences);
  const auto& s = sentences[0];
  for (int i = 0; i < 3; ++i) {
    CHECK(s.adjacent(i, i));
    for (int j = 0; j < 3; ++j) CHECK(s.adjacent(i, j) == s.adjacent(j, i));
  }
  CHECK(s.adjacent(2, 0));
  CHECK_FALSE(s.adjacent(0, 1));
  std::istringstream bad("0 0 3\n");
  CHECK_THROWS_AS(ParseAdjacency(bad, sentences), DataError);
  std::istringstream bad_index("4 0 0\n");
  CHECK_THROWS_AS(ParseAdjacency(bad_index, sentences), DataError);
}

TEST_CASE("document corpus") {
  std::istringstream ok(
      R"({"text":"good laptop","domain":"Laptop","sentiment":"pos"})"
      "\n"
      R"({"text":"slow service . cold food .","domain":"Restaurant"})"
      "\n");
  const auto docs = ParseDocumentCorpus(ok, kSchemes);
  REQUIRE(docs.size() == 2);
  CHECK(docs[0].domain == 0);
  CHECK(docs[0].sentiment == 0);
  CHECK(docs[0].Tokens() == std::vector<std::string>{"good", "laptop"});
  CHECK_FALSE(docs[1].sentiment.has_value());
  CHECK(docs[1].sentences.size() == 2);

  std::istringstream none(R"({"text":"no labels"})");
  CHECK_THROWS_AS(ParseDocumentCorpus(none, kSchemes), DataError);
  std::istringstream unknown(R"({"text":"x","domain":"Hotel"})");
  CHECK_THROWS_AS(ParseDocumentCorpus(unknown, kSchemes), SchemaError);
}

TEST_CASE("embedding files") {
  std::istringstream two("2 3\ncat 1 2 3\ndog 4 5 6\n");
  const auto table = ParseEmbeddings(two);
  CHECK(table.rows() == 4);
  CHECK(table.dim == 3);
  for (std::size_t c = 0; c < 3; ++c) CHECK(table.matrix[c] == 0.0f);
  const auto dog = static_cast<std::size_t>(table.vocab.Lookup("dog"));
  CHECK(table.matrix[dog * 3 + 1] == 5.0f);
  CHECK(table.vocab.Lookup("emu") == Vocabulary::kUnk);

  std::istringstream dup("cat 1 1\ncat 2 2\n");
  const auto first = ParseEmbeddings(dup);
  CHECK(first.rows() == 3);
  CHECK(first.matrix[2 * 2] == 1.0f);

  std::istringstream ragged("cat 1 2 3\ndog 4 5\n");
  try {
    ParseEmbeddings(ragged);
    FAIL("expected a ragged-row error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("random embeddings stay in bounds with a zero pad row") {
  std::vector<std::string> words;
  for (int k = 0; k < 300; ++k) words.push_back("w" + std::to_string(k));
  const auto table = RandomEmbeddings(words, 20, 4);
  CHECK(table.rows() == 302);
  double lo = 1, hi = -1, mean = 0;
  for (std::size_t c = 0; c < 20; ++c) CHECK(table.matrix[c] == 0.0f);
  for (std::size_t k = 20; k < table.matrix.size(); ++k) {
    lo = std::min(lo, double(table.matrix[k]));
    hi = std::max(hi, double(table.matrix[k]));
    mean += table.matrix[k];
  }
  mean /= double(table.matrix.size() - 20);
  CHECK(lo >= -0.25);
  CHECK(hi <= 0.25);
  CHECK(lo < -0.24);  // the full range is used
  CHECK(hi > 0.24);
  CHECK(std::abs(mean) < 0.01);
  CHECK(RandomEmbeddings(words, 20, 4).matrix == table.matrix);
}

TEST_CASE("batches") {
  std::vector<Sentence> sentences;
  for (int k = 0; k < 5; ++k) {
    Sentence s;
    for (int i = 0; i <= k; ++i) s.tokens.push_back("t");
    s.ate.assign(s.tokens.size(), kOutside);
    s.ote = s.ate;
    s.asc.assign(s.tokens.size(), -1);
    s.adjacency.assign(s.tokens.size() * s.tokens.size(), 0);
    for (std::size_t i = 0; i < s.tokens.size(); ++i) s.adjacency[i * s.tokens.size() + i] = 1;
    sentences.push_back(s);
  }
  const Vocabulary vocab = Vocabulary::FromWords({"<pad>", "<unk>", "t"});
  AssignIds(sentences, vocab, vocab);
  const auto batches = MakeBatches(sentences, 2, 9);
  REQUIRE(batches.size() == 3);
  CHECK(batches[0].rows.size() == 2);
  CHECK(batches[1].rows.size() == 2);
  CHECK(batches[2].rows.size() == 1);
  std::set<std::size_t> seen;
  for (const auto& b : batches) {
    for (const auto& row : b.rows) {
      seen.insert(row.sentence_index);
      CHECK(row.input.length() == b.max_length);
      CHECK(row.input.valid_length() == sentences[row.sentence_index].tokens.size());
      for (std::size_t i = row.input.valid_length(); i < row.input.length(); ++i) {
        CHECK(row.input.mask[i] == 0);
        for (std::size_t j = 0; j < row.input.length(); ++j) {
          CHECK(row.input.adjacency[i * row.input.length() + j] == 0);
        }
      }
    }
  }
  CHECK(seen.size() == 5);
  const auto again = MakeBatches(sentences, 2, 9);
  for (std::size_t b = 0; b < 3; ++b) {
    for (std::size_t r = 0; r < batches[b].rows.size(); ++r) {
      CHECK(again[b].rows[r].sentence_index == batches[b].rows[r].sentence_index);
    }
  }
}

TEST_CASE("dev split") {
  std::vector<Sentence> sentences(10);
  for (int k = 0; k < 10; ++k) sentences[k].tokens = {"s" + std::to_string(k)};
  const auto [train, dev] = DevSplit(sentences, 0.2, 3);
  CHECK(train.size() == 8);
  CHECK(dev.size() == 2);
  std::multiset<std::string> all;
  for (const auto& s : train) all.insert(s.tokens[0]);
  for (const auto& s : dev) all.insert(s.tokens[0]);
  CHECK(all.size() == 10);
  CHECK(std::set<std::string>(all.begin(), all.end()).size() == 10);
  const auto [train2, dev2] = DevSplit(sentences, 0.2, 3);
  CHECK(dev2[0].tokens == dev[0].tokens);

  std::vector<Sentence> big(3044);
  for (std::size_t k = 0; k < big.size(); ++k) big[k].tokens = {"x"};
  const auto [bt, bd] = DevSplit(big, 0.2, 1);
  CHECK(bt.size() == 2436);
  CHECK(bd.size() == 608);
}

TEST_CASE("vocabulary reserves pad and unk") {
  Vocabulary v;
  CHECK(v.size() == 2);
  CHECK(v.Add("a"));
  CHECK_FALSE(v.Add("a"));
  CHECK(v.Lookup("a") == 2);
  CHECK(v.Lookup("zzz") == Vocabulary::kUnk);
}
