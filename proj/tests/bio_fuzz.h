#ifndef IKTN_TESTS_BIO_FUZZ_H_
#define IKTN_TESTS_BIO_FUZZ_H_

// Random BIO tag sequences rendered as aspect-corpus text, with a validity
// oracle written independently of the loader.

#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace iktn::test {

// 0 = B, 1 = I, 2 = O (the loader's index layout).
inline bool OracleValid(const std::vector<int>& tags) {
  int prev = 2;
  for (int t : tags) {
    if (t == 1 && prev == 2) return false;
    prev = t;
  }
  return true;
}

// Lenient run starts: B always opens, I opens after O or at position 0.
inline std::vector<int> OracleRunIds(const std::vector<int>& tags) {
  std::vector<int> run(tags.size(), -1);
  int current = -1, next = 0, prev = 2;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (tags[i] == 0 || (tags[i] == 1 && prev == 2)) current = next++;
    if (tags[i] == 2) current = -1;
    run[i] = current;
    prev = tags[i];
  }
  return run;
}

struct FuzzSentence {
  std::vector<int> ate;
  std::vector<int> ote;
  bool valid = true;
  std::string text;  // TSV block with a trailing blank line
};

// Sequences are built from valid runs; with probability 1/2 one position is
// then overwritten with an inside tag, which breaks validity whenever it lands
// after an outside tag or at the start.
inline FuzzSentence DrawFuzzSentence(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> len(1, 12), tag(0, 2);
  std::bernoulli_distribution coin(0.5);
  auto valid_seq = [&](int n) {
    std::vector<int> t(n);
    int prev = 2;
    for (int i = 0; i < n; ++i) {
      int v = tag(rng);
      if (v == 1 && prev == 2) v = coin(rng) ? 0 : 2;
      t[i] = prev = v;
    }
    return t;
  };
  FuzzSentence s;
  const int n = len(rng);
  s.ate = valid_seq(n);
  s.ote = valid_seq(n);
  if (coin(rng)) {
    auto& target = coin(rng) ? s.ate : s.ote;
    std::uniform_int_distribution<int> pos(0, n - 1);
    target[pos(rng)] = 1;
  }
  s.valid = OracleValid(s.ate) && OracleValid(s.ote);

  static const char* kAte[] = {"BA", "IA", "O"};
  static const char* kOte[] = {"BP", "IP", "O"};
  static const char* kSent[] = {"pos", "neg", "neu"};
  // Sentiment per lenient aspect run, so asc labels never decide validity.
  const auto runs = OracleRunIds(s.ate);
  std::ostringstream out;
  for (int i = 0; i < n; ++i) {
    out << "w" << i << '\t' << kAte[s.ate[i]] << '\t' << kOte[s.ote[i]] << '\t'
        << (runs[i] >= 0 ? kSent[runs[i] % 3] : "_") << '\n';
  }
  out << '\n';
  s.text = out.str();
  return s;
}

}  // namespace iktn::test

#endif  // IKTN_TESTS_BIO_FUZZ_H_
