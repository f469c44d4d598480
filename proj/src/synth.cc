#include "iktn/synth.h"

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "iktn/tensor.h"

namespace iktn {

namespace {

struct Pool {
  std::vector<std::vector<std::string>> restaurant;
  std::vector<std::vector<std::string>> laptop;
};

const Pool& Aspects() {
  static const Pool pool = {
      {{"pizza"}, {"service"}, {"wine", "list"}, {"staff"}},
      {{"screen"}, {"keyboard"}, {"battery", "life"}, {"price"}},
  };
  return pool;
}

// Index by asc label: pos, neg, neu.
const std::vector<std::vector<std::string>>& Opinions() {
  static const std::vector<std::vector<std::string>> words = {
      {"great", "excellent", "amazing", "superb", "lovely"},
      {"terrible", "awful", "horrible", "poor", "disappointing"},
      {"average", "okay", "ordinary", "acceptable", "standard"},
  };
  return words;
}

// "A" marks the aspect slot and "O" the opinion slot.
const std::vector<std::string>& NearTemplates() {
  static const std::vector<std::string> t = {
      "the A is O .",
      "their A was really O today .",
      "O A , honestly .",
      "i think the A is O overall .",
  };
  return t;
}

// Every far template shows the same tokens within four positions of the
// aspect, so local context cannot tell the sentiment.
const std::vector<std::string>& FarTemplates() {
  static const std::vector<std::string> t = {
      "the A , as far as i can tell , was O .",
      "the A , as far as we could see , seemed O .",
      "the A , as far as my friends said , looked O .",
      "the A , as far as anyone could judge , felt O .",
  };
  return t;
}

std::vector<std::string> Split(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

template <typename C>
const auto& Pick(const C& c, Rng& rng) {
  std::uniform_int_distribution<std::size_t> d(0, c.size() - 1);
  return c[d(rng)];
}

struct Drawn {
  std::vector<std::string> tokens;
  Span aspect;
  Span opinion;
};

Drawn Fill(const std::string& tmpl, const std::vector<std::string>& aspect,
           const std::string& opinion) {
  Drawn d;
  for (const auto& w : Split(tmpl)) {
    if (w == "A") {
      d.aspect = {static_cast<int>(d.tokens.size()),
                  static_cast<int>(d.tokens.size() + aspect.size())};
      d.tokens.insert(d.tokens.end(), aspect.begin(), aspect.end());
    } else if (w == "O") {
      d.opinion = {static_cast<int>(d.tokens.size()), static_cast<int>(d.tokens.size()) + 1};
      d.tokens.push_back(opinion);
    } else {
      d.tokens.push_back(w);
    }
  }
  return d;
}

}  // namespace

SynthCorpus GenerateSynthetic(const SynthOptions& options) {
  Rng rng(options.seed);
  std::bernoulli_distribution coin(0.5);
  std::uniform_int_distribution<int> polarity(0, 2);
  SynthCorpus corpus;
  for (std::size_t k = 0; k < options.sentences; ++k) {
    const bool laptop = coin(rng);
    const auto& aspect = Pick(laptop ? Aspects().laptop : Aspects().restaurant, rng);
    const int label = polarity(rng);
    const auto& opinion = Pick(Opinions()[label], rng);
    const auto& tmpl = Pick(k % 2 == 0 ? FarTemplates() : NearTemplates(), rng);
    const Drawn d = Fill(tmpl, aspect, opinion);

    Sentence s;
    s.tokens = d.tokens;
    const int n = s.size();
    s.ate = TagsFromSpans(std::vector<Span>{d.aspect}, n);
    s.ote = TagsFromSpans(std::vector<Span>{d.opinion}, n);
    s.asc.assign(n, -1);
    for (int i = d.aspect.start; i < d.aspect.end; ++i) s.asc[i] = label;
    s.adjacency.assign(static_cast<std::size_t>(n) * n, 0);
    for (int i = 0; i < n; ++i) {
      s.adjacency[i * n + i] = 1;
      if (i + 1 < n) {
        s.adjacency[i * n + i + 1] = 1;
        s.adjacency[(i + 1) * n + i] = 1;
      }
    }
    ValidateSentence(s, k);
    corpus.sentences.push_back(std::move(s));
  }

  std::uniform_int_distribution<int> length(1, 3);
  for (std::size_t k = 0; k < options.documents; ++k) {
    const bool laptop = coin(rng);
    const int label = polarity(rng);
    Document doc;
    const int count = length(rng);
    for (int j = 0; j < count; ++j) {
      const auto& aspect = Pick(laptop ? Aspects().laptop : Aspects().restaurant, rng);
      const auto& opinion = Pick(Opinions()[label], rng);
      const auto& tmpl = Pick(coin(rng) ? FarTemplates() : NearTemplates(), rng);
      doc.sentences.push_back(Fill(tmpl, aspect, opinion).tokens);
    }
    doc.domain = laptop ? 0 : 1;
    // Every fifth document carries the domain label only.
    if (k % 5 != 4) doc.sentiment = label;
    corpus.documents.push_back(std::move(doc));
  }
  return corpus;
}

void WriteSynthetic(const SynthCorpus& corpus, const std::string& dir,
                    const TagSchemes& schemes) {
  std::filesystem::create_directories(dir);
  auto open = [&](const std::string& name) {
    std::ofstream out(std::filesystem::path(dir) / name);
    if (!out) throw DataError("cannot write " + (std::filesystem::path(dir) / name).string());
    return out;
  };
  {
    auto out = open("train.tsv");
    WriteAspectCorpus(out, corpus.sentences, schemes);
  }
  {
    auto out = open("train.adj");
    WriteAdjacency(out, corpus.sentences);
  }
  auto out = open("documents.jsonl");
  for (const auto& doc : corpus.documents) {
    std::string text;
    for (const auto& w : doc.Tokens()) text += (text.empty() ? "" : " ") + w;
    nlohmann::json j = {{"text", text}};
    if (doc.domain) j["domain"] = schemes.domain.Name(*doc.domain);
    if (doc.sentiment) j["sentiment"] = schemes.dsc.Name(*doc.sentiment);
    out << j.dump() << '\n';
  }
}

}  // namespace iktn
