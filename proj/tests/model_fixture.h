#ifndef IKTN_TESTS_MODEL_FIXTURE_H_
#define IKTN_TESTS_MODEL_FIXTURE_H_

// Small models over a handful of sentences, and a wiring oracle that lists the
// knowledge-path parameters a flag combination should produce.

#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "iktn/cli.h"
#include "iktn/model.h"
#include "iktn/training.h"

namespace iktn::test {

struct TinyData {
  std::vector<Sentence> sentences;
  std::vector<Document> documents;
  EmbeddingTable general;
  EmbeddingTable domain;
};

inline TinyData MakeTinyData(const ModelConfig& config) {
  TinyData d;
  d.sentences.push_back(GradcheckSentence());
  Sentence s;
  s.tokens = {"battery", "life", "is", "short", "but", "screen", "shines"};
  s.ate = {kBegin, kInside, kOutside, kOutside, kOutside, kBegin, kOutside};
  s.ote = {kOutside, kOutside, kOutside, kBegin, kOutside, kOutside, kBegin};
  s.asc = {1, 1, -1, -1, -1, 0, -1};
  s.adjacency.assign(49, 0);
  for (int i = 0; i < 7; ++i) {
    for (int j = std::max(0, i - 1); j <= std::min(6, i + 1); ++j) s.adjacency[i * 7 + j] = 1;
  }
  d.sentences.push_back(s);
  Sentence one;
  one.tokens = {"ok"};
  one.ate = {kOutside};
  one.ote = {kBegin};
  one.asc = {-1};
  one.adjacency = {1};
  d.sentences.push_back(one);
  d.documents.push_back(GradcheckDocument());
  Document dom;
  dom.sentences = {{"screen", "is", "ok"}};
  dom.domain = 0;
  d.documents.push_back(dom);
  const auto words = CollectWords(d.sentences, d.documents);
  d.general = RandomEmbeddings(words, config.d_general, config.seed);
  d.domain = RandomEmbeddings(words, config.d_domain, config.seed + 1);
  return d;
}

template <typename T>
Model<T> MakeTinyModel(const ModelConfig& config, TinyData& data) {
  Model<T> model(config, data.general, data.domain);
  model.AssignIds(data.sentences);
  model.AssignIds(data.documents);
  return model;
}

inline LabeledRow RowOf(const Sentence& s, std::size_t length) {
  LabeledRow row;
  row.input = PadSentence(s, length);
  row.ate.assign(length, kOutside);
  row.ote.assign(length, kOutside);
  row.asc.assign(length, -1);
  for (int i = 0; i < s.size(); ++i) {
    row.ate[i] = s.ate[i];
    row.ote[i] = s.ote[i];
    row.asc[i] = s.asc[i];
  }
  return row;
}

// Route, fuse and aggregation parameters implied by `config.flags`, worked out
// from the wiring rules alone.
inline std::map<std::string, Shape> ExpectedWiring(const ModelConfig& config,
                                                   const TagSchemes& schemes = {}) {
  static const char* kNames[3] = {"ate", "ote", "asc"};
  // kDirections order: ate->ote, ate->asc, ote->ate, ote->asc, asc->ate, asc->ote
  static const int kSrc[6] = {0, 0, 1, 1, 2, 2};
  static const int kDst[6] = {1, 2, 0, 2, 0, 1};
  const auto& f = config.flags;
  const std::size_t dt = config.d_task, dr = config.d_route;
  const std::size_t c1[3] = {std::size_t(schemes.ate.size()), std::size_t(schemes.ote.size()),
                             std::size_t(schemes.asc.size())};
  const std::size_t c2 = schemes.dsc.size();
  std::map<std::string, Shape> out;
  for (int k = 0; k < 6; ++k) {
    if (!f.directions[k]) continue;
    out["route." + std::string(kNames[kSrc[k]]) + "_to_" + kNames[kDst[k]] + ".W"] = {dt, dr};
  }
  for (int t = 0; t < 3; ++t) {
    std::size_t incoming = 0, source_classes = 0;
    for (int k = 0; k < 6; ++k) {
      if (f.directions[k] && kDst[k] == t) {
        ++incoming;
        source_classes += c1[kSrc[k]];
      }
    }
    const bool ddc = f.ddc_injection && (f.coarse || t != 2);
    const bool dsc = f.dsc_injection && (f.coarse || t == 2);
    const std::string name = kNames[t];
    if (incoming > 0) {
      out["fuse." + name + ".proj.W"] = {dt + incoming * dr, dt};
      out["fuse." + name + ".proj.b"] = {dt};
    }
    if (incoming == 0 && !ddc && !dsc) continue;
    const std::size_t in = dt + c1[t] + source_classes + (ddc ? 1 : 0) + (dsc ? c2 + 1 : 0);
    const std::string agg = "agg." + name + (t == 2 ? ".f2" : ".f1");
    out[agg + ".W"] = {in, dt};
    out[agg + ".b"] = {dt};
  }
  return out;
}

inline bool IsWiring(const std::string& name) {
  return name.rfind("route.", 0) == 0 || name.rfind("fuse.", 0) == 0 ||
         name.rfind("agg.", 0) == 0;
}

// Largest |gradient| of each parameter after backpropagating one loss.
inline std::map<std::string, double> GradMagnitudes(
    const Model<double>& model,
    const std::function<Tensor<double>(Tape<double>&)>& loss) {
  for (const auto& [name, t] : model.params().entries()) t.zero_grad();
  Tape<double> tape;
  tape.Backward(loss(tape));
  std::map<std::string, double> out;
  for (const auto& [name, t] : model.params().entries()) {
    double m = 0;
    if (t.requires_grad()) {
      for (double g : t.grad()) m = std::max(m, std::abs(g));
    }
    out[name] = m;
  }
  return out;
}

}  // namespace iktn::test

#endif  // IKTN_TESTS_MODEL_FIXTURE_H_
