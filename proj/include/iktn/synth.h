#ifndef IKTN_SYNTH_H_
#define IKTN_SYNTH_H_

#include <string>
#include <vector>

#include "iktn/data.h"

namespace iktn {

// Template sentences with planted aspect and opinion terms. Aspect words and
// opinion polarities are drawn independently, and a share of templates puts
// the opinion more than four tokens away from the aspect, so the aspect's
// sentiment is only recoverable from sentence-wide context. Adjacency links
// neighbouring tokens.
struct SynthOptions {
  std::size_t sentences = 50;
  std::size_t documents = 40;
  std::uint64_t seed = 7;
};

struct SynthCorpus {
  std::vector<Sentence> sentences;
  std::vector<Document> documents;
};

SynthCorpus GenerateSynthetic(const SynthOptions& options);

// Writes train.tsv, train.adj and documents.jsonl into `dir`.
void WriteSynthetic(const SynthCorpus& corpus, const std::string& dir,
                    const TagSchemes& schemes = {});

}  // namespace iktn

#endif  // IKTN_SYNTH_H_
