#ifndef IKTN_CONFIG_H_
#define IKTN_CONFIG_H_

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "iktn/data.h"
#include "iktn/model.h"
#include "iktn/training.h"

namespace iktn {

// Everything a run needs: model, schedule, paths. Serialized as `key = value`
// lines with `#` comments; unknown keys are rejected.
struct RunConfig {
  ModelConfig model;
  Schedule schedule;
  std::vector<Ablation> ablations;  // applied on top of model.flags

  std::string train_path;
  std::string train_adjacency;
  std::string dev_path;
  std::string dev_adjacency;
  std::string test_path;
  std::string test_adjacency;
  std::string document_path;
  std::string general_embeddings;
  std::string domain_embeddings;
  std::string output_dir = "iktn-out";
  double dev_fraction = 0.2;  // used when dev_path is empty; 0 keeps all for training
  int runs = 1;

  // Sets one key from its text form. Throws ConfigError naming the key.
  void Set(const std::string& key, const std::string& value);
  void Validate() const;
  // Model config with ablations applied.
  ModelConfig EffectiveModel() const;
  // Canonical text, every key in a fixed order.
  std::string Dump() const;

  static std::vector<std::string> Keys();
};

// Parses `key = value` text. Relative paths are resolved against `base_dir`
// when it is non-empty.
RunConfig ParseRunConfig(std::istream& in, const std::string& base_dir = "");
RunConfig LoadRunConfig(const std::string& path);
// `key=value` from the command line.
void ApplyOverride(RunConfig& config, const std::string& assignment);

// Corpora and embeddings of a run, ids assigned.
struct LoadedData {
  std::vector<Sentence> train;
  std::vector<Sentence> dev;
  std::vector<Sentence> test;
  std::vector<Document> documents;
  EmbeddingTable general;
  EmbeddingTable domain;
};

// Throws ConfigError for missing files named by a config field, DataError
// for malformed contents.
LoadedData LoadRunData(const RunConfig& config, const TagSchemes& schemes = {});

// Rows for `words` drawn uniform in [-0.25, 0.25] with a zero pad row. When
// `path` is set, rows of words found in that word2vec file are copied over
// and the unk row is zeroed.
EmbeddingTable BuildEmbeddings(const std::vector<std::string>& words,
                               const std::string& path, std::size_t dim,
                               std::uint64_t seed);

}  // namespace iktn

#endif  // IKTN_CONFIG_H_
