#ifndef IKTN_DATA_H_
#define IKTN_DATA_H_

#include <array>
#include <compare>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "json.hpp"

namespace iktn {

// Malformed input files. Messages carry the line number when known.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A label string outside the declared label set.
class SchemaError : public DataError {
 public:
  using DataError::DataError;
};

enum class Task { kAte = 0, kOte = 1, kAsc = 2, kDdc = 3, kDsc = 4 };

inline constexpr std::array<Task, 3> kAspectTasks = {Task::kAte, Task::kOte,
                                                     Task::kAsc};
inline constexpr std::array<Task, 2> kDocumentTasks = {Task::kDdc, Task::kDsc};
inline constexpr std::array<Task, 5> kAllTasks = {Task::kAte, Task::kOte,
                                                  Task::kAsc, Task::kDdc,
                                                  Task::kDsc};

std::string_view TaskName(Task task);
std::optional<Task> ParseTask(std::string_view name);
inline bool IsAspectTask(Task t) { return static_cast<int>(t) < 3; }
inline std::size_t TaskIndex(Task t) { return static_cast<std::size_t>(t); }

// Ordered label set with a stable name <-> index bijection.
class LabelSet {
 public:
  LabelSet() = default;
  explicit LabelSet(std::vector<std::string> names);

  std::optional<int> Find(std::string_view name) const;
  // Throws SchemaError naming `context` for unknown labels.
  int IndexOf(std::string_view name, std::string_view context) const;
  const std::string& Name(int index) const { return names_.at(index); }
  int size() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }

  bool operator==(const LabelSet& other) const { return names_ == other.names_; }

 private:
  std::vector<std::string> names_;
};

// BIO schemes share one index layout: 0 = begin, 1 = inside, 2 = outside.
inline constexpr int kBegin = 0;
inline constexpr int kInside = 1;
inline constexpr int kOutside = 2;

struct TagSchemes {
  LabelSet ate{{"BA", "IA", "O"}};
  LabelSet ote{{"BP", "IP", "O"}};
  LabelSet asc{{"pos", "neg", "neu"}};
  LabelSet domain{{"Laptop", "Restaurant"}};
  LabelSet dsc{{"pos", "neg", "neu"}};

  const LabelSet& ForTask(Task task) const;
  // Class count of a task: C1 for aspect-level tasks, C2 for document ones.
  int NumClasses(Task task) const { return ForTask(task).size(); }

  nlohmann::json ToJson() const;
  static TagSchemes FromJson(const nlohmann::json& j);
  bool operator==(const TagSchemes& other) const = default;
};

struct Span {
  int start = 0;  // inclusive
  int end = 0;    // exclusive
  auto operator<=>(const Span&) const = default;
};

// Maximal begin-then-inside runs; an inside tag with no open span starts a
// new one. Result is sorted and disjoint.
std::vector<Span> ExtractSpans(std::span<const int> tags);
// Inverse of ExtractSpans for disjoint spans within [0, length).
std::vector<int> TagsFromSpans(std::span<const Span> spans, int length);
// Strict validity: every inside tag continues a begin/inside run.
bool IsValidBio(std::span<const int> tags);

struct Sentence {
  std::vector<std::string> tokens;
  std::vector<int> ate;
  std::vector<int> ote;
  std::vector<int> asc;  // -1 outside gold aspect spans
  std::vector<std::uint8_t> adjacency;  // n×n, symmetric, unit diagonal
  std::vector<std::int32_t> general_ids;
  std::vector<std::int32_t> domain_ids;

  int size() const { return static_cast<int>(tokens.size()); }
  bool adjacent(int i, int j) const {
    return adjacency[static_cast<std::size_t>(i) * tokens.size() + j] != 0;
  }
};

// Gold (span, sentiment) pairs of a sentence. The span sentiment is the asc
// label carried by its tokens.
std::vector<std::pair<Span, int>> GoldPairs(const Sentence& sentence);

// Throws DataError if any Sentence invariant is violated. `index` is used
// in messages.
void ValidateSentence(const Sentence& sentence, std::size_t index);

// CoNLL-style TSV: `token<TAB>ate<TAB>ote<TAB>asc-or-_`, blank line between
// sentences. Adjacency defaults to self-loops only.
std::vector<Sentence> ParseAspectCorpus(std::istream& in,
                                        const TagSchemes& schemes);
std::vector<Sentence> LoadAspectCorpus(const std::string& path,
                                       const TagSchemes& schemes);
// Adjacency sidecar: `<sentence-index> <i> <j>` per line, 0-based. Edges are
// symmetrized; self-loops are always present.
void ParseAdjacency(std::istream& in, std::vector<Sentence>& sentences);
void LoadAdjacency(const std::string& path, std::vector<Sentence>& sentences);

void WriteAspectCorpus(std::ostream& out, std::span<const Sentence> sentences,
                       const TagSchemes& schemes);
void WriteAdjacency(std::ostream& out, std::span<const Sentence> sentences);

struct Document {
  std::vector<std::vector<std::string>> sentences;
  std::optional<int> domain;
  std::optional<int> sentiment;
  std::vector<std::int32_t> general_ids;
  std::vector<std::int32_t> domain_ids;

  std::vector<std::string> Tokens() const;
};

// JSONL with keys `text`, optional `domain`, optional `sentiment`.
std::vector<Document> ParseDocumentCorpus(std::istream& in,
                                          const TagSchemes& schemes);
std::vector<Document> LoadDocumentCorpus(const std::string& path,
                                         const TagSchemes& schemes);

// Word -> row index. Rows 0 and 1 are reserved for padding and unknown words.
class Vocabulary {
 public:
  static constexpr std::int32_t kPad = 0;
  static constexpr std::int32_t kUnk = 1;

  Vocabulary();
  // Returns false if the word was already present.
  bool Add(const std::string& word);
  std::int32_t Lookup(const std::string& word) const;
  bool Contains(const std::string& word) const { return index_.count(word) > 0; }
  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }
  static Vocabulary FromWords(const std::vector<std::string>& words);

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::int32_t> index_;
};

struct EmbeddingTable {
  Vocabulary vocab;
  std::size_t dim = 0;
  std::vector<float> matrix;  // vocab.size() × dim, row-major; pad row zero

  std::size_t rows() const { return vocab.size(); }
  std::int32_t pad_index() const { return Vocabulary::kPad; }
  std::int32_t unk_index() const { return Vocabulary::kUnk; }
};

struct VocabPolicy {
  // When set, only these words are kept from the file.
  const std::unordered_set<std::string>* keep = nullptr;
};

// word2vec text format with an optional `count dim` header. Duplicate words
// keep their first vector and log a warning.
EmbeddingTable ParseEmbeddings(std::istream& in, VocabPolicy policy = {});
EmbeddingTable LoadEmbeddings(const std::string& path, VocabPolicy policy = {});
// Rows uniform in [-0.25, 0.25] except the zero pad row.
EmbeddingTable RandomEmbeddings(const std::vector<std::string>& words,
                                std::size_t dim, std::uint64_t seed);

// Corpus vocabulary in first-seen order.
std::vector<std::string> CollectWords(std::span<const Sentence> sentences,
                                      std::span<const Document> documents);

void AssignIds(std::vector<Sentence>& sentences, const Vocabulary& general,
               const Vocabulary& domain);
void AssignIds(std::vector<Document>& documents, const Vocabulary& general,
               const Vocabulary& domain);

// One padded row of a batch, the unit the model consumes.
struct SequenceInput {
  std::vector<std::int32_t> general_ids;
  std::vector<std::int32_t> domain_ids;
  std::vector<std::uint8_t> mask;       // 1 = real token
  std::vector<std::uint8_t> adjacency;  // L×L, zero on padded rows/columns

  std::size_t length() const { return mask.size(); }
  std::size_t valid_length() const;
};

SequenceInput PadSentence(const Sentence& sentence, std::size_t length);
SequenceInput DocumentInput(const Document& document);

struct LabeledRow {
  SequenceInput input;
  // Padded positions hold an arbitrary filler; only `input.mask` decides
  // what is supervised.
  std::vector<int> ate;
  std::vector<int> ote;
  std::vector<int> asc;
  std::size_t sentence_index = 0;
};

struct Batch {
  std::size_t max_length = 0;
  std::vector<LabeledRow> rows;
};

// Shuffles deterministically by `seed` (no shuffle when seed is nullopt) and
// pads each batch to its longest sentence.
std::vector<Batch> MakeBatches(std::span<const Sentence> sentences,
                               std::size_t batch_size,
                               std::optional<std::uint64_t> seed);
// Index groups over documents, shuffled by seed.
std::vector<std::vector<std::size_t>> MakeDocumentBatches(
    std::size_t count, std::size_t batch_size, std::uint64_t seed);

// Random dev split of floor(fraction · n) sentences (at least one when
// n >= 2). Returns (train, dev).
std::pair<std::vector<Sentence>, std::vector<Sentence>> DevSplit(
    std::span<const Sentence> sentences, double fraction, std::uint64_t seed);

struct CorpusStats {
  std::size_t sentences = 0;
  std::size_t aspect_terms = 0;
  std::size_t opinion_terms = 0;
};
CorpusStats ComputeStats(std::span<const Sentence> sentences);

}  // namespace iktn

#endif  // IKTN_DATA_H_
