#include "iktn/data.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include <spdlog/spdlog.h>

namespace iktn {

namespace {

std::vector<std::string> SplitWhitespace(const std::string& line) {
  std::istringstream is(line);
  std::vector<std::string> out;
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

std::vector<std::string> SplitFields(const std::string& line) {
  if (line.find('\t') == std::string::npos) return SplitWhitespace(line);
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

bool IsBlank(const std::string& line) {
  return std::all_of(line.begin(), line.end(),
                     [](unsigned char c) { return std::isspace(c); });
}

void StripCarriageReturn(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

std::ifstream OpenOrThrow(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return in;
}

std::vector<std::uint8_t> SelfLoops(std::size_t n) {
  std::vector<std::uint8_t> a(n * n, 0);
  for (std::size_t i = 0; i < n; ++i) a[i * n + i] = 1;
  return a;
}

std::string Where(std::size_t sentence, std::size_t line) {
  return "sentence " + std::to_string(sentence) + " (line " +
         std::to_string(line) + ")";
}

}  // namespace

// ---------------------------------------------------------------------------
// Tasks and label sets

std::string_view TaskName(Task task) {
  switch (task) {
    case Task::kAte: return "ate";
    case Task::kOte: return "ote";
    case Task::kAsc: return "asc";
    case Task::kDdc: return "ddc";
    case Task::kDsc: return "dsc";
  }
  return "?";
}

std::optional<Task> ParseTask(std::string_view name) {
  for (Task t : kAllTasks) {
    if (TaskName(t) == name) return t;
  }
  return std::nullopt;
}

LabelSet::LabelSet(std::vector<std::string> names) : names_(std::move(names)) {}

std::optional<int> LabelSet::Find(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return static_cast<int>(i);
  }
  return std::nullopt;
}

int LabelSet::IndexOf(std::string_view name, std::string_view context) const {
  if (auto idx = Find(name)) return *idx;
  std::string allowed;
  for (const auto& n : names_) allowed += (allowed.empty() ? "" : ",") + n;
  throw SchemaError(std::string(context) + ": unknown label '" +
                    std::string(name) + "' (expected one of " + allowed + ")");
}

const LabelSet& TagSchemes::ForTask(Task task) const {
  switch (task) {
    case Task::kAte: return ate;
    case Task::kOte: return ote;
    case Task::kAsc: return asc;
    case Task::kDdc: return domain;
    case Task::kDsc: return dsc;
  }
  throw std::logic_error("bad task");
}

nlohmann::json TagSchemes::ToJson() const {
  return {{"ate", ate.names()},
          {"ote", ote.names()},
          {"asc", asc.names()},
          {"ddc", domain.names()},
          {"dsc", dsc.names()}};
}

TagSchemes TagSchemes::FromJson(const nlohmann::json& j) {
  TagSchemes s;
  s.ate = LabelSet(j.at("ate").get<std::vector<std::string>>());
  s.ote = LabelSet(j.at("ote").get<std::vector<std::string>>());
  s.asc = LabelSet(j.at("asc").get<std::vector<std::string>>());
  s.domain = LabelSet(j.at("ddc").get<std::vector<std::string>>());
  s.dsc = LabelSet(j.at("dsc").get<std::vector<std::string>>());
  return s;
}

// ---------------------------------------------------------------------------
// Spans

std::vector<Span> ExtractSpans(std::span<const int> tags) {
  std::vector<Span> spans;
  int open = -1;
  const int n = static_cast<int>(tags.size());
  for (int i = 0; i < n; ++i) {
    const int tag = tags[i];
    if (tag == kBegin) {
      if (open >= 0) spans.push_back({open, i});
      open = i;
    } else if (tag == kInside) {
      if (open < 0) open = i;
    } else {
      if (open >= 0) spans.push_back({open, i});
      open = -1;
    }
  }
  if (open >= 0) spans.push_back({open, n});
  return spans;
}

std::vector<int> TagsFromSpans(std::span<const Span> spans, int length) {
  std::vector<int> tags(static_cast<std::size_t>(length), kOutside);
  for (const Span& s : spans) {
    if (s.start < 0 || s.end > length || s.start >= s.end) {
      throw std::invalid_argument("span [" + std::to_string(s.start) + "," +
                                  std::to_string(s.end) + ") outside sentence");
    }
    tags[s.start] = kBegin;
    for (int i = s.start + 1; i < s.end; ++i) tags[i] = kInside;
  }
  return tags;
}

bool IsValidBio(std::span<const int> tags) {
  int prev = kOutside;
  for (int tag : tags) {
    if (tag < kBegin || tag > kOutside) return false;
    if (tag == kInside && prev == kOutside) return false;
    prev = tag;
  }
  return true;
}

std::vector<std::pair<Span, int>> GoldPairs(const Sentence& sentence) {
  std::vector<std::pair<Span, int>> pairs;
  for (const Span& s : ExtractSpans(sentence.ate)) {
    pairs.emplace_back(s, sentence.asc[s.start]);
  }
  return pairs;
}

void ValidateSentence(const Sentence& s, std::size_t index) {
  const std::size_t n = s.tokens.size();
  const std::string where = "sentence " + std::to_string(index);
  if (n == 0) throw DataError(where + ": empty sentence");
  if (s.ate.size() != n || s.ote.size() != n || s.asc.size() != n) {
    throw DataError(where + ": tag sequences differ in length from tokens");
  }
  if (!IsValidBio(s.ate)) throw DataError(where + ": invalid BIO in aspect tags");
  if (!IsValidBio(s.ote)) throw DataError(where + ": invalid BIO in opinion tags");
  std::vector<bool> inside(n, false);
  for (const Span& span : ExtractSpans(s.ate)) {
    for (int i = span.start; i < span.end; ++i) inside[i] = true;
    const int label = s.asc[span.start];
    for (int i = span.start; i < span.end; ++i) {
      if (s.asc[i] != label) {
        throw DataError(where + ": aspect span [" + std::to_string(span.start) +
                        "," + std::to_string(span.end) +
                        ") mixes sentiment labels");
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (inside[i] && s.asc[i] < 0) {
      throw DataError(where + ": token " + std::to_string(i) +
                      " inside an aspect span has no sentiment");
    }
    if (!inside[i] && s.asc[i] >= 0) {
      throw DataError(where + ": token " + std::to_string(i) +
                      " outside aspect spans carries a sentiment");
    }
  }
  if (s.adjacency.size() != n * n) {
    throw DataError(where + ": adjacency is not n×n");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!s.adjacency[i * n + i]) throw DataError(where + ": adjacency lacks self-loop");
    for (std::size_t j = 0; j < n; ++j) {
      if (s.adjacency[i * n + j] != s.adjacency[j * n + i]) {
        throw DataError(where + ": adjacency is not symmetric");
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Aspect corpus

std::vector<Sentence> ParseAspectCorpus(std::istream& in,
                                        const TagSchemes& schemes) {
  std::vector<Sentence> out;
  Sentence current;
  std::size_t first_line = 0;
  std::size_t line_no = 0;

  auto flush = [&]() {
    if (current.tokens.empty()) return;
    const std::size_t idx = out.size();
    const std::size_t n = current.tokens.size();
    current.adjacency = SelfLoops(n);
    if (!IsValidBio(current.ate)) {
      throw DataError(Where(idx, first_line) +
                      ": aspect tags violate BIO (IA without preceding BA/IA)");
    }
    if (!IsValidBio(current.ote)) {
      throw DataError(Where(idx, first_line) +
                      ": opinion tags violate BIO (IP without preceding BP/IP)");
    }
    try {
      ValidateSentence(current, idx);
    } catch (const DataError& e) {
      throw DataError(std::string(e.what()) + " (starting at line " +
                      std::to_string(first_line) + ")");
    }
    out.push_back(std::move(current));
    current = Sentence{};
  };

  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    StripCarriageReturn(line);
    if (IsBlank(line)) {
      flush();
      continue;
    }
    const auto fields = SplitFields(line);
    if (fields.size() != 4) {
      throw DataError("line " + std::to_string(line_no) + ": expected 4 fields, got " +
                      std::to_string(fields.size()));
    }
    if (current.tokens.empty()) first_line = line_no;
    const std::string ctx = "line " + std::to_string(line_no);
    current.tokens.push_back(fields[0]);
    current.ate.push_back(schemes.ate.IndexOf(fields[1], ctx));
    current.ote.push_back(schemes.ote.IndexOf(fields[2], ctx));
    current.asc.push_back(fields[3] == "_" ? -1 : schemes.asc.IndexOf(fields[3], ctx));
  }
  flush();
  return out;
}

std::vector<Sentence> LoadAspectCorpus(const std::string& path,
                                       const TagSchemes& schemes) {
  auto in = OpenOrThrow(path);
  try {
    return ParseAspectCorpus(in, schemes);
  } catch (const SchemaError& e) {
    throw SchemaError(path + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

void ParseAdjacency(std::istream& in, std::vector<Sentence>& sentences) {
  for (auto& s : sentences) s.adjacency = SelfLoops(s.tokens.size());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    StripCarriageReturn(line);
    if (IsBlank(line) || line[0] == '#') continue;
    std::istringstream is(line);
    long long idx = -1, i = -1, j = -1;
    std::string extra;
    if (!(is >> idx >> i >> j) || (is >> extra)) {
      throw DataError("adjacency line " + std::to_string(line_no) +
                      ": expected '<sentence> <i> <j>'");
    }
    if (idx < 0 || static_cast<std::size_t>(idx) >= sentences.size()) {
      throw DataError("adjacency line " + std::to_string(line_no) +
                      ": sentence index " + std::to_string(idx) + " out of range");
    }
    Sentence& s = sentences[idx];
    const long long n = s.size();
    if (i < 0 || j < 0 || i >= n || j >= n) {
      throw DataError("adjacency line " + std::to_string(line_no) + ": token pair (" +
                      std::to_string(i) + "," + std::to_string(j) +
                      ") outside sentence of length " + std::to_string(n));
    }
    s.adjacency[i * n + j] = 1;
    s.adjacency[j * n + i] = 1;
  }
}

void LoadAdjacency(const std::string& path, std::vector<Sentence>& sentences) {
  auto in = OpenOrThrow(path);
  try {
    ParseAdjacency(in, sentences);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

void WriteAspectCorpus(std::ostream& out, std::span<const Sentence> sentences,
                       const TagSchemes& schemes) {
  for (const auto& s : sentences) {
    for (int i = 0; i < s.size(); ++i) {
      out << s.tokens[i] << '\t' << schemes.ate.Name(s.ate[i]) << '\t'
          << schemes.ote.Name(s.ote[i]) << '\t'
          << (s.asc[i] < 0 ? std::string("_") : schemes.asc.Name(s.asc[i]))
          << '\n';
    }
    out << '\n';
  }
}

void WriteAdjacency(std::ostream& out, std::span<const Sentence> sentences) {
  for (std::size_t idx = 0; idx < sentences.size(); ++idx) {
    const Sentence& s = sentences[idx];
    for (int i = 0; i < s.size(); ++i) {
      for (int j = i + 1; j < s.size(); ++j) {
        if (s.adjacent(i, j)) out << idx << ' ' << i << ' ' << j << '\n';
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Document corpus

std::vector<std::string> Document::Tokens() const {
  std::vector<std::string> out;
  for (const auto& s : sentences) out.insert(out.end(), s.begin(), s.end());
  return out;
}

std::vector<Document> ParseDocumentCorpus(std::istream& in,
                                          const TagSchemes& schemes) {
  std::vector<Document> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    StripCarriageReturn(line);
    if (IsBlank(line)) continue;
    const std::string ctx = "line " + std::to_string(line_no);
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(ctx + ": invalid JSON (" + e.what() + ")");
    }
    if (!record.is_object() || !record.contains("text") || !record["text"].is_string()) {
      throw DataError(ctx + ": record needs a string 'text' field");
    }
    Document doc;
    std::vector<std::string> sentence;
    for (auto& tok : SplitWhitespace(record["text"].get<std::string>())) {
      const bool boundary = tok == "." || tok == "!" || tok == "?";
      sentence.push_back(std::move(tok));
      if (boundary) {
        doc.sentences.push_back(std::move(sentence));
        sentence.clear();
      }
    }
    if (!sentence.empty()) doc.sentences.push_back(std::move(sentence));
    if (doc.sentences.empty()) throw DataError(ctx + ": empty text");
    if (record.contains("domain") && !record["domain"].is_null()) {
      doc.domain = schemes.domain.IndexOf(record["domain"].get<std::string>(), ctx);
    }
    if (record.contains("sentiment") && !record["sentiment"].is_null()) {
      doc.sentiment = schemes.dsc.IndexOf(record["sentiment"].get<std::string>(), ctx);
    }
    if (!doc.domain && !doc.sentiment) {
      throw DataError(ctx + ": record has neither 'domain' nor 'sentiment'");
    }
    out.push_back(std::move(doc));
  }
  return out;
}

std::vector<Document> LoadDocumentCorpus(const std::string& path,
                                         const TagSchemes& schemes) {
  auto in = OpenOrThrow(path);
  try {
    return ParseDocumentCorpus(in, schemes);
  } catch (const SchemaError& e) {
    throw SchemaError(path + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Vocabulary and embeddings

Vocabulary::Vocabulary() {
  Add("<pad>");
  Add("<unk>");
}

bool Vocabulary::Add(const std::string& word) {
  if (index_.count(word)) return false;
  index_.emplace(word, static_cast<std::int32_t>(words_.size()));
  words_.push_back(word);
  return true;
}

std::int32_t Vocabulary::Lookup(const std::string& word) const {
  auto it = index_.find(word);
  return it == index_.end() ? kUnk : it->second;
}

Vocabulary Vocabulary::FromWords(const std::vector<std::string>& words) {
  Vocabulary v;
  if (words.size() < 2 || words[0] != "<pad>" || words[1] != "<unk>") {
    throw DataError("vocabulary must start with <pad>, <unk>");
  }
  for (std::size_t i = 2; i < words.size(); ++i) {
    if (!v.Add(words[i])) throw DataError("duplicate vocabulary entry '" + words[i] + "'");
  }
  return v;
}

EmbeddingTable ParseEmbeddings(std::istream& in, VocabPolicy policy) {
  EmbeddingTable table;
  std::string line;
  std::size_t line_no = 0;
  std::size_t duplicates = 0;
  std::vector<float> rows;
  while (std::getline(in, line)) {
    ++line_no;
    StripCarriageReturn(line);
    if (IsBlank(line)) continue;
    auto fields = SplitWhitespace(line);
    if (line_no == 1 && fields.size() == 2 &&
        std::all_of(fields[0].begin(), fields[0].end(), ::isdigit) &&
        std::all_of(fields[1].begin(), fields[1].end(), ::isdigit)) {
      continue;  // `count dim` header
    }
    if (fields.size() < 2) {
      throw DataError("embeddings line " + std::to_string(line_no) + ": no vector");
    }
    const std::size_t dim = fields.size() - 1;
    if (table.dim == 0) {
      table.dim = dim;
      rows.assign(2 * dim, 0.0f);  // pad and unk rows
    } else if (dim != table.dim) {
      throw DataError("embeddings line " + std::to_string(line_no) + ": expected " +
                      std::to_string(table.dim) + " values, got " +
                      std::to_string(dim));
    }
    const std::string& word = fields[0];
    if (policy.keep && !policy.keep->count(word)) continue;
    if (table.vocab.Contains(word)) {
      ++duplicates;
      spdlog::warn("embeddings line {}: duplicate word '{}' ignored", line_no, word);
      continue;
    }
    std::vector<float> values(dim);
    for (std::size_t c = 0; c < dim; ++c) {
      try {
        std::size_t used = 0;
        values[c] = std::stof(fields[c + 1], &used);
        if (used != fields[c + 1].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw DataError("embeddings line " + std::to_string(line_no) +
                        ": bad number '" + fields[c + 1] + "'");
      }
    }
    table.vocab.Add(word);
    rows.insert(rows.end(), values.begin(), values.end());
  }
  if (table.dim == 0) throw DataError("embeddings file holds no vectors");
  table.matrix = std::move(rows);
  return table;
}

EmbeddingTable LoadEmbeddings(const std::string& path, VocabPolicy policy) {
  auto in = OpenOrThrow(path);
  try {
    return ParseEmbeddings(in, policy);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

EmbeddingTable RandomEmbeddings(const std::vector<std::string>& words,
                                std::size_t dim, std::uint64_t seed) {
  EmbeddingTable table;
  table.dim = dim;
  for (const auto& w : words) table.vocab.Add(w);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> dist(-0.25f, 0.25f);
  table.matrix.assign(table.vocab.size() * dim, 0.0f);
  for (std::size_t i = dim; i < table.matrix.size(); ++i) table.matrix[i] = dist(rng);
  return table;
}

std::vector<std::string> CollectWords(std::span<const Sentence> sentences,
                                      std::span<const Document> documents) {
  std::vector<std::string> words;
  std::unordered_set<std::string> seen;
  auto add = [&](const std::string& w) {
    if (seen.insert(w).second) words.push_back(w);
  };
  for (const auto& s : sentences) {
    for (const auto& w : s.tokens) add(w);
  }
  for (const auto& d : documents) {
    for (const auto& sent : d.sentences) {
      for (const auto& w : sent) add(w);
    }
  }
  return words;
}

void AssignIds(std::vector<Sentence>& sentences, const Vocabulary& general,
               const Vocabulary& domain) {
  for (auto& s : sentences) {
    s.general_ids.clear();
    s.domain_ids.clear();
    for (const auto& w : s.tokens) {
      s.general_ids.push_back(general.Lookup(w));
      s.domain_ids.push_back(domain.Lookup(w));
    }
  }
}

void AssignIds(std::vector<Document>& documents, const Vocabulary& general,
               const Vocabulary& domain) {
  for (auto& d : documents) {
    d.general_ids.clear();
    d.domain_ids.clear();
    for (const auto& w : d.Tokens()) {
      d.general_ids.push_back(general.Lookup(w));
      d.domain_ids.push_back(domain.Lookup(w));
    }
  }
}

// ---------------------------------------------------------------------------
// Batching

std::size_t SequenceInput::valid_length() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
}

SequenceInput PadSentence(const Sentence& sentence, std::size_t length) {
  const std::size_t n = sentence.tokens.size();
  if (length < n) throw std::invalid_argument("pad length shorter than sentence");
  if (sentence.general_ids.size() != n || sentence.domain_ids.size() != n) {
    throw std::invalid_argument("sentence has no embedding ids assigned");
  }
  SequenceInput in;
  in.general_ids.assign(length, Vocabulary::kPad);
  in.domain_ids.assign(length, Vocabulary::kPad);
  in.mask.assign(length, 0);
  in.adjacency.assign(length * length, 0);
  for (std::size_t i = 0; i < n; ++i) {
    in.general_ids[i] = sentence.general_ids[i];
    in.domain_ids[i] = sentence.domain_ids[i];
    in.mask[i] = 1;
    for (std::size_t j = 0; j < n; ++j) {
      in.adjacency[i * length + j] = sentence.adjacency[i * n + j];
    }
  }
  return in;
}

SequenceInput DocumentInput(const Document& document) {
  SequenceInput in;
  in.general_ids = document.general_ids;
  in.domain_ids = document.domain_ids;
  in.mask.assign(document.general_ids.size(), 1);
  if (in.mask.empty()) throw std::invalid_argument("document has no ids assigned");
  return in;
}

std::vector<Batch> MakeBatches(std::span<const Sentence> sentences,
                               std::size_t batch_size,
                               std::optional<std::uint64_t> seed) {
  if (batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
  std::vector<std::size_t> order(sentences.size());
  std::iota(order.begin(), order.end(), 0);
  if (seed) {
    std::mt19937_64 rng(*seed);
    std::shuffle(order.begin(), order.end(), rng);
  }
  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t stop = std::min(order.size(), start + batch_size);
    Batch batch;
    for (std::size_t k = start; k < stop; ++k) {
      batch.max_length = std::max(batch.max_length, sentences[order[k]].tokens.size());
    }
    for (std::size_t k = start; k < stop; ++k) {
      const Sentence& s = sentences[order[k]];
      LabeledRow row;
      row.sentence_index = order[k];
      row.input = PadSentence(s, batch.max_length);
      row.ate.assign(batch.max_length, kOutside);
      row.ote.assign(batch.max_length, kOutside);
      row.asc.assign(batch.max_length, -1);
      std::copy(s.ate.begin(), s.ate.end(), row.ate.begin());
      std::copy(s.ote.begin(), s.ote.end(), row.ote.begin());
      std::copy(s.asc.begin(), s.asc.end(), row.asc.begin());
      batch.rows.push_back(std::move(row));
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

std::vector<std::vector<std::size_t>> MakeDocumentBatches(std::size_t count,
                                                          std::size_t batch_size,
                                                          std::uint64_t seed) {
  if (batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < count; start += batch_size) {
    out.emplace_back(order.begin() + start,
                     order.begin() + std::min(count, start + batch_size));
  }
  return out;
}

std::pair<std::vector<Sentence>, std::vector<Sentence>> DevSplit(
    std::span<const Sentence> sentences, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw std::invalid_argument("dev fraction must lie in (0, 1)");
  }
  const std::size_t n = sentences.size();
  std::size_t dev_count = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
  if (dev_count == 0 && n >= 2) dev_count = 1;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> is_dev(n, false);
  for (std::size_t k = 0; k < dev_count; ++k) is_dev[order[k]] = true;
  std::vector<Sentence> train, dev;
  for (std::size_t i = 0; i < n; ++i) {
    (is_dev[i] ? dev : train).push_back(sentences[i]);
  }
  return {std::move(train), std::move(dev)};
}

CorpusStats ComputeStats(std::span<const Sentence> sentences) {
  CorpusStats stats;
  stats.sentences = sentences.size();
  for (const auto& s : sentences) {
    stats.aspect_terms += ExtractSpans(s.ate).size();
    stats.opinion_terms += ExtractSpans(s.ote).size();
  }
  return stats;
}

}  // namespace iktn
