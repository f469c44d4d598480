#include "iktn/config.h"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <spdlog/spdlog.h>

namespace iktn {

namespace fs = std::filesystem;

namespace {

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void Bad(const std::string& key, const std::string& value,
                      const std::string& expected) {
  throw ConfigError(key + ": expected " + expected + ", got '" + value + "'");
}

double ParseDouble(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    Bad(key, value, "a number");
  }
  if (used != value.size()) Bad(key, value, "a number");
  return v;
}

template <typename Int>
Int ParseInt(const std::string& key, const std::string& value) {
  Int v{};
  const auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || p != value.data() + value.size()) Bad(key, value, "an integer");
  return v;
}

std::size_t ParseSize(const std::string& key, const std::string& value) {
  if (!value.empty() && value[0] == '-') Bad(key, value, "a non-negative integer");
  return ParseInt<std::size_t>(key, value);
}

bool ParseBool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  Bad(key, value, "true or false");
}

std::vector<std::string> SplitComma(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = Trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string FormatDouble(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

std::string JoinSizes(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t k = 0; k < v.size(); ++k) out += (k ? "," : "") + std::to_string(v[k]);
  return out;
}

const std::vector<std::string>& PathKeys() {
  static const std::vector<std::string> keys = {
      "train_path",   "train_adjacency",    "dev_path",          "dev_adjacency",
      "test_path",    "test_adjacency",     "document_path",     "general_embeddings",
      "domain_embeddings"};
  return keys;
}

bool IsPathKey(const std::string& key) {
  for (const auto& k : PathKeys()) {
    if (k == key) return true;
  }
  return false;
}

template <typename Config>
auto PathField(Config& c, const std::string& key) -> decltype(&c.train_path) {
  static const std::map<std::string, std::string RunConfig::*> fields = {
      {"train_path", &RunConfig::train_path},
      {"train_adjacency", &RunConfig::train_adjacency},
      {"dev_path", &RunConfig::dev_path},
      {"dev_adjacency", &RunConfig::dev_adjacency},
      {"test_path", &RunConfig::test_path},
      {"test_adjacency", &RunConfig::test_adjacency},
      {"document_path", &RunConfig::document_path},
      {"general_embeddings", &RunConfig::general_embeddings},
      {"domain_embeddings", &RunConfig::domain_embeddings},
  };
  auto it = fields.find(key);
  return it == fields.end() ? nullptr : &(c.*(it->second));
}

std::string Absolute(const std::string& value, const std::string& base_dir) {
  if (value.empty()) return value;
  fs::path p(value);
  if (p.is_relative() && !base_dir.empty()) p = fs::path(base_dir) / p;
  return fs::absolute(p).lexically_normal().string();
}

}  // namespace

std::vector<std::string> RunConfig::Keys() {
  std::vector<std::string> keys = PathKeys();
  for (const char* k :
       {"output_dir", "dev_fraction", "runs", "seed", "d_general", "d_domain", "d_enc",
        "d_task", "d_route", "kernel_widths", "task_depth", "task_width", "T", "iter",
        "pe_mode", "max_len", "dropout", "trainable_embeddings", "lambda1", "lambda2",
        "lambda3", "lambda4", "lambda5"}) {
    keys.emplace_back(k);
  }
  for (const auto& d : kDirections) keys.push_back("transfer." + d.Name());
  for (const char* k :
       {"ddc_injection", "dsc_injection", "coarse", "ablate", "epochs", "pretrain_epochs",
        "alternation", "batch_size", "lr", "clip_norm", "patience", "target_accuracy"}) {
    keys.emplace_back(k);
  }
  return keys;
}

void RunConfig::Set(const std::string& key, const std::string& raw) {
  const std::string value = Trim(raw);
  if (std::string* path = PathField(*this, key)) {
    *path = value;
    return;
  }
  if (key.rfind("transfer.", 0) == 0) {
    auto d = ParseDirection(key.substr(9));
    if (!d) throw ConfigError("unknown config key '" + key + "'");
    model.flags.directions[DirectionIndex(*d)] = ParseBool(key, value);
    return;
  }
  static const std::map<std::string, std::function<void(RunConfig&, const std::string&,
                                                        const std::string&)>>
      setters = {
          {"output_dir", [](RunConfig& c, auto&, auto& v) { c.output_dir = v; }},
          {"dev_fraction",
           [](RunConfig& c, auto& k, auto& v) { c.dev_fraction = ParseDouble(k, v); }},
          {"runs", [](RunConfig& c, auto& k, auto& v) { c.runs = ParseInt<int>(k, v); }},
          {"seed",
           [](RunConfig& c, auto& k, auto& v) {
             c.model.seed = ParseInt<std::uint64_t>(k, v);
             c.schedule.seed = c.model.seed;
           }},
          {"d_general", [](RunConfig& c, auto& k, auto& v) { c.model.d_general = ParseSize(k, v); }},
          {"d_domain", [](RunConfig& c, auto& k, auto& v) { c.model.d_domain = ParseSize(k, v); }},
          {"d_enc", [](RunConfig& c, auto& k, auto& v) { c.model.d_enc = ParseSize(k, v); }},
          {"d_task", [](RunConfig& c, auto& k, auto& v) { c.model.d_task = ParseSize(k, v); }},
          {"d_route", [](RunConfig& c, auto& k, auto& v) { c.model.d_route = ParseSize(k, v); }},
          {"kernel_widths",
           [](RunConfig& c, auto& k, auto& v) {
             c.model.kernel_widths.clear();
             for (const auto& w : SplitComma(v)) c.model.kernel_widths.push_back(ParseSize(k, w));
           }},
          {"task_depth", [](RunConfig& c, auto& k, auto& v) { c.model.task_depth = ParseSize(k, v); }},
          {"task_width", [](RunConfig& c, auto& k, auto& v) { c.model.task_width = ParseSize(k, v); }},
          {"T", [](RunConfig& c, auto& k, auto& v) { c.model.iterations = ParseInt<int>(k, v); }},
          {"iter",
           [](RunConfig& c, auto& k, auto& v) { c.model.routing_iterations = ParseInt<int>(k, v); }},
          {"pe_mode",
           [](RunConfig& c, auto& k, auto& v) {
             auto m = ParsePeMode(v);
             if (!m) Bad(k, v, "add-both, add-source or off");
             c.model.pe_mode = *m;
           }},
          {"max_len", [](RunConfig& c, auto& k, auto& v) { c.model.max_len = ParseSize(k, v); }},
          {"dropout", [](RunConfig& c, auto& k, auto& v) { c.model.dropout = ParseDouble(k, v); }},
          {"trainable_embeddings",
           [](RunConfig& c, auto& k, auto& v) { c.model.trainable_embeddings = ParseBool(k, v); }},
          {"lambda1", [](RunConfig& c, auto& k, auto& v) { c.model.weights.ate = ParseDouble(k, v); }},
          {"lambda2", [](RunConfig& c, auto& k, auto& v) { c.model.weights.ote = ParseDouble(k, v); }},
          {"lambda3", [](RunConfig& c, auto& k, auto& v) { c.model.weights.asc = ParseDouble(k, v); }},
          {"lambda4", [](RunConfig& c, auto& k, auto& v) { c.model.weights.ddc = ParseDouble(k, v); }},
          {"lambda5", [](RunConfig& c, auto& k, auto& v) { c.model.weights.dsc = ParseDouble(k, v); }},
          {"ddc_injection",
           [](RunConfig& c, auto& k, auto& v) { c.model.flags.ddc_injection = ParseBool(k, v); }},
          {"dsc_injection",
           [](RunConfig& c, auto& k, auto& v) { c.model.flags.dsc_injection = ParseBool(k, v); }},
          {"coarse", [](RunConfig& c, auto& k, auto& v) { c.model.flags.coarse = ParseBool(k, v); }},
          {"ablate",
           [](RunConfig& c, auto& k, auto& v) {
             c.ablations.clear();
             for (const auto& name : SplitComma(v)) {
               auto a = ParseAblation(name);
               if (!a) {
                 std::string valid;
                 for (Ablation x : kAblations) valid += std::string(valid.empty() ? "" : ", ") +
                                                        std::string(AblationName(x));
                 throw ConfigError(k + ": unknown ablation '" + name + "' (valid: " + valid + ")");
               }
               c.ablations.push_back(*a);
             }
           }},
          {"epochs", [](RunConfig& c, auto& k, auto& v) { c.schedule.epochs = ParseInt<int>(k, v); }},
          {"pretrain_epochs",
           [](RunConfig& c, auto& k, auto& v) { c.schedule.pretrain_epochs = ParseInt<int>(k, v); }},
          {"alternation",
           [](RunConfig& c, auto& k, auto& v) { c.schedule.alternation = ParseInt<int>(k, v); }},
          {"batch_size",
           [](RunConfig& c, auto& k, auto& v) { c.schedule.batch_size = ParseSize(k, v); }},
          {"lr", [](RunConfig& c, auto& k, auto& v) { c.schedule.learning_rate = ParseDouble(k, v); }},
          {"clip_norm",
           [](RunConfig& c, auto& k, auto& v) { c.schedule.clip_norm = ParseDouble(k, v); }},
          {"patience", [](RunConfig& c, auto& k, auto& v) { c.schedule.patience = ParseInt<int>(k, v); }},
          {"target_accuracy",
           [](RunConfig& c, auto& k, auto& v) { c.schedule.target_accuracy = ParseDouble(k, v); }},
      };
  auto it = setters.find(key);
  if (it == setters.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second(*this, key, value);
}

void RunConfig::Validate() const {
  EffectiveModel().Validate();
  schedule.Validate();
  if (runs < 1) throw ConfigError("runs must be >= 1");
  if (!(dev_fraction >= 0.0 && dev_fraction < 1.0)) {
    throw ConfigError("dev_fraction must be in [0, 1)");
  }
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
}

ModelConfig RunConfig::EffectiveModel() const {
  ModelConfig m = model;
  for (Ablation a : ablations) ApplyAblation(m.flags, a);
  return m;
}

std::string RunConfig::Dump() const {
  std::ostringstream out;
  out << "# effective configuration\n";
  for (const auto& key : Keys()) {
    std::string value;
    if (const std::string* p = PathField(*this, key)) {
      value = *p;
    } else if (key.rfind("transfer.", 0) == 0) {
      value = model.flags.Enabled(*ParseDirection(key.substr(9))) ? "true" : "false";
    } else if (key == "output_dir") {
      value = output_dir;
    } else if (key == "dev_fraction") {
      value = FormatDouble(dev_fraction);
    } else if (key == "runs") {
      value = std::to_string(runs);
    } else if (key == "seed") {
      value = std::to_string(model.seed);
    } else if (key == "d_general") {
      value = std::to_string(model.d_general);
    } else if (key == "d_domain") {
      value = std::to_string(model.d_domain);
    } else if (key == "d_enc") {
      value = std::to_string(model.d_enc);
    } else if (key == "d_task") {
      value = std::to_string(model.d_task);
    } else if (key == "d_route") {
      value = std::to_string(model.d_route);
    } else if (key == "kernel_widths") {
      value = JoinSizes(model.kernel_widths);
    } else if (key == "task_depth") {
      value = std::to_string(model.task_depth);
    } else if (key == "task_width") {
      value = std::to_string(model.task_width);
    } else if (key == "T") {
      value = std::to_string(model.iterations);
    } else if (key == "iter") {
      value = std::to_string(model.routing_iterations);
    } else if (key == "pe_mode") {
      value = std::string(PeModeName(model.pe_mode));
    } else if (key == "max_len") {
      value = std::to_string(model.max_len);
    } else if (key == "dropout") {
      value = FormatDouble(model.dropout);
    } else if (key == "trainable_embeddings") {
      value = model.trainable_embeddings ? "true" : "false";
    } else if (key == "lambda1") {
      value = FormatDouble(model.weights.ate);
    } else if (key == "lambda2") {
      value = FormatDouble(model.weights.ote);
    } else if (key == "lambda3") {
      value = FormatDouble(model.weights.asc);
    } else if (key == "lambda4") {
      value = FormatDouble(model.weights.ddc);
    } else if (key == "lambda5") {
      value = FormatDouble(model.weights.dsc);
    } else if (key == "ddc_injection") {
      value = model.flags.ddc_injection ? "true" : "false";
    } else if (key == "dsc_injection") {
      value = model.flags.dsc_injection ? "true" : "false";
    } else if (key == "coarse") {
      value = model.flags.coarse ? "true" : "false";
    } else if (key == "ablate") {
      for (Ablation a : ablations) {
        value += (value.empty() ? "" : ",") + std::string(AblationName(a));
      }
    } else if (key == "epochs") {
      value = std::to_string(schedule.epochs);
    } else if (key == "pretrain_epochs") {
      value = std::to_string(schedule.pretrain_epochs);
    } else if (key == "alternation") {
      value = std::to_string(schedule.alternation);
    } else if (key == "batch_size") {
      value = std::to_string(schedule.batch_size);
    } else if (key == "lr") {
      value = FormatDouble(schedule.learning_rate);
    } else if (key == "clip_norm") {
      value = FormatDouble(schedule.clip_norm);
    } else if (key == "patience") {
      value = std::to_string(schedule.patience);
    } else if (key == "target_accuracy") {
      value = FormatDouble(schedule.target_accuracy);
    }
    out << key << " = " << value << '\n';
  }
  return out.str();
}

RunConfig ParseRunConfig(std::istream& in, const std::string& base_dir) {
  RunConfig config;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(number) + ": expected key = value");
    }
    const std::string key = Trim(line.substr(0, eq));
    std::string value = Trim(line.substr(eq + 1));
    if (IsPathKey(key)) value = Absolute(value, base_dir);
    try {
      config.Set(key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(number) + ": " + e.what());
    }
  }
  return config;
}

RunConfig LoadRunConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  return ParseRunConfig(in, fs::path(path).parent_path().string());
}

void ApplyOverride(RunConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override '" + assignment + "' is not key=value");
  }
  const std::string key = Trim(assignment.substr(0, eq));
  std::string value = Trim(assignment.substr(eq + 1));
  if (IsPathKey(key)) value = Absolute(value, "");
  config.Set(key, value);
}

EmbeddingTable BuildEmbeddings(const std::vector<std::string>& words,
                               const std::string& path, std::size_t dim,
                               std::uint64_t seed) {
  if (path.empty()) return RandomEmbeddings(words, dim, seed);
  const std::unordered_set<std::string> keep(words.begin(), words.end());
  const EmbeddingTable loaded = LoadEmbeddings(path, VocabPolicy{&keep});
  if (loaded.dim != 0 && loaded.dim != dim) {
    throw ConfigError("embeddings in " + path + " have dimension " +
                      std::to_string(loaded.dim) + ", config expects " + std::to_string(dim));
  }
  EmbeddingTable table = RandomEmbeddings(words, dim, seed);
  std::fill(table.matrix.begin() + dim, table.matrix.begin() + 2 * dim, 0.0f);  // unk
  std::size_t found = 0;
  for (std::size_t r = 2; r < table.rows(); ++r) {
    const auto& word = table.vocab.words()[r];
    if (!loaded.vocab.Contains(word)) continue;
    const std::size_t src = static_cast<std::size_t>(loaded.vocab.Lookup(word));
    std::copy_n(loaded.matrix.begin() + src * dim, dim, table.matrix.begin() + r * dim);
    ++found;
  }
  spdlog::info("{}: {} of {} words found", path, found, words.size());
  return table;
}

LoadedData LoadRunData(const RunConfig& config, const TagSchemes& schemes) {
  auto require = [](const std::string& field, const std::string& path) {
    if (path.empty()) throw ConfigError(field + " is not set");
    if (!fs::exists(path)) throw ConfigError(field + ": file not found: " + path);
  };
  auto optional = [&](const std::string& field, const std::string& path) {
    if (!path.empty()) require(field, path);
  };
  require("train_path", config.train_path);
  optional("train_adjacency", config.train_adjacency);
  optional("dev_path", config.dev_path);
  optional("dev_adjacency", config.dev_adjacency);
  optional("test_path", config.test_path);
  optional("test_adjacency", config.test_adjacency);
  optional("document_path", config.document_path);
  optional("general_embeddings", config.general_embeddings);
  optional("domain_embeddings", config.domain_embeddings);

  LoadedData data;
  data.train = LoadAspectCorpus(config.train_path, schemes);
  if (!config.train_adjacency.empty()) LoadAdjacency(config.train_adjacency, data.train);
  if (!config.dev_path.empty()) {
    data.dev = LoadAspectCorpus(config.dev_path, schemes);
    if (!config.dev_adjacency.empty()) LoadAdjacency(config.dev_adjacency, data.dev);
  } else if (config.dev_fraction > 0.0) {
    auto [train, dev] = DevSplit(data.train, config.dev_fraction, config.schedule.seed);
    data.train = std::move(train);
    data.dev = std::move(dev);
  }
  if (!config.test_path.empty()) {
    data.test = LoadAspectCorpus(config.test_path, schemes);
    if (!config.test_adjacency.empty()) LoadAdjacency(config.test_adjacency, data.test);
  }
  if (!config.document_path.empty()) {
    data.documents = LoadDocumentCorpus(config.document_path, schemes);
  }
  std::vector<Sentence> all = data.train;
  all.insert(all.end(), data.dev.begin(), data.dev.end());
  all.insert(all.end(), data.test.begin(), data.test.end());
  const auto words = CollectWords(all, data.documents);
  data.general = BuildEmbeddings(words, config.general_embeddings, config.model.d_general,
                                 config.model.seed);
  data.domain = BuildEmbeddings(words, config.domain_embeddings, config.model.d_domain,
                                config.model.seed + 1);
  AssignIds(data.train, data.general.vocab, data.domain.vocab);
  AssignIds(data.dev, data.general.vocab, data.domain.vocab);
  AssignIds(data.test, data.general.vocab, data.domain.vocab);
  AssignIds(data.documents, data.general.vocab, data.domain.vocab);
  return data;
}

}  // namespace iktn
