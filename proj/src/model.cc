#include "iktn/model.h"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>

namespace iktn {

// ---------------------------------------------------------------------------
// Flags and configuration

std::string_view AblationName(Ablation ablation) {
  switch (ablation) {
    case Ablation::kAspectTransfer: return "aspect-transfer";
    case Ablation::kOpinionTransfer: return "opinion-transfer";
    case Ablation::kSentimentTransfer: return "sentiment-transfer";
    case Ablation::kDdcTransfer: return "ddc-transfer";
    case Ablation::kDscTransfer: return "dsc-transfer";
    case Ablation::kCoarse: return "coarse";
  }
  return "?";
}

std::optional<Ablation> ParseAblation(std::string_view name) {
  for (Ablation a : kAblations) {
    if (AblationName(a) == name) return a;
  }
  return std::nullopt;
}

void ApplyAblation(TransferFlags& flags, Ablation ablation) {
  auto drop_source = [&](Task source) {
    for (std::size_t k = 0; k < kDirections.size(); ++k) {
      if (kDirections[k].source == source) flags.directions[k] = false;
    }
  };
  switch (ablation) {
    case Ablation::kAspectTransfer: drop_source(Task::kAte); break;
    case Ablation::kOpinionTransfer: drop_source(Task::kOte); break;
    case Ablation::kSentimentTransfer: drop_source(Task::kAsc); break;
    case Ablation::kDdcTransfer: flags.ddc_injection = false; break;
    case Ablation::kDscTransfer: flags.dsc_injection = false; break;
    case Ablation::kCoarse: flags.coarse = true; break;
  }
}

void ModelConfig::Validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (d_general == 0 || d_domain == 0 || d_enc == 0 || d_task == 0 || d_route == 0) {
    fail("all dimensions must be positive");
  }
  if (d_task % 2 != 0) fail("d_task must be even for positional encoding");
  if (kernel_widths.empty()) fail("kernel_widths must not be empty");
  for (std::size_t w : kernel_widths) {
    if (w % 2 == 0) fail("kernel widths must be odd, got " + std::to_string(w));
  }
  if (d_enc % kernel_widths.size() != 0) {
    fail("d_enc must be divisible by the number of kernel widths");
  }
  if (task_depth == 0) fail("task_depth must be >= 1");
  if (task_width % 2 == 0) fail("task_width must be odd");
  if (iterations < 1) fail("T must be >= 1");
  if (routing_iterations < 1) fail("iter must be >= 1");
  if (max_len == 0) fail("max_len must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must be in [0, 1)");
  for (double l : {weights.ate, weights.ote, weights.asc, weights.ddc, weights.dsc}) {
    if (!(l >= 0.0)) fail("loss weights must be non-negative");
  }
}

nlohmann::json ModelConfig::ToJson() const {
  nlohmann::json dirs = nlohmann::json::object();
  for (std::size_t k = 0; k < kDirections.size(); ++k) {
    dirs[kDirections[k].Name()] = flags.directions[k];
  }
  return {
      {"d_general", d_general},
      {"d_domain", d_domain},
      {"d_enc", d_enc},
      {"d_task", d_task},
      {"d_route", d_route},
      {"kernel_widths", kernel_widths},
      {"task_depth", task_depth},
      {"task_width", task_width},
      {"T", iterations},
      {"iter", routing_iterations},
      {"pe_mode", std::string(PeModeName(pe_mode))},
      {"max_len", max_len},
      {"dropout", dropout},
      {"trainable_embeddings", trainable_embeddings},
      {"flags",
       {{"directions", dirs},
        {"ddc_injection", flags.ddc_injection},
        {"dsc_injection", flags.dsc_injection},
        {"coarse", flags.coarse}}},
      {"loss_weights",
       {{"ate", weights.ate},
        {"ote", weights.ote},
        {"asc", weights.asc},
        {"ddc", weights.ddc},
        {"dsc", weights.dsc}}},
      {"seed", seed},
  };
}

ModelConfig ModelConfig::FromJson(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.d_general = j.at("d_general").get<std::size_t>();
    c.d_domain = j.at("d_domain").get<std::size_t>();
    c.d_enc = j.at("d_enc").get<std::size_t>();
    c.d_task = j.at("d_task").get<std::size_t>();
    c.d_route = j.at("d_route").get<std::size_t>();
    c.kernel_widths = j.at("kernel_widths").get<std::vector<std::size_t>>();
    c.task_depth = j.at("task_depth").get<std::size_t>();
    c.task_width = j.at("task_width").get<std::size_t>();
    c.iterations = j.at("T").get<int>();
    c.routing_iterations = j.at("iter").get<int>();
    auto pe = ParsePeMode(j.at("pe_mode").get<std::string>());
    if (!pe) throw ConfigError("unknown pe_mode in model config");
    c.pe_mode = *pe;
    c.max_len = j.at("max_len").get<std::size_t>();
    c.dropout = j.at("dropout").get<double>();
    c.trainable_embeddings = j.at("trainable_embeddings").get<bool>();
    const auto& f = j.at("flags");
    for (std::size_t k = 0; k < kDirections.size(); ++k) {
      c.flags.directions[k] = f.at("directions").at(kDirections[k].Name()).get<bool>();
    }
    c.flags.ddc_injection = f.at("ddc_injection").get<bool>();
    c.flags.dsc_injection = f.at("dsc_injection").get<bool>();
    c.flags.coarse = f.at("coarse").get<bool>();
    const auto& w = j.at("loss_weights");
    c.weights = {w.at("ate").get<double>(), w.at("ote").get<double>(),
                 w.at("asc").get<double>(), w.at("ddc").get<double>(),
                 w.at("dsc").get<double>()};
    c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed model config: ") + e.what());
  }
  c.Validate();
  return c;
}

// ---------------------------------------------------------------------------
// Span sentiment

int SpanSentiment(std::span<const int> asc_tags, Span span) {
  if (span.start >= span.end || span.end > static_cast<int>(asc_tags.size())) {
    throw ContractError("span outside the tag sequence");
  }
  std::map<int, int> counts;
  for (int i = span.start; i < span.end; ++i) ++counts[asc_tags[i]];
  int best = 0;
  for (const auto& [label, count] : counts) best = std::max(best, count);
  const int first = asc_tags[span.start];
  if (counts[first] == best) return first;
  for (int i = span.start; i < span.end; ++i) {
    if (counts[asc_tags[i]] == best) return asc_tags[i];
  }
  return first;
}

// ---------------------------------------------------------------------------
// Model

namespace {

template <typename T>
Tensor<T> TableTensor(const EmbeddingTable& table, bool trainable) {
  std::vector<T> data(table.matrix.begin(), table.matrix.end());
  return Tensor<T>::FromData({table.rows(), table.dim}, std::move(data), trainable);
}

std::string Prefixed(std::string_view head, Task task, std::string_view tail) {
  return std::string(head) + std::string(TaskName(task)) + std::string(tail);
}

}  // namespace

template <typename T>
Model<T>::Model(const ModelConfig& config, const EmbeddingTable& general,
                const EmbeddingTable& domain, TagSchemes schemes)
    : config_(config),
      schemes_(std::move(schemes)),
      general_vocab_(general.vocab),
      domain_vocab_(domain.vocab) {
  config_.Validate();
  if (general.dim != config_.d_general || domain.dim != config_.d_domain) {
    throw ConfigError("embedding dimensions do not match d_general/d_domain");
  }
  params_.set_name_seed(config_.seed);
  Rng rng(config_.seed);
  general_table_ = params_.Adopt("embed.general",
                                 TableTensor<T>(general, config_.trainable_embeddings));
  domain_table_ = params_.Adopt("embed.domain",
                                TableTensor<T>(domain, config_.trainable_embeddings));
  encoder_ = SharedEncoder<T>(params_, config_.kernel_widths,
                              config_.d_general + config_.d_domain, config_.d_enc, rng);
  for (Task task : kAllTasks) {
    task_layers_[TaskIndex(task)] =
        TaskLayer<T>(params_, task, config_.task_depth, config_.task_width,
                     config_.d_enc, config_.d_task, rng);
  }
  for (Task task : kAspectTasks) {
    decoders_[TaskIndex(task)] = TokenDecoder<T>(params_, task, config_.d_task,
                                                 schemes_.NumClasses(task), rng);
  }
  ddc_head_ = AttentionHead<T>(params_, Task::kDdc, config_.d_task,
                               schemes_.NumClasses(Task::kDdc), rng);
  dsc_head_ = AttentionHead<T>(params_, Task::kDsc, config_.d_task,
                               schemes_.NumClasses(Task::kDsc), rng);
  using Init = typename ParameterSet<T>::Init;
  for (std::size_t k = 0; k < kDirections.size(); ++k) {
    if (!config_.flags.directions[k]) continue;
    route_weights_[k] = params_.Create("route." + kDirections[k].Name() + ".W",
                                       {config_.d_task, config_.d_route},
                                       Init::kGlorot, rng);
  }
  const std::size_t c_dsc = schemes_.NumClasses(Task::kDsc);
  for (Task target : kAspectTasks) {
    const std::size_t k = TaskIndex(target);
    const auto incoming = Incoming(target);
    if (!incoming.empty()) {
      fuse_[k] = Affine<T>(params_, Prefixed("fuse.", target, ".proj"),
                           config_.d_task + incoming.size() * config_.d_route,
                           config_.d_task, rng);
    }
    if (!Aggregates(target)) continue;
    std::size_t in = config_.d_task + schemes_.NumClasses(target);
    for (const auto& d : incoming) in += schemes_.NumClasses(d.source);
    if (TakesDdc(target)) in += 1;
    if (TakesDsc(target)) in += c_dsc + 1;
    const char* f = target == Task::kAsc ? ".f2" : ".f1";
    aggregate_[k] = Affine<T>(params_, Prefixed("agg.", target, f), in, config_.d_task, rng);
  }
}

template <typename T>
template <typename U>
Model<T> Model<T>::Convert(const Model<U>& other) {
  auto table = [](const Vocabulary& vocab, const Tensor<U>& t) {
    EmbeddingTable e;
    e.vocab = vocab;
    e.dim = t.dim(1);
    e.matrix.assign(t.data().begin(), t.data().end());
    return e;
  };
  Model<T> out(other.config_, table(other.general_vocab_, other.general_table_),
               table(other.domain_vocab_, other.domain_table_), other.schemes_);
  for (const auto& [name, src] : other.params_.entries()) {
    auto dst = out.params_.Get(name).mutable_data();
    std::transform(src.data().begin(), src.data().end(), dst.begin(),
                   [](U v) { return static_cast<T>(v); });
  }
  return out;
}

template <typename T>
std::vector<Tensor<T>> Model<T>::TrainableParameters() const {
  std::vector<Tensor<T>> out;
  for (const auto& [name, t] : params_.entries()) {
    if (t.requires_grad()) out.push_back(t);
  }
  return out;
}

template <typename T>
std::vector<TransferDirection> Model<T>::Incoming(Task target) const {
  std::vector<TransferDirection> out;
  for (std::size_t k = 0; k < kDirections.size(); ++k) {
    if (config_.flags.directions[k] && kDirections[k].target == target) {
      out.push_back(kDirections[k]);
    }
  }
  return out;
}

template <typename T>
bool Model<T>::TakesDdc(Task target) const {
  if (!config_.flags.ddc_injection) return false;
  return config_.flags.coarse || target != Task::kAsc;
}

template <typename T>
bool Model<T>::TakesDsc(Task target) const {
  if (!config_.flags.dsc_injection) return false;
  return config_.flags.coarse || target == Task::kAsc;
}

template <typename T>
bool Model<T>::Aggregates(Task target) const {
  return !Incoming(target).empty() || TakesDdc(target) || TakesDsc(target);
}

template <typename T>
void Model<T>::AssignIds(std::vector<Sentence>& sentences) const {
  iktn::AssignIds(sentences, general_vocab_, domain_vocab_);
}

template <typename T>
void Model<T>::AssignIds(std::vector<Document>& documents) const {
  iktn::AssignIds(documents, general_vocab_, domain_vocab_);
}

template <typename T>
Tensor<T> Model<T>::Encode(Tape<T>& tape, const SequenceInput& input,
                           const RunMode& mode) const {
  if (input.valid_length() == 0) throw ContractError("empty input sequence");
  const bool drop = mode.train && config_.dropout > 0.0;
  if (drop && mode.rng == nullptr) throw ContractError("training mode needs an rng");
  Tensor<T> x = Concat<T>(
      tape,
      {EmbeddingLookup(tape, general_table_, input.general_ids, Vocabulary::kPad),
       EmbeddingLookup(tape, domain_table_, input.domain_ids, Vocabulary::kPad)},
      1);
  if (drop) x = Dropout(tape, x, config_.dropout, true, *mode.rng);
  Tensor<T> shared = encoder_.Encode(tape, x, input.mask);
  if (drop) shared = Dropout(tape, shared, config_.dropout, true, *mode.rng);
  return shared;
}

template <typename T>
IterationState<T> Model<T>::InitialState(Tape<T>& tape, const SequenceInput& input,
                                         const RunMode& mode) const {
  const Tensor<T> shared = Encode(tape, input, mode);
  IterationState<T> state;
  state.t = 0;
  for (Task task : kAspectTasks) {
    const std::size_t k = TaskIndex(task);
    state.h[k] = task_layers_[k].Apply(tape, shared, input.mask);
    state.y[k] = decoders_[k].Decode(tape, state.h[k]);
  }
  state.ddc = ddc_head_.Attend(
      tape, task_layers_[TaskIndex(Task::kDdc)].Apply(tape, shared, input.mask), input.mask);
  state.dsc = dsc_head_.Attend(
      tape, task_layers_[TaskIndex(Task::kDsc)].Apply(tape, shared, input.mask), input.mask);
  return state;
}

template <typename T>
IterationState<T> Model<T>::TransferAndAggregate(
    Tape<T>& tape, const IterationState<T>& state, const SequenceInput& input,
    std::vector<DirectionTrace>* traces) const {
  const std::size_t n = input.length();
  IterationState<T> next;
  next.t = state.t + 1;
  next.ddc = state.ddc;
  next.dsc = state.dsc;
  for (Task target : kAspectTasks) {
    const std::size_t k = TaskIndex(target);
    if (!Aggregates(target)) {
      next.h[k] = state.h[k];
      next.y[k] = state.y[k];
      continue;
    }
    const auto incoming = Incoming(target);
    Tensor<T> fused = state.h[k];
    if (!incoming.empty()) {
      std::vector<Tensor<T>> parts{state.h[k]};
      for (const auto& d : incoming) {
        const Tensor<T> votes =
            PredictVectors(tape, state.h[TaskIndex(d.source)],
                           route_weights_[DirectionIndex(d)], config_.pe_mode,
                           config_.max_len);
        auto routed = Route(tape, votes, input.adjacency, config_.routing_iterations,
                            input.mask, traces != nullptr);
        parts.push_back(routed.outputs);
        if (traces) traces->push_back({next.t, d, std::move(routed.trace)});
      }
      fused = fuse_[k].Apply(tape, Concat(tape, parts, 1));
    }
    std::vector<Tensor<T>> inputs{fused, state.y[k].probabilities};
    for (const auto& d : incoming) {
      inputs.push_back(state.y[TaskIndex(d.source)].probabilities);
    }
    if (TakesDdc(target)) inputs.push_back(Reshape(tape, state.ddc.weights, {n, 1}));
    if (TakesDsc(target)) {
      inputs.push_back(RepeatRows(tape, state.dsc.probabilities, n));
      inputs.push_back(Reshape(tape, state.dsc.weights, {n, 1}));
    }
    next.h[k] = MaskRows(
        tape, Relu(tape, aggregate_[k].Apply(tape, Concat(tape, inputs, 1))), input.mask);
    next.y[k] = decoders_[k].Decode(tape, next.h[k]);
  }
  return next;
}

template <typename T>
std::vector<IterationState<T>> Model<T>::Forward(Tape<T>& tape,
                                                 const SequenceInput& input,
                                                 const RunMode& mode,
                                                 std::vector<DirectionTrace>* traces) const {
  std::vector<IterationState<T>> states;
  states.reserve(config_.iterations + 1);
  states.push_back(InitialState(tape, input, mode));
  for (int t = 0; t < config_.iterations; ++t) {
    states.push_back(TransferAndAggregate(tape, states.back(), input, traces));
  }
  return states;
}

template <typename T>
DocumentOutput<T> Model<T>::DocumentForward(Tape<T>& tape, const SequenceInput& input,
                                            const RunMode& mode) const {
  const Tensor<T> shared = Encode(tape, input, mode);
  DocumentOutput<T> out;
  out.ddc = ddc_head_.Attend(
      tape, task_layers_[TaskIndex(Task::kDdc)].Apply(tape, shared, input.mask), input.mask);
  out.dsc = dsc_head_.Attend(
      tape, task_layers_[TaskIndex(Task::kDsc)].Apply(tape, shared, input.mask), input.mask);
  return out;
}

namespace {

template <typename T>
std::vector<int> RowArgmax(const Tensor<T>& probs, std::size_t rows) {
  const std::size_t k = probs.dim(1);
  std::vector<int> out(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    auto row = probs.data().subspan(i * k, k);
    out[i] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

}  // namespace

template <typename T>
SentencePrediction Model<T>::Predict(const Sentence& sentence) const {
  const std::size_t n = sentence.tokens.size();
  Tape<T> tape;
  const auto states = Forward(tape, PadSentence(sentence, n), RunMode{});
  const auto& last = states.back();
  SentencePrediction p;
  p.ate_tags = RowArgmax(last.prediction(Task::kAte).probabilities, n);
  p.ote_tags = RowArgmax(last.prediction(Task::kOte).probabilities, n);
  p.asc_tags = RowArgmax(last.prediction(Task::kAsc).probabilities, n);
  p.ate_spans = ExtractSpans(p.ate_tags);
  p.ote_spans = ExtractSpans(p.ote_tags);
  for (const Span& s : p.ate_spans) p.pairs.emplace_back(s, SpanSentiment(p.asc_tags, s));
  return p;
}

template class Model<float>;
template class Model<double>;
template Model<double> Model<double>::Convert(const Model<float>&);
template Model<float> Model<float>::Convert(const Model<double>&);

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[8] = {'I', 'K', 'T', 'N', 'C', 'K', 'P', '1'};

void PutU64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

std::uint64_t GetU64(const unsigned char* b) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

struct RawCheckpoint {
  nlohmann::json header;
  std::vector<unsigned char> payload;
};

RawCheckpoint ReadRaw(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw CheckpointError(path + " is not a checkpoint (bad magic)");
  }
  const std::uint64_t len = GetU64(bytes.data() + 8);
  if (len > bytes.size() - 16) throw CheckpointError(path + ": truncated header");
  RawCheckpoint raw;
  try {
    raw.header = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + len);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(path + ": bad header: " + e.what());
  }
  raw.payload.assign(bytes.begin() + 16 + len, bytes.end());
  const int version = raw.header.value("format_version", -1);
  if (version != kCheckpointVersion) {
    throw CheckpointError(path + ": checkpoint format version " + std::to_string(version) +
                          ", expected " + std::to_string(kCheckpointVersion));
  }
  return raw;
}

}  // namespace

void SaveCheckpoint(const Model<float>& model, const std::string& path) {
  nlohmann::json manifest = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : model.params().entries()) {
    manifest.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
    offset += t.size() * sizeof(float);
  }
  nlohmann::json header = {
      {"format_version", kCheckpointVersion},
      {"config", model.config().ToJson()},
      {"schemes", model.schemes().ToJson()},
      {"vocab",
       {{"general", model.general_vocab().words()},
        {"domain", model.domain_vocab().words()}}},
      {"tensors", manifest},
  };
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint " + path);
  out.write(kMagic, 8);
  PutU64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  std::vector<char> buf;
  for (const auto& [name, t] : model.params().entries()) {
    buf.resize(t.size() * 4);
    for (std::size_t i = 0; i < t.size(); ++i) {
      const std::uint32_t bits = std::bit_cast<std::uint32_t>(t.data()[i]);
      for (int b = 0; b < 4; ++b) buf[4 * i + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
  if (!out) throw CheckpointError("failed writing checkpoint " + path);
}

std::vector<std::pair<std::string, Shape>> ReadManifest(const std::string& path) {
  const RawCheckpoint raw = ReadRaw(path);
  std::vector<std::pair<std::string, Shape>> out;
  for (const auto& e : raw.header.at("tensors")) {
    out.emplace_back(e.at("name").get<std::string>(), e.at("shape").get<Shape>());
  }
  return out;
}

Model<float> LoadCheckpoint(const std::string& path) {
  const RawCheckpoint raw = ReadRaw(path);
  const auto& h = raw.header;
  ModelConfig config;
  TagSchemes schemes;
  EmbeddingTable general, domain;
  try {
    config = ModelConfig::FromJson(h.at("config"));
    schemes = TagSchemes::FromJson(h.at("schemes"));
    general.vocab = Vocabulary::FromWords(h.at("vocab").at("general"));
    domain.vocab = Vocabulary::FromWords(h.at("vocab").at("domain"));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(path + ": bad header: " + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(path + ": " + e.what());
  }
  general.dim = config.d_general;
  domain.dim = config.d_domain;
  general.matrix.assign(general.rows() * general.dim, 0.0f);
  domain.matrix.assign(domain.rows() * domain.dim, 0.0f);
  Model<float> model(config, general, domain, schemes);

  const auto& manifest = h.at("tensors");
  const auto& entries = model.params().entries();
  if (manifest.size() != entries.size()) {
    throw CheckpointError(path + ": manifest lists " + std::to_string(manifest.size()) +
                          " tensors, architecture has " + std::to_string(entries.size()));
  }
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const auto& [name, tensor] = entries[k];
    const auto& e = manifest[k];
    if (e.at("name").get<std::string>() != name || e.at("shape").get<Shape>() != tensor.shape()) {
      throw CheckpointError(path + ": tensor " + std::to_string(k) + " is " +
                            e.at("name").get<std::string>() + ", expected " + name + " " +
                            ShapeToString(tensor.shape()));
    }
    const std::uint64_t offset = e.at("offset").get<std::uint64_t>();
    if (offset + tensor.size() * 4 > raw.payload.size()) {
      throw CheckpointError(path + ": payload truncated at " + name);
    }
    auto dst = tensor.mutable_data();
    for (std::size_t i = 0; i < tensor.size(); ++i) {
      std::uint32_t bits = 0;
      for (int b = 3; b >= 0; --b) bits = (bits << 8) | raw.payload[offset + 4 * i + b];
      dst[i] = std::bit_cast<float>(bits);
    }
  }
  return model;
}

}  // namespace iktn
