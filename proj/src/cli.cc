#include "iktn/cli.h"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "iktn/synth.h"

namespace iktn {

namespace fs = std::filesystem;

namespace {

std::ofstream OpenOut(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

std::string ValidAblations() {
  std::string out;
  for (Ablation a : kAblations) out += (out.empty() ? "" : ", ") + std::string(AblationName(a));
  return out;
}

std::string ValidDirections() {
  std::string out;
  for (const auto& d : kDirections) out += (out.empty() ? "" : ", ") + d.Name();
  return out;
}

nlohmann::json ResultJson(const TrainResult& r) {
  nlohmann::json j = {{"epochs_run", r.epochs_run},
                      {"best_epoch", r.best_epoch},
                      {"best_f1_i", r.best_f1_i},
                      {"train_accuracy",
                       {{"ate", r.train_accuracy[0]},
                        {"ote", r.train_accuracy[1]},
                        {"asc", r.train_accuracy[2]}}},
                      {"steps", r.loss_trace.size()}};
  j["target_epoch"] = r.target_epoch ? nlohmann::json(*r.target_epoch) : nlohmann::json(nullptr);
  return j;
}

// Shared by train and ablate.
struct TrainArgs {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<int> runs;
  std::optional<std::uint64_t> seed;
  std::string output;
};

void AddTrainOptions(CLI::App* cmd, TrainArgs& args) {
  cmd->add_option("--config", args.config, "run config file")->required();
  cmd->add_option("--set", args.overrides, "override, key=value (repeatable)");
  cmd->add_option("--runs", args.runs, "independent runs with consecutive seeds");
  cmd->add_option("--seed", args.seed, "base seed");
  cmd->add_option("--output", args.output, "output directory");
}

RunConfig ResolveConfig(const TrainArgs& args) {
  RunConfig config = LoadRunConfig(args.config);
  for (const auto& o : args.overrides) ApplyOverride(config, o);
  if (args.runs) config.runs = *args.runs;
  if (args.seed) {
    config.model.seed = *args.seed;
    config.schedule.seed = *args.seed;
  }
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) config.output_dir = env;
  if (!args.output.empty()) config.output_dir = args.output;
  config.Validate();
  return config;
}

double Mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double SampleStd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = Mean(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

int CmdTrain(RunConfig config) {
  const fs::path root(config.output_dir);
  fs::create_directories(root);
  OpenOut(root / "effective.cfg") << config.Dump();

  static constexpr std::array<const char*, 5> kNames = {"F1-a", "F1-o", "F1-s", "acc-s", "F1-I"};
  std::array<std::vector<double>, 5> scores;
  nlohmann::json runs = nlohmann::json::array();
  for (int k = 0; k < config.runs; ++k) {
    RunConfig run = config;
    run.runs = 1;
    run.model.seed = config.model.seed + static_cast<std::uint64_t>(k);
    run.schedule.seed = config.schedule.seed + static_cast<std::uint64_t>(k);
    const fs::path dir = config.runs == 1 ? root : root / ("run-" + std::to_string(k + 1));
    run.output_dir = dir.string();
    spdlog::info("run {}/{} seed {} -> {}", k + 1, config.runs, run.model.seed, dir.string());
    const RunOutcome outcome = TrainRun(run, dir.string());
    const auto shown = outcome.final_eval.Displayed();
    for (std::size_t m = 0; m < 5; ++m) scores[m].push_back(shown[m]);
    runs.push_back({{"seed", run.model.seed}, {"dir", dir.string()},
                    {"metrics", outcome.final_eval.ToJson()}});
  }

  nlohmann::json summary = {{"runs", runs}, {"mean", nlohmann::json::object()},
                            {"std", nlohmann::json::object()}};
  std::cout << "metric    mean      std\n";
  for (std::size_t m = 0; m < 5; ++m) {
    summary["mean"][kNames[m]] = Mean(scores[m]);
    summary["std"][kNames[m]] = SampleStd(scores[m]);
    std::cout << fmt::format("{:<8}  {:.4f}  {:.4f}\n", kNames[m], Mean(scores[m]),
                             SampleStd(scores[m]));
  }
  OpenOut(root / "summary.json") << summary.dump(2) << '\n';
  return kExitOk;
}

int CmdEval(const std::string& checkpoint, const std::string& corpus,
            const std::string& adjacency) {
  const Model<float> model = LoadCheckpoint(checkpoint);
  const auto sentences = LoadCorpusForModel(model, corpus, adjacency);
  if (sentences.empty()) spdlog::warn("{} holds no sentences; all scores are zero", corpus);
  const EvalReport report = EvaluateModel(model, sentences);
  std::cout << report.Table() << '\n' << report.ToJson().dump() << '\n';
  return kExitOk;
}

int CmdPredict(const std::string& checkpoint, const std::string& corpus,
               const std::string& adjacency, const std::string& output) {
  const Model<float> model = LoadCheckpoint(checkpoint);
  const auto sentences = LoadCorpusForModel(model, corpus, adjacency);
  const auto records = PredictCorpus(model, sentences);
  if (output.empty()) {
    WritePredictions(std::cout, records, model.schemes().asc);
  } else {
    auto out = OpenOut(output);
    WritePredictions(out, records, model.schemes().asc);
  }
  return kExitOk;
}

int CmdTrace(const std::string& checkpoint, const std::string& corpus,
             const std::string& adjacency, const std::string& direction,
             const std::string& output) {
  const auto d = ParseDirection(direction);
  if (!d) {
    throw ConfigError("unknown direction '" + direction + "' (valid: " + ValidDirections() + ")");
  }
  const Model<float> model = LoadCheckpoint(checkpoint);
  const auto sentences = LoadCorpusForModel(model, corpus, adjacency);
  const auto trace = TraceCorpus(model, sentences, *d);
  if (output.empty()) {
    std::cout << trace.dump() << '\n';
  } else {
    OpenOut(output) << trace.dump() << '\n';
  }
  return kExitOk;
}

int CmdGradcheck(const std::string& config_path, const std::vector<std::string>& overrides,
                 const std::string& corrupt, std::size_t max_entries, double step,
                 std::optional<std::uint64_t> seed, const std::string& output) {
  ModelConfig model = GradcheckModelConfig();
  if (!config_path.empty() || !overrides.empty()) {
    RunConfig run;
    if (!config_path.empty()) run = LoadRunConfig(config_path);
    else run.model = model;
    for (const auto& o : overrides) ApplyOverride(run, o);
    model = run.EffectiveModel();
  }
  if (seed) model.seed = *seed;
  GradcheckOptions options;
  options.max_entries = max_entries;
  options.seed = model.seed;
  if (!(step > 0.0)) throw ConfigError("--step must be positive");
  options.step = step;
  if (!corrupt.empty() && corrupt != "squash") {
    throw ConfigError("--corrupt supports only 'squash', got '" + corrupt + "'");
  }
  testing_hooks::SetCorruptSquashBackward(corrupt == "squash");
  GradcheckReport report;
  try {
    report = RunGradcheck(model, options);
  } catch (...) {
    testing_hooks::SetCorruptSquashBackward(false);
    throw;
  }
  testing_hooks::SetCorruptSquashBackward(false);

  const auto json = report.ToJson().dump(2);
  if (!output.empty()) OpenOut(output) << json << '\n';
  std::cout << json << '\n';
  if (report.AllPass()) {
    spdlog::info("gradcheck passed: {} tensors in {:.2f}s", report.entries.size(),
                 report.seconds);
    return kExitOk;
  }
  std::string failing;
  for (const auto& e : report.entries) {
    if (e.pass) continue;
    failing += fmt::format("{}{} (rel {:.3g}, {} kink crossings)", failing.empty() ? "" : ", ",
                           e.name, e.relative_error, e.kink_crossings);
  }
  spdlog::error("gradcheck failed for: {}", failing);
  return kExitNumeric;
}

int CmdGenSynth(const std::string& output, const SynthOptions& options) {
  WriteSynthetic(GenerateSynthetic(options), output);
  spdlog::info("wrote {} sentences and {} documents to {}", options.sentences,
               options.documents, output);
  return kExitOk;
}

}  // namespace

std::vector<Sentence> LoadCorpusForModel(const Model<float>& model, const std::string& path,
                                         const std::string& adjacency) {
  if (!fs::exists(path)) throw ConfigError("corpus file not found: " + path);
  auto sentences = LoadAspectCorpus(path, model.schemes());
  if (!adjacency.empty()) {
    if (!fs::exists(adjacency)) throw ConfigError("adjacency file not found: " + adjacency);
    LoadAdjacency(adjacency, sentences);
  }
  model.AssignIds(sentences);
  return sentences;
}

nlohmann::json TraceCorpus(const Model<float>& model, const std::vector<Sentence>& sentences,
                           TransferDirection direction) {
  nlohmann::json out = {{"direction", direction.Name()},
                        {"sentences", nlohmann::json::array()}};
  if (!model.config().flags.Enabled(direction)) {
    spdlog::warn("direction {} is disabled in this model; no couplings to trace",
                 direction.Name());
  }
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    const Sentence& sentence = sentences[s];
    const SequenceInput input = PadSentence(sentence, sentence.tokens.size());
    Tape<float> tape;
    std::vector<DirectionTrace> traces;
    model.Forward(tape, input, RunMode{}, &traces);
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& t : traces) {
      if (!(t.direction == direction)) continue;
      nlohmann::json step = AgreementTrace(direction, sentence.tokens, t.snapshots);
      steps.push_back({{"step", t.step}, {"iterations", step["iterations"]}});
    }
    out["sentences"].push_back({{"index", s},
                                {"tokens", sentence.tokens},
                                {"rows", "source"},
                                {"columns", "target"},
                                {"steps", steps}});
  }
  return out;
}

ModelConfig GradcheckModelConfig() {
  ModelConfig c;
  c.d_general = 6;
  c.d_domain = 4;
  c.d_enc = 6;
  c.d_task = 6;
  c.d_route = 6;
  c.kernel_widths = {3, 5};
  c.task_depth = 2;
  c.task_width = 3;
  c.iterations = 2;
  c.routing_iterations = 2;
  c.dropout = 0.0;
  c.trainable_embeddings = true;
  // First seed whose check point keeps every Relu input more than one step
  // away from zero, so no difference quotient straddles a kink.
  c.seed = 16;
  return c;
}

Sentence GradcheckSentence() {
  Sentence s;
  s.tokens = {"the", "pizza", "was", "great"};
  s.ate = {kOutside, kBegin, kOutside, kOutside};
  s.ote = {kOutside, kOutside, kOutside, kBegin};
  s.asc = {-1, 0, -1, -1};
  s.adjacency = {1, 1, 0, 0,  //
                 1, 1, 1, 0,  //
                 0, 1, 1, 1,  //
                 0, 0, 1, 1};
  return s;
}

Document GradcheckDocument() {
  Document d;
  d.sentences = {{"the", "staff", "was", "awful"}, {"great", "pizza"}};
  d.domain = 1;
  d.sentiment = 1;
  return d;
}

GradcheckReport RunGradcheck(const ModelConfig& config, const GradcheckOptions& options) {
  std::vector<Sentence> sentences = {GradcheckSentence()};
  std::vector<Document> documents = {GradcheckDocument()};
  const auto words = CollectWords(sentences, documents);
  const EmbeddingTable general = RandomEmbeddings(words, config.d_general, config.seed);
  const EmbeddingTable domain = RandomEmbeddings(words, config.d_domain, config.seed + 1);
  const Model<double> model(config, general, domain);
  model.AssignIds(sentences);
  model.AssignIds(documents);
  return GradcheckModel(model, sentences.front(), &documents.front(), options);
}

RunOutcome TrainRun(const RunConfig& config, const std::string& dir) {
  fs::create_directories(dir);
  OpenOut(fs::path(dir) / "effective.cfg") << config.Dump();
  LoadedData data = LoadRunData(config);
  spdlog::info("train {} dev {} test {} documents {}", data.train.size(), data.dev.size(),
               data.test.size(), data.documents.size());
  Model<float> model(config.EffectiveModel(), data.general, data.domain);

  RunOutcome outcome;
  {
    auto log = OpenOut(fs::path(dir) / "metrics.jsonl");
    outcome.result = Train(model, data.train, data.dev, data.documents, config.schedule, &log);
  }
  SaveCheckpoint(model, (fs::path(dir) / "model.ckpt").string());

  nlohmann::json result = ResultJson(outcome.result);
  if (!data.test.empty()) {
    outcome.test = EvaluateModel(model, data.test);
    OpenOut(fs::path(dir) / "report.json") << outcome.test->ToJson().dump(2) << '\n';
    std::cout << outcome.test->Table() << '\n';
    outcome.final_eval = *outcome.test;
    result["evaluated_on"] = "test";
  } else if (!data.dev.empty()) {
    outcome.final_eval = EvaluateModel(model, data.dev);
    result["evaluated_on"] = "dev";
  } else {
    outcome.final_eval = EvaluateModel(model, data.train);
    result["evaluated_on"] = "train";
  }
  result["metrics"] = outcome.final_eval.ToJson();
  OpenOut(fs::path(dir) / "result.json") << result.dump(2) << '\n';
  return outcome;
}

int RunCli(int argc, char** argv) {
  CLI::App app{"Iterative knowledge transfer network for aspect-based sentiment analysis"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "only log warnings and errors");

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "train one or more runs from a config");
  AddTrainOptions(train, train_args);

  TrainArgs ablate_args;
  std::string ablation;
  auto* ablate = app.add_subcommand("ablate", "train with one knowledge path removed");
  AddTrainOptions(ablate, ablate_args);
  ablate->add_option("--ablate", ablation, "one of: " + ValidAblations())->required();

  std::string checkpoint, corpus, adjacency, output;
  auto* eval = app.add_subcommand("eval", "score a checkpoint on an annotated corpus");
  auto* predict = app.add_subcommand("predict", "write span predictions as JSONL");
  std::string direction;
  auto* trace = app.add_subcommand("trace", "export routing coupling matrices as JSON");
  for (auto* cmd : {eval, predict, trace}) {
    cmd->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
    cmd->add_option("--corpus", corpus, "aspect corpus (TSV)")->required();
    cmd->add_option("--adjacency", adjacency, "adjacency sidecar");
  }
  predict->add_option("--output", output, "output file (default stdout)");
  trace->add_option("--output", output, "output file (default stdout)");
  trace->add_option("--direction", direction, "one of: " + ValidDirections())->required();

  std::string gc_config, corrupt;
  std::vector<std::string> gc_overrides;
  std::size_t max_entries = 0;
  double gc_step = GradcheckOptions{}.step;
  std::optional<std::uint64_t> gc_seed;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient check");
  gradcheck->add_option("--config", gc_config, "model settings (data paths are ignored)");
  gradcheck->add_option("--set", gc_overrides, "override, key=value (repeatable)");
  gradcheck->add_option("--corrupt", corrupt, "inject a fault: squash");
  gradcheck->add_option("--max-entries", max_entries, "entries checked per tensor, 0 = all");
  gradcheck->add_option("--step", gc_step, "central-difference step");
  gradcheck->add_option("--seed", gc_seed, "model seed");
  gradcheck->add_option("--output", output, "also write the report here");

  SynthOptions synth;
  std::string synth_dir;
  auto* gen = app.add_subcommand("gen-synth", "write the synthetic corpus");
  gen->add_option("--output", synth_dir, "output directory")->required();
  gen->add_option("--seed", synth.seed, "generator seed");
  gen->add_option("--sentences", synth.sentences, "aspect sentences");
  gen->add_option("--documents", synth.documents, "documents");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  if (!spdlog::get("iktn")) spdlog::set_default_logger(spdlog::stderr_color_mt("iktn"));
  spdlog::set_level(quiet ? spdlog::level::warn : spdlog::level::info);

  try {
    if (*train) return CmdTrain(ResolveConfig(train_args));
    if (*ablate) {
      const auto a = ParseAblation(ablation);
      if (!a) {
        throw ConfigError("unknown ablation '" + ablation + "' (valid: " + ValidAblations() +
                          ")");
      }
      RunConfig config = ResolveConfig(ablate_args);
      config.ablations.push_back(*a);
      config.Validate();
      return CmdTrain(config);
    }
    if (*eval) return CmdEval(checkpoint, corpus, adjacency);
    if (*predict) return CmdPredict(checkpoint, corpus, adjacency, output);
    if (*trace) return CmdTrace(checkpoint, corpus, adjacency, direction, output);
    if (*gradcheck) {
      return CmdGradcheck(gc_config, gc_overrides, corrupt, max_entries, gc_step, gc_seed,
                          output);
    }
    if (*gen) return CmdGenSynth(synth_dir, synth);
  } catch (const ConfigError& e) {
    spdlog::error("{}", e.what());
    return kExitUsage;
  } catch (const DataError& e) {
    spdlog::error("{}", e.what());
    return kExitData;
  } catch (const NumericalError& e) {
    spdlog::error("{}", e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return kExitUsage;
}

}  // namespace iktn
