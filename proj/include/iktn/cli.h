#ifndef IKTN_CLI_H_
#define IKTN_CLI_H_

#include <optional>
#include <string>
#include <vector>

#include "iktn/config.h"
#include "iktn/model.h"
#include "iktn/training.h"
#include "json.hpp"

namespace iktn {

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;     // bad arguments or config
inline constexpr int kExitData = 3;      // unreadable or incompatible data
inline constexpr int kExitNumeric = 4;   // non-finite values, failed gradcheck

// Environment variable that replaces the configured output directory.
inline constexpr const char* kOutputDirEnv = "IKTN_OUTPUT_DIR";

int RunCli(int argc, char** argv);

// Aspect corpus read with the model's label schemes, ids assigned.
std::vector<Sentence> LoadCorpusForModel(const Model<float>& model, const std::string& path,
                                         const std::string& adjacency = "");

// Coupling matrices of `direction` for each sentence at every transfer step:
// {direction, sentences: [{index, tokens, steps: [{step, iterations}]}]}.
nlohmann::json TraceCorpus(const Model<float>& model, const std::vector<Sentence>& sentences,
                           TransferDirection direction);

// The small model and 4-token sentence the gradcheck command uses when no
// config is given.
ModelConfig GradcheckModelConfig();
Sentence GradcheckSentence();
Document GradcheckDocument();
// Builds a double model for `config` over the gradcheck sentence and
// document vocabulary and checks it.
GradcheckReport RunGradcheck(const ModelConfig& config, const GradcheckOptions& options);

// Trains one run of `config` into `dir`: model.ckpt, metrics.jsonl,
// effective.cfg, result.json and, with a test set, report.json.
struct RunOutcome {
  TrainResult result;
  std::optional<EvalReport> test;
  EvalReport final_eval;  // test when present, else dev, else train
};
RunOutcome TrainRun(const RunConfig& config, const std::string& dir);

}  // namespace iktn

#endif  // IKTN_CLI_H_
