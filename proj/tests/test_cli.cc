#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "iktn/cli.h"
#include "iktn/config.h"
#include "iktn/metrics.h"

using namespace iktn;
namespace fs = std::filesystem;

namespace {

// Runs the tool in-process and returns its exit code; stdout goes to `out`.
int Run(std::vector<std::string> args, std::string* out = nullptr) {
  args.insert(args.begin(), {"iktn", "-q"});
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream captured;
  auto* old = std::cout.rdbuf(captured.rdbuf());
  const int code = RunCli(static_cast<int>(argv.size()), argv.data());
  std::cout.rdbuf(old);
  if (out) *out = captured.str();
  return code;
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path Scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "iktn-test-cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const char* kConfig = "configs/synthetic.cfg";

// A short run shared by the checks that need a checkpoint.
const fs::path& Trained() {
  static const fs::path dir = [] {
    auto d = Scratch("trained");
    REQUIRE(Run({"train", "--config", kConfig, "--set", "epochs=4", "--output", d.string()}) ==
            kExitOk);
    return d;
  }();
  return dir;
}

}  // namespace

TEST_CASE("usage errors exit 2") {
  CHECK(Run({}) == kExitUsage);
  CHECK(Run({"frobnicate"}) == kExitUsage);
  CHECK(Run({"train"}) == kExitUsage);
  CHECK(Run({"train", "--config", kConfig, "--set", "no_such_key=1"}) == kExitUsage);
  CHECK(Run({"train", "--config", "does/not/exist.cfg"}) == kExitUsage);
  CHECK(Run({"ablate", "--config", kConfig, "--ablate", "nope"}) == kExitUsage);
  const auto dir = Scratch("missing");
  CHECK(Run({"train", "--config", kConfig, "--set", "train_path=", "--output", dir.string()}) ==
        kExitUsage);
  try {
    RunConfig c;
    LoadRunData(c);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("train_path") != std::string::npos);
  }
}

TEST_CASE("train writes the run layout and echoes overrides") {
  const auto& dir = Trained();
  for (const char* f : {"model.ckpt", "metrics.jsonl", "effective.cfg", "result.json"}) {
    CHECK(fs::exists(dir / f));
  }
  const auto echoed = Slurp(dir / "effective.cfg");
  CHECK(echoed.find("epochs = 4") != std::string::npos);

  std::ifstream log(dir / "metrics.jsonl");
  std::string line;
  int epochs = 0;
  while (std::getline(log, line)) {
    const auto j = nlohmann::json::parse(line);
    for (const char* key : {"epoch", "phase", "J_a", "J_d", "wall_time_s"}) CHECK(j.contains(key));
    ++epochs;
  }
  CHECK(epochs >= 4);

  const auto t_dir = Scratch("override");
  REQUIRE(Run({"train", "--config", kConfig, "--set", "epochs=1", "--set", "T=3", "--output",
               t_dir.string()}) == kExitOk);
  CHECK(LoadRunConfig((t_dir / "effective.cfg").string()).model.iterations == 3);
}

TEST_CASE("echoed config reproduces the run") {
  const auto& dir = Trained();
  const auto again = Scratch("refeed");
  REQUIRE(Run({"train", "--config", (dir / "effective.cfg").string(), "--output",
               again.string()}) == kExitOk);
  CHECK(Slurp(again / "model.ckpt") == Slurp(dir / "model.ckpt"));
  CHECK(nlohmann::json::parse(Slurp(again / "result.json"))["loss_trace"] ==
        nlohmann::json::parse(Slurp(dir / "result.json"))["loss_trace"]);
}

TEST_CASE("multiple runs and the output directory variable") {
  const auto env_dir = Scratch("env");
  ::setenv(kOutputDirEnv, env_dir.string().c_str(), 1);
  const int code = Run({"train", "--config", kConfig, "--set", "epochs=1", "--runs", "2"});
  ::unsetenv(kOutputDirEnv);
  REQUIRE(code == kExitOk);
  CHECK(fs::exists(env_dir / "run-1" / "model.ckpt"));
  CHECK(fs::exists(env_dir / "run-2" / "model.ckpt"));
  const auto summary = nlohmann::json::parse(Slurp(env_dir / "summary.json"));
  CHECK(summary.contains("mean"));
  CHECK(summary.contains("std"));
  CHECK(Slurp(env_dir / "run-1" / "model.ckpt") != Slurp(env_dir / "run-2" / "model.ckpt"));
}

TEST_CASE("eval prints matching table and json") {
  const auto ckpt = (Trained() / "model.ckpt").string();
  std::string out;
  REQUIRE(Run({"eval", "--checkpoint", ckpt, "--corpus", "data/synthetic/train.tsv",
               "--adjacency", "data/synthetic/train.adj"},
              &out) == kExitOk);
  std::istringstream in(out);
  std::string header, values, blank, json_line;
  std::getline(in, header);
  std::getline(in, values);
  CHECK(header.find("F1-a") < header.find("F1-o"));
  CHECK(header.find("F1-o") < header.find("F1-s"));
  CHECK(header.find("F1-s") < header.find("acc-s"));
  CHECK(header.find("acc-s") < header.find("F1-I"));
  while (std::getline(in, json_line) && json_line.empty()) {
  }
  const auto j = nlohmann::json::parse(json_line);
  std::istringstream row(values);
  for (const char* key : {"F1-a", "F1-o", "F1-s", "acc-s", "F1-I"}) {
    double v = 0;
    row >> v;
    CHECK(v == j[key].get<double>());
  }

  SUBCASE("predict output scores the same") {
    std::string jsonl;
    REQUIRE(Run({"predict", "--checkpoint", ckpt, "--corpus", "data/synthetic/train.tsv",
                 "--adjacency", "data/synthetic/train.adj"},
                &jsonl) == kExitOk);
    std::istringstream pin(jsonl);
    const TagSchemes schemes;
    const auto preds = ReadPredictions(pin, schemes.asc);
    const auto gold_sentences = LoadAspectCorpus("data/synthetic/train.tsv", schemes);
    std::vector<PredictionRecord> gold;
    for (const auto& s : gold_sentences) gold.push_back(GoldRecord(s));
    CHECK(Evaluate(preds, gold).ToJson() == j);
  }
}

TEST_CASE("eval data errors") {
  const auto ckpt = (Trained() / "model.ckpt").string();
  const auto dir = Scratch("evaldata");
  std::ofstream(dir / "empty.tsv") << "";
  std::string out;
  REQUIRE(Run({"eval", "--checkpoint", ckpt, "--corpus", (dir / "empty.tsv").string()}, &out) ==
          kExitOk);
  const auto j = nlohmann::json::parse(out.substr(out.rfind('{', out.find("\"F1-I\""))));
  for (const char* key : {"F1-a", "F1-o", "F1-s", "acc-s", "F1-I"}) CHECK(j[key] == 0.0);

  std::ofstream(dir / "bad.tsv") << "food\tBA\tO\tmeh\n\n";
  CHECK(Run({"eval", "--checkpoint", ckpt, "--corpus", (dir / "bad.tsv").string()}) ==
        kExitData);
  std::ofstream(dir / "junk.ckpt") << "not a checkpoint";
  CHECK(Run({"eval", "--checkpoint", (dir / "junk.ckpt").string(), "--corpus",
             "data/synthetic/train.tsv"}) == kExitData);
}

TEST_CASE("ablate removes the named parameters") {
  const auto dir = Scratch("ablate");
  REQUIRE(Run({"ablate", "--config", kConfig, "--ablate", "opinion-transfer", "--set",
               "epochs=1", "--output", dir.string()}) == kExitOk);
  const auto manifest = ReadManifest((dir / "model.ckpt").string());
  bool any_route = false;
  for (const auto& [name, shape] : manifest) {
    CHECK(name.rfind("route.ote_to_", 0) != 0);
    any_route = any_route || name.rfind("route.", 0) == 0;
  }
  CHECK(any_route);
}

TEST_CASE("trace export") {
  const auto ckpt = (Trained() / "model.ckpt").string();
  std::string out;
  CHECK(Run({"trace", "--checkpoint", ckpt, "--corpus", "data/synthetic/train.tsv",
             "--direction", "sideways"}) == kExitUsage);
  REQUIRE(Run({"trace", "--checkpoint", ckpt, "--corpus", "data/synthetic/train.tsv",
               "--adjacency", "data/synthetic/train.adj", "--direction", "ote_to_asc"},
              &out) == kExitOk);
  const auto j = nlohmann::json::parse(out);
  CHECK(j["direction"] == "ote_to_asc");
  REQUIRE(j["sentences"].size() == 50);
  for (const auto& s : j["sentences"]) {
    CHECK(s["steps"].size() == 2);
    for (const auto& step : s["steps"]) {
      CHECK(step["iterations"].size() == 3);
      for (const auto& it : step["iterations"]) {
        const std::size_t n = it["n"].get<std::size_t>();
        CHECK(n == s["tokens"].size());
        const auto c = it["c"].get<std::vector<double>>();
        REQUIRE(c.size() == n * n);
        for (std::size_t i = 0; i < n; ++i) {
          double sum = 0;
          for (std::size_t k = 0; k < n; ++k) sum += c[i * n + k];
          CHECK(std::abs(sum - 1.0) < 1e-6);
        }
      }
    }
  }

  const auto dir = Scratch("trace1");
  std::ofstream(dir / "one.tsv") << "great\tO\tBP\t_\n\n";
  REQUIRE(Run({"trace", "--checkpoint", ckpt, "--corpus", (dir / "one.tsv").string(),
               "--direction", "ate_to_ote"},
              &out) == kExitOk);
  for (const auto& step : nlohmann::json::parse(out)["sentences"][0]["steps"]) {
    for (const auto& it : step["iterations"]) CHECK(it["c"] == nlohmann::json::array({1.0}));
  }
}

TEST_CASE("gradcheck command") {
  std::string out;
  REQUIRE(Run({"gradcheck", "--max-entries", "3"}, &out) == kExitOk);
  const auto j = nlohmann::json::parse(out);
  std::set<std::string> names;
  for (const auto& e : j["parameters"]) CHECK(names.insert(e["name"].get<std::string>()).second);
  CHECK(names.count("route.asc_to_ote.W") == 1);
  CHECK(names.count("head.dsc.attn") == 1);
  CHECK(Run({"gradcheck", "--max-entries", "3", "--corrupt", "squash"}, &out) == kExitNumeric);
  CHECK(Run({"gradcheck", "--corrupt", "everything"}) == kExitUsage);
  CHECK(Run({"gradcheck", "--step", "0"}) == kExitUsage);

  // Seed 1 puts some perturbations across a Relu kink: only tensors with kink
  // crossings fail at the default step, and a small step clears them.
  REQUIRE(Run({"gradcheck", "--seed", "1"}, &out) == kExitNumeric);
  for (const auto& e : nlohmann::json::parse(out)["parameters"]) {
    if (!e["pass"].get<bool>()) CHECK(e["kink_crossings"].get<int>() > 0);
  }
  CHECK(Run({"gradcheck", "--seed", "1", "--step", "1e-5"}) == kExitOk);
}

TEST_CASE("gen-synth is deterministic") {
  const auto a = Scratch("synth-a"), b = Scratch("synth-b");
  REQUIRE(Run({"gen-synth", "--output", a.string(), "--seed", "7", "--sentences", "50",
               "--documents", "40"}) == kExitOk);
  REQUIRE(Run({"gen-synth", "--output", b.string(), "--seed", "7", "--sentences", "50",
               "--documents", "40"}) == kExitOk);
  for (const char* f : {"train.tsv", "train.adj", "documents.jsonl"}) {
    CHECK(Slurp(a / f) == Slurp(b / f));
    CHECK(Slurp(a / f) == Slurp(fs::path("data/synthetic") / f));
  }
}
