#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

// Paths injected by the build: the binary under test and the shipped configs.
#ifndef UVSDMA_CLI_PATH
#error "UVSDMA_CLI_PATH must be defined"
#endif
#ifndef CONFIGS_DIR
#error "CONFIGS_DIR must be defined"
#endif

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

struct CommandResult {
  int code = -1;
  std::string output;
};

/// Runs a shell command, capturing interleaved stdout and stderr.
CommandResult run_command(const std::string& command) {
  const std::string full = command + " 2>&1";
  FILE* pipe = popen(full.c_str(), "r");
  REQUIRE(pipe != nullptr);
  CommandResult result;
  char buffer[4096];
  std::size_t n = 0;
  while ((n = std::fread(buffer, 1, sizeof buffer, pipe)) > 0) result.output.append(buffer, n);
  const int status = pclose(pipe);
  result.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

/// Fresh working directory for one test, removed when it goes out of scope.
struct WorkDir {
  fs::path path;
  explicit WorkDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("uvsdma_cli_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~WorkDir() {
    std::error_code ignored;
    fs::remove_all(path, ignored);
  }
  std::string in(const std::string& name) const { return (path / name).string(); }
};

std::string cli() { return std::string(UVSDMA_CLI_PATH); }

std::string configs(const std::string& name) {
  return (fs::path(CONFIGS_DIR) / name).string();
}

std::string read_file(const fs::path& path) {
  std::ifstream stream(path, std::ios::binary);
  REQUIRE(stream.good());
  std::ostringstream buffer;
  buffer << stream.rdbuf();
  return buffer.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream stream(path, std::ios::binary | std::ios::trunc);
  REQUIRE(stream.good());
  stream << content;
}

/// Report document with the wall-clock section blanked.
Json body_of(const fs::path& report_path) {
  Json doc = Json::parse(read_file(report_path));
  doc["runtime"] = Json::object();
  return doc;
}

const char* kSmallPair = R"({
  "schema_version": 1, "kind": "detect2", "name": "pair-small", "seed": 808,
  "gains_a": [8, 3, 0.5], "gains_b": [0.5, 2, 6], "noise": 1, "symbols": 20000
})";

const char* kSmallMulti = R"({
  "schema_version": 1, "kind": "multiuser", "name": "multi-small", "seed": 909,
  "scenarios": [{"desired": 4, "interferers": [3], "noise": 1}], "symbols": 10000
})";

}  // namespace

TEST_CASE("version and help exit cleanly") {
  const CommandResult version = run_command(cli() + " --version");
  CHECK(version.code == 0);
  CHECK(version.output.find("1.0.0") != std::string::npos);

  const CommandResult help = run_command(cli() + " --help");
  CHECK(help.code == 0);
  CHECK(help.output.find("detect2") != std::string::npos);
  CHECK(help.output.find("validate") != std::string::npos);

  const CommandResult sub_help = run_command(cli() + " detect2 --help");
  CHECK(sub_help.code == 0);
  CHECK(sub_help.output.find("--config") != std::string::npos);
}

TEST_CASE("usage errors exit with the config code") {
  // No subcommand, unknown flag, missing required config path.
  CHECK(run_command(cli()).code == 2);
  CHECK(run_command(cli() + " detect2 --wat").code == 2);
  CHECK(run_command(cli() + " detect2").code == 2);
  CHECK(run_command(cli() + " detect2 --format yaml -c x.json").code == 2);
}

TEST_CASE("every shipped config validates without running") {
  for (const char* name : {"gaussfit.json", "estimate_table.json", "pilot_search.json",
                           "detect2.json", "multiuser.json", "timing.json"}) {
    const CommandResult result = run_command(cli() + " validate " + configs(name));
    CAPTURE(name);
    CAPTURE(result.output);
    CHECK(result.code == 0);
    CHECK(result.output.find("valid") != std::string::npos);
  }
}

TEST_CASE("validation failures carry the offending field and exit 2") {
  WorkDir work("badcfg");
  write_file(work.in("missing_kind.json"), R"({"schema_version":1,"name":"x","seed":1})");
  const CommandResult missing = run_command(cli() + " validate " + work.in("missing_kind.json"));
  CHECK(missing.code == 2);
  CHECK(missing.output.find("kind") != std::string::npos);

  write_file(work.in("unknown_key.json"), R"({
    "schema_version":1,"kind":"detect2","name":"x","seed":1,
    "gains_a":[1],"gains_b":[2],"noise":1,"symbols":10,"extra_knob":true})");
  const CommandResult unknown = run_command(cli() + " validate " + work.in("unknown_key.json"));
  CHECK(unknown.code == 2);
  CHECK(unknown.output.find("extra_knob") != std::string::npos);

  const CommandResult absent = run_command(cli() + " validate " + work.in("nope.json"));
  CHECK(absent.code == 2);

  write_file(work.in("broken.json"), "{ this is not json");
  CHECK(run_command(cli() + " validate " + work.in("broken.json")).code == 2);
}

TEST_CASE("a run writes the report, metrics and tables" * doctest::timeout(300)) {
  WorkDir work("run");
  write_file(work.in("pair.json"), kSmallPair);
  const std::string command = "cd " + work.path.string() + " && " + cli() +
                              " detect2 -c pair.json";
  const CommandResult result = run_command(command);
  CAPTURE(result.output);
  REQUIRE(result.code == 0);
  CHECK(result.output.find("ser_optimal") != std::string::npos);
  CHECK(result.output.find("wrote") != std::string::npos);

  REQUIRE(fs::exists(work.in("pair-small.json")));
  REQUIRE(fs::exists(work.in("pair-small_metrics.csv")));
  REQUIRE(fs::exists(work.in("pair-small_detectors.csv")));

  const Json doc = Json::parse(read_file(work.in("pair-small.json")));
  CHECK(doc["kind"] == "detect2");
  CHECK(doc["seed"] == 808);
  CHECK(doc["config"]["symbols"] == 20000);
  CHECK(doc["runtime"].contains("elapsed_seconds"));

  const std::string metrics = read_file(work.in("pair-small_metrics.csv"));
  CHECK(metrics.rfind("metric,value,se,n,wilson_low,wilson_high\n", 0) == 0);
  CHECK(metrics.find("ser_ml") != std::string::npos);
}

TEST_CASE("reruns are byte-identical apart from wall clock" * doctest::timeout(300)) {
  WorkDir first("rerun_a");
  WorkDir second("rerun_b");
  write_file(first.in("pair.json"), kSmallPair);
  write_file(second.in("pair.json"), kSmallPair);
  REQUIRE(run_command("cd " + first.path.string() + " && " + cli() + " detect2 -c pair.json")
              .code == 0);
  REQUIRE(run_command("cd " + second.path.string() + " && " + cli() + " detect2 -c pair.json")
              .code == 0);

  CHECK(read_file(first.in("pair-small_metrics.csv")) ==
        read_file(second.in("pair-small_metrics.csv")));
  CHECK(read_file(first.in("pair-small_detectors.csv")) ==
        read_file(second.in("pair-small_detectors.csv")));
  CHECK(body_of(first.in("pair-small.json")) == body_of(second.in("pair-small.json")));

  // Thread count must not change any deliverable bytes either.
  WorkDir third("rerun_c");
  write_file(third.in("pair.json"), kSmallPair);
  REQUIRE(run_command("cd " + third.path.string() + " && " + cli() +
                      " detect2 -c pair.json --threads 1")
              .code == 0);
  CHECK(read_file(first.in("pair-small_metrics.csv")) ==
        read_file(third.in("pair-small_metrics.csv")));
  CHECK(body_of(first.in("pair-small.json")) == body_of(third.in("pair-small.json")));
}

TEST_CASE("the seed flag overrides the config seed" * doctest::timeout(300)) {
  WorkDir work("seed");
  write_file(work.in("pair.json"), kSmallPair);
  REQUIRE(run_command("cd " + work.path.string() + " && " + cli() +
                      " detect2 -c pair.json --seed 31337")
              .code == 0);
  const Json doc = Json::parse(read_file(work.in("pair-small.json")));
  CHECK(doc["seed"] == 31337);
  CHECK(doc["config"]["seed"] == 31337);
}

TEST_CASE("config kind and subcommand must agree") {
  WorkDir work("kind");
  write_file(work.in("pair.json"), kSmallPair);
  const CommandResult result =
      run_command("cd " + work.path.string() + " && " + cli() + " gaussfit -c pair.json");
  CHECK(result.code == 2);
  CHECK(result.output.find("kind") != std::string::npos);
  CHECK(result.output.find("gaussfit") != std::string::npos);
}

TEST_CASE("output destinations follow the -o form" * doctest::timeout(300)) {
  WorkDir work("outforms");
  write_file(work.in("multi.json"), kSmallMulti);
  const std::string base = "cd " + work.path.string() + " && " + cli() + " multiuser -c multi.json";

  // Directory form creates the directory and keeps the config-name stem.
  REQUIRE(run_command(base + " -o nested/results").code == 0);
  CHECK(fs::exists(work.in("nested/results/multi-small.json")));
  CHECK(fs::exists(work.in("nested/results/multi-small_metrics.csv")));
  CHECK(fs::exists(work.in("nested/results/multi-small_scenarios.csv")));
  CHECK(fs::exists(work.in("nested/results/multi-small_pairwise_s1.json")));

  // Explicit .csv form puts the primary table at exactly that path.
  REQUIRE(run_command(base + " -o table.csv").code == 0);
  REQUIRE(fs::exists(work.in("table.csv")));
  const std::string primary = read_file(work.in("table.csv"));
  CHECK(primary.rfind("scenario,", 0) == 0);
  CHECK(fs::exists(work.in("table.json")));
  CHECK(fs::exists(work.in("table_metrics.csv")));

  // Explicit .json form puts the report at exactly that path.
  REQUIRE(run_command(base + " -o report.json").code == 0);
  REQUIRE(fs::exists(work.in("report.json")));
  CHECK(Json::parse(read_file(work.in("report.json")))["kind"] == "multiuser");

  // The primary CSV of the two explicit runs matches the directory-form one.
  CHECK(primary == read_file(work.in("nested/results/multi-small_scenarios.csv")));
}

TEST_CASE("format selection narrows the written files" * doctest::timeout(300)) {
  WorkDir work("format");
  write_file(work.in("multi.json"), kSmallMulti);
  const std::string base = "cd " + work.path.string() + " && " + cli() + " multiuser -c multi.json";

  REQUIRE(run_command(base + " -o csvonly --format csv").code == 0);
  CHECK(fs::exists(work.in("csvonly/multi-small_metrics.csv")));
  CHECK(fs::exists(work.in("csvonly/multi-small_scenarios.csv")));
  CHECK(!fs::exists(work.in("csvonly/multi-small.json")));
  CHECK(!fs::exists(work.in("csvonly/multi-small_pairwise_s1.json")));

  REQUIRE(run_command(base + " -o jsononly --format json").code == 0);
  CHECK(fs::exists(work.in("jsononly/multi-small.json")));
  CHECK(fs::exists(work.in("jsononly/multi-small_pairwise_s1.json")));
  CHECK(!fs::exists(work.in("jsononly/multi-small_metrics.csv")));
  CHECK(!fs::exists(work.in("jsononly/multi-small_scenarios.csv")));
}

TEST_CASE("unwritable destinations exit 2 without stale files" * doctest::timeout(300)) {
  WorkDir work("unwritable");
  write_file(work.in("multi.json"), kSmallMulti);
  write_file(work.in("blocker"), "plain file\n");
  const CommandResult result = run_command("cd " + work.path.string() + " && " + cli() +
                                           " multiuser -c multi.json -o blocker/sub");
  CHECK(result.code == 2);
  CHECK(!fs::exists(work.in("blocker/sub")));
}

TEST_CASE("compute failures exit 1" * doctest::timeout(300)) {
  WorkDir work("compute");
  // A two-hypothesis pair with identical intensities cannot be separated;
  // the detector construction throws after the config parses cleanly.
  write_file(work.in("flat_config.json"), R"({
    "schema_version": 1, "kind": "detect2", "name": "flat", "seed": 5,
    "gains_a": [3, 3], "gains_b": [3, 3], "noise": 1, "symbols": 100
  })");
  const CommandResult result =
      run_command("cd " + work.path.string() + " && " + cli() + " detect2 -c flat_config.json");
  CHECK(result.code == 1);
  CHECK(!fs::exists(work.in("flat.json")));
  CHECK(!fs::exists(work.in("flat_metrics.csv")));
}

TEST_CASE("artifact documents round-trip through the filesystem" * doctest::timeout(300)) {
  WorkDir work("artifact");
  write_file(work.in("multi.json"), kSmallMulti);
  REQUIRE(run_command("cd " + work.path.string() + " && " + cli() + " multiuser -c multi.json")
              .code == 0);
  const std::string artifact = read_file(work.in("multi-small_pairwise_s1.json"));
  const Json doc = Json::parse(artifact);
  CHECK(doc.contains("entries"));
  CHECK(doc.contains("scenario_hash"));
  CHECK(doc["modes"] == 2);
  CHECK(doc["entries"].size() == 4);
}
