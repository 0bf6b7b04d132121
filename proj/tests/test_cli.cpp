#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "unlearn/cli.hpp"
#include "unlearn/records.hpp"
#include "unlearn/uqs.hpp"

using namespace unlearn;

namespace {

const std::string kFixtures = UNLEARN_FIXTURE_DIR;

struct Result {
  int code = 0;
  std::string out, err;
};

Result invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("unleval_cli_" + name);
}

std::filesystem::path write_samples() {
  const auto path = temp_path("samples.jsonl");
  std::ofstream os(path);
  for (int i = 0; i < 8; ++i) {
    SampleOutcome s;
    s.sample_id = "s" + std::to_string(i);
    s.split = i < 4 ? Split::forget : Split::retain;
    s.gold_answer = "Paris";
    s.prediction = i % 2 ? "It is Paris." : "London";
    s.max_confidence = i < 4 ? 0.9 - 0.01 * i : 0.5 + 0.01 * i;
    s.entropy = 1.0 - s.max_confidence;
    s.top2_margin = s.max_confidence / 2;
    s.activation = std::vector<double>{1.0 * i, 0.0};
    s.oracle_activation = std::vector<double>{1.0 * i, 3.0};
    s.output_dist = std::vector<double>{0.5, 0.5};
    s.oracle_output_dist = std::vector<double>{0.5, 0.5};
    os << to_json_line(s) << '\n';
  }
  return path;
}

}  // namespace

TEST_CASE("usage and unknown flags") {
  CHECK(invoke({}).code == cli::kUsage);
  const auto bad = invoke({"uqs", "--input", kFixtures + "/method_means.jsonl", "--bogus"});
  CHECK(bad.code == cli::kUsage);
  CHECK(bad.err.find("bogus") != std::string::npos);
  CHECK(invoke({"frobnicate"}).code == cli::kUsage);
  CHECK(invoke({"uqs"}).code == cli::kUsage);
  CHECK(invoke({"--help"}).code == cli::kOk);
  CHECK(invoke({"tau", "--input", "x", "--orientation", "sideways"}).code == cli::kUsage);
}

TEST_CASE("validation failures exit 2 with a message") {
  const auto missing = invoke({"uqs", "--input", "/nonexistent/runs.jsonl"});
  CHECK(missing.code == cli::kValidationFailure);
  CHECK(missing.err.find("error:") == 0);

  const auto empty = invoke({"tau", "--input", kFixtures + "/method_means.jsonl", "--dataset", "MMUBench"});
  CHECK(empty.code == cli::kValidationFailure);
  CHECK(empty.err.find("empty cohort") != std::string::npos);

  const auto weights = invoke({"uqs", "--input", kFixtures + "/method_means.jsonl", "--preset", "custom", "--weights",
                               "0.5,0.5,0.5,0,0"});
  CHECK(weights.code == cli::kValidationFailure);

  const auto no_oracle = invoke({"reliability", "--input", kFixtures + "/method_means.jsonl"});
  CHECK(no_oracle.code == cli::kValidationFailure);
  CHECK(no_oracle.err.find("oracle_distance") != std::string::npos);
}

TEST_CASE("uqs output is byte-identical across runs and carries a header") {
  const std::vector<std::string> args{"uqs", "--input", kFixtures + "/method_means.jsonl", "--format", "markdown"};
  const auto a = invoke(args);
  const auto b = invoke(args);
  REQUIRE(a.code == cli::kOk);
  CHECK(a.out == b.out);
  CHECK(a.out.find("> unleval 0.1.0 | command: uqs | seed: 42") == 0);
  CHECK(a.out.find("fnv1a64:") != std::string::npos);
  CHECK(a.out.find("| 1 | Gradient Ascent |") != std::string::npos);

  const auto privacy = invoke({"uqs", "--input", kFixtures + "/method_means.jsonl", "--preset", "privacy_first"});
  CHECK(privacy.code == cli::kOk);
  CHECK(privacy.out.find("0.548") != std::string::npos);
}

TEST_CASE("structured output parses") {
  const auto r = invoke({"tau", "--input", kFixtures + "/runs_per_dataset_seed42.jsonl", "--format", "structured"});
  REQUIRE(r.code == cli::kOk);
  const auto doc = nlohmann::json::parse(r.out);
  CHECK(doc.at("header").at("command") == "tau");
  CHECK(doc.contains("result"));

  const auto k = invoke({"kr", "--input", kFixtures + "/probes_kr_pilot.jsonl", "--format", "json"});
  REQUIRE(k.code == cli::kOk);
  CHECK(nlohmann::json::parse(k.out).contains("result"));
}

TEST_CASE("each subcommand runs on the fixtures") {
  const std::string runs = kFixtures + "/runs_per_dataset_seed42.jsonl";
  CHECK(invoke({"tau", "--input", runs, "--group-by", "dataset"}).code == cli::kOk);
  CHECK(invoke({"tau", "--input", runs, "--filter", "method=GA", "--variant", "a"}).code == cli::kOk);
  CHECK(invoke({"uqs", "--input", runs, "--epsilons", "0.001,0.01,0.1"}).code == cli::kOk);
  CHECK(invoke({"stability", "--input", runs, "--trials", "20", "--unit", "models"}).code == cli::kOk);
  const auto kr = invoke({"kr", "--input", kFixtures + "/probes_kr_pilot.jsonl", "--estimator", "max_binary"});
  CHECK(kr.code == cli::kOk);

  const auto samples = write_samples();
  const auto m = invoke({"metrics", "--input", samples.string(), "--folds", "2"});
  CHECK(m.code == cli::kOk);
  CHECK(m.out.find("FA") != std::string::npos);
  std::filesystem::remove(samples);
}

TEST_CASE("--out writes the report to a file") {
  const auto path = temp_path("report.md");
  const auto r = invoke({"kr", "--input", kFixtures + "/probes_kr_pilot.jsonl", "--format", "markdown", "--out",
                         path.string()});
  CHECK(r.code == cli::kOk);
  CHECK(read_text_file(path).find("| Gradient Ascent | 3 | 6 | 5/6 (83%) |") != std::string::npos);
  std::filesystem::remove(path);
}

TEST_CASE("export-ui writes a readable bundle") {
  const auto path = temp_path("bundle.json");
  const auto r = invoke({"export-ui", "--input", kFixtures + "/runs_per_dataset_seed42.jsonl", "--trials", "10",
                         "--out", path.string()});
  REQUIRE(r.code == cli::kOk);
  const auto view = read_ui_bundle(read_text_file(path));
  CHECK(view.schema_version == kUiSchemaVersion);
  CHECK(view.methods.size() == 4);
  REQUIRE(view.stability_taus);
  CHECK(view.stability_taus->size() == 10);
  const std::string first = read_text_file(path);
  invoke({"export-ui", "--input", kFixtures + "/runs_per_dataset_seed42.jsonl", "--trials", "10", "--out",
          path.string()});
  CHECK(read_text_file(path) == first);
  std::filesystem::remove(path);
  CHECK(invoke({"export-ui", "--input", kFixtures + "/runs_per_dataset_seed42.jsonl"}).code == cli::kUsage);
}

TEST_CASE("reproduce-paper reports every check") {
  const auto r = invoke({"reproduce-paper"});
  // Some published figures do not reproduce; the exit code says so.
  CHECK((r.code == cli::kOk || r.code == cli::kReproduceMismatch));
  CHECK(r.out.find("PASS") != std::string::npos);
  CHECK(r.out.find("gating check") != std::string::npos);
  CHECK(invoke({"reproduce-paper", "--fixtures", "/nonexistent"}).code == cli::kValidationFailure);
}
