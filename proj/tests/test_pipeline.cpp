#include "doctest.h"
#include "helpers.hpp"
#include "mia/error.hpp"
#include "mia/pipeline.hpp"

using namespace mia;
using testutil::TempDir;
using nlohmann::json;

namespace {

ExperimentConfig small_config(const TempDir& dir) {
  const auto ds = synthetic_dataset(12, 12, 16, 5);
  write_manifest(dir / "data/manifest.jsonl", ds);
  ExperimentConfig c;
  c.manifest = dir / "data/manifest.jsonl";
  c.output_dir = dir / "out";
  c.params.steps = 4;
  c.jobs = 2;
  return c;
}

}  // namespace

TEST_CASE("config parsing") {
  const json doc = {{"manifest", "m.jsonl"},
                    {"output_dir", "o"},
                    {"threat", "black"},
                    {"observers", {"one-shot"}},
                    {"metrics", {"rmse", "dssim"}},
                    {"smoothing", {false, true}},
                    {"classifiers", {"tree", {{"kind", "knn"}, {"hyperparams", {{"k", 3}}}}}},
                    {"diffusion", {{"steps", 5}, {"seed", 9}}},
                    {"oracle", {{"kind", "sim"}, {"memorization_mu", 0.25}, {"decoy_strategy", "shuffled_partner"}}}};
  const auto c = ExperimentConfig::from_json(doc, "/base");
  CHECK(c.manifest == "/base/m.jsonl");
  CHECK(c.output_dir == "/base/o");
  CHECK(c.threat == ThreatModel::black_box);
  CHECK(c.metrics.size() == 2);
  CHECK(c.smoothing == std::vector<bool>{false, true});
  REQUIRE(c.classifiers.size() == 2);
  CHECK(c.classifiers[1].get("k") == 3);
  CHECK(c.params.steps == 5);
  CHECK(c.params.seed == 9);
  CHECK(c.oracle.sim.memorization_mu == 0.25);
  CHECK(c.oracle.sim.decoy_strategy == DecoyStrategy::shuffled_partner);
  c.validate();

  const auto again = ExperimentConfig::from_json(c.to_json());
  CHECK(again.to_json() == c.to_json());

  const auto defaults = ExperimentConfig::from_json(json{{"manifest", "m"}});
  CHECK(defaults.observers.size() == 3);
  CHECK(defaults.metrics.size() == 4);
  CHECK(defaults.classifiers.size() == 5);

  auto code = [](const json& d) {
    try {
      ExperimentConfig::from_json(d).validate();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::IoError;
  };
  CHECK(code(json{{"manifest", "m"}, {"typo", 1}}) == ErrorCode::ConfigError);
  CHECK(code(json{{"output_dir", "o"}}) == ErrorCode::ConfigError);
  CHECK(code(json{{"manifest", "m"}, {"threat", "black_box"}}) == ErrorCode::ConfigError);
  CHECK(code(json{{"manifest", "m"}, {"leak_fraction", 1.0}}) == ErrorCode::ConfigError);
  CHECK(code(json{{"manifest", "m"}, {"classifiers", {"forest"}}}) == ErrorCode::ConfigError);
  CHECK(code(json{{"manifest", "m"}, {"diffusion", {{"steps", 1}}}}) == ErrorCode::ConfigError);
}

TEST_CASE("invalid grid fails before any work") {
  TempDir dir;
  auto c = small_config(dir);
  c.threat = ThreatModel::black_box;
  try {
    run_experiment(c);
    FAIL("expected ConfigError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConfigError);
    CHECK(e.detail().rfind("stage validate:", 0) == 0);
  }
  CHECK(!std::filesystem::exists(c.output_dir));
}

TEST_CASE("stage errors name the stage") {
  TempDir dir;
  auto c = small_config(dir);
  c.manifest = dir / "missing.jsonl";
  try {
    run_experiment(c);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.detail().rfind("stage split:", 0) == 0);
  }
  c = small_config(dir);
  c.oracle.kind = OracleSpec::Kind::replay;
  c.oracle.replay_store = dir / "empty-store";
  try {
    run_experiment(c);
    FAIL("expected TraceMiss");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TraceMiss);
    CHECK(e.detail().rfind("stage trace: sample ", 0) == 0);
  }
}

TEST_CASE("full grid, replay and resume") {
  TempDir dir;
  auto c = small_config(dir);
  const auto report = run_experiment(c);
  CHECK(report.rows.size() == 60);
  const auto csv = read_file(c.output_dir / "report/report.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 61);
  std::size_t svgs = 0;
  for (const auto& e : std::filesystem::directory_iterator(c.output_dir / "report/roc")) svgs += e.is_regular_file();
  CHECK(svgs == 120);
  for (const char* sub : {"splits/holdout.jsonl", "features/complete__rmse__leak.csv",
                          "features/progressive__vecdist__holdout.csv", "models/one-shot__psnr__knn.json",
                          "scores/complete__dssim__linear_svm.csv", "traces"}) {
    CHECK(std::filesystem::exists(c.output_dir / sub));
  }

  auto replay = c;
  replay.output_dir = dir / "replayed";
  replay.trace_store = c.output_dir / "traces";
  replay.oracle.kind = OracleSpec::Kind::replay;
  run_experiment(replay);
  CHECK(read_file(replay.output_dir / "report/report.csv") == csv);

  std::filesystem::remove_all(c.output_dir / "report");
  run_experiment(c);
  CHECK(read_file(c.output_dir / "report/report.csv") == csv);

  const auto rebuilt = report_from_scores_dir(c.output_dir / "scores");
  CHECK(rebuilt.rows.size() == 60);
  for (const auto& row : rebuilt.rows) {
    const auto it = std::find_if(report.rows.begin(), report.rows.end(),
                                 [&](const ReportRow& r) { return r.slug() == row.slug(); });
    REQUIRE(it != report.rows.end());
    CHECK(it->auc == row.auc);
  }
}

TEST_CASE("smoothing doubles the grid") {
  TempDir dir;
  auto c = small_config(dir);
  c.smoothing = {false, true};
  c.classifiers = {ClassifierSpec::make(ClassifierKind::logistic_regression)};
  const auto report = run_experiment(c);
  CHECK(report.rows.size() == 24);
  CHECK(std::count_if(report.rows.begin(), report.rows.end(), [](const ReportRow& r) { return r.smoothed; }) == 12);
}

TEST_CASE("scores csv") {
  TempDir dir;
  const std::vector<ScoreRow> rows = {{"a", true, 0.25}, {"b,c", false, 1.0 / 3}, {"d", std::nullopt, 0.0}};
  write_scores_csv(dir / "s.csv", rows);
  const auto back = read_scores_csv(dir / "s.csv");
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].sample_id == rows[i].sample_id);
    CHECK(back[i].label == rows[i].label);
    CHECK(back[i].score == rows[i].score);
  }
}

TEST_CASE("synthetic datasets") {
  const auto a = synthetic_dataset(3, 2, 8, 1), b = synthetic_dataset(3, 2, 8, 1);
  REQUIRE(a.size() == 5);
  CHECK(a.count(Pool::member_pool) == 3);
  CHECK(a[0].image == b[0].image);
  CHECK(!(a[0].image == a[1].image));
  CHECK(a[4].id == "n0001");
}

TEST_CASE("trace store location") {
  ExperimentConfig c;
  c.output_dir = "/tmp/x";
  ::unsetenv("MIA_CACHE_DIR");
  CHECK(c.resolved_trace_store() == "/tmp/x/traces");
  ::setenv("MIA_CACHE_DIR", "/tmp/cache", 1);
  CHECK(c.resolved_trace_store() == "/tmp/cache");
  c.trace_store = "/tmp/explicit";
  CHECK(c.resolved_trace_store() == "/tmp/explicit");
  ::unsetenv("MIA_CACHE_DIR");
}
