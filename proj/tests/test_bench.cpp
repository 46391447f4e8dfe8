#include "slr/bench.hpp"

#include "slr/matrix_io.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace slr;
namespace fs = std::filesystem;

namespace {

ScenarioConfig tiny_clean_scenario() {
  ScenarioConfig c;
  c.name = "tiny-clean";
  c.n = 40;
  c.tmax = 60;
  c.r = 3;
  c.t_train = 0;
  c.coeffs = {CoeffModel::Type::kBoundedUniform, 4.0};
  c.seed = 3;
  return c;
}

ScenarioConfig tiny_tracking_scenario() {
  ScenarioConfig c;
  c.name = "tiny-track";
  c.n = 60;
  c.tmax = 500;
  c.r = 4;
  c.t_train = 60;
  c.change_times = {380};
  c.deltas = {0.002};
  c.coeffs = {CoeffModel::Type::kBoundedUniform, 16.0};
  c.magnitude = {MagnitudeLaw::Type::kUniformRange, 10.0, 20.0, 0.0};
  c.outlier_segments = {
      {OutlierSegment::Type::kBernoulli, 60, 0.01, 0, 0, 0.0},
      {OutlierSegment::Type::kBernoulli, 500, 0.05, 0, 0, 0.0}};
  c.seed = 5;
  return c;
}

}  // namespace

TEST_SUITE_BEGIN("bench");

TEST_CASE("clean low-rank scenario is recovered exactly by altproj") {
  AlgoSpec algo{"altproj", R"({"eps": 1e-9, "t_per_stage": 30})"};
  RunRecord record = run_once(tiny_clean_scenario(), algo, 9);
  CHECK(record.error.empty());
  CHECK(record.final_rel_err <= 1e-8);
}

TEST_CASE("run_once is deterministic given the seed") {
  AlgoSpec algo{"norst", R"({"eps": 3e-3, "alpha": 50})"};
  RunRecord a = run_once(tiny_tracking_scenario(), algo, 11);
  RunRecord b = run_once(tiny_tracking_scenario(), algo, 11);
  CHECK(a.error.empty());
  CHECK(a.final_rel_err == b.final_rel_err);
  REQUIRE(a.rows.size() == b.rows.size());
  for (size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].t == b.rows[i].t);
    CHECK(a.rows[i].se == b.rows[i].se);
    CHECK(a.rows[i].rel_err == b.rows[i].rel_err);
  }
  CHECK(a.detected_changes == b.detected_changes);
  CHECK(a.support_match_fraction == b.support_match_fraction);
}

TEST_CASE("tracking run produces checkpoints, detections and support stats") {
  AlgoSpec algo{"norst", R"({"eps": 3e-3, "alpha": 50})"};
  RunRecord record = run_once(tiny_tracking_scenario(), algo, 13);
  CHECK(record.error.empty());
  CHECK_FALSE(record.checkpoints.empty());
  CHECK(record.true_changes == std::vector<Index>{380});
  REQUIRE(record.detected_changes.size() == 1);
  CHECK(record.detected_changes[0] >= 380);
  CHECK(record.detected_changes[0] <= 380 + 2 * 50);
  CHECK(record.support_match_fraction > 0.9);
  CHECK(record.final_rel_err < 0.05);
}

TEST_CASE("monte carlo aggregates trials deterministically") {
  BenchSuite suite;
  suite.name = "unit";
  suite.trials = 3;
  suite.base_seed = 40;
  suite.workers = 2;
  SuiteEntry entry;
  entry.scenario = tiny_clean_scenario();
  entry.algos = {AlgoSpec{"altproj", R"({"eps": 1e-9, "t_per_stage": 30})"}};
  suite.entries.push_back(entry);

  BenchReport report = monte_carlo(suite);
  REQUIRE(report.cells.size() == 1);
  const AggregateCell& cell = report.cells.begin()->second;
  REQUIRE(cell.records.size() == 3);
  CHECK(cell.failures == 0);
  double manual = 0.0;
  for (const auto& r : cell.records) manual += r.final_rel_err;
  manual /= 3.0;
  CHECK(cell.mean_rel_err == doctest::Approx(manual).epsilon(1e-12));
  for (Index trial = 0; trial < 3; ++trial) {
    CHECK(cell.records[static_cast<size_t>(trial)].trial == trial);
    CHECK(cell.records[static_cast<size_t>(trial)].seed ==
          suite.base_seed + static_cast<uint64_t>(trial));
  }

  // A single trial aggregates to exactly that record's metric.
  suite.trials = 1;
  BenchReport single = monte_carlo(suite);
  const AggregateCell& one = single.cells.begin()->second;
  CHECK(one.mean_rel_err == one.records[0].final_rel_err);
  CHECK(one.std_rel_err == 0.0);
}

TEST_CASE("comparison-only methods are annotated, not computed") {
  BenchSuite suite;
  suite.trials = 1;
  SuiteEntry entry;
  entry.scenario = tiny_clean_scenario();
  entry.algos = {AlgoSpec{"grasta", "{}"}, AlgoSpec{"orpca", "{}"}};
  suite.entries.push_back(entry);
  BenchReport report = monte_carlo(suite);
  CHECK(report.not_implemented ==
        std::vector<std::string>{"grasta", "orpca"});
  for (const auto& [key, cell] : report.cells) {
    CHECK(cell.records[0].error.rfind("not-implemented", 0) == 0);
    CHECK(std::isnan(cell.records[0].final_rel_err));
  }
}

TEST_CASE("metric csv round-trips exactly, including NaN") {
  std::vector<MetricRow> rows{
      {1.0, 0.25, 1.0 / 3.0, 12.5},
      {2.0, std::numeric_limits<double>::quiet_NaN(), 1e-17, 0.0},
  };
  std::vector<MetricRow> back = rows_from_csv(rows_to_csv(rows));
  REQUIRE(back.size() == rows.size());
  CHECK(back[0].t == rows[0].t);
  CHECK(back[0].se == rows[0].se);
  CHECK(back[0].rel_err == rows[0].rel_err);
  CHECK(back[0].wall_ms == rows[0].wall_ms);
  CHECK(std::isnan(back[1].se));
  CHECK(back[1].rel_err == rows[1].rel_err);
}

TEST_CASE("report files, summary schema and golden verification") {
  BenchSuite suite;
  suite.name = "unit-report";
  suite.trials = 2;
  suite.base_seed = 60;
  suite.workers = 2;
  SuiteEntry entry;
  entry.scenario = tiny_clean_scenario();
  entry.algos = {AlgoSpec{"altproj", R"({"eps": 1e-6})"},
                 AlgoSpec{"pcp", R"({"tol": 1e-7})"}};
  suite.entries.push_back(entry);

  const std::string dir =
      (fs::temp_directory_path() / "slr_bench_test").string();
  fs::remove_all(dir);
  BenchReport report = monte_carlo(suite);
  write_report(report, dir);
  {
    std::ofstream sf(fs::path(dir) / "suite.json");
    sf << suite.to_json() << '\n';
  }

  CHECK(fs::exists(fs::path(dir) / "tiny-clean__altproj.csv"));
  CHECK(fs::exists(fs::path(dir) / "tiny-clean__pcp.csv"));
  CHECK(fs::exists(fs::path(dir) / "summary.json"));
  CHECK(fs::exists(fs::path(dir) / "plot.gp"));

  const std::string summary = summary_json(report);
  CHECK(summary.find("\"tiny-clean\"") != std::string::npos);
  CHECK(summary.find("\"altproj\"") != std::string::npos);
  CHECK(summary.find("\"pcp\"") != std::string::npos);

  // Deterministic re-run matches the stored CSVs (wall clock ignored).
  CHECK(verify_against_golden(dir).empty());

  // Corrupt one value: the mismatch is detected.
  {
    std::ifstream in(fs::path(dir) / "tiny-clean__altproj.csv");
    std::stringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();
    const auto pos = text.find_last_of('\n', text.size() - 2);
    text = text.substr(0, pos + 1) + "999,0.5,0.5,0\n";
    std::ofstream out(fs::path(dir) / "tiny-clean__altproj.csv");
    out << text;
  }
  CHECK_FALSE(verify_against_golden(dir).empty());
  fs::remove_all(dir);
}

TEST_CASE("csv output is byte-identical across runs except wall time") {
  BenchSuite suite;
  suite.name = "determinism";
  suite.trials = 2;
  suite.base_seed = 77;
  suite.workers = 2;
  SuiteEntry entry;
  entry.scenario = tiny_tracking_scenario();
  entry.algos = {AlgoSpec{"norst", R"({"eps": 3e-3, "alpha": 50})"}};
  suite.entries.push_back(entry);

  auto csv_without_wall = [](const BenchReport& report) {
    std::string out;
    for (const auto& [key, cell] : report.cells) {
      for (const auto& rec : cell.records) {
        for (const auto& row : rec.rows) {
          out += format_double(row.t) + ',' + format_double(row.se) + ',' +
                 format_double(row.rel_err) + '\n';
        }
      }
    }
    return out;
  };
  const std::string first = csv_without_wall(monte_carlo(suite));
  const std::string second = csv_without_wall(monte_carlo(suite));
  CHECK(first == second);
  CHECK_FALSE(first.empty());
}

TEST_CASE("empty reports are rejected") {
  BenchReport report;
  CHECK_THROWS_AS(write_report(report, "/tmp/slr_empty_report"),
                  PreconditionError);
}

TEST_CASE("acceptance thresholds flag violations") {
  BenchSuite suite;
  suite.trials = 1;
  SuiteEntry entry;
  entry.scenario = tiny_clean_scenario();
  entry.algos = {AlgoSpec{"altproj", R"({"eps": 1e-9, "t_per_stage": 30})"}};
  suite.entries.push_back(entry);
  suite.acceptance = {{"tiny-clean", "altproj", 1e-6}};
  BenchReport report = monte_carlo(suite);
  CHECK(check_acceptance(suite, report).empty());
  suite.acceptance = {{"tiny-clean", "altproj", 1e-20}};
  CHECK_FALSE(check_acceptance(suite, report).empty());
}

TEST_CASE("suite json round-trips") {
  BenchSuite suite;
  suite.name = "round";
  suite.trials = 4;
  suite.base_seed = 123;
  SuiteEntry entry;
  entry.scenario = tiny_tracking_scenario();
  entry.algos = {AlgoSpec{"norst", R"({"alpha":50})"},
                 AlgoSpec{"altproj", "{}"}};
  suite.entries.push_back(entry);
  suite.acceptance = {{"tiny-track", "norst", 0.01}};
  BenchSuite back = BenchSuite::from_json(suite.to_json());
  CHECK(back.name == suite.name);
  CHECK(back.trials == suite.trials);
  CHECK(back.base_seed == suite.base_seed);
  REQUIRE(back.entries.size() == 1);
  CHECK(back.entries[0].scenario.name == "tiny-track");
  CHECK(back.entries[0].algos.size() == 2);
  REQUIRE(back.acceptance.size() == 1);
  CHECK(back.acceptance[0].max_mean_rel_err == 0.01);
}

TEST_SUITE_END();
