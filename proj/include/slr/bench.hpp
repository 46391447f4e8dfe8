#pragma once

#include "slr/synthgen.hpp"
#include "slr/types.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace slr {

struct AlgoSpec {
  std::string id;           // altproj | pcp | modpcp | norst | norst-offline |
                            // mc-altmin | grouse, or a comparison-only id
  std::string params_json;  // algorithm parameter overrides, "{}" if none
};

struct MetricRow {
  double t = 0.0;
  double se = 0.0;       // NaN when not applicable
  double rel_err = 0.0;  // NaN when not applicable
  double wall_ms = 0.0;
};

struct CheckpointRecord {
  Index t = 0;
  Index segment = 0;
  Index k = 0;
  double se = 0.0;
};

struct RunRecord {
  std::string scenario;
  std::string algo;
  Index trial = 0;
  uint64_t seed = 0;
  std::vector<MetricRow> rows;
  double final_rel_err = 0.0;
  double online_rel_err = 0.0;  // norst-offline: the paired online error
  std::vector<CheckpointRecord> checkpoints;
  std::vector<Index> detected_changes;
  std::vector<Index> true_changes;
  double support_match_fraction = -1.0;  // -1 when not measured
  double wall_ms = 0.0;
  int iterations = 0;
  std::string error;  // solver failures are recorded, not thrown
};

struct SuiteEntry {
  ScenarioConfig scenario;
  std::vector<AlgoSpec> algos;
};

struct AcceptanceRule {
  std::string scenario;
  std::string algo;
  double max_mean_rel_err = 0.0;
};

struct BenchSuite {
  std::string name = "suite";
  Index trials = 1;
  uint64_t base_seed = 1;
  int workers = 0;  // 0 -> hardware concurrency
  std::vector<SuiteEntry> entries;
  std::vector<AcceptanceRule> acceptance;

  std::string to_json() const;
  static BenchSuite from_json(const std::string& text);
};

struct AggregateCell {
  std::vector<RunRecord> records;  // ordered by trial
  double mean_rel_err = 0.0;
  double std_rel_err = 0.0;
  double mean_wall_ms = 0.0;
  int failures = 0;
};

struct BenchReport {
  std::string suite_name;
  // Keyed (scenario, algo); std::map keeps output ordering deterministic.
  std::map<std::pair<std::string, std::string>, AggregateCell> cells;
  std::vector<std::string> not_implemented;
};

/// One algorithm on one scenario with the given trial seed (replaces the
/// scenario's own seed). Deterministic. Solver errors land in
/// RunRecord::error instead of propagating.
RunRecord run_once(const ScenarioConfig& scenario, const AlgoSpec& algo,
                   uint64_t trial_seed);

/// Runs every (scenario, algo, trial) task on a bounded worker pool; trial
/// seeds are base_seed + trial index. Aggregation is independent of
/// completion order.
BenchReport monte_carlo(const BenchSuite& suite);

/// Writes one CSV per (scenario, algo) with columns t,SE,rel_err,wall_ms,
/// summary.json with the per-cell table, and a gnuplot script plot.gp.
void write_report(const BenchReport& report, const std::string& out_dir);

std::string summary_json(const BenchReport& report);

/// Violated acceptance rules, empty when all pass (or none defined).
std::vector<std::string> check_acceptance(const BenchSuite& suite,
                                          const BenchReport& report);

/// Re-runs the suite stored in golden_dir/suite.json and compares the fresh
/// CSV rows against the stored ones, ignoring the wall_ms column. Returns
/// human-readable mismatch descriptions, empty on success.
std::vector<std::string> verify_against_golden(const std::string& golden_dir);

/// CSV (de)serialization used by the report files; parse(write(rows)) == rows.
std::string rows_to_csv(const std::vector<MetricRow>& rows);
std::vector<MetricRow> rows_from_csv(const std::string& text);

}  // namespace slr
