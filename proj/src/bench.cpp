#include "slr/bench.hpp"

#include "slr/batch.hpp"
#include "slr/linalg.hpp"
#include "slr/matrix_io.hpp"
#include "slr/mc.hpp"
#include "slr/norst.hpp"
#include "slr/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <thread>

namespace slr {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const std::set<std::string>& comparison_only_ids() {
  static const std::set<std::string> ids{"grasta", "orpca", "rpca-gd",
                                         "prost", "roseta", "petrels", "past"};
  return ids;
}

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - start)
      .count();
}

json parse_params(const AlgoSpec& algo) {
  if (algo.params_json.empty()) return json::object();
  try {
    return json::parse(algo.params_json);
  } catch (const json::exception& e) {
    throw InvalidConfigError("algo params for '" + algo.id +
                             "' are not valid JSON: " + e.what());
  }
}

double relative_error(const Matrix& estimate, const Matrix& truth) {
  const double denom = truth.norm();
  return denom > 0.0 ? (estimate - truth).norm() / denom
                     : estimate.norm();
}

NorstParams norst_params_from(const json& p, const ScenarioConfig& scenario) {
  NorstParams np;
  np.r = p.value("r", scenario.r);
  np.t_train = p.value("t_train", scenario.t_train);
  np.eps = p.value("eps", 1e-3);
  np.k_updates = p.value("K", Index{0});
  np.alpha = p.value("alpha", Index{0});
  if (scenario.magnitude.type == MagnitudeLaw::Type::kUniformRange) {
    np.xmin = scenario.magnitude.xmin;
  }
  np.xmin = p.value("xmin", np.xmin);
  np.omega_supp = p.value("omega_supp", 0.0);
  np.xi = p.value("xi", 0.0);
  np.adaptive_xi = p.value("adaptive_xi", false);
  np.omega_evals = p.value("omega_evals", 0.0);
  np.cs_tol = p.value("cs_tol", 1e-5);
  np.cs_max_iters = p.value("cs_max_iters", 400);
  return np;
}

struct NorstRunArtifacts {
  NorstInit init;
  Matrix lhat;  // full n x tmax online estimate (training part included)
  std::optional<NorstTracker> tracker;
};

// Shared online pass for the norst and norst-offline entries.
NorstRunArtifacts run_norst_online(const GroundTruth& gt,
                                   const NorstParams& np, RunRecord& record,
                                   std::chrono::steady_clock::time_point start)
{
  NorstRunArtifacts art;
  const Index n = gt.config.n;
  const Index tmax = gt.config.tmax;
  const Index t_train = np.t_train;

  art.init = norst_init(gt.m.leftCols(t_train), np.r);
  art.tracker.emplace(art.init.p0, art.init.lambda_plus, np, n);
  NorstTracker& tracker = *art.tracker;

  art.lhat.resize(n, tmax);
  art.lhat.leftCols(t_train) = art.init.lhat_train;

  double match_count = 0.0;
  double err_sq = 0.0;
  double l_sq = gt.l.leftCols(t_train).squaredNorm();
  double init_err_sq =
      (art.init.lhat_train - gt.l.leftCols(t_train)).squaredNorm();
  err_sq = init_err_sq;

  size_t seen_checkpoints = 0;
  for (Index t = t_train + 1; t <= tmax; ++t) {
    FrameOutput out = tracker.feed(gt.m.col(t - 1));
    art.lhat.col(t - 1) = out.lhat;
    err_sq += (out.lhat - gt.l.col(t - 1)).squaredNorm();
    l_sq += gt.l.col(t - 1).squaredNorm();
    if (out.support == gt.support.columns[static_cast<size_t>(t - 1)]) {
      match_count += 1.0;
    }
    // New checkpoints get a row with the subspace error at that instant.
    while (seen_checkpoints < tracker.checkpoints().size()) {
      const auto& cp = tracker.checkpoints()[seen_checkpoints];
      double se = kNaN;
      if (seen_checkpoints < tracker.checkpoint_bases().size()) {
        se = subspace_error(tracker.checkpoint_bases()[seen_checkpoints],
                            gt.subspace_at(cp.t));
      }
      record.checkpoints.push_back(CheckpointRecord{cp.t, cp.segment, cp.k, se});
      record.rows.push_back(MetricRow{static_cast<double>(cp.t), se,
                                      std::sqrt(err_sq / std::max(l_sq, 1e-300)),
                                      elapsed_ms(start)});
      ++seen_checkpoints;
    }
  }

  record.final_rel_err = std::sqrt(err_sq / std::max(l_sq, 1e-300));
  record.support_match_fraction =
      match_count / static_cast<double>(tmax - t_train);
  record.detected_changes = tracker.detected_changes();
  record.true_changes = gt.change_times;
  return art;
}

void run_algo(const ScenarioConfig& scenario, const AlgoSpec& algo,
              RunRecord& record,
              std::chrono::steady_clock::time_point start) {
  const json p = parse_params(algo);
  GroundTruth gt = assemble_scenario(scenario);

  if (algo.id == "altproj") {
    AltProjConfig cfg;
    cfg.rank = p.value("rank", scenario.r);
    cfg.eps = p.value("eps", 1e-3);
    cfg.beta = p.value("beta", 0.0);
    cfg.t_per_stage = p.value("t_per_stage", 10);
    SLRDecomposition dec = altproj(gt.m, cfg);
    record.iterations = dec.iterations;
    record.final_rel_err = relative_error(dec.lhat, gt.l);
  } else if (algo.id == "pcp") {
    const double lambda = p.value(
        "lambda", pcp_default_lambda(scenario.n, scenario.tmax));
    SLRDecomposition dec = pcp_admm(gt.m, lambda, p.value("tol", 1e-7),
                                    p.value("max_iters", 500));
    record.iterations = dec.iterations;
    record.final_rel_err = relative_error(dec.lhat, gt.l);
  } else if (algo.id == "modpcp") {
    const double lambda = p.value(
        "lambda", pcp_default_lambda(scenario.n, scenario.tmax));
    BasisMatrix g = BasisMatrix::empty(scenario.n);
    if (p.value("g", std::string("none")) == "init-subspace") {
      g = gt.subspaces.front();
    }
    SLRDecomposition dec =
        modified_pcp(gt.m, g, lambda, p.value("eps_noise", 0.0),
                     p.value("tol", 1e-7), p.value("max_iters", 500));
    record.iterations = dec.iterations;
    record.final_rel_err = relative_error(dec.lhat, gt.l);
  } else if (algo.id == "norst") {
    const NorstParams np = norst_params_from(p, scenario);
    run_norst_online(gt, np, record, start);
  } else if (algo.id == "norst-offline") {
    const NorstParams np = norst_params_from(p, scenario);
    NorstRunArtifacts art = run_norst_online(gt, np, record, start);
    record.online_rel_err = record.final_rel_err;
    record.rows.clear();
    const Index t_train = np.t_train;
    OfflineOutput off = norst_offline(
        gt.m.rightCols(gt.config.tmax - t_train), t_train + 1, *art.tracker);
    Matrix lhat = art.lhat;
    lhat.rightCols(gt.config.tmax - t_train) = off.lhat;
    record.final_rel_err = relative_error(lhat, gt.l);
  } else if (algo.id == "mc-altmin") {
    AltMinOptions opts;
    const std::string mode = p.value("mode", std::string("all_samples"));
    opts.mode = mode == "partitioned" ? AltMinOptions::Mode::kPartitioned
                                      : AltMinOptions::Mode::kAllSamples;
    opts.sweeps = p.value("sweeps", 0);
    opts.tol = p.value("tol", 1e-12);
    opts.clip_mu = p.value("clip_mu", 3.0);
    opts.split_seed = scenario.seed + 1;
    BinaryMask omega = gt.observed.rows() > 0
                           ? gt.observed
                           : BinaryMask(scenario.n, scenario.tmax, true);
    MaskedMatrix masked = MaskedMatrix::observe(gt.m, omega);
    Matrix lhat = mc_altmin(masked, p.value("rank", scenario.r), opts);
    record.final_rel_err = relative_error(lhat, gt.l);
  } else if (algo.id == "grouse") {
    GrouseOptions opts;
    opts.step = p.value("step", std::string("greedy")) == "fixed"
                    ? GrouseOptions::Step::kFixed
                    : GrouseOptions::Step::kGreedy;
    opts.eta = p.value("eta", 1.0);
    Philox rng = make_stream(scenario.seed, RngStream::kInit);
    Matrix init(scenario.n, scenario.r);
    for (Index j = 0; j < scenario.r; ++j) {
      for (Index i = 0; i < scenario.n; ++i) init(i, j) = rng.normal();
    }
    const BasisMatrix p0 = orthonormalize(init);
    const BinaryMask* omega = gt.observed.rows() > 0 ? &gt.observed : nullptr;
    const BasisMatrix truth = gt.subspaces.front();
    TrackTrace trace = track_missing(gt.m, omega, p0, opts, &truth);
    // For the tracker the error column carries eps_t = sum of sin^2(theta_i),
    // the metric its guarantees are stated in.
    const Index stride =
        std::max<Index>(1, scenario.tmax / 100);
    for (Index t = stride; t <= scenario.tmax; t += stride) {
      record.rows.push_back(
          MetricRow{static_cast<double>(t),
                    trace.eps[static_cast<size_t>(t - 1)], kNaN,
                    elapsed_ms(start)});
    }
    record.final_rel_err = trace.eps.empty() ? kNaN : trace.eps.back();
  } else {
    throw InvalidConfigError("unknown algorithm id: " + algo.id);
  }

  if (record.rows.empty()) {
    record.rows.push_back(MetricRow{static_cast<double>(scenario.tmax), kNaN,
                                    record.final_rel_err, elapsed_ms(start)});
  }
}

std::string sanitize(const std::string& name) {
  std::string out = name;
  for (char& c : out) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') {
      c = '_';
    }
  }
  return out;
}

std::string cell_csv_name(const std::string& scenario,
                          const std::string& algo) {
  return sanitize(scenario) + "__" + sanitize(algo) + ".csv";
}

}  // namespace

RunRecord run_once(const ScenarioConfig& scenario, const AlgoSpec& algo,
                   uint64_t trial_seed) {
  RunRecord record;
  record.scenario = scenario.name;
  record.algo = algo.id;
  record.seed = trial_seed;
  record.final_rel_err = kNaN;
  record.online_rel_err = kNaN;

  ScenarioConfig seeded = scenario;
  seeded.seed = trial_seed;

  const auto start = std::chrono::steady_clock::now();
  if (comparison_only_ids().count(algo.id)) {
    record.error = "not-implemented: comparison-only method";
    return record;
  }
  try {
    run_algo(seeded, algo, record, start);
  } catch (const std::exception& e) {
    record.error = e.what();
  }
  record.wall_ms = elapsed_ms(start);
  return record;
}

BenchReport monte_carlo(const BenchSuite& suite) {
  if (suite.trials < 1) {
    throw InvalidConfigError("monte_carlo: trial count must be >= 1");
  }
  struct Task {
    const SuiteEntry* entry;
    const AlgoSpec* algo;
    Index trial;
  };
  std::vector<Task> tasks;
  for (const auto& entry : suite.entries) {
    for (const auto& algo : entry.algos) {
      for (Index trial = 0; trial < suite.trials; ++trial) {
        tasks.push_back(Task{&entry, &algo, trial});
      }
    }
  }

  std::vector<RunRecord> results(tasks.size());
  std::atomic<size_t> next{0};
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned workers = suite.workers > 0
                               ? static_cast<unsigned>(suite.workers)
                               : hw;
  auto work = [&]() {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      const Task& task = tasks[i];
      RunRecord r = run_once(task.entry->scenario, *task.algo,
                             suite.base_seed + static_cast<uint64_t>(task.trial));
      r.trial = task.trial;
      results[i] = std::move(r);
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();

  BenchReport report;
  report.suite_name = suite.name;
  std::set<std::string> not_impl;
  for (auto& record : results) {
    if (record.error.rfind("not-implemented", 0) == 0) {
      not_impl.insert(record.algo);
    }
    report.cells[{record.scenario, record.algo}].records.push_back(
        std::move(record));
  }
  report.not_implemented.assign(not_impl.begin(), not_impl.end());

  for (auto& [key, cell] : report.cells) {
    std::sort(cell.records.begin(), cell.records.end(),
              [](const RunRecord& a, const RunRecord& b) {
                return a.trial < b.trial;
              });
    double sum = 0.0, sum_sq = 0.0, wall = 0.0;
    int ok = 0;
    for (const auto& r : cell.records) {
      wall += r.wall_ms;
      if (!r.error.empty() || std::isnan(r.final_rel_err)) {
        ++cell.failures;
        continue;
      }
      sum += r.final_rel_err;
      sum_sq += r.final_rel_err * r.final_rel_err;
      ++ok;
    }
    cell.mean_wall_ms = wall / static_cast<double>(cell.records.size());
    if (ok > 0) {
      cell.mean_rel_err = sum / ok;
      cell.std_rel_err = ok > 1 ? std::sqrt(std::max(
                                      0.0, (sum_sq - sum * sum / ok) / (ok - 1)))
                                : 0.0;
    } else {
      cell.mean_rel_err = kNaN;
      cell.std_rel_err = kNaN;
    }
  }
  return report;
}

std::string rows_to_csv(const std::vector<MetricRow>& rows) {
  std::ostringstream out;
  out << "t,SE,rel_err,wall_ms\n";
  for (const auto& row : rows) {
    out << format_double(row.t) << ',' << format_double(row.se) << ','
        << format_double(row.rel_err) << ',' << format_double(row.wall_ms)
        << '\n';
  }
  return out.str();
}

std::vector<MetricRow> rows_from_csv(const std::string& text) {
  std::vector<MetricRow> rows;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line.rfind("t,", 0) == 0) continue;
    }
    std::array<double, 4> vals{};
    std::stringstream ss(line);
    std::string cell;
    size_t idx = 0;
    while (std::getline(ss, cell, ',') && idx < 4) {
      vals[idx++] = std::strtod(cell.c_str(), nullptr);
    }
    if (idx != 4) throw IoError("metric CSV row with wrong arity");
    rows.push_back(MetricRow{vals[0], vals[1], vals[2], vals[3]});
  }
  return rows;
}

std::string summary_json(const BenchReport& report) {
  json j;
  j["suite"] = report.suite_name;
  j["not_implemented"] = report.not_implemented;
  json table = json::object();
  json details = json::object();
  for (const auto& [key, cell] : report.cells) {
    const auto& [scenario, algo] = key;
    json cj;
    cj["trials"] = cell.records.size();
    cj["failures"] = cell.failures;
    cj["mean_rel_err"] = cell.mean_rel_err;
    cj["std_rel_err"] = cell.std_rel_err;
    cj["mean_wall_ms"] = cell.mean_wall_ms;
    table[scenario][algo] = cj;

    json trials = json::array();
    for (const auto& r : cell.records) {
      json tj;
      tj["trial"] = r.trial;
      tj["seed"] = r.seed;
      tj["final_rel_err"] = r.final_rel_err;
      if (!std::isnan(r.online_rel_err)) {
        tj["online_rel_err"] = r.online_rel_err;
      }
      if (!r.detected_changes.empty() || !r.true_changes.empty()) {
        tj["detected_changes"] = r.detected_changes;
        tj["true_changes"] = r.true_changes;
      }
      if (r.support_match_fraction >= 0.0) {
        tj["support_match_fraction"] = r.support_match_fraction;
      }
      if (!r.checkpoints.empty()) {
        json cps = json::array();
        for (const auto& cp : r.checkpoints) {
          cps.push_back({{"t", cp.t}, {"segment", cp.segment}, {"k", cp.k},
                         {"se", cp.se}});
        }
        tj["checkpoints"] = cps;
      }
      if (!r.error.empty()) tj["error"] = r.error;
      trials.push_back(tj);
    }
    details[scenario][algo] = trials;
  }
  j["table"] = table;
  j["trials"] = details;
  // NaN is not valid JSON; nlohmann serializes it as null with this dump.
  return j.dump(2, ' ', false, json::error_handler_t::replace);
}

void write_report(const BenchReport& report, const std::string& out_dir) {
  if (report.cells.empty()) {
    throw PreconditionError("write_report: no records to report");
  }
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory: " + out_dir);

  for (const auto& [key, cell] : report.cells) {
    std::vector<MetricRow> rows;
    for (const auto& r : cell.records) {
      rows.insert(rows.end(), r.rows.begin(), r.rows.end());
    }
    const std::string path =
        (fs::path(out_dir) / cell_csv_name(key.first, key.second)).string();
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << rows_to_csv(rows);
  }

  {
    std::ofstream out((fs::path(out_dir) / "summary.json").string());
    if (!out) throw IoError("cannot write summary.json");
    out << summary_json(report) << '\n';
  }

  {
    std::ofstream out((fs::path(out_dir) / "plot.gp").string());
    out << "# gnuplot script: subspace error at the update checkpoints\n";
    out << "set logscale y\nset xlabel 't'\nset ylabel 'SE'\n";
    out << "set datafile separator ','\nset key outside\n";
    out << "plot \\\n";
    bool first = true;
    for (const auto& [key, cell] : report.cells) {
      if (!first) out << ", \\\n";
      first = false;
      out << "  '" << cell_csv_name(key.first, key.second)
          << "' using 1:2 with linespoints title '" << key.first << " "
          << key.second << "'";
    }
    out << "\n";
  }
}

std::vector<std::string> check_acceptance(const BenchSuite& suite,
                                          const BenchReport& report) {
  std::vector<std::string> violations;
  for (const auto& rule : suite.acceptance) {
    const auto it = report.cells.find({rule.scenario, rule.algo});
    if (it == report.cells.end()) {
      violations.push_back("acceptance rule references missing cell " +
                           rule.scenario + "/" + rule.algo);
      continue;
    }
    const double got = it->second.mean_rel_err;
    if (!(got <= rule.max_mean_rel_err)) {
      violations.push_back(rule.scenario + "/" + rule.algo +
                           ": mean rel err " + format_double(got) +
                           " exceeds " +
                           format_double(rule.max_mean_rel_err));
    }
  }
  return violations;
}

std::vector<std::string> verify_against_golden(const std::string& golden_dir) {
  const fs::path dir(golden_dir);
  std::ifstream suite_in((dir / "suite.json").string());
  if (!suite_in) {
    throw IoError("golden directory has no suite.json: " + golden_dir);
  }
  std::stringstream buf;
  buf << suite_in.rdbuf();
  const BenchSuite suite = BenchSuite::from_json(buf.str());
  const BenchReport fresh = monte_carlo(suite);

  std::vector<std::string> mismatches;
  for (const auto& [key, cell] : fresh.cells) {
    const std::string name = cell_csv_name(key.first, key.second);
    std::ifstream golden_file((dir / name).string());
    if (!golden_file) {
      mismatches.push_back("missing golden CSV " + name);
      continue;
    }
    std::stringstream gbuf;
    gbuf << golden_file.rdbuf();
    std::vector<MetricRow> golden_rows = rows_from_csv(gbuf.str());
    std::vector<MetricRow> fresh_rows;
    for (const auto& r : cell.records) {
      fresh_rows.insert(fresh_rows.end(), r.rows.begin(), r.rows.end());
    }
    if (golden_rows.size() != fresh_rows.size()) {
      mismatches.push_back(name + ": row count " +
                           std::to_string(fresh_rows.size()) + " vs golden " +
                           std::to_string(golden_rows.size()));
      continue;
    }
    for (size_t i = 0; i < golden_rows.size(); ++i) {
      const auto& a = golden_rows[i];
      const auto& b = fresh_rows[i];
      const bool se_equal =
          (std::isnan(a.se) && std::isnan(b.se)) || a.se == b.se;
      const bool rel_equal =
          (std::isnan(a.rel_err) && std::isnan(b.rel_err)) ||
          a.rel_err == b.rel_err;
      // wall_ms is timing noise and deliberately not compared.
      if (a.t != b.t || !se_equal || !rel_equal) {
        mismatches.push_back(name + ": row " + std::to_string(i) +
                             " differs");
        break;
      }
    }
  }
  return mismatches;
}

std::string BenchSuite::to_json() const {
  json j;
  j["name"] = name;
  j["trials"] = trials;
  j["base_seed"] = base_seed;
  j["workers"] = workers;
  j["entries"] = json::array();
  for (const auto& entry : entries) {
    json je;
    je["scenario"] = json::parse(entry.scenario.to_json());
    je["algos"] = json::array();
    for (const auto& algo : entry.algos) {
      json ja;
      ja["id"] = algo.id;
      if (!algo.params_json.empty() && algo.params_json != "{}") {
        ja["params"] = json::parse(algo.params_json);
      }
      je["algos"].push_back(ja);
    }
    j["entries"].push_back(je);
  }
  if (!acceptance.empty()) {
    j["acceptance"] = json::array();
    for (const auto& rule : acceptance) {
      j["acceptance"].push_back({{"scenario", rule.scenario},
                                 {"algo", rule.algo},
                                 {"max_mean_rel_err", rule.max_mean_rel_err}});
    }
  }
  return j.dump(2);
}

BenchSuite BenchSuite::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InvalidConfigError(std::string("suite JSON parse error: ") +
                             e.what());
  }
  BenchSuite suite;
  try {
    suite.name = j.value("name", std::string("suite"));
    suite.trials = j.value("trials", Index{1});
    suite.base_seed = j.value("base_seed", uint64_t{1});
    suite.workers = j.value("workers", 0);
    for (const auto& je : j.at("entries")) {
      SuiteEntry entry;
      entry.scenario = ScenarioConfig::from_json(je.at("scenario").dump());
      for (const auto& ja : je.at("algos")) {
        AlgoSpec spec;
        spec.id = ja.at("id").get<std::string>();
        spec.params_json = ja.contains("params") ? ja["params"].dump() : "{}";
        entry.algos.push_back(spec);
      }
      suite.entries.push_back(std::move(entry));
    }
    for (const auto& ja : j.value("acceptance", json::array())) {
      suite.acceptance.push_back(
          AcceptanceRule{ja.at("scenario").get<std::string>(),
                         ja.at("algo").get<std::string>(),
                         ja.at("max_mean_rel_err").get<double>()});
    }
  } catch (const json::exception& e) {
    throw InvalidConfigError(std::string("suite JSON field error: ") +
                             e.what());
  }
  return suite;
}

}  // namespace slr
