// slr: sparse + low-rank decomposition and robust subspace tracking CLI.
//
// Subcommands:
//   gen     materialize a synthetic scenario to SLRM matrices + manifest
//   run     one algorithm on one scenario (or a streamed input for norst)
//   bench   Monte-Carlo suite -> CSV + summary.json + plot script
//   verify  regression-compare a fresh run against a golden directory
//
// Exit codes: 0 success, 1 error, 2 acceptance-threshold or golden mismatch.

#include "slr/batch.hpp"
#include "slr/bench.hpp"
#include "slr/linalg.hpp"
#include "slr/matrix_io.hpp"
#include "slr/mc.hpp"
#include "slr/norst.hpp"
#include "slr/synthgen.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace slr;

#ifndef SLR_PRESET_DIR
#define SLR_PRESET_DIR "presets"
#endif

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::optional<uint64_t> seed_from_env() {
  const char* env = std::getenv("SLR_SEED");
  if (!env || !*env) return std::nullopt;
  return std::strtoull(env, nullptr, 10);
}

ScenarioConfig load_scenario(const std::string& path) {
  ScenarioConfig config = ScenarioConfig::from_json(slurp(path));
  if (auto seed = seed_from_env()) config.seed = *seed;
  return config;
}

int cmd_gen(const std::string& config_path, const std::string& out_dir) {
  const ScenarioConfig config = load_scenario(config_path);
  GroundTruth gt = assemble_scenario(config);
  fs::create_directories(out_dir);
  write_slrm_file((fs::path(out_dir) / "M.slrm").string(), gt.m);
  write_slrm_file((fs::path(out_dir) / "L.slrm").string(), gt.l);
  write_slrm_file((fs::path(out_dir) / "S.slrm").string(), gt.s);
  if (gt.noise.size() > 0) {
    write_slrm_file((fs::path(out_dir) / "noise.slrm").string(), gt.noise);
  }
  write_mask_file((fs::path(out_dir) / "support.slrk").string(),
                  gt.support.mask);
  if (gt.observed.rows() > 0) {
    write_mask_file((fs::path(out_dir) / "observed.slrk").string(),
                    gt.observed);
  }
  json manifest;
  manifest["config"] = json::parse(config.to_json());
  manifest["change_times"] = gt.change_times;
  manifest["seed"] = config.seed;
  // Diagnostic only: condition number of the coefficient covariance.
  manifest["coeff_condition_number"] =
      config.coeffs.type == CoeffModel::Type::kBoundedUniform
          ? config.coeffs.f
          : 1.0;
  json subspace_files = json::array();
  for (size_t j = 0; j < gt.subspaces.size(); ++j) {
    const std::string name = "P" + std::to_string(j) + ".slrm";
    write_slrm_file((fs::path(out_dir) / name).string(),
                    gt.subspaces[j].matrix());
    subspace_files.push_back(name);
  }
  manifest["subspaces"] = subspace_files;
  std::ofstream mf((fs::path(out_dir) / "manifest.json").string());
  mf << manifest.dump(2) << '\n';
  std::cout << "wrote scenario '" << config.name << "' to " << out_dir
            << "\n";
  return 0;
}

// Streaming tracker mode: frames from an SLRM file or the framed stdin pipe,
// one CSV row per frame, JSON summary at the end.
int run_norst_stream(const json& params, const ScenarioConfig* scenario,
                     const std::string& input, bool stdin_frames,
                     const std::string& truth_dir,
                     const std::string& out_dir) {
  NorstParams np;
  np.r = params.value("r", scenario ? scenario->r : Index{0});
  np.t_train = params.value("t_train", scenario ? scenario->t_train : Index{0});
  np.eps = params.value("eps", 1e-3);
  np.k_updates = params.value("K", Index{0});
  np.alpha = params.value("alpha", Index{0});
  np.xmin = params.value("xmin", scenario && scenario->magnitude.type ==
                                     MagnitudeLaw::Type::kUniformRange
                                 ? scenario->magnitude.xmin
                                 : 0.0);
  np.omega_supp = params.value("omega_supp", 0.0);
  np.xi = params.value("xi", 0.0);
  np.adaptive_xi = params.value("adaptive_xi", false);
  np.omega_evals = params.value("omega_evals", 0.0);
  if (np.r < 1) throw InvalidConfigError("norst: r required");
  if (np.t_train < np.r) {
    throw InvalidConfigError("norst: t_train >= r required");
  }

  std::optional<Matrix> stored;
  std::optional<GroundTruth> gt;
  if (!input.empty()) {
    stored = read_slrm_file(input);
  } else if (!stdin_frames) {
    if (!scenario) {
      throw InvalidConfigError("norst: need --input, --stdin-frames or a "
                               "scenario config");
    }
    gt = assemble_scenario(*scenario);
    stored = gt->m;
  }

  fs::create_directories(out_dir);
  std::ofstream frames_csv((fs::path(out_dir) / "frames.csv").string());
  frames_csv << "t,support_size,xhat_norm,residual,phase,k\n";

  std::vector<BasisMatrix> truth_bases;
  std::vector<Index> truth_changes;
  if (!truth_dir.empty()) {
    const json manifest =
        json::parse(slurp((fs::path(truth_dir) / "manifest.json").string()));
    truth_changes = manifest.value("change_times", std::vector<Index>{});
    for (const auto& name :
         manifest.value("subspaces", std::vector<std::string>{})) {
      truth_bases.emplace_back(
          read_slrm_file((fs::path(truth_dir) / name).string()));
    }
  } else if (gt) {
    truth_bases = gt->subspaces;
    truth_changes = gt->change_times;
  }
  auto truth_at = [&](Index t) -> const BasisMatrix* {
    if (truth_bases.empty()) return nullptr;
    size_t seg = 0;
    for (size_t j = 0; j < truth_changes.size(); ++j) {
      if (t >= truth_changes[j]) seg = j + 1;
    }
    return &truth_bases[std::min(seg, truth_bases.size() - 1)];
  };

  // Collect training frames, initialize, then stream.
  Matrix train(0, 0);
  std::optional<NorstTracker> tracker;
  std::optional<FrameReader> reader;
  if (stdin_frames) reader.emplace(std::cin);

  Index t = 0;
  Index n = 0;
  json updates = json::array();
  auto handle_frame = [&](const Vector& frame) {
    ++t;
    if (t <= np.t_train) {
      if (train.size() == 0) {
        n = frame.size();
        train.resize(n, np.t_train);
      }
      train.col(t - 1) = frame;
      if (t == np.t_train) {
        NorstInit init = norst_init(train, np.r);
        tracker.emplace(init.p0, init.lambda_plus, np, n);
      }
      return;
    }
    if (!tracker) throw PreconditionError("norst: no training frames seen");
    const size_t checkpoints_before = tracker->checkpoints().size();
    FrameOutput out = tracker->feed(frame);
    frames_csv << t << ',' << out.support.size() << ','
               << format_double(out.xhat.norm()) << ','
               << format_double(out.projected_residual) << ','
               << (tracker->phase() == NorstPhase::kUpdate ? "update"
                                                           : "detect")
               << ',' << tracker->update_count() << '\n';
    if (tracker->checkpoints().size() > checkpoints_before) {
      const auto& cp = tracker->checkpoints().back();
      json ju = {{"t", cp.t}, {"segment", cp.segment}, {"k", cp.k}};
      if (const BasisMatrix* truth = truth_at(cp.t)) {
        ju["se"] = subspace_error(tracker->current_basis(), *truth);
      }
      updates.push_back(ju);
    }
  };

  if (stored) {
    for (Index c = 0; c < stored->cols(); ++c) handle_frame(stored->col(c));
  } else {
    while (auto frame = reader->next()) handle_frame(*frame);
  }
  if (!tracker) {
    throw PreconditionError("norst: stream ended before t_train frames");
  }

  json summary;
  summary["frames"] = t;
  summary["detected_changes"] = tracker->detected_changes();
  summary["updates"] = updates;
  if (!truth_changes.empty()) summary["true_changes"] = truth_changes;
  std::ofstream sf((fs::path(out_dir) / "norst_summary.json").string());
  sf << summary.dump(2) << '\n';
  std::cout << "norst: " << t << " frames, "
            << tracker->detected_changes().size()
            << " detected changes; outputs in " << out_dir << "\n";
  return 0;
}

int cmd_run(const std::string& algo, const std::string& config_path,
            const std::string& params_json, const std::string& input,
            bool stdin_frames, const std::string& truth_dir,
            const std::string& out_dir) {
  const json params =
      params_json.empty() ? json::object() : json::parse(params_json);
  std::optional<ScenarioConfig> scenario;
  if (!config_path.empty()) scenario = load_scenario(config_path);

  if (algo == "norst") {
    return run_norst_stream(params, scenario ? &*scenario : nullptr, input,
                            stdin_frames, truth_dir, out_dir);
  }

  // Batch and completion solvers: matrix from --input or the scenario.
  Matrix m;
  std::optional<GroundTruth> gt;
  if (!input.empty()) {
    m = read_slrm_file(input);
  } else if (scenario) {
    gt = assemble_scenario(*scenario);
    m = gt->m;
  } else {
    throw InvalidConfigError("run: need --config or --input");
  }

  fs::create_directories(out_dir);
  const auto start = std::chrono::steady_clock::now();
  json run_manifest;
  run_manifest["algo"] = algo;

  auto finish = [&](const Matrix& lhat, const Matrix& shat, int iterations,
                    double residual) {
    write_slrm_file((fs::path(out_dir) / "Lhat.slrm").string(), lhat);
    write_slrm_file((fs::path(out_dir) / "Shat.slrm").string(), shat);
    run_manifest["iterations"] = iterations;
    run_manifest["final_residual"] = residual;
    run_manifest["wall_ms"] =
        std::chrono::duration<double, std::milli>(
            std::chrono::steady_clock::now() - start)
            .count();
    if (gt) {
      run_manifest["rel_err_L"] =
          (lhat - gt->l).norm() / std::max(gt->l.norm(), 1e-300);
    }
    std::ofstream mf((fs::path(out_dir) / "run.json").string());
    mf << run_manifest.dump(2) << '\n';
    std::cout << algo << ": done in " << run_manifest["wall_ms"]
              << " ms; outputs in " << out_dir << "\n";
  };

  if (algo == "altproj") {
    AltProjConfig cfg;
    cfg.rank = params.value("rank", scenario ? scenario->r : Index{1});
    cfg.eps = params.value("eps", 1e-4);
    cfg.beta = params.value("beta", 0.0);
    cfg.t_per_stage = params.value("t_per_stage", 0);
    SLRDecomposition dec = altproj(m, cfg);
    finish(dec.lhat, dec.shat, dec.iterations, dec.final_residual);
  } else if (algo == "pcp") {
    const double lambda =
        params.value("lambda", pcp_default_lambda(m.rows(), m.cols()));
    SLRDecomposition dec = pcp_admm(m, lambda, params.value("tol", 1e-7),
                                    params.value("max_iters", 500));
    run_manifest["converged"] = dec.converged;
    finish(dec.lhat, dec.shat, dec.iterations, dec.final_residual);
  } else if (algo == "modpcp") {
    const double lambda =
        params.value("lambda", pcp_default_lambda(m.rows(), m.cols()));
    BasisMatrix g = BasisMatrix::empty(m.rows());
    if (params.contains("g_file")) {
      g = BasisMatrix(read_slrm_file(params["g_file"].get<std::string>()));
    }
    SLRDecomposition dec = modified_pcp(
        m, g, lambda, params.value("eps_noise", 0.0),
        params.value("tol", 1e-7), params.value("max_iters", 500));
    run_manifest["converged"] = dec.converged;
    finish(dec.lhat, dec.shat, dec.iterations, dec.final_residual);
  } else if (algo == "mc-altmin" || algo == "grouse") {
    BinaryMask omega;
    if (params.contains("mask_file")) {
      omega = read_mask_file(params["mask_file"].get<std::string>());
    } else if (gt && gt->observed.rows() > 0) {
      omega = gt->observed;
    } else {
      omega = BinaryMask(m.rows(), m.cols(), true);
    }
    if (algo == "mc-altmin") {
      AltMinOptions opts;
      opts.mode = params.value("mode", std::string("all_samples")) ==
                          "partitioned"
                      ? AltMinOptions::Mode::kPartitioned
                      : AltMinOptions::Mode::kAllSamples;
      opts.sweeps = params.value("sweeps", 0);
      opts.tol = params.value("tol", 1e-12);
      opts.clip_mu = params.value("clip_mu", 3.0);
      Matrix lhat = mc_altmin(MaskedMatrix::observe(m, omega),
                              params.value("rank", scenario ? scenario->r
                                                            : Index{1}),
                              opts);
      finish(lhat, m - lhat, 0, 0.0);
    } else {
      GrouseOptions opts;
      opts.step = params.value("step", std::string("greedy")) == "fixed"
                      ? GrouseOptions::Step::kFixed
                      : GrouseOptions::Step::kGreedy;
      opts.eta = params.value("eta", 1.0);
      BasisMatrix p0 = params.contains("init_file")
                           ? BasisMatrix(read_slrm_file(
                                 params["init_file"].get<std::string>()))
                           : orthonormalize(Matrix::Identity(
                                 m.rows(),
                                 params.value("rank", scenario ? scenario->r
                                                               : Index{1})));
      TrackTrace trace = track_missing(m, &omega, p0, opts, nullptr);
      write_slrm_file((fs::path(out_dir) / "Phat.slrm").string(),
                      trace.final_basis.matrix());
      run_manifest["skipped_steps"] = trace.skipped_steps;
      run_manifest["wall_ms"] =
          std::chrono::duration<double, std::milli>(
              std::chrono::steady_clock::now() - start)
              .count();
      std::ofstream mf((fs::path(out_dir) / "run.json").string());
      mf << run_manifest.dump(2) << '\n';
      std::cout << "grouse: tracked " << m.cols() << " frames; outputs in "
                << out_dir << "\n";
    }
  } else if (algo == "norst-offline") {
    throw InvalidConfigError(
        "run: norst-offline is available through `slr bench`");
  } else {
    throw InvalidConfigError("run: unknown algorithm " + algo);
  }
  return 0;
}

int cmd_bench(const std::string& suite_path, Index trials_override,
              const std::string& out_dir, bool paper_scale) {
  std::string text;
  if (!suite_path.empty()) {
    text = slurp(suite_path);
  } else {
    const std::string builtin = paper_scale ? "suite-paper.json"
                                            : "suite-desk.json";
    // Built-in suites live next to the sources; prefer a local presets/
    // directory when run from a checkout.
    if (fs::exists(fs::path("presets") / builtin)) {
      text = slurp((fs::path("presets") / builtin).string());
    } else {
      text = slurp((fs::path(SLR_PRESET_DIR) / builtin).string());
    }
  }
  BenchSuite suite = BenchSuite::from_json(text);
  if (trials_override > 0) suite.trials = trials_override;
  if (auto seed = seed_from_env()) suite.base_seed = *seed;

  BenchReport report = monte_carlo(suite);
  write_report(report, out_dir);
  {
    std::ofstream sf((fs::path(out_dir) / "suite.json").string());
    sf << suite.to_json() << '\n';
  }
  for (const auto& [key, cell] : report.cells) {
    std::cout << key.first << " / " << key.second << ": mean rel err "
              << cell.mean_rel_err << " (std " << cell.std_rel_err
              << ", failures " << cell.failures << ")\n";
  }
  const auto violations = check_acceptance(suite, report);
  for (const auto& v : violations) std::cerr << "threshold: " << v << "\n";
  std::cout << "report written to " << out_dir << "\n";
  return violations.empty() ? 0 : 2;
}

int cmd_verify(const std::string& golden_dir) {
  const auto mismatches = verify_against_golden(golden_dir);
  if (mismatches.empty()) {
    std::cout << "golden match: " << golden_dir << "\n";
    return 0;
  }
  for (const auto& m : mismatches) std::cerr << "mismatch: " << m << "\n";
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sparse + low-rank decomposition and subspace tracking"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", algo, params_json, input;
  std::string truth_dir, suite_path, golden_dir;
  bool stdin_frames = false;
  bool paper_scale = false;
  Index trials = 0;

  auto* gen = app.add_subcommand("gen", "materialize a synthetic scenario");
  gen->add_option("--config", config_path, "scenario JSON")->required();
  gen->add_option("--out", out_dir, "output directory");

  auto* run = app.add_subcommand("run", "run one algorithm");
  run->add_option("--algo", algo,
                  "altproj|pcp|modpcp|norst|mc-altmin|grouse")
      ->required();
  run->add_option("--config", config_path, "scenario JSON");
  run->add_option("--params", params_json, "algorithm parameter JSON");
  run->add_option("--input", input, "SLRM matrix input");
  run->add_flag("--stdin-frames", stdin_frames,
                "read framed binary frames from stdin (norst)");
  run->add_option("--truth", truth_dir, "directory from `slr gen`");
  run->add_option("--out", out_dir, "output directory");

  auto* bench = app.add_subcommand("bench", "Monte-Carlo benchmark suite");
  bench->add_option("--suite", suite_path, "suite JSON");
  bench->add_option("--trials", trials, "override trial count");
  bench->add_option("--out", out_dir, "output directory");
  bench->add_flag("--paper-scale", paper_scale,
                  "use the built-in full-scale suite preset");

  auto* verify = app.add_subcommand("verify", "compare against a golden run");
  verify->add_option("--golden", golden_dir, "golden directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen(config_path, out_dir);
    if (run->parsed()) {
      return cmd_run(algo, config_path, params_json, input, stdin_frames,
                     truth_dir, out_dir);
    }
    if (bench->parsed()) {
      return cmd_bench(suite_path, trials, out_dir, paper_scale);
    }
    if (verify->parsed()) return cmd_verify(golden_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
