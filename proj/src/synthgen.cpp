#include "slr/synthgen.hpp"

#include "slr/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace slr {

namespace {

using nlohmann::json;

Matrix gaussian_matrix(Index rows, Index cols, double stddev, Philox& rng) {
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) m(i, j) = stddev * rng.normal();
  }
  return m;
}

Matrix skew_from_gaussian(Index n, Philox& rng) {
  Matrix b = gaussian_matrix(n, n, 1.0, rng);
  return b - b.transpose().eval();
}

}  // namespace

double moving_object_c0_from_b0(double b0) {
  if (!(b0 > 0.0 && b0 <= 1.0)) {
    throw InvalidConfigError("moving object b0 must lie in (0, 1]");
  }
  const double cells = std::max(1.0, std::round(1.0 / b0));
  return 1.0 / cells;
}

void ScenarioConfig::validate() const {
  if (n < 1 || tmax < 1 || r < 1) {
    throw InvalidConfigError("scenario dimensions must be positive");
  }
  if (r > n) throw InvalidConfigError("scenario rank exceeds ambient dim");
  if (t_train < 0 || t_train >= tmax) {
    throw InvalidConfigError("t_train must lie in [0, tmax)");
  }
  if (change_times.size() != deltas.size()) {
    throw InvalidConfigError("one delta per change time required");
  }
  Index prev = 1;
  for (Index t : change_times) {
    if (t <= prev || t >= tmax) {
      throw InvalidConfigError("change times must be ascending in (1, tmax)");
    }
    prev = t;
  }
  if (coeffs.type == CoeffModel::Type::kBoundedUniform && coeffs.f < 1.0) {
    throw InvalidConfigError("bounded coefficient model requires f >= 1");
  }
  if (magnitude.type == MagnitudeLaw::Type::kUniformRange &&
      magnitude.xmin > magnitude.xmax) {
    throw InvalidConfigError("magnitude law requires xmin <= xmax");
  }
  Index seg_prev = 0;
  for (const auto& seg : outlier_segments) {
    if (seg.t_end <= seg_prev || seg.t_end > tmax) {
      throw InvalidConfigError("outlier segments must partition (0, tmax]");
    }
    if (seg.type == OutlierSegment::Type::kBernoulli &&
        (seg.rho < 0.0 || seg.rho > 1.0)) {
      throw InvalidConfigError("bernoulli rho must lie in [0, 1]");
    }
    seg_prev = seg.t_end;
  }
  if (!outlier_segments.empty() && seg_prev != tmax) {
    throw InvalidConfigError("outlier segments must end at tmax");
  }
  if (!(observe_p > 0.0 && observe_p <= 1.0)) {
    throw InvalidConfigError("observe_p must lie in (0, 1]");
  }
  if (noise_var < 0.0) throw InvalidConfigError("noise_var must be >= 0");
}

std::string ScenarioConfig::to_json() const {
  json j;
  j["name"] = name;
  j["n"] = n;
  j["tmax"] = tmax;
  j["r"] = r;
  j["t_train"] = t_train;
  j["change_times"] = change_times;
  j["deltas"] = deltas;
  j["coeff_model"] =
      coeffs.type == CoeffModel::Type::kGaussianOverT
          ? json{{"type", "gaussian_1_over_d"}}
          : json{{"type", "bounded_unif"}, {"f", coeffs.f}};
  if (magnitude.type == MagnitudeLaw::Type::kUniformRange) {
    j["magnitude"] = {{"law", "unif_range"},
                      {"xmin", magnitude.xmin},
                      {"xmax", magnitude.xmax}};
  } else {
    j["magnitude"] = {{"law", "unif_symmetric"}, {"a", magnitude.a}};
  }
  j["outlier_segments"] = json::array();
  for (const auto& seg : outlier_segments) {
    json js;
    js["until"] = seg.t_end;
    switch (seg.type) {
      case OutlierSegment::Type::kNone:
        js["model"] = "none";
        break;
      case OutlierSegment::Type::kBernoulli:
        js["model"] = "bernoulli";
        js["rho"] = seg.rho;
        break;
      case OutlierSegment::Type::kMovingObject:
        js["model"] = "moving_object";
        js["s"] = seg.s;
        js["tau"] = seg.tau;
        js["c0"] = seg.c0;
        break;
    }
    j["outlier_segments"].push_back(js);
  }
  j["noise_var"] = noise_var;
  j["observe_p"] = observe_p;
  j["seed"] = seed;
  return j.dump(2);
}

ScenarioConfig ScenarioConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InvalidConfigError(std::string("scenario JSON parse error: ") +
                             e.what());
  }
  ScenarioConfig c;
  try {
    c.name = j.value("name", std::string("scenario"));
    c.n = j.at("n").get<Index>();
    c.tmax = j.at("tmax").get<Index>();
    c.r = j.at("r").get<Index>();
    c.t_train = j.value("t_train", Index{0});
    c.change_times = j.value("change_times", std::vector<Index>{});
    c.deltas = j.value("deltas", std::vector<double>{});
    if (j.contains("coeff_model")) {
      const auto& cm = j["coeff_model"];
      const std::string type = cm.value("type", "bounded_unif");
      if (type == "gaussian_1_over_d") {
        c.coeffs.type = CoeffModel::Type::kGaussianOverT;
      } else if (type == "bounded_unif") {
        c.coeffs.type = CoeffModel::Type::kBoundedUniform;
        c.coeffs.f = cm.value("f", 1.0);
      } else {
        throw InvalidConfigError("unknown coeff_model type: " + type);
      }
    }
    if (j.contains("magnitude")) {
      const auto& mg = j["magnitude"];
      const std::string law = mg.value("law", "unif_range");
      if (law == "unif_range") {
        c.magnitude.type = MagnitudeLaw::Type::kUniformRange;
        c.magnitude.xmin = mg.at("xmin").get<double>();
        c.magnitude.xmax = mg.at("xmax").get<double>();
      } else if (law == "unif_symmetric") {
        c.magnitude.type = MagnitudeLaw::Type::kUniformSymmetric;
        c.magnitude.a = mg.at("a").get<double>();
      } else {
        throw InvalidConfigError("unknown magnitude law: " + law);
      }
    }
    for (const auto& js : j.value("outlier_segments", json::array())) {
      OutlierSegment seg;
      seg.t_end = js.at("until").get<Index>();
      const std::string model = js.value("model", "bernoulli");
      if (model == "none") {
        seg.type = OutlierSegment::Type::kNone;
      } else if (model == "bernoulli") {
        seg.type = OutlierSegment::Type::kBernoulli;
        seg.rho = js.at("rho").get<double>();
      } else if (model == "moving_object") {
        seg.type = OutlierSegment::Type::kMovingObject;
        if (js.contains("s")) {
          seg.s = js["s"].get<Index>();
        } else {
          seg.s = static_cast<Index>(
              std::llround(js.at("s_frac").get<double>() * c.n));
        }
        seg.tau = js.at("tau").get<Index>();
        if (js.contains("c0")) {
          seg.c0 = js["c0"].get<double>();
        } else {
          seg.c0 = moving_object_c0_from_b0(js.at("b0").get<double>());
        }
      } else {
        throw InvalidConfigError("unknown outlier model: " + model);
      }
      c.outlier_segments.push_back(seg);
    }
    c.noise_var = j.value("noise_var", 0.0);
    c.observe_p = j.value("observe_p", 1.0);
    c.seed = j.value("seed", uint64_t{1});
  } catch (const json::exception& e) {
    throw InvalidConfigError(std::string("scenario JSON field error: ") +
                             e.what());
  }
  c.validate();
  return c;
}

OutlierSupport OutlierSupport::from_mask(BinaryMask m) {
  OutlierSupport s;
  s.n = m.rows();
  s.tmax = m.cols();
  s.columns.resize(static_cast<size_t>(s.tmax));
  for (Index t = 0; t < s.tmax; ++t) {
    s.columns[static_cast<size_t>(t)] = m.col_indices(t);
  }
  s.mask = std::move(m);
  return s;
}

double OutlierSupport::outfrac_col() const {
  size_t worst = 0;
  for (const auto& col : columns) worst = std::max(worst, col.size());
  return n > 0 ? static_cast<double>(worst) / static_cast<double>(n) : 0.0;
}

double OutlierSupport::outfrac_row(Index alpha) const {
  if (alpha < 1) throw InvalidConfigError("outfrac_row: alpha must be >= 1");
  const Index window = std::min(alpha, tmax);
  if (window == 0 || n == 0) return 0.0;
  std::vector<Index> row_counts(static_cast<size_t>(n), 0);
  Index worst = 0;
  for (Index t = 0; t < window; ++t) {
    for (Index i : columns[static_cast<size_t>(t)]) {
      worst = std::max(worst, ++row_counts[static_cast<size_t>(i)]);
    }
  }
  for (Index start = 1; start + window <= tmax; ++start) {
    for (Index i : columns[static_cast<size_t>(start - 1)]) {
      --row_counts[static_cast<size_t>(i)];
    }
    for (Index i : columns[static_cast<size_t>(start + window - 1)]) {
      worst = std::max(worst, ++row_counts[static_cast<size_t>(i)]);
    }
  }
  return static_cast<double>(worst) / static_cast<double>(window);
}

Index GroundTruth::segment_of(Index t) const {
  Index seg = 0;
  for (size_t j = 0; j < change_times.size(); ++j) {
    if (t >= change_times[j]) seg = static_cast<Index>(j + 1);
  }
  return seg;
}

const BasisMatrix& GroundTruth::subspace_at(Index t) const {
  return subspaces[static_cast<size_t>(segment_of(t))];
}

std::pair<Matrix, BasisMatrix> gen_fixed_lowrank(Index n, Index tmax, Index r,
                                                 uint64_t seed) {
  if (r > std::min(n, tmax)) {
    throw DimensionError("gen_fixed_lowrank: r exceeds min(n, tmax)");
  }
  const double stddev = std::sqrt(1.0 / static_cast<double>(tmax));
  Philox rng_u = make_stream(seed, RngStream::kSubspace);
  Philox rng_v = make_stream(seed, RngStream::kCoeffs);
  Matrix u = gaussian_matrix(n, r, stddev, rng_u);
  Matrix v = gaussian_matrix(tmax, r, stddev, rng_v);
  Matrix l = u * v.transpose();
  return {std::move(l), orthonormalize(u)};
}

std::vector<BasisMatrix> gen_piecewise_subspaces(
    Index n, Index r, Index num_changes, const std::vector<double>& deltas,
    uint64_t seed) {
  if (static_cast<Index>(deltas.size()) != num_changes) {
    throw InvalidConfigError("gen_piecewise_subspaces: one delta per change");
  }
  Philox rng0 = make_stream(seed, RngStream::kSubspace);
  std::vector<BasisMatrix> out;
  out.push_back(orthonormalize(gaussian_matrix(n, r, 1.0, rng0)));
  for (Index j = 0; j < num_changes; ++j) {
    Philox rng_b =
        make_stream(seed, RngStream::kRotation, static_cast<uint32_t>(j));
    const Matrix b = skew_from_gaussian(n, rng_b);
    out.push_back(rotate_subspace(out.back(), deltas[static_cast<size_t>(j)],
                                  b));
  }
  return out;
}

Matrix gen_bounded_coeffs(Index r, Index tmax, double f, uint64_t seed) {
  if (f < 1.0) throw InvalidConfigError("gen_bounded_coeffs: f must be >= 1");
  Vector q(r);
  const double root_f = std::sqrt(f);
  for (Index i = 1; i <= r; ++i) {
    q(i - 1) = (i == r) ? 1.0
                        : root_f - root_f * static_cast<double>(i - 1) /
                                       (2.0 * static_cast<double>(r));
  }
  Philox rng = make_stream(seed, RngStream::kCoeffs);
  Matrix a(r, tmax);
  for (Index t = 0; t < tmax; ++t) {
    for (Index i = 0; i < r; ++i) a(i, t) = rng.uniform(-q(i), q(i));
  }
  return a;
}

OutlierSupport gen_bernoulli_support(Index n, Index tmax, double rho,
                                     uint64_t seed) {
  if (rho < 0.0 || rho > 1.0) {
    throw InvalidConfigError("gen_bernoulli_support: rho must lie in [0, 1]");
  }
  Philox rng = make_stream(seed, RngStream::kSupport);
  BinaryMask mask(n, tmax);
  for (Index t = 0; t < tmax; ++t) {
    for (Index i = 0; i < n; ++i) {
      if (rng.next_double() < rho) mask.set(i, t, true);
    }
  }
  return OutlierSupport::from_mask(std::move(mask));
}

OutlierSupport gen_moving_object_support(Index n, Index tmax, Index s,
                                         Index tau, double c0) {
  if (!(c0 > 0.0 && c0 <= 1.0)) {
    throw InvalidConfigError("moving object: c0 must lie in (0, 1]");
  }
  const double cells_real = 1.0 / c0;
  const Index cells = static_cast<Index>(std::llround(cells_real));
  if (std::abs(cells_real - static_cast<double>(cells)) > 1e-9) {
    throw InvalidConfigError("moving object: 1/c0 must be an integer");
  }
  if (s < 1 || s * cells > n) {
    throw InvalidConfigError("moving object: s/c0 must lie in [1, n]");
  }
  const Index beta = static_cast<Index>(
      std::ceil(c0 * static_cast<double>(tau) - 1e-12));
  if (tau < beta || beta < 1) {
    throw InvalidConfigError("moving object: tau must be >= ceil(c0 tau) >= 1");
  }

  BinaryMask mask(n, tmax);
  const Index period = 2 * tau;
  for (Index t = 1; t <= tmax; ++t) {
    const Index tp = ((t - 1) % period) + 1;
    Index cell;
    if (tp <= tau) {
      cell = std::min((tp - 1) / beta + 1, cells);  // downward sweep
    } else {
      const Index up = tp - tau;
      cell = std::max(cells - (up - 1) / beta, Index{1});  // upward sweep
    }
    for (Index i = (cell - 1) * s; i < cell * s; ++i) mask.set(i, t - 1, true);
  }
  return OutlierSupport::from_mask(std::move(mask));
}

Matrix gen_outliers(const OutlierSupport& support, const MagnitudeLaw& law,
                    uint64_t seed) {
  if (law.type == MagnitudeLaw::Type::kUniformRange &&
      law.xmin > law.xmax) {
    throw InvalidConfigError("gen_outliers: xmin must be <= xmax");
  }
  if (law.type == MagnitudeLaw::Type::kUniformSymmetric && law.a < 0.0) {
    throw InvalidConfigError("gen_outliers: a must be >= 0");
  }
  Philox rng = make_stream(seed, RngStream::kMagnitude);
  Matrix s = Matrix::Zero(support.n, support.tmax);
  for (Index t = 0; t < support.tmax; ++t) {
    for (Index i : support.columns[static_cast<size_t>(t)]) {
      s(i, t) = law.type == MagnitudeLaw::Type::kUniformRange
                    ? rng.uniform(law.xmin, law.xmax)
                    : rng.uniform(-law.a, law.a);
    }
  }
  return s;
}

BinaryMask gen_missing_mask(Index n, Index tmax, double p, uint64_t seed) {
  if (!(p > 0.0 && p <= 1.0)) {
    throw InvalidConfigError("gen_missing_mask: p must lie in (0, 1]");
  }
  Philox rng = make_stream(seed, RngStream::kMask);
  BinaryMask mask(n, tmax);
  for (Index t = 0; t < tmax; ++t) {
    for (Index i = 0; i < n; ++i) {
      if (rng.next_double() < p) mask.set(i, t, true);
    }
  }
  return mask;
}

GroundTruth assemble_scenario(const ScenarioConfig& config) {
  config.validate();
  GroundTruth gt;
  gt.config = config;
  gt.change_times = config.change_times;
  const Index n = config.n;
  const Index tmax = config.tmax;
  const Index r = config.r;
  const Index num_changes = static_cast<Index>(config.change_times.size());

  // Low-rank part. Both coefficient models share the piecewise-rotation
  // subspace sequence; the gaussian model additionally keeps the raw
  // (non-orthonormal) factors so columns follow U v_t exactly.
  if (config.coeffs.type == CoeffModel::Type::kGaussianOverT) {
    const double stddev = std::sqrt(1.0 / static_cast<double>(tmax));
    Philox rng_u = make_stream(config.seed, RngStream::kSubspace);
    Matrix u = gaussian_matrix(n, r, stddev, rng_u);
    std::vector<Matrix> factors{u};
    for (Index j = 0; j < num_changes; ++j) {
      Philox rng_b = make_stream(config.seed, RngStream::kRotation,
                                 static_cast<uint32_t>(j));
      const Matrix b = skew_from_gaussian(n, rng_b);
      factors.push_back(
          expm_multiply(config.deltas[static_cast<size_t>(j)] * b,
                        factors.back()));
    }
    for (const Matrix& fac : factors) gt.subspaces.push_back(orthonormalize(fac));
    Philox rng_v = make_stream(config.seed, RngStream::kCoeffs);
    gt.l.resize(n, tmax);
    gt.coeffs.resize(r, tmax);
    for (Index t = 1; t <= tmax; ++t) {
      Vector v(r);
      for (Index i = 0; i < r; ++i) v(i) = stddev * rng_v.normal();
      const Index seg = gt.segment_of(t);
      gt.l.col(t - 1) = factors[static_cast<size_t>(seg)] * v;
      gt.coeffs.col(t - 1) =
          gt.subspaces[static_cast<size_t>(seg)].matrix().transpose() *
          gt.l.col(t - 1);
    }
  } else {
    gt.subspaces = gen_piecewise_subspaces(n, r, num_changes, config.deltas,
                                           config.seed);
    gt.coeffs =
        gen_bounded_coeffs(r, tmax, config.coeffs.f, config.seed);
    gt.l.resize(n, tmax);
    for (Index t = 1; t <= tmax; ++t) {
      gt.l.col(t - 1) =
          gt.subspaces[static_cast<size_t>(gt.segment_of(t))].matrix() *
          gt.coeffs.col(t - 1);
    }
  }

  // Outlier support, assembled per segment with independent sub-streams so a
  // change to one segment's draw count leaves the others untouched.
  BinaryMask mask(n, tmax);
  Index seg_start = 0;  // 0-based first column of the current segment
  for (size_t si = 0; si < config.outlier_segments.size(); ++si) {
    const auto& seg = config.outlier_segments[si];
    const Index len = seg.t_end - seg_start;
    if (seg.type == OutlierSegment::Type::kBernoulli) {
      Philox rng = make_stream(config.seed, RngStream::kSupport,
                               static_cast<uint32_t>(si));
      for (Index t = 0; t < len; ++t) {
        for (Index i = 0; i < n; ++i) {
          if (rng.next_double() < seg.rho) mask.set(i, seg_start + t, true);
        }
      }
    } else if (seg.type == OutlierSegment::Type::kMovingObject) {
      OutlierSupport local =
          gen_moving_object_support(n, len, seg.s, seg.tau, seg.c0);
      for (Index t = 0; t < len; ++t) {
        for (Index i : local.columns[static_cast<size_t>(t)]) {
          mask.set(i, seg_start + t, true);
        }
      }
    }
    seg_start = seg.t_end;
  }
  gt.support = OutlierSupport::from_mask(std::move(mask));
  gt.s = gen_outliers(gt.support, config.magnitude, config.seed);

  gt.m = gt.l + gt.s;
  if (config.noise_var > 0.0) {
    Philox rng = make_stream(config.seed, RngStream::kNoise);
    gt.noise = gaussian_matrix(n, tmax, std::sqrt(config.noise_var), rng);
    gt.m += gt.noise;
  }

  if (config.observe_p < 1.0) {
    gt.observed = gen_missing_mask(n, tmax, config.observe_p, config.seed);
  }
  return gt;
}

}  // namespace slr
