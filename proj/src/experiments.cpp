#include "saddle/experiments.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <sstream>
#include <tuple>

#include <Eigen/Eigenvalues>

#include "saddle/counterexample.hpp"
#include "saddle/eigen_problems.hpp"
#include "saddle/escape.hpp"
#include "saddle/hessian.hpp"
#include "saddle/phase_retrieval.hpp"

namespace saddle::lab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum class KeyType { Int, Real, Seed, Text };

struct KeySpec {
  KeySpec(std::string k, std::string d, KeyType t, double low = -std::numeric_limits<double>::infinity(),
          double high = std::numeric_limits<double>::infinity(), std::vector<std::string> c = {})
      : key(std::move(k)), def(std::move(d)), type(t), lo(low), hi(high), choices(std::move(c)) {}

  std::string key;
  std::string def;
  KeyType type;
  double lo;
  double hi;
  std::vector<std::string> choices;
};

constexpr double kInf = std::numeric_limits<double>::infinity();
// Errors below this are reported as this in log10 series.
constexpr double kErrorFloor = 1e-20;

struct Entry {
  Experiment kind;
  const char* name;
};

const std::vector<Entry>& entries() {
  static const std::vector<Entry> e{
      {Experiment::PhaseExpectation, "phase-expectation"},
      {Experiment::PhaseRealization, "phase-realization"},
      {Experiment::EigSphereLinear, "eig-sphere-linear"},
      {Experiment::EigSphereNonlinear, "eig-sphere-nonlinear"},
      {Experiment::EigStiefel, "eig-stiefel"},
      {Experiment::SvcCounterexample, "svc-counterexample"},
      {Experiment::SaddleProbe, "saddle-probe"},
      {Experiment::RetractionOrder, "retraction-order"},
  };
  return e;
}

std::vector<KeySpec> kp_keys(const std::string& n) {
  return {{"n", n, KeyType::Int, 16, 1 << 14},
          {"length", "50", KeyType::Real, 1e-6, kInf},
          {"wells", "5", KeyType::Int, 1, 64},
          {"depth", "10", KeyType::Real, 1e-12, kInf},
          {"depth_step", "0.2", KeyType::Real, 0, kInf},
          {"width", "4", KeyType::Real, 1e-12, kInf},
          {"smoothing", "0.3", KeyType::Real, 1e-12, kInf}};
}

std::vector<KeySpec> pgd_keys(const std::string& step, const std::string& max_iters,
                              const std::string& record_every) {
  return {{"step", step, KeyType::Real, 1e-300, kInf},
          {"max_iters", max_iters, KeyType::Int, 1, 1e9},
          {"record_every", record_every, KeyType::Int, 1, 1e9},
          {"grad_tol", "1e-10", KeyType::Real, 0, kInf}};
}

std::vector<KeySpec> key_specs(Experiment e) {
  std::vector<KeySpec> k{{"seed", "1", KeyType::Seed},
                         {"out", std::string("saddle_lab_out/") + to_string(e), KeyType::Text}};
  auto add = [&k](std::vector<KeySpec> more) { k.insert(k.end(), more.begin(), more.end()); };
  switch (e) {
    case Experiment::PhaseExpectation:
      add({{"trials", "100", KeyType::Int, 1, 1e9},
           {"n", "64", KeyType::Int, 2, 1 << 14},
           {"signal_seed", "2024", KeyType::Seed},
           {"success_tol", "1e-6", KeyType::Real, 0, kInf},
           {"ring_delta", "0.05", KeyType::Real, 1e-12, 1.0 / 3.0}});
      add(pgd_keys("1/3", "500", "1"));
      break;
    case Experiment::PhaseRealization:
      add({{"trials", "100", KeyType::Int, 1, 1e9},
           {"n", "64", KeyType::Int, 2, 1 << 12},
           {"oversampling", "12", KeyType::Int, 1, 1000},
           {"signal_seed", "2024", KeyType::Seed},
           {"success_tol", "1e-6", KeyType::Real, 0, kInf},
           {"ring_delta", "0.05", KeyType::Real, 1e-12, 1.0 / 3.0},
           {"fd_points", "20", KeyType::Int, 0, 1e6}});
      add(pgd_keys("1/3", "3000", "10"));
      break;
    case Experiment::EigSphereLinear:
      add({{"trials", "100", KeyType::Int, 1, 1e9}, {"eig_tol", "1e-8", KeyType::Real, 0, kInf}});
      add(kp_keys("128"));
      add(pgd_keys("0.01", "100000", "100"));
      break;
    case Experiment::EigSphereNonlinear:
      add({{"trials", "20", KeyType::Int, 1, 1e9},
           {"beta", "1", KeyType::Real, 0, kInf},
           {"residual_tol", "1e-6", KeyType::Real, 0, kInf}});
      add(kp_keys("128"));
      add(pgd_keys("0.01", "100000", "100"));
      break;
    case Experiment::EigStiefel:
      add({{"trials", "10", KeyType::Int, 1, 1e9},
           {"frame", "5", KeyType::Int, 1, 1 << 14},
           {"subspace_tol", "1e-6", KeyType::Real, 0, kInf}});
      add(kp_keys("128"));
      add(pgd_keys("0.01", "100000", "100"));
      break;
    case Experiment::SvcCounterexample:
      add({{"trials", "20000", KeyType::Int, 1, 1e9},
           {"variant", "A", KeyType::Text, 0, 0, {"A", "B"}},
           {"level", "30", KeyType::Int, 1, SvcSet::kMaxLevel},
           {"step", "0.05", KeyType::Real, 1e-300, 0.1},
           {"max_iters", "20000", KeyType::Int, 1, 1e9},
           {"record_every", "20000", KeyType::Int, 1, 1e9},
           {"tol", "1e-6", KeyType::Real, 1e-300, kInf},
           {"landscape_nx", "121", KeyType::Int, 2, 1e5},
           {"landscape_ny", "41", KeyType::Int, 2, 1e5}});
      break;
    case Experiment::SaddleProbe:
      add({{"trials", "100", KeyType::Int, 1, 1e9},
           {"problem", "sphere-quadratic", KeyType::Text, 0, 0, {"sphere-quadratic", "phase-expectation"}},
           {"n", "8", KeyType::Int, 2, 2000},
           {"saddle_index", "2", KeyType::Int, 1, 2000},
           {"perturbation", "1e-6", KeyType::Real, 1e-300, 1},
           {"jacobian_alpha", "0.01", KeyType::Real, 0, kInf},
           {"success_tol", "1e-6", KeyType::Real, 0, kInf}});
      add(pgd_keys("0.05", "20000", "10"));
      break;
    case Experiment::RetractionOrder:
      add({{"trials", "20", KeyType::Int, 1, 1e6},
           {"n", "8", KeyType::Int, 2, 512},
           {"rank", "3", KeyType::Int, 1, 512},
           {"alpha_max", "0.1", KeyType::Real, 1e-300, 1},
           {"alpha_min", "1e-4", KeyType::Real, 1e-300, 1},
           {"alpha_count", "7", KeyType::Int, 4, 1000}});
      break;
  }
  return k;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::optional<double> parse_real(const std::string& s) {
  if (s.empty()) return std::nullopt;
  const auto slash = s.find('/');
  if (slash != std::string::npos) {
    const auto num = parse_real(s.substr(0, slash));
    const auto den = parse_real(s.substr(slash + 1));
    if (!num || !den || *den == 0.0 || s.find('/', slash + 1) != std::string::npos) return std::nullopt;
    return *num / *den;
  }
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<long long> parse_integer(const std::string& s) {
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  errno = 0;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size() || errno == ERANGE) return std::nullopt;
  return v;
}

std::optional<std::uint64_t> parse_unsigned(const std::string& s) {
  if (s.empty() || s[0] == '-' || s[0] == '+') return std::nullopt;
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size() || errno == ERANGE) return std::nullopt;
  return static_cast<std::uint64_t>(v);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else if (c == '\n' || c == '\r') out += ' ';
    else out += c;
  }
  return out + "\"";
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  return f;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

// Shared output of the Monte-Carlo experiments.
struct McOutput {
  EscapeStats stats;
  long max_iters = 0;
  long record_every = 1;
};

json stats_json(const EscapeStats& stats) {
  json labels = json::object();
  for (const auto& [label, st] : stats.labels) {
    labels[label] = {{"count", st.count}, {"probability", st.probability}, {"std_error", st.std_error}};
  }
  long failures = 0;
  long max_it = 0;
  for (const auto& r : stats.records) {
    failures += r.terminated_by == Termination::RetractionFailure;
    max_it = std::max(max_it, r.iterations);
  }
  return {{"trials", stats.trials}, {"labels", labels}, {"failed_trials", failures}, {"max_iterations", max_it}};
}

void write_trials_csv(const fs::path& path, const EscapeStats& stats) {
  auto f = open_out(path);
  f << "trial,seed,label,iterations,terminated_by,final_value,final_grad_norm,final_error,failure\n";
  for (const auto& r : stats.records) {
    f << r.trial << ',' << r.seed << ',' << csv_field(r.label) << ',' << r.iterations << ','
      << to_string(r.terminated_by) << ',' << fmt(r.final_value) << ',' << fmt(r.final_grad_norm) << ','
      << fmt(r.final_error) << ',' << csv_field(r.failure) << '\n';
  }
}

// One row per recorded grid iteration k * record_every, k = 0..max_iters/record_every.
// A trial that stopped early contributes its last recorded error.
void write_series_csv(const fs::path& path, const McOutput& mc) {
  auto f = open_out(path);
  f << "iter,mean_log10_err,min,max\n";
  const long rows = mc.max_iters / mc.record_every + 1;
  std::vector<std::size_t> cursor(mc.stats.records.size(), 0);
  for (long k = 0; k < rows; ++k) {
    const long iter = k * mc.record_every;
    double sum = 0.0, lo = kInf, hi = -kInf;
    long count = 0;
    for (std::size_t t = 0; t < mc.stats.records.size(); ++t) {
      const auto& r = mc.stats.records[t];
      if (r.series_iters.empty()) continue;
      std::size_t& c = cursor[t];
      while (c + 1 < r.series_iters.size() && r.series_iters[c + 1] <= iter) ++c;
      const double e = std::log10(std::max(r.series_errors[c], kErrorFloor));
      if (!std::isfinite(e)) continue;
      sum += e;
      lo = std::min(lo, e);
      hi = std::max(hi, e);
      ++count;
    }
    if (count == 0) {
      f << iter << ",nan,nan,nan\n";
    } else {
      f << iter << ',' << fmt(sum / count) << ',' << fmt(lo) << ',' << fmt(hi) << '\n';
    }
  }
}

PgdConfig pgd_from(const ExperimentConfig& c) {
  PgdConfig p;
  p.step = c.get_double("step");
  p.max_iters = c.get_long("max_iters");
  p.record_every = c.get_long("record_every");
  p.grad_tol = c.get_double("grad_tol");
  p.validate();
  return p;
}

KpConfig kp_from(const ExperimentConfig& c) {
  KpConfig k;
  k.n = c.get_long("n");
  k.length = c.get_double("length");
  k.wells = static_cast<int>(c.get_long("wells"));
  k.depth = c.get_double("depth");
  k.depth_step = c.get_double("depth_step");
  k.width = c.get_double("width");
  k.smoothing = c.get_double("smoothing");
  k.validate();
  return k;
}

EscapeOptions mc_options(const ExperimentConfig& c, const RunOptions& o) {
  EscapeOptions opt;
  opt.trials = c.get_long("trials");
  opt.master_seed = c.get_seed();
  opt.jobs = o.jobs;
  opt.keep_series = true;
  return opt;
}

// |zz^T - xx^T|_F / |xx^T|_F without forming the matrices. With d = z - sx and
// e = z + sx (s the sign of <z,x>), zz^T - xx^T = (de^T + ed^T)/2, which avoids
// the cancellation of |z|^4 + |x|^4 - 2<z,x>^2 near the minimizer.
double phase_error(const Vector& z, const Vector& x) {
  const double s = z.dot(x) < 0.0 ? -1.0 : 1.0;
  const Vector d = z - s * x, e = z + s * x;
  const double de = d.dot(e);
  return std::sqrt(0.5 * (d.squaredNorm() * e.squaredNorm() + de * de)) / x.squaredNorm();
}

// sin of the angle between unit vectors, from the orthogonal residual.
double sphere_angle(const Vector& z, const Vector& v) { return (z - z.dot(v) * v).norm(); }

std::vector<LimitReference> phase_references(const Vector& x, double success_tol, double ring_delta) {
  const RingRegion ring(ring_delta);
  return {{"minimum",
           [x, success_tol](const Trajectory& t) {
             return phase_error(t.final_point().as<PsdRankOnePoint>().z, x) < success_tol;
           }},
          {"ring-saddle", [x, ring](const Trajectory& t) {
             return ring.contains(t.final_point().as<PsdRankOnePoint>().z, x);
           }}};
}

json phase_summary(const EscapeStats& stats, double success_tol) {
  long success = 0;
  long max_it = 0;
  for (const auto& r : stats.records) {
    if (r.final_error < success_tol) {
      ++success;
      max_it = std::max(max_it, r.iterations);
    }
  }
  return {{"success_count", success},
          {"success_fraction", static_cast<double>(success) / static_cast<double>(stats.trials)},
          {"max_iterations_to_success", max_it}};
}

json run_phase_expectation(const ExperimentConfig& c, const RunOptions& o, McOutput& mc, const fs::path&) {
  const Index n = c.get_long("n");
  // Same signal as the realization experiment with this signal_seed.
  const Vector x = make_measurements(n, 1, c.get_seed_of("signal_seed")).x;
  const ExpectationObjective obj(x);
  const double tol = c.get_double("success_tol");
  auto opt = mc_options(c, o);
  opt.error = [x](const Point& p) { return phase_error(p.as<PsdRankOnePoint>().z, x); };
  const PgdConfig pgd = pgd_from(c);
  mc.stats = escape_monte_carlo(obj, ManifoldSpec::psd_rank_one(n), pgd,
                                phase_references(x, tol, c.get_double("ring_delta")), opt);
  mc.max_iters = pgd.max_iters;
  mc.record_every = pgd.record_every;
  return phase_summary(mc.stats, tol);
}

json run_phase_realization(const ExperimentConfig& c, const RunOptions& o, McOutput& mc, const fs::path& dir) {
  const Index n = c.get_long("n");
  const Index m = n * c.get_long("oversampling");
  const Measurements meas = make_measurements(n, m, c.get_seed_of("signal_seed"));
  save_measurements(meas, (dir / "measurements.txt").string());
  const RealizationObjective obj(meas);
  const Vector x = meas.x;
  const double tol = c.get_double("success_tol");
  auto opt = mc_options(c, o);
  opt.error = [x](const Point& p) { return phase_error(p.as<PsdRankOnePoint>().z, x); };
  const PgdConfig pgd = pgd_from(c);
  mc.stats = escape_monte_carlo(obj, ManifoldSpec::psd_rank_one(n), pgd,
                                phase_references(x, tol, c.get_double("ring_delta")), opt);
  mc.max_iters = pgd.max_iters;
  mc.record_every = pgd.record_every;

  json out = phase_summary(mc.stats, tol);
  out["m"] = m;
  double worst = 0.0;
  RandomStream rng(derive_seed(c.get_seed(), 0xFD0C4EC));
  const long points = c.get_long("fd_points");
  for (long i = 0; i < points; ++i) {
    worst = std::max(worst, fd_gradient_check(obj, random_point(ManifoldSpec::psd_rank_one(n), rng), 1e-4));
  }
  out["fd_gradient_points"] = points;
  out["fd_gradient_max_error"] = worst;
  return out;
}

void write_columns(const fs::path& path, const std::vector<std::string>& names, const std::vector<const Vector*>& cols) {
  auto f = open_out(path);
  for (std::size_t j = 0; j < names.size(); ++j) f << (j ? "," : "") << names[j];
  f << '\n';
  for (Index i = 0; i < cols.front()->size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) f << (j ? "," : "") << fmt((*cols[j])(i));
    f << '\n';
  }
}

json spectrum_json(const Vector& lam, Index count) {
  json a = json::array();
  for (Index i = 0; i < std::min(count, lam.size()); ++i) a.push_back(lam(i));
  return a;
}

json run_eig_linear(const ExperimentConfig& c, const RunOptions& o, McOutput& mc, const fs::path& dir) {
  const DiscreteOperator op = assemble_operator(kp_from(c));
  const Eigen::SelfAdjointEigenSolver<Matrix> es(op.dense);
  const Vector lam = es.eigenvalues();
  const Matrix vecs = es.eigenvectors();
  const LinearSphereObjective obj(op.dense);
  const double eig_tol = c.get_double("eig_tol");

  // Index of the dense eigenvector closest to z, and its eigenvalue error.
  auto nearest = [&vecs, &lam, &obj](const Vector& z) {
    Index s = 0;
    (vecs.transpose() * z).cwiseAbs().maxCoeff(&s);
    return std::make_pair(s, std::abs(obj.eigenvalue_of(z) - lam(s)));
  };
  std::vector<LimitReference> refs{
      {"v1",
       [nearest, eig_tol](const Trajectory& t) {
         const auto [s, err] = nearest(t.final_point().as<SpherePoint>().z);
         return s == 0 && err < eig_tol;
       }},
      {"excited", [nearest, eig_tol](const Trajectory& t) {
         const auto [s, err] = nearest(t.final_point().as<SpherePoint>().z);
         return s > 0 && err < eig_tol;
       }}};
  auto opt = mc_options(c, o);
  const Vector v1 = vecs.col(0);
  opt.error = [v1](const Point& p) { return sphere_angle(p.as<SpherePoint>().z, v1); };
  const PgdConfig pgd = pgd_from(c);
  mc.stats = escape_monte_carlo(obj, ManifoldSpec::sphere(op.dense.rows()), pgd, refs, opt);
  mc.max_iters = pgd.max_iters;
  mc.record_every = pgd.record_every;

  double worst_eig = 0.0;
  for (const auto& r : mc.stats.records) {
    if (r.label == "v1") worst_eig = std::max(worst_eig, std::abs(r.final_value - obj.shift() - lam(0)));
  }
  write_columns(dir / "profile.csv", {"x", "potential", "v1"}, {&op.grid, &op.potential, &v1});
  return {{"dense_eigenvalues", spectrum_json(lam, 6)},
          {"gap_ratio", (lam(5) - lam(4)) / (lam(4) - lam(0))},
          {"shift", obj.shift()},
          {"v1_max_eigenvalue_error", worst_eig}};
}

json run_eig_nonlinear(const ExperimentConfig& c, const RunOptions& o, McOutput& mc, const fs::path& dir) {
  const DiscreteOperator op = assemble_operator(kp_from(c));
  const double beta = c.get_double("beta");
  const double res_tol = c.get_double("residual_tol");
  const NonlinearSphereObjective obj(op.dense, beta);
  const PgdConfig pgd = pgd_from(c);
  const Index n = op.dense.rows();

  // Reference ground state: PGD started from the linear ground state.
  const Eigen::SelfAdjointEigenSolver<Matrix> es(op.dense);
  const Trajectory ref = run_pgd(Point::sphere(es.eigenvectors().col(0)), obj, pgd);
  const Vector v1 = ref.final_point().as<SpherePoint>().z;

  std::vector<LimitReference> refs{
      {"v1",
       [v1, &obj, res_tol](const Trajectory& t) {
         const Vector& z = t.final_point().as<SpherePoint>().z;
         return obj.residual(z) <= res_tol && sphere_angle(z, v1) < 1e-6;
       }},
      {"other-critical", [&obj, res_tol](const Trajectory& t) {
         return obj.residual(t.final_point().as<SpherePoint>().z) <= res_tol;
       }}};
  auto opt = mc_options(c, o);
  opt.error = [v1](const Point& p) { return sphere_angle(p.as<SpherePoint>().z, v1); };
  mc.stats = escape_monte_carlo(obj, ManifoldSpec::sphere(n), pgd, refs, opt);
  mc.max_iters = pgd.max_iters;
  mc.record_every = pgd.record_every;

  RandomStream rng(derive_seed(c.get_seed(), 0xDEF1A7ED));
  const DeflatedResult second = deflated_second_state(op.dense, beta, v1, pgd, rng.normal_vector(n));
  const Vector v2 = second.state.as<SpherePoint>().z;
  const double lmin_v1 = hessian_spectrum(obj, Point::sphere(v1), {}).lambda_min;
  const double lmin_v2 = hessian_spectrum(obj, second.state, {}).lambda_min;
  write_columns(dir / "profile.csv", {"x", "potential", "v1", "v2"}, {&op.grid, &op.potential, &v1, &v2});
  return {{"v1",
           {{"eigenvalue", obj.eigenvalue_of(v1)},
            {"residual", obj.residual(v1)},
            {"converged", ref.terminated_by == Termination::GradTol},
            {"hessian_lambda_min", lmin_v1}}},
          {"v2",
           {{"eigenvalue", obj.eigenvalue_of(v2)},
            {"residual", obj.residual(v2)},
            {"converged", second.converged},
            {"iterations", second.iterations},
            {"overlap_with_v1", second.overlap},
            {"hessian_lambda_min", lmin_v2}}},
          {"reference_hessian_lambda_min_v2", -0.0024}};
}

json run_eig_stiefel(const ExperimentConfig& c, const RunOptions& o, McOutput& mc, const fs::path&) {
  const DiscreteOperator op = assemble_operator(kp_from(c));
  const Index m = c.get_long("frame");
  const Index n = op.dense.rows();
  if (m >= n) throw ConfigError(0, "frame must be smaller than n");
  const Eigen::SelfAdjointEigenSolver<Matrix> es(op.dense);
  const Matrix target = es.eigenvectors().leftCols(m);
  const double tol = c.get_double("subspace_tol");
  const StiefelTraceObjective obj(op.dense, m);
  std::vector<LimitReference> refs{{"eigenspace", [target, tol](const Trajectory& t) {
                                      return subspace_distance(t.final_point().ambient(), target) <= tol;
                                    }}};
  auto opt = mc_options(c, o);
  opt.error = [target](const Point& p) { return subspace_distance(p.ambient(), target); };
  const PgdConfig pgd = pgd_from(c);
  mc.stats = escape_monte_carlo(obj, ManifoldSpec::stiefel(n, m), pgd, refs, opt);
  mc.max_iters = pgd.max_iters;
  mc.record_every = pgd.record_every;

  // Ritz values of the first trial that reached the eigenspace.
  json ritz = nullptr;
  double worst_rel = kInf;
  for (const auto& r : mc.stats.records) {
    if (r.label != "eigenspace") continue;
    RandomStream rng(r.seed);
    const Trajectory t = run_pgd(random_point(ManifoldSpec::stiefel(n, m), rng), obj, pgd);
    const Matrix z = t.final_point().ambient();
    const Eigen::SelfAdjointEigenSolver<Matrix> small(z.transpose() * op.dense * z);
    ritz = json::array();
    worst_rel = 0.0;
    for (Index i = 0; i < m; ++i) {
      ritz.push_back(small.eigenvalues()(i));
      worst_rel = std::max(worst_rel, std::abs(small.eigenvalues()(i) - es.eigenvalues()(i)) / std::abs(es.eigenvalues()(i)));
    }
    break;
  }
  return {{"dense_eigenvalues", spectrum_json(es.eigenvalues(), m)},
          {"ritz_values", ritz},
          {"max_relative_eigenvalue_error", finite_or_null(worst_rel)}};
}

json run_svc(const ExperimentConfig& c, const RunOptions& o, McOutput& mc, const fs::path& dir) {
  SvcExperimentConfig cfg;
  cfg.variant = c.get_string("variant") == "A" ? PVariant::A : PVariant::B;
  cfg.level = static_cast<int>(c.get_long("level"));
  cfg.trials = c.get_long("trials");
  cfg.step = c.get_double("step");
  cfg.max_iters = c.get_long("max_iters");
  cfg.record_every = c.get_long("record_every");
  cfg.tol = c.get_double("tol");
  cfg.master_seed = c.get_seed();
  cfg.jobs = o.jobs;
  cfg.keep_series = true;
  mc.stats = escape_failure_experiment(cfg);
  mc.max_iters = cfg.max_iters;
  mc.record_every = cfg.record_every;
  const SvcSet svc(cfg.level);
  write_landscape_csv((dir / "landscape.csv").string(), cfg.variant, svc,
                      static_cast<int>(c.get_long("landscape_nx")), static_cast<int>(c.get_long("landscape_ny")));
  const double frac = mc.stats.fraction(kInVColumn);
  const auto in_v = mc.stats.labels.find(kInVColumn);
  const double se = in_v == mc.stats.labels.end() ? 0.0 : in_v->second.std_error;
  return {{"in_v_fraction", frac},
          {"in_v_std_error", se},
          {"interval_minimum_fraction", mc.stats.fraction(kIntervalMinimum)},
          {"expected_in_v_fraction", 1.0 / 6.0},
          {"within_three_sigma", std::abs(frac - 1.0 / 6.0) <= 3.0 * std::sqrt((1.0 / 6.0) * (5.0 / 6.0) / cfg.trials)},
          {"remaining_measure", svc.remaining_measure()}};
}

json report_json(const CriticalPointReport& r) {
  return {{"classification", to_string(r.classification)},
          {"grad_norm", r.grad_norm},
          {"morse_index", r.morse_index},
          {"zero_count", r.zero_count},
          {"positive_count", r.positive_count},
          {"lambda_min", r.lambda_min},
          {"lambda_max", r.lambda_max},
          {"index_tol", r.index_tol}};
}

json run_saddle_probe(const ExperimentConfig& c, const RunOptions& o, McOutput& mc, const fs::path&) {
  const Index n = c.get_long("n");
  const std::string problem = c.get_string("problem");
  const double tol = c.get_double("success_tol");
  std::unique_ptr<Objective> obj;
  std::optional<Point> saddle;
  std::function<double(const Point&)> error;
  if (problem == "sphere-quadratic") {
    const Index k = c.get_long("saddle_index");
    if (k > n) throw ConfigError(0, "saddle_index must not exceed n");
    const Vector d = Vector::LinSpaced(n, 1.0, static_cast<double>(n));
    const Matrix a = d.asDiagonal();
    obj = std::make_unique<FunctionObjective>(
        [a](const Matrix& z) { return z.col(0).dot(a * z.col(0)); },
        [a](const Matrix& z) -> Matrix { return 2.0 * a * z; },
        [a](const Matrix&, const Matrix& dz) -> Matrix { return 2.0 * a * dz; });
    saddle = Point::sphere(Vector::Unit(n, k - 1));
    error = [](const Point& p) { return sphere_angle(p.as<SpherePoint>().z, Vector::Unit(p.as<SpherePoint>().z.size(), 0)); };
  } else {
    const Vector x = make_measurements(n, 1, derive_seed(c.get_seed(), 0x5161)).x;
    obj = std::make_unique<ExpectationObjective>(x);
    RandomStream rng(derive_seed(c.get_seed(), 0x816));
    saddle = random_ring_point(x, rng);
    error = [x](const Point& p) { return phase_error(p.as<PsdRankOnePoint>().z, x); };
  }
  const CriticalPointReport rep = classify_critical_point(*obj, *saddle, {});
  const double alpha = c.get_double("jacobian_alpha");
  json jac = json::object();
  for (double h : {1e-3, 1e-4, 1e-5}) {
    char key[16];
    std::snprintf(key, sizeof key, "%.0e", h);
    jac[key] = pgd_map_jacobian_check(*obj, *saddle, alpha, h);
  }

  const double eps = c.get_double("perturbation");
  const Point base = *saddle;
  std::vector<LimitReference> refs{
      {"minimum", [error, tol](const Trajectory& t) { return error(t.final_point()) < tol; }},
      {"saddle", [base](const Trajectory& t) {
         return (t.final_point().ambient() - base.ambient()).norm() < 1e-6 * std::max(1.0, base.ambient().norm());
       }}};
  auto opt = mc_options(c, o);
  opt.error = error;
  opt.init = [base, eps](RandomStream& rng) {
    const TangentVector xi = random_tangent(base, rng);
    return retract(base, xi.scaled(eps / xi.norm()));
  };
  const PgdConfig pgd = pgd_from(c);
  mc.stats = escape_monte_carlo(*obj, base.spec(), pgd, refs, opt);
  mc.max_iters = pgd.max_iters;
  mc.record_every = pgd.record_every;
  return {{"problem", problem},
          {"critical_point", report_json(rep)},
          {"jacobian_alpha", alpha},
          {"jacobian_deviation", jac},
          {"escape_fraction", mc.stats.fraction("minimum")}};
}

// Retraction-order runs write their own trials and series tables.
json run_retraction_order(const ExperimentConfig& c, const fs::path& dir) {
  const Index n = c.get_long("n");
  const Index r = c.get_long("rank");
  if (r >= n) throw ConfigError(0, "rank must be smaller than n");
  const long trials = c.get_long("trials");
  const double amax = c.get_double("alpha_max"), amin = c.get_double("alpha_min");
  const long count = c.get_long("alpha_count");
  if (!(amin < amax)) throw ConfigError(0, "alpha_min must be below alpha_max");
  std::vector<double> alphas;
  for (long i = 0; i < count; ++i) {
    alphas.push_back(amax * std::pow(amin / amax, static_cast<double>(i) / static_cast<double>(count - 1)));
  }
  const std::vector<ManifoldSpec> specs{ManifoldSpec::sphere(n), ManifoldSpec::stiefel(n, r),
                                        ManifoldSpec::fixed_rank(n, n - 1, r), ManifoldSpec::psd_rank_one(n),
                                        ManifoldSpec::box()};
  auto trials_csv = open_out(dir / "trials.csv");
  trials_csv << "trial,seed,manifold,slope_first,slope_second,failure\n";
  auto series_csv = open_out(dir / "series.csv");
  series_csv << "manifold,alpha,mean_log10_residual_first,mean_log10_residual_second\n";
  json per = json::object();
  long failed = 0;
  for (std::size_t k = 0; k < specs.size(); ++k) {
    const std::string name = to_string(specs[k].kind);
    double min_first = kInf, min_second = kInf;
    std::vector<double> sum_first(alphas.size(), 0.0), sum_second(alphas.size(), 0.0);
    std::vector<long> n_first(alphas.size(), 0), n_second(alphas.size(), 0);
    for (long t = 0; t < trials; ++t) {
      const std::uint64_t seed = derive_seed(c.get_seed(), k * static_cast<std::uint64_t>(trials) + t);
      trials_csv << t << ',' << seed << ',' << name << ',';
      try {
        RandomStream rng(seed);
        const Point p = random_point(specs[k], rng);
        TangentVector xi = random_tangent(p, rng);
        xi = xi.scaled(1.0 / std::max(xi.norm(), 1e-300));
        const RetractionOrderReport rep = retraction_order_check(p, xi, alphas);
        min_first = std::min(min_first, rep.slope_first);
        trials_csv << fmt(rep.slope_first) << ',';
        if (rep.slope_second) {
          min_second = std::min(min_second, *rep.slope_second);
          trials_csv << fmt(*rep.slope_second);
        }
        trials_csv << ",\n";
        for (std::size_t i = 0; i < alphas.size(); ++i) {
          if (rep.residual_first[i] > 0) {
            sum_first[i] += std::log10(rep.residual_first[i]);
            ++n_first[i];
          }
          if (i < rep.residual_second.size() && rep.residual_second[i] > 0) {
            sum_second[i] += std::log10(rep.residual_second[i]);
            ++n_second[i];
          }
        }
      } catch (const Error& e) {
        ++failed;
        trials_csv << ",," << csv_field(e.what()) << '\n';
      }
    }
    for (std::size_t i = 0; i < alphas.size(); ++i) {
      series_csv << name << ',' << fmt(alphas[i]) << ','
                 << (n_first[i] ? fmt(sum_first[i] / n_first[i]) : "nan") << ','
                 << (n_second[i] ? fmt(sum_second[i] / n_second[i]) : "nan") << '\n';
    }
    json entry{{"min_slope_first", finite_or_null(min_first)},
               {"first_order", min_first >= 0.9}};
    entry["all_residuals_zero"] = min_first == kInf;
    if (min_second != kInf) {
      entry["min_slope_second"] = min_second;
      entry["second_order"] = min_second >= 1.9;
    }
    per[name] = entry;
  }
  json a = json::array();
  for (double x : alphas) a.push_back(x);
  return {{"alphas", a}, {"manifolds", per}, {"failed_trials", failed}, {"trials_per_manifold", trials}};
}

}  // namespace

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& e : entries()) v.emplace_back(e.name);
    return v;
  }();
  return names;
}

std::optional<Experiment> parse_experiment(const std::string& name) {
  for (const auto& e : entries()) {
    if (name == e.name) return e.kind;
  }
  return std::nullopt;
}

const char* to_string(Experiment e) {
  for (const auto& entry : entries()) {
    if (entry.kind == e) return entry.name;
  }
  return "unknown";
}

ConfigError::ConfigError(int line, const std::string& what)
    : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

std::string ExperimentConfig::get_string(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError(0, "missing key '" + key + "'");
  return it->second;
}

double ExperimentConfig::get_double(const std::string& key) const {
  const auto v = parse_real(get_string(key));
  if (!v) throw ConfigError(lines_.count(key) ? lines_.at(key) : 0, "'" + key + "' is not a number");
  return *v;
}

long ExperimentConfig::get_long(const std::string& key) const {
  const auto v = parse_integer(get_string(key));
  if (!v) throw ConfigError(lines_.count(key) ? lines_.at(key) : 0, "'" + key + "' is not an integer");
  return static_cast<long>(*v);
}

std::uint64_t ExperimentConfig::get_seed_of(const std::string& key) const {
  const auto v = parse_unsigned(get_string(key));
  if (!v) throw ConfigError(lines_.count(key) ? lines_.at(key) : 0, "'" + key + "' is not an unsigned integer");
  return *v;
}

std::uint64_t ExperimentConfig::get_seed() const { return get_seed_of("seed"); }

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  if (!values_.count(key)) throw ConfigError(0, "unknown key '" + key + "' for " + to_string(experiment_));
  values_[key] = value;
  lines_.erase(key);
}

std::string ExperimentConfig::echo() const {
  std::ostringstream s;
  s << "experiment=" << to_string(experiment_) << '\n';
  for (const auto& [k, v] : values_) s << k << '=' << v << '\n';
  return s.str();
}

void ExperimentConfig::validate() const {
  for (const KeySpec& spec : key_specs(experiment_)) {
    const int line = lines_.count(spec.key) ? lines_.at(spec.key) : 0;
    const std::string& raw = values_.at(spec.key);
    double v = 0.0;
    switch (spec.type) {
      case KeyType::Text:
        if (raw.empty()) throw ConfigError(line, "'" + spec.key + "' must not be empty");
        if (!spec.choices.empty() &&
            std::find(spec.choices.begin(), spec.choices.end(), raw) == spec.choices.end()) {
          std::string all;
          for (const auto& ch : spec.choices) all += (all.empty() ? "" : ", ") + ch;
          throw ConfigError(line, "'" + spec.key + "' must be one of " + all);
        }
        continue;
      case KeyType::Seed:
        get_seed_of(spec.key);
        continue;
      case KeyType::Int:
        v = static_cast<double>(get_long(spec.key));
        break;
      case KeyType::Real:
        v = get_double(spec.key);
        break;
    }
    if (!(v >= spec.lo && v <= spec.hi)) {
      throw ConfigError(line, "'" + spec.key + "' = " + raw + " is outside [" + fmt(spec.lo) + ", " + fmt(spec.hi) + "]");
    }
  }
}

ExperimentConfig default_config(Experiment e) {
  ExperimentConfig c;
  c.experiment_ = e;
  for (const KeySpec& spec : key_specs(e)) c.values_[spec.key] = spec.def;
  return c;
}

ExperimentConfig parse_config(const std::string& text) {
  std::vector<std::tuple<int, std::string, std::string>> pairs;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  std::optional<std::pair<int, std::string>> experiment;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError(line, "expected key=value");
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (key.empty()) throw ConfigError(line, "empty key");
    if (key == "experiment") {
      if (experiment) throw ConfigError(line, "duplicate key 'experiment'");
      experiment = {line, value};
      continue;
    }
    pairs.emplace_back(line, key, value);
  }
  if (!experiment) throw ConfigError(0, "missing key 'experiment'");
  const auto kind = parse_experiment(experiment->second);
  if (!kind) throw ConfigError(experiment->first, "unknown experiment '" + experiment->second + "'");
  ExperimentConfig c = default_config(*kind);
  for (const auto& [ln, key, value] : pairs) {
    if (!c.values_.count(key)) throw ConfigError(ln, "unknown key '" + key + "' for " + experiment->second);
    if (c.lines_.count(key)) throw ConfigError(ln, "duplicate key '" + key + "'");
    c.values_[key] = value;
    c.lines_[key] = ln;
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError(0, "cannot read " + path.string());
  std::ostringstream s;
  s << f.rdbuf();
  return parse_config(s.str());
}

void apply_env_overrides(ExperimentConfig& config) {
  if (const char* seed = std::getenv("SADDLE_LAB_SEED")) {
    if (!parse_unsigned(seed)) throw ConfigError(0, std::string("SADDLE_LAB_SEED is not an unsigned integer: ") + seed);
    config.set("seed", seed);
  }
}

ExperimentResult run_experiment(const ExperimentConfig& config_in, const RunOptions& options) {
  ExperimentConfig config = config_in;
  config.validate();
  const fs::path dir = options.out.empty() ? fs::path(config.get_string("out")) : options.out;
  config.set("out", dir.string());
  fs::create_directories(dir);

  ExperimentResult result;
  result.out_dir = dir;
  json extra;
  McOutput mc;
  bool monte_carlo = true;
  switch (config.experiment()) {
    case Experiment::PhaseExpectation: extra = run_phase_expectation(config, options, mc, dir); break;
    case Experiment::PhaseRealization: extra = run_phase_realization(config, options, mc, dir); break;
    case Experiment::EigSphereLinear: extra = run_eig_linear(config, options, mc, dir); break;
    case Experiment::EigSphereNonlinear: extra = run_eig_nonlinear(config, options, mc, dir); break;
    case Experiment::EigStiefel: extra = run_eig_stiefel(config, options, mc, dir); break;
    case Experiment::SvcCounterexample: extra = run_svc(config, options, mc, dir); break;
    case Experiment::SaddleProbe: extra = run_saddle_probe(config, options, mc, dir); break;
    case Experiment::RetractionOrder:
      extra = run_retraction_order(config, dir);
      monte_carlo = false;
      break;
  }

  json summary{{"experiment", to_string(config.experiment())}};
  json echo = json::object();
  for (const auto& [k, v] : config.values()) echo[k] = v;
  summary["config"] = echo;
  if (monte_carlo) {
    write_trials_csv(dir / "trials.csv", mc.stats);
    write_series_csv(dir / "series.csv", mc);
    summary["stats"] = stats_json(mc.stats);
    result.trials = mc.stats.trials;
    result.failed_trials = summary["stats"]["failed_trials"].get<long>();
  } else {
    result.trials = config.get_long("trials") * 5;
    result.failed_trials = extra["failed_trials"].get<long>();
  }
  summary["results"] = extra;
  {
    auto f = open_out(dir / "result.json");
    f << summary.dump(2) << '\n';
  }
  {
    auto f = open_out(dir / "config.txt");
    f << config.echo();
  }
  result.summary = std::move(summary);
  return result;
}

std::string describe(Experiment e) {
  std::string what;
  std::string outputs =
      "Outputs (in the output directory):\n"
      "  result.json  config echo, label counts with probabilities and binomial standard errors,\n"
      "               and the experiment-specific results listed above\n"
      "  trials.csv   trial,seed,label,iterations,terminated_by,final_value,final_grad_norm,final_error,failure\n"
      "  series.csv   iter,mean_log10_err,min,max over trials, one row per multiple of record_every\n"
      "               up to max_iters; stopped trials hold their last error; errors below 1e-20 count as 1e-20\n"
      "  config.txt   the effective config; rerunning it reproduces trials.csv byte for byte\n";
  switch (e) {
    case Experiment::PhaseExpectation:
      what =
          "Expectation landscape of real phase retrieval on rank-one PSD matrices Z = zz^T,\n"
          "f(Z) = 3/2|Z|^2 + 3/2|X|^2 - |Z||X| - 2<Z,X>. Random Gaussian starts, constant step 1/3.\n"
          "Reproduces the expectation error curves of Fig. 4(a) at n = 64. Every start should reach\n"
          "X (label 'minimum'); none should stop on the ring |Z| = |X|/3, <Z,X> = 0 ('ring-saddle').\n"
          "Results: success_count, success_fraction, max_iterations_to_success.\n";
      break;
    case Experiment::PhaseRealization:
      what =
          "Finite-sample phase retrieval f(Z) = (1/2m) sum_j (a_j^T Z a_j - y_j)^2 with m = oversampling * n\n"
          "Gaussian measurements. Reproduces Fig. 4(b) at n = 64, m = 12n, step 1/3.\n"
          "Results: success counts as for phase-expectation, m, and the worst finite-difference gradient\n"
          "error over fd_points random points. Also writes measurements.txt.\n";
      break;
    case Experiment::EigSphereLinear:
      what =
          "Linear Schrodinger eigenproblem min z^T A z on the unit sphere, with A the periodic finite-difference\n"
          "operator of a smoothed five-well Kronig-Penney potential. Reproduces Fig. 1: from random starts\n"
          "PGD with step 0.01 reaches the ground state v1 ('v1'), never an excited state ('excited'),\n"
          "checked against a dense eigensolver.\n"
          "Results: dense_eigenvalues, gap_ratio, shift, v1_max_eigenvalue_error. Also writes profile.csv.\n";
      break;
    case Experiment::EigSphereNonlinear:
      what =
          "Nonlinear (Gross-Pitaevskii type) eigenproblem f(z) = 1/2 z^T A z + beta/4 sum z^4 on the sphere.\n"
          "Reproduces Fig. 2: the ground state v1 and the second state v2 (PGD restricted to v1's\n"
          "orthogonal complement), their residuals |Av + beta v^3 - lambda v|, and lambda_min of the\n"
          "Hessian at v2 (negative: v2 is a saddle).\n"
          "Results: v1 and v2 blocks. Also writes profile.csv (x, potential, v1, v2).\n";
      break;
    case Experiment::EigStiefel:
      what =
          "Simultaneous first-5 eigenstates: min trace(Z^T A Z) over n x 5 orthonormal frames with the\n"
          "QR retraction. Reproduces Fig. 3: the frame spans the first five eigenvectors ('eigenspace').\n"
          "The number of states is the 'frame' key.\n"
          "Results: dense_eigenvalues, ritz_values, max_relative_eigenvalue_error.\n";
      break;
    case Experiment::SvcCounterexample:
      what =
          "Escape-failure counterexample f(x,y) = -p(x) + y^2 on [-1,2] x [-1,1], where p vanishes on a\n"
          "Smith-Volterra-Cantor set V of measure 1/2 and has bumps on the removed intervals. Plain GD from\n"
          "uniform starts ends in the saddle column V x {0} ('in-V-column') with probability 1/6 and in an\n"
          "interval minimum otherwise. Variant A uses quadratic caps, variant B quartic caps.\n"
          "Results: in_v_fraction, in_v_std_error, interval_minimum_fraction, within_three_sigma,\n"
          "remaining_measure. Also writes landscape.csv (the surface of Fig. 3(c)). The series tracks |y|.\n";
      break;
    case Experiment::SaddleProbe:
      what =
          "Classifies a known critical point and checks escape from it. problem=sphere-quadratic uses\n"
          "f(z) = z^T diag(1..n) z at e_k (k = saddle_index); problem=phase-expectation uses a random ring\n"
          "point of the expectation landscape. Reports Morse index, Hessian extremes, classification, and\n"
          "the deviation of the finite-difference PGD-map Jacobian from I - alpha Hess at h = 1e-3, 1e-4, 1e-5.\n"
          "Trials start at a perturbation of the point and record whether PGD escapes to the minimum.\n";
      break;
    case Experiment::RetractionOrder:
      what =
          "Retraction order check on sphere, Stiefel, bounded-rank, rank-one PSD and box manifolds: the\n"
          "residuals |R(p + a xi) - (p + a xi)| / a and, on bounded-rank manifolds, the second-order\n"
          "residual with the curvature term, at alpha_count steps from alpha_max to alpha_min.\n"
          "Fitted log-log slopes near 1 mean first order, near 2 second order.\n";
      outputs =
          "Outputs (in the output directory):\n"
          "  result.json  config echo and per-manifold minimum slopes\n"
          "  trials.csv   trial,seed,manifold,slope_first,slope_second,failure\n"
          "  series.csv   manifold,alpha,mean_log10_residual_first,mean_log10_residual_second\n"
          "  config.txt   the effective config\n";
      break;
  }
  std::string defaults = default_config(e).echo();
  return std::string(to_string(e)) + "\n\n" + what + "\nDefault config:\n" + defaults + "\n" + outputs;
}

}  // namespace saddle::lab
