#include "saddle/counterexample.hpp"

#include <cmath>
#include <cstdio>
#include <string>

namespace saddle {

namespace {

void collect(double lo, double hi, int k, int level, std::vector<std::pair<double, double>>* keep,
             std::vector<std::pair<double, double>>* cut) {
  if (k > level) {
    if (keep) keep->emplace_back(lo, hi);
    return;
  }
  const double mid = 0.5 * (lo + hi);
  const double half = 0.5 * std::ldexp(1.0, -2 * k);
  collect(lo, mid - half, k + 1, level, keep, cut);
  if (cut) cut->emplace_back(mid - half, mid + half);
  collect(mid + half, hi, k + 1, level, keep, cut);
}

double x_of(const Matrix& xy) {
  if (xy.rows() != 2 || xy.cols() != 1) throw DimensionError("box points are 2 x 1");
  return xy(0, 0);
}

}  // namespace

SvcSet::SvcSet(int level) : level_(level) {
  if (level < 1 || level > kMaxLevel) {
    throw ParameterError("SVC level must lie in [1, " + std::to_string(kMaxLevel) + "]");
  }
}

std::vector<std::pair<double, double>> SvcSet::intervals() const {
  if (level_ > kMaxExplicitLevel) throw ResourceError("explicit interval lists need level <= 24");
  std::vector<std::pair<double, double>> out;
  out.reserve(std::size_t{1} << level_);
  collect(0.0, 1.0, 1, level_, &out, nullptr);
  return out;
}

std::vector<std::pair<double, double>> SvcSet::removed() const {
  if (level_ > kMaxExplicitLevel) throw ResourceError("explicit interval lists need level <= 24");
  std::vector<std::pair<double, double>> out;
  out.reserve(std::size_t{1} << level_);
  collect(0.0, 1.0, 1, level_, nullptr, &out);
  return out;
}

double SvcSet::remaining_measure() const {
  double cut = 0.0;
  for (int k = 1; k <= level_; ++k) cut += std::ldexp(1.0, (k - 1) - 2 * k);
  return 1.0 - cut;
}

Membership svc_membership(double x, const SvcSet& svc) {
  if (!(x >= -1.0 && x <= 2.0)) throw ParameterError("membership needs x in [-1, 2]");
  if (x < 0.0) return {false, -1.0, 0.0};
  if (x > 1.0) return {false, 1.0, 2.0};
  double lo = 0.0, hi = 1.0;
  for (int k = 1; k <= svc.level(); ++k) {
    const double mid = 0.5 * (lo + hi);
    const double half = 0.5 * std::ldexp(1.0, -2 * k);
    const double a = mid - half;
    const double b = mid + half;
    if (x > a && x < b) return {false, a, b};
    if (x <= a) {
      hi = a;
    } else {
      lo = b;
    }
  }
  return {true, 0.0, 0.0};
}

const char* to_string(PVariant v) { return v == PVariant::A ? "A" : "B"; }

PValue bump(double x, double a, double b, PVariant variant) {
  if (!(x > a && x < b)) return {};
  const double len = b - a;
  const double s = 0.25 * len;
  if (x <= a + s || x > b - s) {
    const bool left = x <= a + s;
    const double d = left ? x - a : b - x;
    const double sign = left ? 1.0 : -1.0;
    if (variant == PVariant::A) return {d * d, sign * 2.0 * d, 2.0};
    return {d * d * d * d, sign * 4.0 * d * d * d, 12.0 * d * d};
  }
  const double t = x - 0.5 * (a + b);
  if (variant == PVariant::A) {
    const double c1 = 8.0 / (len * len);
    const double c2 = -2.0;
    const double c3 = 5.0 * len * len / 32.0;
    const double t2 = t * t;
    return {c1 * t2 * t2 + c2 * t2 + c3, 4.0 * c1 * t2 * t + 2.0 * c2 * t, 12.0 * c1 * t2 + 2.0 * c2};
  }
  // Sextic middle matching the quartic caps to third order at both knots.
  const double r = t / s;
  const double r2 = r * r;
  const double s2 = s * s;
  return {s2 * s2 * (((-1.5 * r2 + 6.5) * r2 - 10.5) * r2 + 6.5),
          s2 * s * r * ((-9.0 * r2 + 26.0) * r2 - 21.0),
          s2 * ((-45.0 * r2 + 78.0) * r2 - 21.0)};
}

PValue p_eval(double x, PVariant variant, const SvcSet& svc) {
  if (!std::isfinite(x)) throw NumericError("p evaluated at a non-finite point");
  if (x < 0.0) return bump(x, -2.0, 0.0, variant);
  if (x > 1.0) return bump(x, 1.0, 3.0, variant);
  const Membership m = svc_membership(x, svc);
  if (m.in_v) return {};
  return bump(x, m.a, m.b, variant);
}

double CounterexampleObjective::value(const Matrix& xy) const {
  const double y = xy(1, 0);
  return -p_eval(x_of(xy), variant_, svc_).value + y * y;
}

Matrix CounterexampleObjective::gradient(const Matrix& xy) const {
  Matrix g(2, 1);
  g(0, 0) = -p_eval(x_of(xy), variant_, svc_).derivative;
  g(1, 0) = 2.0 * xy(1, 0);
  return g;
}

Matrix CounterexampleObjective::hessian_action(const Matrix& xy, const Matrix& d) const {
  Matrix h(2, 1);
  h(0, 0) = -p_eval(x_of(xy), variant_, svc_).second * d(0, 0);
  h(1, 0) = 2.0 * d(1, 0);
  return h;
}

EscapeStats escape_failure_experiment(const SvcExperimentConfig& config) {
  if (!(config.step > 0.0 && config.step <= 0.1)) throw ParameterError("step must lie in (0, 0.1]");
  if (!(config.tol > 0.0)) throw ParameterError("tolerance must be positive");
  const SvcSet svc(config.level);
  const CounterexampleObjective obj(config.variant, svc);
  PgdConfig pgd;
  pgd.step = config.step;
  pgd.max_iters = config.max_iters;
  if (config.record_every < 0) throw ParameterError("record_every must be nonnegative");
  pgd.record_every = config.record_every > 0 ? config.record_every : config.max_iters;
  const double tol = config.tol;
  std::vector<LimitReference> refs;
  refs.push_back({kInVColumn, [&svc, tol](const Trajectory& t) {
                    const auto& p0 = t.initial().as<BoxPoint>();
                    const auto& pf = t.final_point().as<BoxPoint>();
                    return svc_membership(p0.x, svc).in_v && std::abs(pf.y) < tol;
                  }});
  refs.push_back({kIntervalMinimum, [&svc, tol](const Trajectory& t) {
                    const auto& pf = t.final_point().as<BoxPoint>();
                    if (std::abs(pf.y) >= tol) return false;
                    if (pf.x < 0.0) return std::abs(pf.x + 1.0) < tol;
                    if (pf.x > 1.0) return std::abs(pf.x - 2.0) < tol;
                    const Membership m = svc_membership(pf.x, svc);
                    return !m.in_v && std::abs(pf.x - 0.5 * (m.a + m.b)) < tol;
                  }});
  EscapeOptions opt;
  opt.trials = config.trials;
  opt.master_seed = config.master_seed;
  opt.jobs = config.jobs;
  opt.keep_series = config.keep_series;
  opt.error = [](const Point& p) { return std::abs(p.as<BoxPoint>().y); };
  opt.init = [](RandomStream& rng) {
    const double x = rng.uniform(BoxBounds::x_lo, BoxBounds::x_hi);
    const double y = rng.uniform(BoxBounds::y_lo, BoxBounds::y_hi);
    return Point::box(x, y);
  };
  return escape_monte_carlo(obj, ManifoldSpec::box(), pgd, refs, opt);
}

void write_landscape_csv(const std::string& path, PVariant variant, const SvcSet& svc, int nx, int ny) {
  if (nx < 2 || ny < 2) throw ParameterError("landscape grid needs at least 2 x 2 points");
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw Error("cannot open " + path + " for writing");
  std::fprintf(f, "x,y,f\n");
  for (int i = 0; i < nx; ++i) {
    const double x = BoxBounds::x_lo + (BoxBounds::x_hi - BoxBounds::x_lo) * i / (nx - 1);
    const double p = p_eval(x, variant, svc).value;
    for (int j = 0; j < ny; ++j) {
      const double y = BoxBounds::y_lo + (BoxBounds::y_hi - BoxBounds::y_lo) * j / (ny - 1);
      std::fprintf(f, "%.17g,%.17g,%.17g\n", x, y, -p + y * y);
    }
  }
  std::fclose(f);
}

}  // namespace saddle
