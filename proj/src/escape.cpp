#include "saddle/escape.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

namespace saddle {

long EscapeStats::count(const std::string& label) const {
  auto it = labels.find(label);
  return it == labels.end() ? 0 : it->second.count;
}

double EscapeStats::fraction(const std::string& label) const {
  return trials > 0 ? static_cast<double>(count(label)) / static_cast<double>(trials) : 0.0;
}

namespace {

TrialRecord run_trial(const Objective& obj, const ManifoldSpec& spec, const PgdConfig& config,
                      const std::vector<LimitReference>& references, const EscapeOptions& opt,
                      long index) {
  TrialRecord rec;
  rec.trial = index;
  rec.seed = derive_seed(opt.master_seed, static_cast<std::uint64_t>(index));
  rec.final_error = std::numeric_limits<double>::quiet_NaN();
  try {
    RandomStream rng(rec.seed);
    const Point p0 = opt.init ? opt.init(rng) : random_point(spec, rng);
    const Trajectory traj = run_pgd(p0, obj, config);
    rec.label = classify_limit(traj, references, opt.classify_grad_tol);
    rec.iterations = traj.iterations_run;
    rec.terminated_by = traj.terminated_by;
    rec.final_value = traj.final_value();
    rec.final_grad_norm = traj.final_grad_norm();
    rec.failure = traj.failure;
    if (opt.error) {
      rec.final_error = opt.error(traj.final_point());
      if (opt.keep_series) {
        rec.series_iters = traj.iterations;
        rec.series_errors.reserve(traj.iterates.size());
        for (const Point& q : traj.iterates) rec.series_errors.push_back(opt.error(q));
      }
    }
  } catch (const Error& e) {
    rec.label = kUndetermined;
    rec.terminated_by = Termination::RetractionFailure;
    rec.failure = e.what();
  }
  return rec;
}

}  // namespace

EscapeStats escape_monte_carlo(const Objective& obj, const ManifoldSpec& spec, const PgdConfig& config,
                               const std::vector<LimitReference>& references,
                               const EscapeOptions& options) {
  if (options.trials < 1) throw ParameterError("trials must be at least 1");
  if (references.empty()) throw MisuseError("escape experiment needs at least one reference");
  config.validate();
  if (!options.init) spec.validate();

  EscapeStats stats;
  stats.trials = options.trials;
  stats.records.resize(static_cast<std::size_t>(options.trials));

  unsigned jobs = options.jobs == 0 ? std::max(1u, std::thread::hardware_concurrency()) : options.jobs;
  jobs = static_cast<unsigned>(std::min<long>(jobs, options.trials));
  std::atomic<long> next{0};
  auto worker = [&] {
    for (long i = next++; i < options.trials; i = next++) {
      stats.records[static_cast<std::size_t>(i)] = run_trial(obj, spec, config, references, options, i);
    }
  };
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(jobs);
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }

  for (const auto& ref : references) stats.labels[ref.label];
  stats.labels[kUndetermined];
  for (const auto& rec : stats.records) {
    stats.seeds.push_back(rec.seed);
    ++stats.labels[rec.label].count;
  }
  const double n = static_cast<double>(stats.trials);
  for (auto& [label, st] : stats.labels) {
    st.probability = static_cast<double>(st.count) / n;
    st.std_error = std::sqrt(st.probability * (1.0 - st.probability) / n);
  }
  return stats;
}

}  // namespace saddle
