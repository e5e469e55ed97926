#include "htq/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <sstream>
#include <string>
#include <thread>

#include "htq/error.hpp"

namespace htq {

namespace {

constexpr double kMeanTolerance = 1e-6;

std::string format_n(int n) { return "n=" + std::to_string(n); }

void add(ValidationReport& report, std::string assumption, bool passed, std::string message) {
  report.passed = report.passed && passed;
  report.checks.push_back({std::move(assumption), passed, std::move(message)});
}

std::vector<double> concat(const std::vector<SimResult>& reps,
                           const std::vector<double> BatchSeries::*field) {
  std::vector<double> out;
  for (const auto& r : reps) {
    const auto& v = r.batches.*field;
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

// Strictly decreasing along the sequence; vacuous for a single n.
bool decreasing(const std::vector<double>& values) {
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (!(values[i] < values[i - 1])) return false;
  }
  return true;
}

}  // namespace

std::uint64_t ExperimentPlan::burn_in(int n) const {
  return static_cast<std::uint64_t>(std::floor(burn_in_fraction * static_cast<double>(horizon(n))));
}

std::uint64_t ExperimentPlan::sample_stride(int n) const {
  if (!(samples_per_unit_time > 0.0)) return 1;
  const double stride = static_cast<double>(n) * base.lambda / samples_per_unit_time;
  return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(stride)));
}

SystemConfig ExperimentPlan::system(int n) const {
  SystemConfig cfg = base;
  cfg.n = n;
  return cfg;
}

std::string ValidationReport::first_failure() const {
  for (const auto& c : checks) {
    if (!c.passed) return c.assumption + ": " + c.message;
  }
  return {};
}

ValidationReport validate_assumptions(const ExperimentPlan& plan) {
  ValidationReport report;
  const SystemConfig& base = plan.base;

  bool increasing = !plan.n_sequence.empty() && plan.n_sequence.front() >= 1;
  for (std::size_t i = 1; i < plan.n_sequence.size(); ++i) {
    increasing = increasing && plan.n_sequence[i] > plan.n_sequence[i - 1];
  }
  add(report, "plan", increasing && plan.replications >= 1 && plan.arrivals_per_n >= 1 &&
                          plan.burn_in_fraction >= 0.0 && plan.burn_in_fraction < 1.0,
      increasing ? "n_sequence strictly increasing, replications >= 1"
                 : "n_sequence must be nonempty, positive and strictly increasing");

  // (A1): unit-mean primitives and a positive arrival rate.
  {
    bool ok = base.lambda > 0.0 && std::isfinite(base.lambda);
    std::string message = "lambda^n = n lambda with lambda > 0, unit-mean primitives";
    try {
      const double mu = base.arrival.mean();
      const double mv = base.service.mean();
      if (std::abs(mu - 1.0) > kMeanTolerance || std::abs(mv - 1.0) > kMeanTolerance) {
        ok = false;
        std::ostringstream s;
        s << "primitive means must be 1 (arrival " << mu << ", service " << mv << ")";
        message = s.str();
      }
    } catch (const std::exception& e) {
      ok = false;
      message = e.what();
    }
    if (!(base.lambda > 0.0)) message = "lambda must be positive";
    add(report, "A1", ok, message);
  }

  // (A2) positivity of mu^n and (A3) stability, per n.
  for (int n : plan.n_sequence) {
    const SystemConfig cfg = plan.system(n);
    const double mu_n = cfg.service_rate();
    if (!(mu_n > 0.0)) {
      add(report, "A2", false, "mu^n not positive at " + format_n(n));
      continue;
    }
    add(report, "A2", true, "mu^n > 0 at " + format_n(n));
    try {
      const double margin = cfg.service.ess_inf() / mu_n - cfg.arrival.ess_sup() / cfg.arrival_rate();
      add(report, "A3", margin < 0.0,
          margin < 0.0 ? "stable at " + format_n(n)
                       : "ess_inf(v)/mu^n - ess_sup(u)/lambda^n >= 0 at " + format_n(n));
    } catch (const std::exception& e) {
      add(report, "A3", false, e.what());
    }
  }

  // (A4): patience law.
  const auto* unscaled = std::get_if<UnscaledPatience>(&base.patience);
  const auto* scaled = std::get_if<HazardScaledPatience>(&base.patience);
  if (std::holds_alternative<NoAbandonment>(base.patience)) {
    add(report, "A4", false, "patience required");
  } else if (unscaled) {
    const bool ok = unscaled->f_prime_0 > 0.0 && std::isfinite(unscaled->f_prime_0);
    add(report, "A4", ok, ok ? "F'(0) > 0" : "patience required: F'(0) must be positive");
  } else {
    const HazardFunction& h = scaled->hazard;
    const double span = std::min(h.evaluation_limit(), 100.0);
    const bool nonneg = h.nonnegative_on(span);
    const bool proper = h.has_unbounded_cumulative();
    add(report, "A4", nonneg && proper,
        !nonneg ? "hazard must be nonnegative"
                : (proper ? "hazard nonnegative with unbounded cumulative"
                          : "cumulative hazard is bounded"));
  }

  // (A5): every built-in kind has all moments (empirical laws are bounded),
  // so any declared q is consistent with the primitives.
  {
    bool ok = plan.declared_q > 2.0;
    std::string message = ok ? "q > 2" : "declared moment order q must exceed 2";
    for (double m : plan.moment_orders) {
      if (!(m > 0.0) || !(m < plan.declared_q - 1.0)) {
        ok = false;
        std::ostringstream s;
        s << "moment order " << m << " requires 0 < m < q - 1 = " << plan.declared_q - 1.0;
        message = s.str();
        break;
      }
    }
    add(report, "A5", ok, message);
  }

  // (A5'): growth bound under hazard scaling.
  if (scaled) {
    const auto& bound = scaled->hazard.growth_bound();
    if (!bound) {
      add(report, "A5'", false, "hazard growth bound required in scaled mode");
    } else {
      const double span = std::min(scaled->hazard.evaluation_limit(), 100.0);
      const bool holds = scaled->hazard.satisfies_growth_bound(span);
      const bool order = plan.declared_q > 2.0 + bound->l;
      add(report, "A5'", holds && order,
          !holds ? "hazard exceeds declared growth bound K (1 + u^l)"
                 : (order ? "q > 2 + l" : "declared q must exceed 2 + l"));
    }
  }
  return report;
}

DiffusionSpec diffusion_limit(const SystemConfig& base) {
  DiffusionSpec spec;
  spec.theta = base.theta;
  spec.lambda = base.lambda;
  spec.sigma2 = base.lambda * base.arrival.variance() + base.service.variance() / base.lambda;
  if (const auto* u = std::get_if<UnscaledPatience>(&base.patience)) {
    spec.drift = LinearRou{u->f_prime_0};
  } else if (const auto* s = std::get_if<HazardScaledPatience>(&base.patience)) {
    spec.drift = NonlinearHazard{s->hazard};
  } else {
    throw Error("patience required: the no-abandonment limit is not supported");
  }
  validate(spec);
  return spec;
}

unsigned resolve_threads(int requested) {
  if (requested > 0) return static_cast<unsigned>(requested);
  if (const char* env = std::getenv("HTQ_THREADS")) {
    const int value = std::atoi(env);
    if (value > 0) return static_cast<unsigned>(value);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<SimResult> run_replications(const ExperimentPlan& plan, int n) {
  const SystemConfig cfg = plan.system(n);
  check_runnable(cfg);
  const auto reps = static_cast<std::size_t>(std::max(plan.replications, 0));
  std::vector<SimResult> results(reps);
  std::vector<std::exception_ptr> failures(reps);

  RunOptions base_options;
  base_options.horizon = plan.horizon(n);
  base_options.burn_in = plan.burn_in(n);
  base_options.seed = plan.seed_root;
  base_options.moment_orders = plan.moment_orders;
  base_options.sample_stride = plan.sample_stride(n);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t r; (r = next.fetch_add(1)) < reps;) {
      try {
        RunOptions options = base_options;
        options.lane = (static_cast<std::uint64_t>(n) << 20) | r;
        results[r] = run_replication(cfg, options);
      } catch (...) {
        failures[r] = std::current_exception();
      }
    }
  };
  const unsigned threads = std::min<unsigned>(resolve_threads(plan.threads),
                                              static_cast<unsigned>(std::max<std::size_t>(reps, 1)));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  for (std::size_t r = 0; r < reps; ++r) {
    if (!failures[r]) continue;
    try {
      std::rethrow_exception(failures[r]);
    } catch (const std::exception& e) {
      throw Error("replication " + std::to_string(r) + " at " + format_n(n) + " failed: " + e.what());
    }
  }
  return results;
}

double ks_distance(std::span<const double> samples, const StationaryLaw& law) {
  if (samples.size() < 100) throw Error("insufficient samples");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double count = static_cast<double>(sorted.size());
  double sup = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = law.cdf_at(sorted[i]);
    sup = std::max({sup, static_cast<double>(i + 1) / count - f, f - static_cast<double>(i) / count});
  }
  return std::clamp(sup, 0.0, 1.0);
}

ConvergenceReport run_experiment(const ExperimentPlan& plan, ExperimentArtifacts* artifacts) {
  const ValidationReport validation = validate_assumptions(plan);
  if (!validation.passed) throw Error("validation failed: " + validation.first_failure());

  const DiffusionSpec spec = diffusion_limit(plan.base);
  StationaryLaw law = stationary_density(spec, 8.0, plan.density_points, plan.moment_orders);

  ConvergenceReport report;
  for (double m : plan.moment_orders) report.limit.moments[m] = law.moments.at(m);
  report.limit.abandonment_limit = abandonment_limit(spec, law);
  report.limit.queue_limit = plan.base.lambda * law.moments.at(1.0);

  for (int n : plan.n_sequence) {
    std::vector<SimResult> reps = run_replications(plan, n);

    PerNDiagnostics d;
    d.n = n;
    std::vector<double> pooled;
    for (const auto& r : reps) {
      pooled.insert(pooled.end(), r.scaled_wait_samples.begin(), r.scaled_wait_samples.end());
      d.decomposition_residual = std::max(d.decomposition_residual, r.decomposition_residual);
    }
    d.samples = pooled.size();
    d.ks_to_limit = ks_distance(pooled, law);

    for (double m : plan.moment_orders) {
      std::vector<double> batches;
      for (const auto& r : reps) {
        const auto& v = r.batches.wait_moment.at(m);
        batches.insert(batches.end(), v.begin(), v.end());
      }
      d.moment_estimates[m] = batch_means(batches);
      d.moment_errors[m] = std::abs(d.moment_estimates[m].value - report.limit.moments.at(m));
    }

    const double root_n = std::sqrt(static_cast<double>(n));
    d.abandon_scaled = batch_means(concat(reps, &BatchSeries::abandon_conditional));
    Estimate raw = batch_means(concat(reps, &BatchSeries::abandon_fraction));
    d.abandon_scaled_raw = {root_n * raw.value, root_n * raw.half_width};
    d.abandon_limit_error = std::abs(d.abandon_scaled.value - report.limit.abandonment_limit);
    d.queue_scaled = batch_means(concat(reps, &BatchSeries::queue_scaled));
    d.queue_limit_error = std::abs(d.queue_scaled.value - report.limit.queue_limit);

    report.per_n.push_back(d);
    if (artifacts) {
      artifacts->pooled_samples[n] = std::move(pooled);
      artifacts->replications[n] = std::move(reps);
    }
  }

  auto column = [&](auto select) {
    std::vector<double> v;
    for (const auto& d : report.per_n) v.push_back(select(d));
    return v;
  };
  report.monotone_flags["ks"] = decreasing(column([](const auto& d) { return d.ks_to_limit; }));
  for (double m : plan.moment_orders) {
    std::ostringstream key;
    key << "moment_" << m;
    report.monotone_flags[key.str()] =
        decreasing(column([m](const auto& d) { return d.moment_errors.at(m); }));
  }
  report.monotone_flags["abandonment"] =
      decreasing(column([](const auto& d) { return d.abandon_limit_error; }));
  report.monotone_flags["queue"] =
      decreasing(column([](const auto& d) { return d.queue_limit_error; }));

  if (artifacts) artifacts->law = std::move(law);
  return report;
}

}  // namespace htq
