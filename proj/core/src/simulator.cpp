#include "htq/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>

#include <boost/math/distributions/students_t.hpp>

#include "htq/error.hpp"

namespace htq {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Neumaier-compensated running sum; the decomposition subtracts sums that
// grow linearly in the horizon.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      carry_ += (sum_ - t) + x;
    } else {
      carry_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

// Patience policies. `loss` is the scaled instantaneous loss H(y) as a
// function of the scaled wait y, `loss_integral` its antiderivative.
struct NoPatiencePolicy {
  double draw(RandomStream&) const { return kInf; }
  double cdf(double) const { return 0.0; }
  double loss_integral(double) const { return 0.0; }
};

struct UnscaledPolicy {
  const DistributionSpec& law;
  double f_prime_0;
  double draw(RandomStream& rng) const { return law.sample(rng); }
  double cdf(double w) const { return law.cdf(w); }
  double loss_integral(double y) const { return 0.5 * f_prime_0 * y * y; }
};

struct ScaledPolicy {
  const HazardFunction& hazard;
  int n;
  double draw(RandomStream& rng) const { return scaled_patience_sampler(hazard, n, rng); }
  double cdf(double w) const { return scaled_patience_cdf(hazard, n, w); }
  double loss_integral(double y) const { return hazard.integrated_cumulative(y); }
};

struct Snapshot {
  double wait, free_path, error, drift, idle, abandon_martingale, service_sum,
      abandoned_service_sum, arrivals_centered, arrivals_fluid;

  double residual() const { return std::abs(wait - (free_path + error - drift + idle)); }
  double magnitude() const {
    return std::max({std::abs(wait), std::abs(free_path), std::abs(error), std::abs(drift),
                     std::abs(idle), std::abs(abandon_martingale), std::abs(service_sum),
                     std::abs(abandoned_service_sum), std::abs(arrivals_centered),
                     std::abs(arrivals_fluid)});
  }
};

// Sample-path state of the n-th system between arrival epochs, together with
// every accumulator of the offered-waiting-time decomposition.
template <class Policy>
class PathEngine {
 public:
  PathEngine(const SystemConfig& cfg, const Policy& policy)
      : policy_(policy),
        n_(static_cast<double>(cfg.n)),
        root_n_(std::sqrt(static_cast<double>(cfg.n))),
        lambda_(cfg.lambda),
        arrival_rate_(cfg.arrival_rate()),
        service_rate_(cfg.service_rate()),
        x0_(cfg.x0),
        workload_(cfg.x0 / root_n_) {}

  double time() const { return time_; }
  double workload() const { return workload_; }
  double arrival_rate() const { return arrival_rate_; }
  double service_rate() const { return service_rate_; }
  double root_n() const { return root_n_; }

  // Drains the workload over `gap`; returns the offered wait at the new epoch.
  double advance(double gap, double* idle_increment = nullptr) {
    const double before = workload_;
    const double after = std::max(before - gap, 0.0);
    const double idle = std::max(gap - before, 0.0);
    idle_.add(idle);
    drift_.add(segment_drift(before, after));
    if (idle_increment) *idle_increment = idle;
    time_ += gap;
    workload_ = after;
    return after;
  }

  // Admits the arrival at the current epoch. `service` is the unnormalized
  // draw v_i (mean one). Returns true if the customer abandons.
  bool admit(double wait, double service, double patience, double patience_cdf) {
    const bool gone = abandons(wait, patience);
    arrivals_ += 1;
    service_centered_.add(service - 1.0);
    if (gone) abandoned_service_centered_.add(service - 1.0);
    abandon_centered_.add((gone ? 1.0 : 0.0) - patience_cdf);
    abandon_cdf_.add(patience_cdf);
    if (!gone) workload_ = wait + service / service_rate_;
    if (!std::isfinite(workload_) || workload_ > 1e300) throw Error("simulation diverged");
    return gone;
  }

  Snapshot snapshot(double at) const {
    const double tau = std::max(at - time_, 0.0);
    const double wait = std::max(workload_ - tau, 0.0);
    const double idle = idle_.value() + std::max(tau - workload_, 0.0);
    const double drift = drift_.value() + segment_drift(workload_, wait);
    const double count = static_cast<double>(arrivals_);
    const double scale = n_ / service_rate_;

    Snapshot s{};
    s.wait = root_n_ * wait;
    s.arrivals_fluid = count / n_;
    s.arrivals_centered = root_n_ * (count / n_ - lambda_ * at);
    s.service_sum = service_centered_.value() / root_n_;
    s.abandoned_service_sum = abandoned_service_centered_.value() / root_n_;
    s.abandon_martingale = abandon_centered_.value() / root_n_;
    s.free_path = x0_ +
                  scale * (s.service_sum - s.abandoned_service_sum - s.abandon_martingale +
                           s.arrivals_centered) +
                  scale * root_n_ * (lambda_ - service_rate_ / n_) * at;
    s.drift = drift;
    s.error = drift - root_n_ / service_rate_ * abandon_cdf_.value();
    s.idle = root_n_ * idle;
    return s;
  }

 private:
  // int over the segment of H(sqrt(n) V(s)) ds while V drains linearly from
  // `from` to `to` at unit rate.
  double segment_drift(double from, double to) const {
    if (from <= to) return 0.0;
    return (policy_.loss_integral(root_n_ * from) - policy_.loss_integral(root_n_ * to)) /
           root_n_;
  }

  const Policy& policy_;
  double n_, root_n_, lambda_, arrival_rate_, service_rate_, x0_;
  double time_ = 0.0;
  double workload_;
  std::uint64_t arrivals_ = 0;
  CompensatedSum idle_, drift_, service_centered_, abandoned_service_centered_,
      abandon_centered_, abandon_cdf_;
};

template <class Fn>
decltype(auto) with_policy(const SystemConfig& cfg, Fn&& fn) {
  return std::visit(
      [&](const auto& mode) -> decltype(auto) {
        using Mode = std::decay_t<decltype(mode)>;
        if constexpr (std::is_same_v<Mode, NoAbandonment>) {
          return fn(NoPatiencePolicy{});
        } else if constexpr (std::is_same_v<Mode, UnscaledPatience>) {
          return fn(UnscaledPolicy{mode.distribution, mode.f_prime_0});
        } else {
          return fn(ScaledPolicy{mode.hazard, cfg.n});
        }
      },
      cfg.patience);
}

double moment_term(double x, double order) {
  if (order == 1.0) return x;
  if (order == 2.0) return x * x;
  return std::pow(x, order);
}

struct BatchAccumulator {
  std::vector<std::vector<double>> moment_sums;
  std::vector<double> abandon, conditional, queue_area, duration;
  std::vector<std::uint64_t> count;

  BatchAccumulator(std::size_t batches, std::size_t orders)
      : moment_sums(orders, std::vector<double>(batches, 0.0)),
        abandon(batches, 0.0),
        conditional(batches, 0.0),
        queue_area(batches, 0.0),
        duration(batches, 0.0),
        count(batches, 0) {}
};

template <class Policy>
SimResult simulate(const SystemConfig& cfg, const RunOptions& opt, const Policy& policy) {
  check_runnable(cfg);
  if (opt.horizon <= opt.burn_in) throw Error("run_replication requires horizon > burn_in");
  if (opt.batches < 1) throw Error("run_replication requires at least one batch");
  if (opt.sample_stride < 1) throw Error("run_replication requires sample_stride >= 1");

  RandomStream arrivals(opt.seed, opt.lane, StreamId::Arrival);
  RandomStream services(opt.seed, opt.lane, StreamId::Service);
  RandomStream patience(opt.seed, opt.lane, StreamId::Patience);

  PathEngine<Policy> engine(cfg, policy);
  const double root_n = engine.root_n();
  const std::uint64_t window = opt.horizon - opt.burn_in;
  const std::uint64_t batches = std::min<std::uint64_t>(opt.batches, window);
  BatchAccumulator acc(batches, opt.moment_orders.size());

  SimResult result;
  result.n = cfg.n;
  result.seed = opt.seed;
  result.lane = opt.lane;
  result.counts.arrivals = opt.horizon;
  result.counts.burn_in_discarded = opt.burn_in;
  result.scaled_wait_samples.reserve(static_cast<std::size_t>(window / opt.sample_stride + 1));

  // Event calendar of departures: served customers leave at t + W + v^n,
  // abandoning ones at t + d.
  std::priority_queue<double, std::vector<double>, std::greater<>> departures;
  double in_system = 0.0;
  double total_area = 0.0;
  double total_time = 0.0;

  auto integrate_queue = [&](double from, double to, std::int64_t batch) {
    double area = 0.0;
    double clock = from;
    while (!departures.empty() && departures.top() <= to) {
      area += in_system * (departures.top() - clock);
      clock = departures.top();
      departures.pop();
      in_system -= 1.0;
    }
    area += in_system * (to - clock);
    if (batch >= 0) {
      acc.queue_area[batch] += area;
      acc.duration[batch] += to - from;
      total_area += area;
      total_time += to - from;
    }
  };
  auto batch_of = [&](std::uint64_t index) -> std::int64_t {
    if (index <= opt.burn_in) return -1;
    return static_cast<std::int64_t>((index - opt.burn_in - 1) * batches / window);
  };

  double residual = 0.0;
  double magnitude = 0.0;
  auto check_identity = [&] {
    const Snapshot s = engine.snapshot(engine.time());
    residual = std::max(residual, s.residual());
    magnitude = std::max(magnitude, s.magnitude());
  };

  for (std::uint64_t i = 1; i <= opt.horizon; ++i) {
    const double gap = cfg.arrival.sample(arrivals) / engine.arrival_rate();
    integrate_queue(engine.time(), engine.time() + gap, batch_of(i - 1));
    const double wait = engine.advance(gap);
    const double service = cfg.service.sample(services);
    const double d = policy.draw(patience);
    const double f = policy.cdf(wait);
    const bool gone = engine.admit(wait, service, d, f);

    departures.push(engine.time() + (gone ? d : wait + service / engine.service_rate()));
    in_system += 1.0;

    const std::int64_t b = batch_of(i);
    if (b >= 0) {
      const double scaled = root_n * wait;
      for (std::size_t k = 0; k < opt.moment_orders.size(); ++k) {
        acc.moment_sums[k][b] += moment_term(scaled, opt.moment_orders[k]);
      }
      acc.abandon[b] += gone ? 1.0 : 0.0;
      acc.conditional[b] += root_n * f;
      acc.count[b] += 1;
      if (gone) {
        ++result.counts.abandoned;
      } else {
        ++result.counts.served;
      }
      if ((i - opt.burn_in - 1) % opt.sample_stride == 0) {
        result.scaled_wait_samples.push_back(scaled);
      }
      if (i == opt.horizon || batch_of(i + 1) != b) check_identity();
    }
  }
  const double closing_gap = cfg.arrival.sample(arrivals) / engine.arrival_rate();
  integrate_queue(engine.time(), engine.time() + closing_gap, batch_of(opt.horizon));

  BatchSeries& series = result.batches;
  for (std::size_t k = 0; k < opt.moment_orders.size(); ++k) {
    auto& means = series.wait_moment[opt.moment_orders[k]];
    for (std::uint64_t b = 0; b < batches; ++b) {
      means.push_back(acc.moment_sums[k][b] / static_cast<double>(acc.count[b]));
    }
    result.scaled_wait_moment[opt.moment_orders[k]] = batch_means(means);
  }
  for (std::uint64_t b = 0; b < batches; ++b) {
    const double c = static_cast<double>(acc.count[b]);
    series.abandon_fraction.push_back(acc.abandon[b] / c);
    series.abandon_conditional.push_back(acc.conditional[b] / c);
    series.queue_scaled.push_back(acc.queue_area[b] / acc.duration[b] / root_n);
    series.batch_duration.push_back(acc.duration[b]);
  }

  result.abandon_prob = batch_means(series.abandon_fraction);
  result.abandon_prob.value =
      static_cast<double>(result.counts.abandoned) / static_cast<double>(window);
  result.scaled_abandon_prob = {root_n * result.abandon_prob.value,
                                root_n * result.abandon_prob.half_width};
  result.scaled_abandon_conditional = batch_means(series.abandon_conditional);
  result.scaled_queue_mean = batch_means(series.queue_scaled);
  result.scaled_queue_mean.value = total_area / total_time / root_n;
  result.decomposition_residual = residual;
  result.decomposition_tolerance = 1e-9 * (1.0 + magnitude);
  return result;
}

}  // namespace

UnscaledPatience unscaled_patience(DistributionSpec distribution) {
  const double f0 = patience_density_at_zero(distribution);
  return UnscaledPatience{std::move(distribution), f0};
}

double SystemConfig::service_rate() const {
  return n * lambda - std::sqrt(static_cast<double>(n)) * theta;
}

void check_runnable(const SystemConfig& cfg) {
  if (cfg.n < 1) throw Error("n must be a positive integer");
  if (!(cfg.lambda > 0.0)) throw Error("lambda must be positive");
  if (!(cfg.service_rate() > 0.0)) throw Error("service rate mu^n not positive");
  if (!(cfg.x0 >= 0.0)) throw Error("initial condition x0 must be nonnegative");
}

double step_waiting_time(double w, double service, double patience, double next_gap) {
  const double work = abandons(w, patience) ? w : w + service;
  return std::max(work - next_gap, 0.0);
}

SimResult run_replication(const SystemConfig& cfg, const RunOptions& options) {
  return with_policy(cfg, [&](const auto& policy) { return simulate(cfg, options, policy); });
}

SimResult run_replication(const SystemConfig& cfg, std::uint64_t horizon, std::uint64_t burn_in,
                          std::uint64_t seed) {
  RunOptions options;
  options.horizon = horizon;
  options.burn_in = burn_in;
  options.seed = seed;
  return run_replication(cfg, options);
}

std::vector<ArrivalRecord> waiting_sequence(const SystemConfig& cfg, std::uint64_t count,
                                            std::uint64_t seed, std::uint64_t lane) {
  check_runnable(cfg);
  return with_policy(cfg, [&](const auto& policy) {
    using Policy = std::decay_t<decltype(policy)>;
    RandomStream arrivals(seed, lane, StreamId::Arrival);
    RandomStream services(seed, lane, StreamId::Service);
    RandomStream patience(seed, lane, StreamId::Patience);
    PathEngine<Policy> engine(cfg, policy);
    std::vector<ArrivalRecord> records;
    records.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
      ArrivalRecord r;
      const double gap = cfg.arrival.sample(arrivals) / engine.arrival_rate();
      r.wait = engine.advance(gap, &r.idle_before);
      r.time = engine.time();
      const double service = cfg.service.sample(services);
      r.service = service / engine.service_rate();
      r.patience = policy.draw(patience);
      r.abandoned = engine.admit(r.wait, service, r.patience, policy.cdf(r.wait));
      records.push_back(r);
    }
    return records;
  });
}

DecompositionTrace trace_decomposition(const SystemConfig& cfg, std::uint64_t horizon,
                                       std::uint64_t seed, std::size_t checkpoints,
                                       std::optional<double> t_end) {
  check_runnable(cfg);
  if (checkpoints < 2) throw Error("trace_decomposition requires at least two checkpoints");
  if (horizon < 1) throw Error("trace_decomposition requires a positive horizon");

  double end = 0.0;
  if (t_end) {
    if (!(*t_end > 0.0)) throw Error("trace_decomposition requires t_end > 0");
    end = *t_end;
  } else {
    // The arrival stream is independent of the others, so replaying it
    // alone gives the last epoch.
    RandomStream arrivals(seed, 0, StreamId::Arrival);
    for (std::uint64_t i = 0; i < horizon; ++i) {
      end += cfg.arrival.sample(arrivals) / cfg.arrival_rate();
    }
  }

  return with_policy(cfg, [&](const auto& policy) {
    using Policy = std::decay_t<decltype(policy)>;
    RandomStream arrivals(seed, 0, StreamId::Arrival);
    RandomStream services(seed, 0, StreamId::Service);
    RandomStream patience(seed, 0, StreamId::Patience);
    PathEngine<Policy> engine(cfg, policy);

    DecompositionTrace trace;
    std::size_t next = 0;
    auto checkpoint_time = [&](std::size_t k) {
      return end * static_cast<double>(k) / static_cast<double>(checkpoints - 1);
    };
    auto record = [&](double at) {
      const Snapshot s = engine.snapshot(at);
      trace.times.push_back(at);
      trace.wait.push_back(s.wait);
      trace.free_path.push_back(s.free_path);
      trace.error.push_back(s.error);
      trace.drift.push_back(s.drift);
      trace.idle.push_back(s.idle);
      trace.abandon_martingale.push_back(s.abandon_martingale);
      trace.service_sum.push_back(s.service_sum);
      trace.abandoned_service_sum.push_back(s.abandoned_service_sum);
      trace.arrivals_centered.push_back(s.arrivals_centered);
      trace.arrivals_fluid.push_back(s.arrivals_fluid);
      trace.residual = std::max(trace.residual, s.residual());
      trace.magnitude = std::max(trace.magnitude, s.magnitude());
    };

    for (std::uint64_t i = 0; i < horizon; ++i) {
      const double gap = cfg.arrival.sample(arrivals) / engine.arrival_rate();
      const double arrival_time = engine.time() + gap;
      while (next < checkpoints && checkpoint_time(next) < arrival_time) {
        record(checkpoint_time(next++));
      }
      if (arrival_time > end) break;
      const double wait = engine.advance(gap);
      const double service = cfg.service.sample(services);
      const double d = policy.draw(patience);
      engine.admit(wait, service, d, policy.cdf(wait));
    }
    while (next < checkpoints) record(checkpoint_time(next++));
    return trace;
  });
}

double t_quantile_975(std::size_t dof) {
  if (dof == 0) return kInf;
  boost::math::students_t dist(static_cast<double>(dof));
  return boost::math::quantile(dist, 0.975);
}

Estimate batch_means(const std::vector<double>& batch_values) {
  Estimate e;
  if (batch_values.empty()) return e;
  const double b = static_cast<double>(batch_values.size());
  double mean = 0.0;
  for (double v : batch_values) mean += v;
  mean /= b;
  double ss = 0.0;
  for (double v : batch_values) ss += (v - mean) * (v - mean);
  e.value = mean;
  if (batch_values.size() < 2) {
    e.half_width = kInf;
  } else {
    e.half_width = t_quantile_975(batch_values.size() - 1) * std::sqrt(ss / (b - 1.0) / b);
  }
  return e;
}

}  // namespace htq
