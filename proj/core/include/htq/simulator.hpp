#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <variant>
#include <vector>

#include "htq/distributions.hpp"

namespace htq {

/// Patience never expires: the plain GI/GI/1 queue.
struct NoAbandonment {
  friend bool operator==(const NoAbandonment&, const NoAbandonment&) = default;
};

/// Patience times d_i ~ F independent of n. f_prime_0 is F'(0).
struct UnscaledPatience {
  DistributionSpec distribution;
  double f_prime_0;
  friend bool operator==(const UnscaledPatience&, const UnscaledPatience&) = default;
};

/// Patience law of the n-th system has hazard h^n(x) = h(sqrt(n) x).
struct HazardScaledPatience {
  HazardFunction hazard;
  friend bool operator==(const HazardScaledPatience&,
                         const HazardScaledPatience&) = default;
};

using PatienceMode = std::variant<NoAbandonment, UnscaledPatience, HazardScaledPatience>;

/// Builds an unscaled patience mode with F'(0) filled in from the law.
UnscaledPatience unscaled_patience(DistributionSpec distribution);

/// The n-th system of the heavy-traffic sequence.
struct SystemConfig {
  int n = 1;
  double lambda = 1.0;
  double theta = 0.0;
  DistributionSpec arrival = DistributionSpec::exponential(1.0);
  DistributionSpec service = DistributionSpec::exponential(1.0);
  PatienceMode patience = NoAbandonment{};
  /// Scaled initial condition; the unscaled workload starts at x0 / sqrt(n).
  double x0 = 0.0;

  double arrival_rate() const { return n * lambda; }
  double service_rate() const;

  friend bool operator==(const SystemConfig&, const SystemConfig&) = default;
};

/// Rejects configurations the simulator cannot run (n < 1, nonpositive
/// rates, negative x0). The (A3) stability inequality is a modelling
/// assumption and is reported by the harness instead.
void check_runnable(const SystemConfig& cfg);

struct Estimate {
  double value = 0.0;
  double half_width = 0.0;
  friend bool operator==(const Estimate&, const Estimate&) = default;
};

struct SimCounts {
  std::uint64_t arrivals = 0;
  std::uint64_t served = 0;
  std::uint64_t abandoned = 0;
  std::uint64_t burn_in_discarded = 0;
  friend bool operator==(const SimCounts&, const SimCounts&) = default;
};

/// Per-batch means over the stationary window, kept so replications can be
/// pooled into a single batch-means confidence interval.
struct BatchSeries {
  std::map<double, std::vector<double>> wait_moment;
  std::vector<double> abandon_fraction;
  /// sqrt(n) F^n(W) averaged per batch (the g_n transform estimator).
  std::vector<double> abandon_conditional;
  /// Time average of Q^n / sqrt(n) per batch.
  std::vector<double> queue_scaled;
  std::vector<double> batch_duration;
  friend bool operator==(const BatchSeries&, const BatchSeries&) = default;
};

struct SimResult {
  int n = 0;
  std::uint64_t seed = 0;
  std::uint64_t lane = 0;
  /// sqrt(n) W_i at arrival epochs, every `sample_stride`-th post-burn-in arrival.
  std::vector<double> scaled_wait_samples;
  std::map<double, Estimate> scaled_wait_moment;
  /// Raw long-run abandonment fraction P^n_a.
  Estimate abandon_prob;
  /// sqrt(n) P^n_a from the raw fraction.
  Estimate scaled_abandon_prob;
  /// sqrt(n) E[F^n(V^n)] estimated by averaging sqrt(n) F^n(W_i).
  Estimate scaled_abandon_conditional;
  Estimate scaled_queue_mean;
  double decomposition_residual = 0.0;
  double decomposition_tolerance = 0.0;
  SimCounts counts;
  BatchSeries batches;
  friend bool operator==(const SimResult&, const SimResult&) = default;
};

struct RunOptions {
  std::uint64_t horizon = 0;
  std::uint64_t burn_in = 0;
  std::uint64_t seed = 0;
  std::uint64_t lane = 0;
  std::vector<double> moment_orders{1.0, 2.0};
  std::uint64_t sample_stride = 1;
  int batches = 32;
};

/// Offered waiting time seen by the next arrival. The current customer
/// abandons iff w >= patience, in which case its service adds no work.
double step_waiting_time(double w, double service, double patience, double next_gap);

/// True when a customer who finds offered wait w abandons.
inline bool abandons(double w, double patience) { return w >= patience; }

/// One replication of `horizon` arrivals; statistics from arrivals after
/// `burn_in`. Throws "simulation diverged" on a nonfinite workload.
SimResult run_replication(const SystemConfig& cfg, const RunOptions& options);
SimResult run_replication(const SystemConfig& cfg, std::uint64_t horizon,
                          std::uint64_t burn_in, std::uint64_t seed);

struct ArrivalRecord {
  double time = 0.0;
  double wait = 0.0;
  double service = 0.0;
  double patience = 0.0;
  bool abandoned = false;
  /// Idle time accumulated between the previous arrival and this one.
  double idle_before = 0.0;
};

/// The embedded sequence seen by the first `count` arrivals.
std::vector<ArrivalRecord> waiting_sequence(const SystemConfig& cfg, std::uint64_t count,
                                            std::uint64_t seed, std::uint64_t lane = 0);

/// Scaled components of the semimartingale decomposition of the offered
/// waiting time, sampled at checkpoint times.
struct DecompositionTrace {
  std::vector<double> times;
  std::vector<double> wait;         // V~
  std::vector<double> free_path;    // X~
  std::vector<double> error;        // eps~
  std::vector<double> drift;        // int_0^t H(V~(s-)) ds
  std::vector<double> idle;         // I~
  std::vector<double> abandon_martingale;  // M~_d(A-bar)
  std::vector<double> service_sum;         // S~(A-bar)
  std::vector<double> abandoned_service_sum;  // S~_d(A-bar)
  std::vector<double> arrivals_centered;   // A~
  std::vector<double> arrivals_fluid;      // A-bar
  double residual = 0.0;
  /// Largest component magnitude seen; the identity is checked relative to it.
  double magnitude = 0.0;
};

/// Replays one path and records the decomposition at `checkpoints` evenly
/// spaced times on [0, T], where T is `t_end` when given and the last
/// arrival epoch otherwise.
DecompositionTrace trace_decomposition(const SystemConfig& cfg, std::uint64_t horizon,
                                       std::uint64_t seed, std::size_t checkpoints,
                                       std::optional<double> t_end = std::nullopt);

/// Two-sided 95% Student-t quantile for `dof` degrees of freedom.
double t_quantile_975(std::size_t dof);

/// Batch-means estimate: grand mean and 95% half width.
Estimate batch_means(const std::vector<double>& batch_values);

}  // namespace htq
