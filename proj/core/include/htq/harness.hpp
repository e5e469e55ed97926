#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "htq/diffusion.hpp"
#include "htq/simulator.hpp"

namespace htq {

/// A heavy-traffic experiment: the template system is instantiated for every
/// n in `n_sequence`.
struct ExperimentPlan {
  SystemConfig base;
  std::vector<int> n_sequence{25, 100, 400};
  /// Horizon for index n is arrivals_per_n * n arrivals.
  std::uint64_t arrivals_per_n = 50'000;
  double burn_in_fraction = 0.1;
  int replications = 8;
  std::vector<double> moment_orders{1.0, 2.0};
  /// Declared finite-moment order q of the primitives.
  double declared_q = std::numeric_limits<double>::infinity();
  std::uint64_t seed_root = 1;
  /// Stationary-window samples kept per unit of (unscaled) time.
  double samples_per_unit_time = 4.0;
  /// Worker threads for replications; 0 means HTQ_THREADS or the hardware.
  int threads = 0;
  std::size_t density_points = 4096;

  std::uint64_t horizon(int n) const { return arrivals_per_n * static_cast<std::uint64_t>(n); }
  std::uint64_t burn_in(int n) const;
  std::uint64_t sample_stride(int n) const;
  SystemConfig system(int n) const;

  friend bool operator==(const ExperimentPlan&, const ExperimentPlan&) = default;
};

struct AssumptionCheck {
  std::string assumption;
  bool passed = true;
  std::string message;
};

struct ValidationReport {
  bool passed = true;
  std::vector<AssumptionCheck> checks;

  /// First failing check, formatted "assumption: message".
  std::string first_failure() const;
};

ValidationReport validate_assumptions(const ExperimentPlan& plan);

/// Diffusion limit of the system sequence: the reflected OU for unscaled
/// patience, the nonlinear diffusion under hazard scaling. Throws "patience
/// required" when customers never abandon.
DiffusionSpec diffusion_limit(const SystemConfig& base);

struct PerNDiagnostics {
  int n = 0;
  double ks_to_limit = 0.0;
  std::size_t samples = 0;
  std::map<double, Estimate> moment_estimates;
  std::map<double, double> moment_errors;
  /// sqrt(n) P^n_a from the g_n transform estimator.
  Estimate abandon_scaled;
  /// sqrt(n) P^n_a from the raw abandonment fraction.
  Estimate abandon_scaled_raw;
  double abandon_limit_error = 0.0;
  Estimate queue_scaled;
  double queue_limit_error = 0.0;
  double decomposition_residual = 0.0;
  friend bool operator==(const PerNDiagnostics&, const PerNDiagnostics&) = default;
};

struct LimitReference {
  std::map<double, double> moments;
  double abandonment_limit = 0.0;
  /// lambda E[V(inf)].
  double queue_limit = 0.0;
  friend bool operator==(const LimitReference&, const LimitReference&) = default;
};

struct ConvergenceReport {
  std::vector<PerNDiagnostics> per_n;
  LimitReference limit;
  /// Keyed by diagnostic ("ks", "moment_1", "abandonment", "queue"): true
  /// when it decreases strictly along the n sequence.
  std::map<std::string, bool> monotone_flags;
  friend bool operator==(const ConvergenceReport&, const ConvergenceReport&) = default;
};

/// Optional by-products of run_experiment, used by the CLI.
struct ExperimentArtifacts {
  StationaryLaw law;
  std::map<int, std::vector<double>> pooled_samples;
  std::map<int, std::vector<SimResult>> replications;
};

/// Runs every replication for every n and compares against the limit.
/// Throws if validation fails or any replication fails.
ConvergenceReport run_experiment(const ExperimentPlan& plan,
                                 ExperimentArtifacts* artifacts = nullptr);

/// Runs `plan.replications` replications of system n (in parallel lanes) and
/// returns them in replication order.
std::vector<SimResult> run_replications(const ExperimentPlan& plan, int n);

/// sup |F_empirical - F_law| over the samples. Requires at least 100 samples.
double ks_distance(std::span<const double> samples, const StationaryLaw& law);

/// Worker count: `requested` if positive, else HTQ_THREADS, else the hardware.
unsigned resolve_threads(int requested);

}  // namespace htq
