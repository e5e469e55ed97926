#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "htq/distributions.hpp"
#include "htq/random.hpp"
#include "htq/regulator.hpp"

namespace htq {

/// Linear loss rate F'(0) v: the reflected Ornstein-Uhlenbeck limit.
struct LinearRou {
  double f_prime_0;
  friend bool operator==(const LinearRou&, const LinearRou&) = default;
};

/// Loss rate int_0^v h(u) du: the reflected nonlinear diffusion limit.
struct NonlinearHazard {
  HazardFunction hazard;
  friend bool operator==(const NonlinearHazard&, const NonlinearHazard&) = default;
};

using DriftMode = std::variant<LinearRou, NonlinearHazard>;

/// dV = (theta / lambda - H(V)) dt + sigma dW + dL on [0, inf).
struct DiffusionSpec {
  double theta = 0.0;
  double lambda = 1.0;
  double sigma2 = 1.0;
  DriftMode drift = LinearRou{1.0};

  /// H(v), the state-dependent loss rate.
  double loss_rate(double v) const;
  /// int_0^x H(u) du.
  double loss_potential(double x) const;
  /// Log of the unnormalized stationary density,
  /// (2 / sigma^2) ((theta / lambda) x - int_0^x H).
  double log_density_kernel(double x) const;

  friend bool operator==(const DiffusionSpec&, const DiffusionSpec&) = default;
};

/// Throws unless sigma2 > 0, lambda > 0 and the loss rate grows without
/// bound (f_prime_0 > 0, or an unbounded cumulative hazard).
void validate(const DiffusionSpec& spec);

struct StationaryLaw {
  std::vector<double> grid;
  std::vector<double> density;
  /// Cumulative trapezoid of `density`, rescaled to end at exactly 1.
  std::vector<double> cdf;
  double log_normalizer = 0.0;
  double grid_cap = 0.0;
  std::map<double, double> moments;
  std::optional<double> mean_closed_form;

  /// Law CDF by linear interpolation of the tabulated cumulative trapezoid.
  double cdf_at(double x) const;
  /// Inverse of cdf_at for p in [0, 1].
  double quantile(double p) const;
  /// Density from the kernel and normalizer (not the grid).
  double density_at(const DiffusionSpec& spec, double x) const;
};

/// Stationary law on a grid extended from `grid_cap` until the density falls
/// below 1e-300, then refined until the grid trapezoid integrates to 1 within
/// 1e-9. Moments of orders 1, 2 and `extra_orders` by adaptive quadrature.
StationaryLaw stationary_density(const DiffusionSpec& spec, double grid_cap = 8.0,
                                 std::size_t points = 4096,
                                 std::span<const double> extra_orders = {});

/// Closed-form stationary mean of the reflected OU (truncated normal mean).
double mean_rou(const DiffusionSpec& spec);

/// Limit of sqrt(n) P^n_a: E[int_0^V h] in hazard mode, F'(0) E[V] in linear mode.
double abandonment_limit(const DiffusionSpec& spec, const StationaryLaw& law);

/// phi(z) / (1 - Phi(z)) for the standard normal, stable in both tails.
double standard_normal_hazard(double z);

/// exp(x^2) erfc(x).
double scaled_erfc(double x);

enum class BoundaryScheme {
  /// V+ = |V + increment|: exact at grid points for driftless reflected BM.
  Mirror,
  /// V+ = max(V + increment, 0): biased low by about 0.58 sigma sqrt(dt).
  Projected,
};

struct SdeOptions {
  std::size_t record_stride = 1;
  BoundaryScheme scheme = BoundaryScheme::Mirror;
};

/// Euler-Maruyama path of the reflected diffusion on [0, t_end] with step dt
/// (dt <= 1e-2), recording every `record_stride`-th grid point.
PathRecord simulate_reflected_sde(const DiffusionSpec& spec, double x0, double t_end, double dt,
                                  RandomStream& rng, const SdeOptions& options = {});

}  // namespace htq
