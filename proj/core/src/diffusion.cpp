#include "htq/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "htq/error.hpp"
#include "htq/quadrature.hpp"

namespace htq {

namespace {

constexpr double kLogTailCutoff = -690.0;  // ~ log(1e-300)
constexpr double kMomentTolerance = 1e-12;
constexpr std::size_t kMaxGridPoints = std::size_t{1} << 22;

}  // namespace

double DiffusionSpec::loss_rate(double v) const {
  if (const auto* linear = std::get_if<LinearRou>(&drift)) return linear->f_prime_0 * v;
  return std::get<NonlinearHazard>(drift).hazard.cumulative(v);
}

double DiffusionSpec::loss_potential(double x) const {
  if (const auto* linear = std::get_if<LinearRou>(&drift)) {
    return 0.5 * linear->f_prime_0 * x * x;
  }
  return std::get<NonlinearHazard>(drift).hazard.integrated_cumulative(x);
}

double DiffusionSpec::log_density_kernel(double x) const {
  return 2.0 / sigma2 * (theta / lambda * x - loss_potential(x));
}

void validate(const DiffusionSpec& spec) {
  if (!(spec.sigma2 > 0.0) || !std::isfinite(spec.sigma2)) {
    throw Error("diffusion requires sigma2 > 0");
  }
  if (!(spec.lambda > 0.0)) throw Error("diffusion requires lambda > 0");
  if (!std::isfinite(spec.theta)) throw Error("diffusion requires finite theta");
  if (const auto* linear = std::get_if<LinearRou>(&spec.drift)) {
    if (!(linear->f_prime_0 > 0.0)) throw Error("patience required: F'(0) must be positive");
  } else {
    const auto& h = std::get<NonlinearHazard>(spec.drift).hazard;
    if (!h.has_unbounded_cumulative() && !std::holds_alternative<TabulatedHazard>(h.form())) {
      throw Error("density not normalizable: cumulative hazard is bounded");
    }
  }
}

double StationaryLaw::cdf_at(double x) const {
  if (x <= grid.front()) return x < grid.front() ? 0.0 : cdf.front();
  if (x >= grid.back()) return 1.0;
  const auto it = std::upper_bound(grid.begin(), grid.end(), x);
  const std::size_t hi = static_cast<std::size_t>(it - grid.begin());
  const std::size_t lo = hi - 1;
  const double w = (x - grid[lo]) / (grid[hi] - grid[lo]);
  return cdf[lo] + w * (cdf[hi] - cdf[lo]);
}

double StationaryLaw::quantile(double p) const {
  if (p <= 0.0) return grid.front();
  if (p >= 1.0) return grid.back();
  const auto it = std::lower_bound(cdf.begin(), cdf.end(), p);
  const std::size_t hi = static_cast<std::size_t>(it - cdf.begin());
  if (hi == 0) return grid.front();
  const std::size_t lo = hi - 1;
  const double span = cdf[hi] - cdf[lo];
  const double w = span > 0.0 ? (p - cdf[lo]) / span : 0.0;
  return grid[lo] + w * (grid[hi] - grid[lo]);
}

double StationaryLaw::density_at(const DiffusionSpec& spec, double x) const {
  if (x < 0.0) return 0.0;
  return std::exp(spec.log_density_kernel(x) - log_normalizer);
}

StationaryLaw stationary_density(const DiffusionSpec& spec, double grid_cap, std::size_t points,
                                 std::span<const double> extra_orders) {
  validate(spec);
  if (!(grid_cap > 0.0)) throw Error("stationary_density requires grid_cap > 0");
  points = std::max<std::size_t>(points, 1000);

  // The kernel is concave-like: it peaks where H(x) = theta / lambda.
  const double target = spec.theta / spec.lambda;
  double mode = 0.0;
  if (target > 0.0) {
    if (const auto* linear = std::get_if<LinearRou>(&spec.drift)) {
      mode = target / linear->f_prime_0;
    } else {
      mode = std::get<NonlinearHazard>(spec.drift).hazard.inverse_cumulative(target);
    }
  }
  const double peak = spec.log_density_kernel(mode);

  double cap = std::max(grid_cap, 2.0 * mode + 1.0);
  double last_above = mode;
  for (int doubling = 0; spec.log_density_kernel(cap) - peak > kLogTailCutoff; ++doubling) {
    if (doubling > 60) throw Error("density not normalizable");
    last_above = cap;
    cap *= 2.0;
  }
  // Past the mode the kernel is nonincreasing; pull the cap back to the
  // cutoff so the density stays positive on the grid interior.
  for (int iter = 0; iter < 200 && cap - last_above > 1e-12 * cap; ++iter) {
    const double mid = 0.5 * (last_above + cap);
    if (spec.log_density_kernel(mid) - peak > kLogTailCutoff) {
      last_above = mid;
    } else {
      cap = mid;
    }
  }

  auto shifted = [&](double x) { return std::exp(spec.log_density_kernel(x) - peak); };
  const double mass = quadrature::integrate(shifted, 0.0, cap, 1e-13, 128);
  if (!(mass > 0.0) || !std::isfinite(mass)) throw Error("density not normalizable");

  StationaryLaw law;
  law.grid_cap = cap;
  law.log_normalizer = peak + std::log(mass);

  // Uniform refinement until the grid trapezoid agrees with the quadrature.
  for (std::size_t n = points;; n *= 2) {
    law.grid.resize(n);
    law.density.resize(n);
    law.cdf.assign(n, 0.0);
    const double step = cap / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
      law.grid[i] = i + 1 == n ? cap : step * static_cast<double>(i);
      law.density[i] = law.density_at(spec, law.grid[i]);
    }
    for (std::size_t i = 1; i < n; ++i) {
      law.cdf[i] = law.cdf[i - 1] +
                   0.5 * (law.grid[i] - law.grid[i - 1]) * (law.density[i] + law.density[i - 1]);
    }
    if (std::abs(law.cdf.back() - 1.0) <= 1e-9 || 2 * n > kMaxGridPoints) break;
  }
  const double total = law.cdf.back();
  for (double& c : law.cdf) c /= total;

  std::vector<double> orders{1.0, 2.0};
  orders.insert(orders.end(), extra_orders.begin(), extra_orders.end());
  for (double m : orders) {
    if (law.moments.contains(m)) continue;
    law.moments[m] = quadrature::integrate(
        [&](double x) { return std::pow(x, m) * law.density_at(spec, x); }, 0.0, cap,
        kMomentTolerance, 128);
  }
  if (std::holds_alternative<LinearRou>(spec.drift)) law.mean_closed_form = mean_rou(spec);
  return law;
}

double scaled_erfc(double x) {
  if (x < 5.0) return std::exp(x * x) * std::erfc(x);
  // Laplace continued fraction, evaluated backwards.
  double f = x;
  for (int k = 80; k >= 1; --k) f = x + 0.5 * k / f;
  return 1.0 / (std::sqrt(std::numbers::pi) * f);
}

double standard_normal_hazard(double z) {
  const double a = z / std::numbers::sqrt2;
  if (z < 0.0) {
    const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
    return pdf / (0.5 * std::erfc(a));
  }
  return std::sqrt(2.0 / std::numbers::pi) / scaled_erfc(a);
}

double mean_rou(const DiffusionSpec& spec) {
  const auto* linear = std::get_if<LinearRou>(&spec.drift);
  if (!linear) throw Error("mean_rou requires the linear (ROU) drift mode");
  validate(spec);
  const double f0 = linear->f_prime_0;
  const double sigma = std::sqrt(spec.sigma2);
  const double location = spec.theta / (spec.lambda * f0);
  const double scale = sigma / std::sqrt(2.0 * f0);
  const double z = -spec.theta / (spec.lambda * sigma) * std::sqrt(2.0 / f0);
  return location + scale * standard_normal_hazard(z);
}

double abandonment_limit(const DiffusionSpec& spec, const StationaryLaw& law) {
  if (const auto* linear = std::get_if<LinearRou>(&spec.drift)) {
    return linear->f_prime_0 * law.moments.at(1.0);
  }
  return quadrature::integrate(
      [&](double x) { return spec.loss_rate(x) * law.density_at(spec, x); }, 0.0, law.grid_cap,
      kMomentTolerance, 128);
}

PathRecord simulate_reflected_sde(const DiffusionSpec& spec, double x0, double t_end, double dt,
                                  RandomStream& rng, const SdeOptions& options) {
  if (!(dt > 0.0) || dt > 1e-2) throw Error("simulate_reflected_sde requires 0 < dt <= 1e-2");
  if (!(t_end > dt)) throw Error("simulate_reflected_sde requires t_end > dt");
  if (!(x0 >= 0.0)) throw Error("simulate_reflected_sde requires x0 >= 0");
  if (!(spec.sigma2 >= 0.0)) throw Error("simulate_reflected_sde requires sigma2 >= 0");
  const std::size_t stride = std::max<std::size_t>(options.record_stride, 1);
  const auto steps = static_cast<std::size_t>(std::llround(t_end / dt));
  const double noise = std::sqrt(spec.sigma2 * dt);
  const double push = spec.theta / spec.lambda;

  std::vector<double> times;
  std::vector<double> values;
  times.reserve(steps / stride + 1);
  values.reserve(steps / stride + 1);
  double v = x0;
  times.push_back(0.0);
  values.push_back(v);
  for (std::size_t k = 1; k <= steps; ++k) {
    const double next = v + (push - spec.loss_rate(v)) * dt + noise * rng.normal();
    v = options.scheme == BoundaryScheme::Mirror ? std::abs(next) : std::max(next, 0.0);
    if (k % stride == 0) {
      times.push_back(static_cast<double>(k) * dt);
      values.push_back(v);
    }
  }
  return PathRecord(std::move(times), std::move(values), Interpolation::Linear);
}

}  // namespace htq
