#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "htq/distributions.hpp"
#include "htq/random.hpp"

namespace htq {

enum class Interpolation { Step, Linear };

/// A discretized cadlag path. Step paths are right-continuous and constant
/// between samples; linear paths interpolate between samples.
class PathRecord {
 public:
  PathRecord() = default;
  PathRecord(std::vector<double> times, std::vector<double> values,
             Interpolation interpolation = Interpolation::Linear);

  std::span<const double> times() const { return times_; }
  std::span<const double> values() const { return values_; }
  Interpolation interpolation() const { return interpolation_; }
  std::size_t size() const { return times_.size(); }
  double t_end() const { return times_.back(); }

  double at(double t) const;
  double min_gap() const;

  friend bool operator==(const PathRecord&, const PathRecord&) = default;

 private:
  std::vector<double> times_;
  std::vector<double> values_;
  Interpolation interpolation_ = Interpolation::Linear;
};

/// Output of the regulator map on a uniform grid.
struct RegulatedPair {
  PathRecord z;
  PathRecord l;
  /// max |z_dt - z_{dt/2}| over the common grid.
  double residual = 0.0;
  /// max over grid points of |z - (y - int H(z) + l)| with the integral by
  /// the trapezoid rule.
  double relation_defect = 0.0;
  /// sum over steps of z * dl.
  double complementarity = 0.0;
};

/// One-sided nonlinear regulator: z = y - int_0^t H(z(s)) ds + l >= 0, l
/// nondecreasing and increasing only when z = 0. Explicit Euler with
/// projection; jumps of step inputs are applied atomically after the drift.
RegulatedPair apply_regulator(const PathRecord& y, const HazardFunction& h, double dt);

/// Z(t) = phi^h(x + b t) on [0, t_end].
PathRecord deterministic_trajectory(double x, double b, const HazardFunction& h, double t_end,
                                    double dt);

/// sup|phi(y1) - phi(y2)| / sup|y1 - y2| on the regulator grid; empty when
/// the inputs coincide on the grid.
std::optional<double> lipschitz_ratio(const PathRecord& y1, const PathRecord& y2,
                                      const HazardFunction& h, double dt);

/// Largest observed sup|phi(y1) - phi(y2)| / sup|y1 - y2| over random
/// piecewise-linear and step path pairs. A lower estimate of the Lipschitz
/// constant.
double estimate_lipschitz(const HazardFunction& h, std::size_t trials, double t_end, double dt,
                          RandomStream& rng);

struct DrainResult {
  std::vector<double> x;
  std::vector<double> hit_times;
  /// max over x of hit_time / x.
  double d_hat = 0.0;
  bool pass = false;
};

/// Threshold below which a grid value counts as having reached zero.
inline constexpr double kZeroThreshold = 1e-9;

/// Drains the deterministic trajectory from every x in `x_grid` and checks
/// that hit times grow at most linearly in x. Requires the cone condition
/// b - H(z) <= -delta for all z on [0, max x]; throws "cone condition
/// violated" otherwise.
DrainResult drain_check(std::span<const double> x_grid, double b, const HazardFunction& h,
                        double dt, double delta);

/// First grid time with value <= kZeroThreshold, or +infinity.
double first_hit_time(const PathRecord& path);

void write_path_csv(std::ostream& out, const PathRecord& path);
PathRecord read_path_csv(std::istream& in, Interpolation interpolation);

}  // namespace htq
