#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "htq/random.hpp"

namespace htq {

// ---------------------------------------------------------------------------
// Primitive random-variable families
// ---------------------------------------------------------------------------

struct Exponential {
  double rate;
  friend bool operator==(const Exponential&, const Exponential&) = default;
};
struct Deterministic {
  double value;
  friend bool operator==(const Deterministic&, const Deterministic&) = default;
};
struct Erlang {
  int shape;
  double rate;
  friend bool operator==(const Erlang&, const Erlang&) = default;
};
struct HyperExponential {
  std::vector<double> probs;
  std::vector<double> rates;
  friend bool operator==(const HyperExponential&, const HyperExponential&) = default;
};
struct Uniform {
  double lo;
  double hi;
  friend bool operator==(const Uniform&, const Uniform&) = default;
};
struct LogNormal {
  double mu;
  double sigma;
  friend bool operator==(const LogNormal&, const LogNormal&) = default;
};
/// Resampling distribution over observed values. May be empty at
/// construction; any evaluation then fails with "empty empirical
/// distribution".
struct Empirical {
  std::vector<double> samples;
  friend bool operator==(const Empirical&, const Empirical&) = default;
};

using DistributionKind = std::variant<Exponential, Deterministic, Erlang,
                                      HyperExponential, Uniform, LogNormal,
                                      Empirical>;

/// An inter-arrival, service or patience law. Immutable after construction.
class DistributionSpec {
 public:
  explicit DistributionSpec(DistributionKind kind);

  static DistributionSpec exponential(double rate);
  static DistributionSpec deterministic(double value);
  static DistributionSpec erlang(int shape, double rate);
  static DistributionSpec hyper_exponential(std::vector<double> probs,
                                            std::vector<double> rates);
  static DistributionSpec uniform(double lo, double hi);
  static DistributionSpec log_normal(double mu, double sigma);
  static DistributionSpec empirical(std::vector<double> samples);

  const DistributionKind& kind() const { return kind_; }
  std::string name() const;

  double mean() const;
  double variance() const;
  double ess_inf() const;
  /// May be +infinity.
  double ess_sup() const;

  double sample(RandomStream& rng) const;

  /// P(X <= x); right-continuous.
  double cdf(double x) const;
  /// Generalized inverse inf{x : cdf(x) >= p} for p in (0, 1).
  double quantile(double p) const;
  /// Lebesgue density; throws for laws without one.
  double density(double x) const;
  /// Closed-form F'(0+) where the family admits one.
  std::optional<double> density_at_zero() const;

  friend bool operator==(const DistributionSpec&,
                         const DistributionSpec&) = default;

 private:
  DistributionKind kind_;
};

/// F'(0) for an unscaled patience law: analytic when available, otherwise
/// the one-sided difference F(eps)/eps with eps = 1e-6.
double patience_density_at_zero(const DistributionSpec& spec);

// ---------------------------------------------------------------------------
// Hazard rates
// ---------------------------------------------------------------------------

struct ConstantHazard {
  double gamma;
  friend bool operator==(const ConstantHazard&, const ConstantHazard&) = default;
};
/// h(u) = slope * u.
struct LinearHazard {
  double slope;
  friend bool operator==(const LinearHazard&, const LinearHazard&) = default;
};
/// h(u) = sum_k coeffs[k] * u^k.
struct PolynomialHazard {
  std::vector<double> coeffs;
  friend bool operator==(const PolynomialHazard&, const PolynomialHazard&) = default;
};
/// Linear interpolation through (knots[i], values[i]); knots[0] == 0 and the
/// last value extends as a constant beyond the final knot.
struct PiecewiseLinearHazard {
  std::vector<double> knots;
  std::vector<double> values;
  friend bool operator==(const PiecewiseLinearHazard&, const PiecewiseLinearHazard&) = default;
};
/// Linear interpolation on a finite grid starting at 0. Evaluation past the
/// grid is an error.
struct TabulatedHazard {
  std::vector<double> grid;
  std::vector<double> values;
  friend bool operator==(const TabulatedHazard&, const TabulatedHazard&) = default;
};

using HazardForm = std::variant<ConstantHazard, LinearHazard, PolynomialHazard,
                                PiecewiseLinearHazard, TabulatedHazard>;

/// Declared growth h(u) <= K (1 + u^l).
struct GrowthBound {
  double K;
  double l;
  friend bool operator==(const GrowthBound&, const GrowthBound&) = default;
};

class HazardFunction {
 public:
  explicit HazardFunction(HazardForm form,
                          std::optional<GrowthBound> growth = std::nullopt);

  static HazardFunction constant(double gamma);
  static HazardFunction linear(double slope);
  static HazardFunction polynomial(std::vector<double> coeffs);

  const HazardForm& form() const { return form_; }
  const std::optional<GrowthBound>& growth_bound() const { return growth_; }
  std::string name() const;

  /// Largest argument the hazard can be evaluated at (grid end for
  /// tabulated hazards, +infinity otherwise).
  double evaluation_limit() const;

  /// h(u).
  double rate(double u) const;
  /// H(x) = int_0^x h(u) du.
  double cumulative(double x) const;
  /// G(x) = int_0^x H(u) du.
  double integrated_cumulative(double x) const;
  /// Smallest y >= 0 with H(y) = target (bracketed bisection; closed form for
  /// constant and linear hazards).
  double inverse_cumulative(double target) const;

  /// True when H(x) -> infinity, i.e. the patience law is proper.
  bool has_unbounded_cumulative() const;
  /// Checks h >= 0 on an evenly spaced grid over [0, u_max].
  bool nonnegative_on(double u_max, int points = 1001) const;
  /// Checks the declared growth bound on an evenly spaced grid; false when
  /// no bound was declared.
  bool satisfies_growth_bound(double u_max, int points = 1001) const;

  friend bool operator==(const HazardFunction&, const HazardFunction&) = default;

 private:
  HazardForm form_;
  std::optional<GrowthBound> growth_;
};

/// Patience draw for the n-th system under hazard-rate scaling: returns d
/// with P(d <= x) = 1 - exp(-H(sqrt(n) x) / sqrt(n)).
double scaled_patience_sampler(const HazardFunction& h, int n,
                               RandomStream& rng);

/// CDF of the scaled patience law above.
double scaled_patience_cdf(const HazardFunction& h, int n, double x);

}  // namespace htq
