#include "htq/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "htq/error.hpp"
#include "htq/quadrature.hpp"

namespace htq {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require(bool condition, const char* message) {
  if (!condition) throw Error(message);
}

const std::vector<double>& nonempty(const Empirical& e) {
  if (e.samples.empty()) throw Error("empty empirical distribution");
  return e.samples;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// Bisection for a nondecreasing function on [lo, hi] with f(hi) >= target.
template <class F>
double bisect_increasing(const F& f, double target, double lo, double hi,
                         double rel_tol) {
  for (int it = 0; it < 400 && hi - lo > rel_tol * std::max(hi, 1e-300); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) >= target) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

}  // namespace

// ---------------------------------------------------------------------------
// DistributionSpec
// ---------------------------------------------------------------------------

DistributionSpec::DistributionSpec(DistributionKind kind) : kind_(std::move(kind)) {
  std::visit(
      Overloaded{
          [](const Exponential& d) {
            require(d.rate > 0 && std::isfinite(d.rate), "exponential rate must be positive");
          },
          [](const Deterministic& d) {
            require(d.value >= 0 && std::isfinite(d.value),
                    "deterministic value must be finite and nonnegative");
          },
          [](const Erlang& d) {
            require(d.shape >= 1, "erlang shape must be >= 1");
            require(d.rate > 0 && std::isfinite(d.rate), "erlang rate must be positive");
          },
          [](const HyperExponential& d) {
            require(!d.probs.empty() && d.probs.size() == d.rates.size(),
                    "hyperexponential needs matching probs and rates");
            double total = 0.0;
            for (std::size_t i = 0; i < d.probs.size(); ++i) {
              require(d.probs[i] >= 0, "hyperexponential probs must be nonnegative");
              require(d.rates[i] > 0, "hyperexponential rates must be positive");
              total += d.probs[i];
            }
            require(std::abs(total - 1.0) <= 1e-12, "hyperexponential probs must sum to 1");
          },
          [](const Uniform& d) {
            require(d.lo >= 0 && d.hi > d.lo && std::isfinite(d.hi),
                    "uniform needs 0 <= lo < hi");
          },
          [](const LogNormal& d) {
            require(std::isfinite(d.mu) && d.sigma > 0, "lognormal sigma must be positive");
          },
          [](const Empirical& d) {
            for (double s : d.samples) {
              require(s >= 0 && std::isfinite(s),
                      "empirical samples must be finite and nonnegative");
            }
          },
      },
      kind_);
  if (auto* e = std::get_if<Empirical>(&kind_)) {
    std::sort(e->samples.begin(), e->samples.end());
  }
}

DistributionSpec DistributionSpec::exponential(double rate) {
  return DistributionSpec(Exponential{rate});
}
DistributionSpec DistributionSpec::deterministic(double value) {
  return DistributionSpec(Deterministic{value});
}
DistributionSpec DistributionSpec::erlang(int shape, double rate) {
  return DistributionSpec(Erlang{shape, rate});
}
DistributionSpec DistributionSpec::hyper_exponential(std::vector<double> probs,
                                                     std::vector<double> rates) {
  return DistributionSpec(HyperExponential{std::move(probs), std::move(rates)});
}
DistributionSpec DistributionSpec::uniform(double lo, double hi) {
  return DistributionSpec(Uniform{lo, hi});
}
DistributionSpec DistributionSpec::log_normal(double mu, double sigma) {
  return DistributionSpec(LogNormal{mu, sigma});
}
DistributionSpec DistributionSpec::empirical(std::vector<double> samples) {
  return DistributionSpec(Empirical{std::move(samples)});
}

std::string DistributionSpec::name() const {
  std::ostringstream out;
  std::visit(Overloaded{
                 [&](const Exponential& d) { out << "exponential(rate=" << d.rate << ")"; },
                 [&](const Deterministic& d) { out << "deterministic(" << d.value << ")"; },
                 [&](const Erlang& d) {
                   out << "erlang(shape=" << d.shape << ", rate=" << d.rate << ")";
                 },
                 [&](const HyperExponential& d) {
                   out << "hyperexponential(" << d.probs.size() << " phases)";
                 },
                 [&](const Uniform& d) { out << "uniform(" << d.lo << ", " << d.hi << ")"; },
                 [&](const LogNormal& d) {
                   out << "lognormal(mu=" << d.mu << ", sigma=" << d.sigma << ")";
                 },
                 [&](const Empirical& d) { out << "empirical(" << d.samples.size() << ")"; },
             },
             kind_);
  return out.str();
}

double DistributionSpec::mean() const {
  return std::visit(
      Overloaded{
          [](const Exponential& d) { return 1.0 / d.rate; },
          [](const Deterministic& d) { return d.value; },
          [](const Erlang& d) { return d.shape / d.rate; },
          [](const HyperExponential& d) {
            double m = 0.0;
            for (std::size_t i = 0; i < d.probs.size(); ++i) m += d.probs[i] / d.rates[i];
            return m;
          },
          [](const Uniform& d) { return 0.5 * (d.lo + d.hi); },
          [](const LogNormal& d) { return std::exp(d.mu + 0.5 * d.sigma * d.sigma); },
          [](const Empirical& d) {
            const auto& s = nonempty(d);
            return std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
          },
      },
      kind_);
}

double DistributionSpec::variance() const {
  return std::visit(
      Overloaded{
          [](const Exponential& d) { return 1.0 / (d.rate * d.rate); },
          [](const Deterministic&) { return 0.0; },
          [](const Erlang& d) { return d.shape / (d.rate * d.rate); },
          [this](const HyperExponential& d) {
            double second = 0.0;
            for (std::size_t i = 0; i < d.probs.size(); ++i) {
              second += 2.0 * d.probs[i] / (d.rates[i] * d.rates[i]);
            }
            const double m = mean();
            return second - m * m;
          },
          [](const Uniform& d) { return (d.hi - d.lo) * (d.hi - d.lo) / 12.0; },
          [](const LogNormal& d) {
            const double s2 = d.sigma * d.sigma;
            return std::expm1(s2) * std::exp(2.0 * d.mu + s2);
          },
          [this](const Empirical& d) {
            const auto& s = nonempty(d);
            const double m = mean();
            double acc = 0.0;
            for (double x : s) acc += (x - m) * (x - m);
            return acc / static_cast<double>(s.size());
          },
      },
      kind_);
}

double DistributionSpec::ess_inf() const {
  return std::visit(Overloaded{
                        [](const Deterministic& d) { return d.value; },
                        [](const Uniform& d) { return d.lo; },
                        [](const Empirical& d) { return nonempty(d).front(); },
                        [](const auto&) { return 0.0; },
                    },
                    kind_);
}

double DistributionSpec::ess_sup() const {
  return std::visit(Overloaded{
                        [](const Deterministic& d) { return d.value; },
                        [](const Uniform& d) { return d.hi; },
                        [](const Empirical& d) { return nonempty(d).back(); },
                        [](const auto&) { return kInf; },
                    },
                    kind_);
}

double DistributionSpec::sample(RandomStream& rng) const {
  return std::visit(
      Overloaded{
          [&](const Exponential& d) { return rng.exponential() / d.rate; },
          [](const Deterministic& d) { return d.value; },
          [&](const Erlang& d) {
            double total = 0.0;
            for (int k = 0; k < d.shape; ++k) total += rng.exponential();
            return total / d.rate;
          },
          [&](const HyperExponential& d) {
            const double u = rng.uniform();
            double acc = 0.0;
            std::size_t phase = d.probs.size() - 1;
            for (std::size_t i = 0; i < d.probs.size(); ++i) {
              acc += d.probs[i];
              if (u <= acc) {
                phase = i;
                break;
              }
            }
            return rng.exponential() / d.rates[phase];
          },
          [&](const Uniform& d) { return d.lo + (d.hi - d.lo) * rng.uniform(); },
          [&](const LogNormal& d) { return std::exp(d.mu + d.sigma * rng.normal()); },
          [&](const Empirical& d) {
            const auto& s = nonempty(d);
            const auto idx = static_cast<std::size_t>(rng.uniform() * static_cast<double>(s.size()));
            return s[std::min(idx, s.size() - 1)];
          },
      },
      kind_);
}

double DistributionSpec::cdf(double x) const {
  return std::visit(
      Overloaded{
          [x](const Exponential& d) { return x <= 0 ? 0.0 : -std::expm1(-d.rate * x); },
          [x](const Deterministic& d) { return x >= d.value ? 1.0 : 0.0; },
          [x](const Erlang& d) {
            return x <= 0 ? 0.0 : boost::math::gamma_p(static_cast<double>(d.shape), d.rate * x);
          },
          [x](const HyperExponential& d) {
            if (x <= 0) return 0.0;
            double p = 0.0;
            for (std::size_t i = 0; i < d.probs.size(); ++i) {
              p += d.probs[i] * -std::expm1(-d.rates[i] * x);
            }
            return std::min(p, 1.0);
          },
          [x](const Uniform& d) {
            if (x <= d.lo) return 0.0;
            if (x >= d.hi) return 1.0;
            return (x - d.lo) / (d.hi - d.lo);
          },
          [x](const LogNormal& d) {
            return x <= 0 ? 0.0 : normal_cdf((std::log(x) - d.mu) / d.sigma);
          },
          [x](const Empirical& d) {
            const auto& s = nonempty(d);
            const auto it = std::upper_bound(s.begin(), s.end(), x);
            return static_cast<double>(it - s.begin()) / static_cast<double>(s.size());
          },
      },
      kind_);
}

double DistributionSpec::quantile(double p) const {
  if (!(p > 0.0 && p < 1.0)) throw Error("quantile requires p in (0, 1)");
  return std::visit(
      Overloaded{
          [p](const Exponential& d) { return -std::log1p(-p) / d.rate; },
          [](const Deterministic& d) { return d.value; },
          [p](const Erlang& d) {
            return boost::math::gamma_p_inv(static_cast<double>(d.shape), p) / d.rate;
          },
          [p, this](const HyperExponential& d) {
            const double slowest = *std::min_element(d.rates.begin(), d.rates.end());
            double hi = -std::log1p(-p) / slowest;
            while (cdf(hi) < p) hi *= 2.0;
            return bisect_increasing([this](double x) { return cdf(x); }, p, 0.0, hi, 1e-15);
          },
          [p](const Uniform& d) { return d.lo + p * (d.hi - d.lo); },
          [p](const LogNormal& d) {
            const double z = -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
            return std::exp(d.mu + d.sigma * z);
          },
          [p](const Empirical& d) {
            const auto& s = nonempty(d);
            const auto n = static_cast<double>(s.size());
            auto idx = static_cast<std::size_t>(std::ceil(p * n));
            idx = std::clamp<std::size_t>(idx, 1, s.size());
            return s[idx - 1];
          },
      },
      kind_);
}

double DistributionSpec::density(double x) const {
  return std::visit(
      Overloaded{
          [x](const Exponential& d) { return x < 0 ? 0.0 : d.rate * std::exp(-d.rate * x); },
          [x](const Erlang& d) {
            if (x < 0) return 0.0;
            return boost::math::gamma_p_derivative(static_cast<double>(d.shape), d.rate * x) *
                   d.rate;
          },
          [x](const HyperExponential& d) {
            if (x < 0) return 0.0;
            double f = 0.0;
            for (std::size_t i = 0; i < d.probs.size(); ++i) {
              f += d.probs[i] * d.rates[i] * std::exp(-d.rates[i] * x);
            }
            return f;
          },
          [x](const Uniform& d) { return (x < d.lo || x > d.hi) ? 0.0 : 1.0 / (d.hi - d.lo); },
          [x](const LogNormal& d) {
            if (x <= 0) return 0.0;
            const double z = (std::log(x) - d.mu) / d.sigma;
            return std::exp(-0.5 * z * z) / (x * d.sigma * std::sqrt(2.0 * std::numbers::pi));
          },
          [](const Deterministic&) -> double {
            throw Error("deterministic law has no density");
          },
          [](const Empirical&) -> double { throw Error("empirical law has no density"); },
      },
      kind_);
}

std::optional<double> DistributionSpec::density_at_zero() const {
  return std::visit(
      Overloaded{
          [](const Exponential& d) -> std::optional<double> { return d.rate; },
          [](const Erlang& d) -> std::optional<double> {
            return d.shape == 1 ? d.rate : 0.0;
          },
          [](const HyperExponential& d) -> std::optional<double> {
            double f = 0.0;
            for (std::size_t i = 0; i < d.probs.size(); ++i) f += d.probs[i] * d.rates[i];
            return f;
          },
          [](const Uniform& d) -> std::optional<double> {
            return d.lo == 0.0 ? 1.0 / d.hi : 0.0;
          },
          [](const LogNormal&) -> std::optional<double> { return 0.0; },
          [](const Deterministic& d) -> std::optional<double> {
            if (d.value > 0.0) return 0.0;
            return std::nullopt;
          },
          [](const Empirical&) -> std::optional<double> { return std::nullopt; },
      },
      kind_);
}

double patience_density_at_zero(const DistributionSpec& spec) {
  if (auto analytic = spec.density_at_zero()) return *analytic;
  constexpr double eps = 1e-6;
  return spec.cdf(eps) / eps;
}

// ---------------------------------------------------------------------------
// HazardFunction
// ---------------------------------------------------------------------------

namespace {

void check_interpolation_table(const std::vector<double>& xs, const std::vector<double>& ys,
                               const char* what) {
  if (xs.size() < 2 || xs.size() != ys.size()) {
    throw Error(std::string(what) + " needs at least two matching points");
  }
  if (xs.front() != 0.0) throw Error(std::string(what) + " must start at 0");
  for (std::size_t i = 1; i < xs.size(); ++i) {
    if (!(xs[i] > xs[i - 1])) throw Error(std::string(what) + " must be strictly increasing");
  }
  for (double y : ys) {
    if (!(y >= 0.0) || !std::isfinite(y)) {
      throw Error(std::string(what) + " values must be finite and nonnegative");
    }
  }
}

double interpolate(const std::vector<double>& xs, const std::vector<double>& ys, double u) {
  if (u >= xs.back()) return ys.back();
  const auto it = std::upper_bound(xs.begin(), xs.end(), u);
  const std::size_t hi = static_cast<std::size_t>(it - xs.begin());
  const std::size_t lo = hi - 1;
  const double w = (u - xs[lo]) / (xs[hi] - xs[lo]);
  return ys[lo] + w * (ys[hi] - ys[lo]);
}

// Piecewise-linear H and G in closed form. Segment i spans [xs[i], xs[i+1]].
struct PiecewiseIntegrals {
  double cumulative;
  double integrated;
};

PiecewiseIntegrals piecewise_integrals(const std::vector<double>& xs,
                                       const std::vector<double>& ys, double x) {
  double H = 0.0;
  double G = 0.0;
  for (std::size_t i = 0; i + 1 < xs.size() && x > xs[i]; ++i) {
    const double width = xs[i + 1] - xs[i];
    const double slope = (ys[i + 1] - ys[i]) / width;
    const double s = std::min(x, xs[i + 1]) - xs[i];
    G += H * s + ys[i] * s * s / 2.0 + slope * s * s * s / 6.0;
    H += ys[i] * s + slope * s * s / 2.0;
  }
  if (x > xs.back()) {
    const double s = x - xs.back();
    G += H * s + ys.back() * s * s / 2.0;
    H += ys.back() * s;
  }
  return {H, G};
}

double check_range(const TabulatedHazard& t, double u) {
  if (u < 0.0 || u > t.grid.back() * (1.0 + 1e-14)) {
    throw Error("hazard evaluation out of range");
  }
  return std::min(u, t.grid.back());
}

}  // namespace

HazardFunction::HazardFunction(HazardForm form, std::optional<GrowthBound> growth)
    : form_(std::move(form)), growth_(growth) {
  std::visit(Overloaded{
                 [](const ConstantHazard& h) {
                   require(h.gamma >= 0 && std::isfinite(h.gamma),
                           "constant hazard must be finite and nonnegative");
                 },
                 [](const LinearHazard& h) {
                   require(h.slope >= 0 && std::isfinite(h.slope),
                           "linear hazard slope must be finite and nonnegative");
                 },
                 [](const PolynomialHazard& h) {
                   require(!h.coeffs.empty(), "polynomial hazard needs coefficients");
                 },
                 [](const PiecewiseLinearHazard& h) {
                   check_interpolation_table(h.knots, h.values, "piecewise-linear hazard");
                 },
                 [](const TabulatedHazard& h) {
                   check_interpolation_table(h.grid, h.values, "tabulated hazard");
                 },
             },
             form_);
  if (growth_) {
    require(growth_->K > 0 && growth_->l >= 0, "growth bound needs K > 0 and l >= 0");
  }
  if (std::holds_alternative<PolynomialHazard>(form_) && !nonnegative_on(100.0)) {
    throw Error("polynomial hazard takes negative values");
  }
}

HazardFunction HazardFunction::constant(double gamma) {
  return HazardFunction(ConstantHazard{gamma}, GrowthBound{std::max(gamma, 1e-300), 0.0});
}
HazardFunction HazardFunction::linear(double slope) {
  return HazardFunction(LinearHazard{slope}, GrowthBound{std::max(slope, 1e-300), 1.0});
}
HazardFunction HazardFunction::polynomial(std::vector<double> coeffs) {
  return HazardFunction(PolynomialHazard{std::move(coeffs)});
}

std::string HazardFunction::name() const {
  std::ostringstream out;
  std::visit(Overloaded{
                 [&](const ConstantHazard& h) { out << "constant(" << h.gamma << ")"; },
                 [&](const LinearHazard& h) { out << "linear(" << h.slope << ")"; },
                 [&](const PolynomialHazard& h) {
                   out << "polynomial(degree " << h.coeffs.size() - 1 << ")";
                 },
                 [&](const PiecewiseLinearHazard& h) {
                   out << "piecewise_linear(" << h.knots.size() << " knots)";
                 },
                 [&](const TabulatedHazard& h) {
                   out << "tabulated(" << h.grid.size() << " points)";
                 },
             },
             form_);
  return out.str();
}

double HazardFunction::evaluation_limit() const {
  if (const auto* t = std::get_if<TabulatedHazard>(&form_)) return t->grid.back();
  return kInf;
}

double HazardFunction::rate(double u) const {
  return std::visit(Overloaded{
                        [](const ConstantHazard& h) { return h.gamma; },
                        [u](const LinearHazard& h) { return h.slope * u; },
                        [u](const PolynomialHazard& h) {
                          double acc = 0.0;
                          for (auto it = h.coeffs.rbegin(); it != h.coeffs.rend(); ++it) {
                            acc = acc * u + *it;
                          }
                          return acc;
                        },
                        [u](const PiecewiseLinearHazard& h) {
                          return interpolate(h.knots, h.values, u);
                        },
                        [u](const TabulatedHazard& h) {
                          return interpolate(h.grid, h.values, check_range(h, u));
                        },
                    },
                    form_);
}

double HazardFunction::cumulative(double x) const {
  if (x <= 0.0) return 0.0;
  return std::visit(
      Overloaded{
          [x](const ConstantHazard& h) { return h.gamma * x; },
          [x](const LinearHazard& h) { return 0.5 * h.slope * x * x; },
          [x](const PolynomialHazard& h) {
            double acc = 0.0;
            for (std::size_t k = h.coeffs.size(); k-- > 0;) {
              acc = acc * x + h.coeffs[k] / static_cast<double>(k + 1);
            }
            return acc * x;
          },
          [x](const PiecewiseLinearHazard& h) {
            return piecewise_integrals(h.knots, h.values, x).cumulative;
          },
          [this, x](const TabulatedHazard& t) {
            const double end = check_range(t, x);
            // Cell-by-cell adaptive quadrature of the interpolant.
            double total = 0.0;
            const double tol = 1e-12 / static_cast<double>(t.grid.size());
            auto h = [this](double u) { return rate(u); };
            for (std::size_t i = 0; i + 1 < t.grid.size() && t.grid[i] < end; ++i) {
              total += quadrature::adaptive_simpson(h, t.grid[i], std::min(end, t.grid[i + 1]),
                                                    tol);
            }
            return total;
          },
      },
      form_);
}

double HazardFunction::integrated_cumulative(double x) const {
  if (x <= 0.0) return 0.0;
  return std::visit(
      Overloaded{
          [x](const ConstantHazard& h) { return 0.5 * h.gamma * x * x; },
          [x](const LinearHazard& h) { return h.slope * x * x * x / 6.0; },
          [x](const PolynomialHazard& h) {
            double acc = 0.0;
            for (std::size_t k = h.coeffs.size(); k-- > 0;) {
              acc = acc * x + h.coeffs[k] / static_cast<double>((k + 1) * (k + 2));
            }
            return acc * x * x;
          },
          [x](const PiecewiseLinearHazard& h) {
            return piecewise_integrals(h.knots, h.values, x).integrated;
          },
          [this, x](const TabulatedHazard& t) {
            const double end = check_range(t, x);
            return quadrature::integrate([this](double u) { return cumulative(u); }, 0.0, end,
                                         1e-12, t.grid.size());
          },
      },
      form_);
}

double HazardFunction::inverse_cumulative(double target) const {
  if (target <= 0.0) return 0.0;
  const char* failure = "patience inversion failed: insufficient hazard mass";
  if (const auto* c = std::get_if<ConstantHazard>(&form_)) {
    if (c->gamma <= 0.0) throw Error(failure);
    return target / c->gamma;
  }
  if (const auto* l = std::get_if<LinearHazard>(&form_)) {
    if (l->slope <= 0.0) throw Error(failure);
    return std::sqrt(2.0 * target / l->slope);
  }
  const double limit = evaluation_limit();
  constexpr double cap = 0x1.0p64;
  double hi = std::min(1.0, limit);
  while (cumulative(hi) < target) {
    if (hi >= limit || hi >= cap) throw Error(failure);
    hi = std::min({2.0 * hi, limit, cap});
  }
  return bisect_increasing([this](double y) { return cumulative(y); }, target, 0.0, hi, 1e-10);
}

bool HazardFunction::has_unbounded_cumulative() const {
  return std::visit(Overloaded{
                        [](const ConstantHazard& h) { return h.gamma > 0.0; },
                        [](const LinearHazard& h) { return h.slope > 0.0; },
                        [](const PolynomialHazard& h) {
                          for (std::size_t k = h.coeffs.size(); k-- > 0;) {
                            if (h.coeffs[k] != 0.0) return h.coeffs[k] > 0.0;
                          }
                          return false;
                        },
                        [](const PiecewiseLinearHazard& h) { return h.values.back() > 0.0; },
                        [](const TabulatedHazard&) { return false; },
                    },
                    form_);
}

bool HazardFunction::nonnegative_on(double u_max, int points) const {
  u_max = std::min(u_max, evaluation_limit());
  for (int i = 0; i < points; ++i) {
    const double u = u_max * i / std::max(points - 1, 1);
    if (!(rate(u) >= 0.0)) return false;
  }
  return true;
}

bool HazardFunction::satisfies_growth_bound(double u_max, int points) const {
  if (!growth_) return false;
  u_max = std::min(u_max, evaluation_limit());
  for (int i = 0; i < points; ++i) {
    const double u = u_max * i / std::max(points - 1, 1);
    const double bound = growth_->K * (1.0 + std::pow(u, growth_->l));
    if (rate(u) > bound * (1.0 + 1e-12)) return false;
  }
  return true;
}

double scaled_patience_sampler(const HazardFunction& h, int n, RandomStream& rng) {
  if (n < 1) throw Error("scaled patience requires n >= 1");
  const double root_n = std::sqrt(static_cast<double>(n));
  // H(sqrt(n) d) / sqrt(n) = E with E unit exponential.
  return h.inverse_cumulative(root_n * rng.exponential()) / root_n;
}

double scaled_patience_cdf(const HazardFunction& h, int n, double x) {
  if (x <= 0.0) return 0.0;
  const double root_n = std::sqrt(static_cast<double>(n));
  return -std::expm1(-h.cumulative(root_n * x) / root_n);
}

}  // namespace htq
