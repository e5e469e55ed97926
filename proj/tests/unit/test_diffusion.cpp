#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "doctest.h"
#include "htq/diffusion.hpp"
#include "htq/error.hpp"
#include "oracles.hpp"

using namespace htq;

namespace {

DiffusionSpec rou(double theta, double sigma2, double f0, double lambda = 1.0) {
  return DiffusionSpec{theta, lambda, sigma2, LinearRou{f0}};
}

DiffusionSpec hazard(double theta, double sigma2, HazardFunction h, double lambda = 1.0) {
  return DiffusionSpec{theta, lambda, sigma2, NonlinearHazard{std::move(h)}};
}

// Truncated-normal mean of N(m, s^2) restricted to [0, inf), by quadrature.
double truncated_normal_mean(double m, double s) {
  auto kernel = [&](double x) { return std::exp(-0.5 * (x - m) * (x - m) / (s * s)); };
  return oracle::integrate_half_line([&](double x) { return x * kernel(x); }) /
         oracle::integrate_half_line(kernel);
}

// Pi(x) proportional to exp(-x^3 / 6): reference moments agreed at two tolerances.
struct CubicMoments {
  double m1;
  double m2;
};

CubicMoments cubic_reference() {
  auto log_kernel = [](double x) { return -x * x * x / 6.0; };
  const double m1_loose = oracle::kernel_moment(log_kernel, 1.0, 1e-8);
  const double m1_tight = oracle::kernel_moment(log_kernel, 1.0, 1e-10);
  const double m2_loose = oracle::kernel_moment(log_kernel, 2.0, 1e-8);
  const double m2_tight = oracle::kernel_moment(log_kernel, 2.0, 1e-10);
  REQUIRE(std::abs(m1_loose - m1_tight) <= 1e-7);
  REQUIRE(std::abs(m2_loose - m2_tight) <= 1e-7);
  return {m1_tight, m2_tight};
}

double trapezoid(const std::vector<double>& x, const std::vector<double>& y) {
  double s = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) s += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
  return s;
}

std::vector<double> occupation_samples(const PathRecord& path, double from) {
  std::vector<double> out;
  for (std::size_t k = 0; k < path.size(); ++k) {
    if (path.times()[k] >= from) out.push_back(path.values()[k]);
  }
  return out;
}

std::string error_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_SUITE("stationary law") {
  TEST_CASE("half-normal reflected OU") {
    const DiffusionSpec spec = rou(0.0, 2.0, 1.0);
    const StationaryLaw law = stationary_density(spec);
    CHECK(law.moments.at(1.0) == doctest::Approx(std::sqrt(2.0 / std::numbers::pi)).epsilon(1e-10));
    CHECK(law.moments.at(2.0) == doctest::Approx(1.0).epsilon(1e-10));
    REQUIRE(law.mean_closed_form.has_value());
    CHECK(*law.mean_closed_form == doctest::Approx(0.7978845608028654).epsilon(1e-14));
    for (std::size_t i = 0; i < law.grid.size(); i += 97) {
      const double x = law.grid[i];
      CHECK(law.density[i] == doctest::Approx(std::sqrt(2.0 / std::numbers::pi) * std::exp(-0.5 * x * x)).epsilon(1e-8).scale(1e-12));
    }
    CHECK(std::abs(law.cdf_at(1.0) - (2.0 * oracle::normal_cdf(1.0) - 1.0)) <= 2e-5);
    CHECK(law.quantile(0.5) == doctest::Approx(0.6744897501960817).epsilon(1e-5));
  }

  TEST_CASE("constant hazard coincides with the reflected OU") {
    for (double theta : {-1.0, 0.0, 1.5}) {
      for (double sigma2 : {0.5, 2.0}) {
        for (double gamma : {0.5, 1.0, 3.0}) {
          const DiffusionSpec a = rou(theta, sigma2, gamma);
          const DiffusionSpec b = hazard(theta, sigma2, HazardFunction::constant(gamma));
          const StationaryLaw la = stationary_density(a);
          const StationaryLaw lb = stationary_density(b);
          double sup = 0.0;
          for (double x = 0.0; x <= 10.0; x += 0.01) {
            sup = std::max(sup, std::abs(la.density_at(a, x) - lb.density_at(b, x)));
          }
          CAPTURE(theta);
          CAPTURE(sigma2);
          CAPTURE(gamma);
          CHECK(sup <= 1e-10);
          CHECK(std::abs(abandonment_limit(a, la) - abandonment_limit(b, lb)) <= 1e-9);
        }
      }
    }
  }

  TEST_CASE("linear hazard against the cubic-exponential oracle") {
    const CubicMoments ref = cubic_reference();
    // E[X^k] = 6^(k/3) Gamma((k+1)/3) / Gamma(1/3).
    CHECK(ref.m1 == doctest::Approx(std::cbrt(6.0) * std::tgamma(2.0 / 3.0) / std::tgamma(1.0 / 3.0)).epsilon(1e-10));
    CHECK(ref.m2 == doctest::Approx(std::cbrt(36.0) / std::tgamma(1.0 / 3.0)).epsilon(1e-10));
    const DiffusionSpec spec = hazard(0.0, 2.0, HazardFunction::linear(1.0));
    const StationaryLaw law = stationary_density(spec);
    CHECK(law.moments.at(1.0) == doctest::Approx(ref.m1).epsilon(1e-9));
    CHECK(law.moments.at(2.0) == doctest::Approx(ref.m2).epsilon(1e-9));
    CHECK(abandonment_limit(spec, law) == doctest::Approx(0.5 * ref.m2).epsilon(1e-9));
    CHECK_FALSE(law.mean_closed_form.has_value());
  }

  TEST_CASE("normalization and shape") {
    const std::vector<DiffusionSpec> specs{
        rou(0.0, 2.0, 1.0), rou(-5.0, 2.0, 1.0), rou(3.0, 0.3, 0.2),
        hazard(1.0, 1.5, HazardFunction::linear(1.0)),
        hazard(-0.5, 2.0, HazardFunction::polynomial({0.1, 0.0, 2.0})),
        hazard(0.5, 1.0, HazardFunction(PiecewiseLinearHazard{{0.0, 1.0, 2.0}, {0.0, 0.5, 3.0}}))};
    for (const auto& spec : specs) {
      const StationaryLaw law = stationary_density(spec);
      CHECK(trapezoid(law.grid, law.density) == doctest::Approx(1.0).epsilon(1e-8));
      CHECK(law.cdf.back() == 1.0);
      CHECK(law.density.back() < 1e-12 * *std::max_element(law.density.begin(), law.density.end()));
      for (std::size_t i = 0; i + 1 < law.grid.size(); ++i) {
        CHECK(law.density[i] > 0.0);
        CHECK(law.grid[i + 1] > law.grid[i]);
      }
    }
  }

  TEST_CASE("extra moment orders") {
    const std::vector<double> orders{3.0, 0.5};
    const StationaryLaw law = stationary_density(rou(0.0, 2.0, 1.0), 8.0, 4096, orders);
    // Half-normal: E[X^3] = 2 sqrt(2 / pi), E[X^0.5] = 2^(1/4) Gamma(3/4) / sqrt(pi).
    CHECK(law.moments.at(3.0) == doctest::Approx(2.0 * std::sqrt(2.0 / std::numbers::pi)).epsilon(1e-9));
    CHECK(law.moments.at(0.5) ==
          doctest::Approx(std::pow(2.0, 0.25) * std::tgamma(0.75) / std::sqrt(std::numbers::pi)).epsilon(1e-9));
  }

  TEST_CASE("small grid cap is extended") {
    const StationaryLaw law = stationary_density(rou(4.0, 2.0, 0.5), 0.5, 1000);
    CHECK(law.grid.back() > 10.0);
    CHECK(law.moments.at(1.0) == doctest::Approx(mean_rou(rou(4.0, 2.0, 0.5))).epsilon(1e-8));
  }
}

TEST_SUITE("closed-form mean") {
  TEST_CASE("grid of parameters matches quadrature") {
    for (double theta : {-2.0, 0.0, 1.5}) {
      for (double sigma2 : {0.5, 1.0, 3.0}) {
        for (double f0 : {0.25, 1.0, 4.0}) {
          const DiffusionSpec spec = rou(theta, sigma2, f0);
          const double closed = mean_rou(spec);
          const StationaryLaw law = stationary_density(spec);
          CAPTURE(theta);
          CAPTURE(sigma2);
          CAPTURE(f0);
          CHECK(std::abs(closed - law.moments.at(1.0)) <= 1e-8);
          const double m = theta / f0;
          const double s = std::sqrt(sigma2 / (2.0 * f0));
          CHECK(std::abs(closed - truncated_normal_mean(m, s)) <= 1e-8);
        }
      }
    }
  }

  TEST_CASE("examples") {
    CHECK(mean_rou(rou(0.0, 2.0, 1.0)) == doctest::Approx(std::sqrt(2.0 / std::numbers::pi)).epsilon(1e-14));
    const double deep = mean_rou(rou(-5.0, 2.0, 1.0));
    // The truncated-normal tail mean decays like sigma^2 / (2 F'(0) |theta|),
    // so theta = -5 leaves a mean near 0.19; 0.01 needs theta near -100.
    CHECK(deep > 0.0);
    CHECK(deep < 0.2);
    CHECK(mean_rou(rou(-101.0, 2.0, 1.0)) < 0.01);
    CHECK(std::abs(deep - truncated_normal_mean(-5.0, 1.0)) <= 1e-10);
    const double one = mean_rou(rou(1.0, 2.0, 1.0));
    CHECK(one == doctest::Approx(1.0 + standard_normal_hazard(-1.0)).epsilon(1e-14));
    CHECK(std::abs(one - truncated_normal_mean(1.0, 1.0)) <= 1e-8);
    CHECK(std::abs(one - stationary_density(rou(1.0, 2.0, 1.0)).moments.at(1.0)) <= 1e-8);
  }

  TEST_CASE("lambda enters through theta / lambda") {
    const DiffusionSpec spec = rou(1.0, 2.0, 1.0, 2.0);
    CHECK(mean_rou(spec) == doctest::Approx(truncated_normal_mean(0.5, 1.0)).epsilon(1e-9));
  }

  TEST_CASE("normal hazard helpers") {
    CHECK(standard_normal_hazard(0.0) == doctest::Approx(std::sqrt(2.0 / std::numbers::pi)).epsilon(1e-15));
    for (double z : {-30.0, -3.0, 0.5, 3.0, 30.0}) {
      const double phi = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
      const double tail = 1.0 - oracle::normal_cdf(z);
      if (tail > 1e-200 && z < 8.0) CHECK(standard_normal_hazard(z) == doctest::Approx(phi / tail).epsilon(1e-10));
    }
    // Mills ratio asymptote for large z.
    CHECK(standard_normal_hazard(30.0) == doctest::Approx(30.0 + 1.0 / 30.0).epsilon(1e-5));
    CHECK(std::isfinite(standard_normal_hazard(1e3)));
    CHECK(scaled_erfc(0.0) == 1.0);
    CHECK(scaled_erfc(1.0) == doctest::Approx(std::exp(1.0) * std::erfc(1.0)).epsilon(1e-14));
    CHECK(scaled_erfc(50.0) == doctest::Approx(1.0 / (50.0 * std::sqrt(std::numbers::pi))).epsilon(1e-3));
  }

  TEST_CASE("mode mismatch") {
    CHECK_THROWS_AS(mean_rou(hazard(0.0, 2.0, HazardFunction::linear(1.0))), Error);
  }
}

TEST_SUITE("abandonment limit") {
  TEST_CASE("linear mode scales the mean") {
    const DiffusionSpec spec = rou(0.0, 2.0, 1.0);
    CHECK(abandonment_limit(spec, stationary_density(spec)) ==
          doctest::Approx(std::sqrt(2.0 / std::numbers::pi)).epsilon(1e-10));
    const DiffusionSpec scaled = rou(0.5, 1.0, 2.5);
    CHECK(abandonment_limit(scaled, stationary_density(scaled)) ==
          doctest::Approx(2.5 * mean_rou(scaled)).epsilon(1e-10));
  }

  TEST_CASE("taylor consistency") {
    const DiffusionSpec base = rou(0.5, 2.0, 1.0);
    const double target = mean_rou(base);
    std::vector<double> errors;
    for (double eps : {0.1, 0.01, 0.001}) {
      const DiffusionSpec spec = hazard(0.5, 2.0, HazardFunction::polynomial({1.0, eps}));
      errors.push_back(std::abs(stationary_density(spec).moments.at(1.0) - target));
    }
    CHECK(errors[0] > errors[1]);
    CHECK(errors[1] > errors[2]);
    CHECK(errors[1] < 0.02);
  }
}

TEST_SUITE("validation") {
  TEST_CASE("errors name the failing requirement") {
    CHECK(error_of([] { validate(rou(0.0, 2.0, 0.0)); }).find("patience required") != std::string::npos);
    CHECK(error_of([] { validate(rou(0.0, 0.0, 1.0)); }).find("sigma2") != std::string::npos);
    CHECK(error_of([] { validate(rou(0.0, 1.0, 1.0, 0.0)); }).find("lambda") != std::string::npos);
    const auto bounded = HazardFunction(PiecewiseLinearHazard{{0.0, 1.0}, {1.0, 0.0}});
    CHECK(error_of([&] { validate(hazard(0.0, 1.0, bounded)); }).find("not normalizable") != std::string::npos);
    CHECK(error_of([] { (void)stationary_density(rou(0.0, 2.0, 1.0), 0.0); }).find("grid_cap") != std::string::npos);
  }
}

TEST_SUITE("reflected SDE") {
  TEST_CASE("noiseless path follows the ramp") {
    // The mirror scheme rattles within |drift| dt of the boundary, so it runs
    // at a finer step than the projected one.
    const DiffusionSpec spec = hazard(-1.0, 1e-8, HazardFunction::constant(0.0));
    for (auto [scheme, dt] : {std::pair{BoundaryScheme::Projected, 1e-3}, std::pair{BoundaryScheme::Mirror, 1e-4}}) {
      RandomStream rng(1, 0, StreamId::Diffusion);
      SdeOptions options;
      options.scheme = scheme;
      const PathRecord path = simulate_reflected_sde(spec, 1.0, 3.0, dt, rng, options);
      for (std::size_t k = 0; k < path.size(); ++k) {
        CHECK(std::abs(path.values()[k] - std::max(1.0 - path.times()[k], 0.0)) <= 1e-3);
      }
    }
  }

  TEST_CASE("long-run mean of the reflected OU") {
    RandomStream rng(2024, 0, StreamId::Diffusion);
    const DiffusionSpec spec = rou(0.0, 2.0, 1.0);
    SdeOptions options;
    options.record_stride = 10;
    const PathRecord path = simulate_reflected_sde(spec, 0.0, 1e4, 1e-3, rng, options);
    const auto samples = occupation_samples(path, 100.0);
    CHECK(std::abs(oracle::mean(samples) - std::sqrt(2.0 / std::numbers::pi)) <= 0.02);
    const StationaryLaw law = stationary_density(spec);
    CHECK(oracle::ks_statistic(samples, [&](double x) { return law.cdf_at(x); }) <= 0.02);
  }

  TEST_CASE("occupation measure under the linear hazard") {
    RandomStream rng(2025, 0, StreamId::Diffusion);
    const DiffusionSpec spec = hazard(0.0, 2.0, HazardFunction::linear(1.0));
    SdeOptions options;
    options.record_stride = 10;
    const PathRecord path = simulate_reflected_sde(spec, 0.0, 1e4, 1e-3, rng, options);
    const StationaryLaw law = stationary_density(spec);
    const auto samples = occupation_samples(path, 100.0);
    CHECK(oracle::ks_statistic(samples, [&](double x) { return law.cdf_at(x); }) <= 0.02);
  }

  TEST_CASE("projection scheme is biased low near the boundary") {
    const DiffusionSpec spec = rou(0.0, 2.0, 1.0);
    SdeOptions mirror;
    mirror.record_stride = 10;
    SdeOptions projected = mirror;
    projected.scheme = BoundaryScheme::Projected;
    RandomStream a(7, 0, StreamId::Diffusion);
    RandomStream b(7, 0, StreamId::Diffusion);
    const double dt = 1e-2;
    const double m_mirror = oracle::mean(occupation_samples(simulate_reflected_sde(spec, 0.0, 2e4, dt, a, mirror), 100.0));
    const double m_proj = oracle::mean(occupation_samples(simulate_reflected_sde(spec, 0.0, 2e4, dt, b, projected), 100.0));
    CHECK(m_proj < m_mirror);
    CHECK(std::abs(m_mirror - std::sqrt(2.0 / std::numbers::pi)) < std::abs(m_proj - std::sqrt(2.0 / std::numbers::pi)));
  }

  TEST_CASE("paths are nonnegative and reproducible") {
    const DiffusionSpec spec = hazard(1.0, 1.0, HazardFunction::linear(2.0));
    RandomStream a(3, 1, StreamId::Diffusion);
    RandomStream b(3, 1, StreamId::Diffusion);
    const PathRecord p = simulate_reflected_sde(spec, 0.5, 50.0, 1e-3, a);
    CHECK(p == simulate_reflected_sde(spec, 0.5, 50.0, 1e-3, b));
    CHECK(p.values().front() == 0.5);
    for (double v : p.values()) CHECK(v >= 0.0);
  }

  TEST_CASE("argument checks") {
    RandomStream rng(1, 0, StreamId::Diffusion);
    const DiffusionSpec spec = rou(0.0, 2.0, 1.0);
    CHECK_THROWS_AS(simulate_reflected_sde(spec, 0.0, 1.0, 0.1, rng), Error);
    CHECK_THROWS_AS(simulate_reflected_sde(spec, 0.0, 1.0, 0.0, rng), Error);
    CHECK_THROWS_AS(simulate_reflected_sde(spec, -1.0, 1.0, 1e-3, rng), Error);
    CHECK_THROWS_AS(simulate_reflected_sde(spec, 0.0, 1e-3, 1e-3, rng), Error);
  }
}
