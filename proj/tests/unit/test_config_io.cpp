#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "htq/config.hpp"
#include "htq/error.hpp"
#include "htq/harness.hpp"
#include "htq/io.hpp"

using namespace htq;

namespace {

std::string error_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

constexpr const char* kMinimal = R"(
system:
  lambda: 1
  theta: 0.5
  arrival: {kind: exponential, rate: 1}
  service: {kind: erlang, shape: 2, rate: 2}
  patience:
    mode: unscaled
    distribution: {kind: exponential, rate: 1}
experiment:
  n_sequence: [16, 64]
  arrivals_per_n: 2000
  replications: 2
  seed: 7
  threads: 1
)";

ConvergenceReport small_report() {
  const ExperimentConfig cfg = parse_config(kMinimal);
  return run_experiment(*cfg.plan);
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("shipped configurations parse") {
    const std::string dir = HTQ_CONFIG_DIR;
    const ExperimentConfig mm1m = load_config(dir + "/mm1m.yaml");
    REQUIRE(mm1m.plan.has_value());
    CHECK(mm1m.plan->n_sequence == std::vector<int>{25, 100, 400});
    CHECK(mm1m.plan->replications == 8);
    CHECK(mm1m.plan->arrivals_per_n == 50'000);
    CHECK(mm1m.plan->seed_root == 20240601);
    CHECK(std::get<UnscaledPatience>(mm1m.plan->base.patience).f_prime_0 == doctest::Approx(1.0));

    const ExperimentConfig hz = load_config(dir + "/hazard_linear.yaml");
    const auto& patience = std::get<HazardScaledPatience>(hz.plan->base.patience);
    CHECK(patience.hazard.form() == HazardForm{LinearHazard{1.0}});
    CHECK(patience.hazard.growth_bound() == GrowthBound{1.0, 1.0});
    CHECK(hz.plan->base.service == DistributionSpec::erlang(2, 2.0));

    const ExperimentConfig rou = load_config(dir + "/rou_limit.yaml");
    CHECK_FALSE(rou.plan.has_value());
    REQUIRE(rou.limit.diffusion.has_value());
    CHECK(rou.limit.diffusion->sigma2 == 2.0);
    CHECK(std::get<LinearRou>(rou.limit.diffusion->drift).f_prime_0 == 1.0);

    const ExperimentConfig reg = load_config(dir + "/regulator.yaml");
    REQUIRE(reg.regulator.has_value());
    CHECK(reg.regulator->path.filename() == "sample_path.csv");
    CHECK(reg.regulator->path.is_absolute());
    REQUIRE(reg.regulator->drain.has_value());
    CHECK(reg.regulator->drain->x.size() == 5);
  }

  TEST_CASE("defaults fill an experiment without explicit settings") {
    const ExperimentConfig cfg = parse_config(R"(
system:
  lambda: 2
  theta: -1
  arrival: {kind: deterministic, value: 1}
  service: {kind: uniform, lo: 0, hi: 2}
)");
    REQUIRE(cfg.plan.has_value());
    CHECK(cfg.plan->base.lambda == 2.0);
    CHECK(std::holds_alternative<NoAbandonment>(cfg.plan->base.patience));
    CHECK(cfg.plan->n_sequence == ExperimentPlan{}.n_sequence);
    CHECK(std::isinf(cfg.plan->declared_q));
    CHECK_FALSE(cfg.simulate_n.has_value());
  }

  TEST_CASE("every distribution kind and hazard form") {
    CHECK(parse_distribution("{kind: hyperexponential, probs: [0.5, 0.5], rates: [0.6, 3]}") ==
          DistributionSpec::hyper_exponential({0.5, 0.5}, {0.6, 3.0}));
    CHECK(parse_distribution("{kind: lognormal, mu: -0.125, sigma: 0.5}") ==
          DistributionSpec::log_normal(-0.125, 0.5));
    CHECK(parse_distribution("{kind: empirical, samples: [0.5, 1.5]}") ==
          DistributionSpec::empirical({0.5, 1.5}));
    CHECK(parse_hazard("{form: constant, gamma: 2}") == HazardFunction::constant(2.0));
    CHECK(parse_hazard("{form: polynomial, coeffs: [1, 0, 3]}").form() ==
          HazardForm{PolynomialHazard{{1.0, 0.0, 3.0}}});
    CHECK(parse_hazard("{form: piecewise_linear, knots: [0, 1], values: [0, 2]}").form() ==
          HazardForm{PiecewiseLinearHazard{{0.0, 1.0}, {0.0, 2.0}}});
    CHECK(parse_hazard("{form: tabulated, grid: [0, 1, 2], values: [1, 1, 1], growth: {K: 1, l: 0}}") ==
          HazardFunction(TabulatedHazard{{0.0, 1.0, 2.0}, {1.0, 1.0, 1.0}}, GrowthBound{1.0, 0.0}));
  }

  TEST_CASE("errors name the offending key") {
    CHECK(error_of([] { (void)parse_config("system: {lambda: 1, theta: 0, arrival: {kind: exponential, rate: 1}, service: {kind: exponential, rate: 1}, colour: red}"); })
              .find("unknown key 'colour'") != std::string::npos);
    CHECK(error_of([] { (void)parse_config("sytem: {}"); }).find("top level: unknown key 'sytem'") != std::string::npos);
    CHECK(error_of([] { (void)parse_config("system: {lambda: one}"); }).find("config: system") != std::string::npos);
    CHECK(error_of([] { (void)parse_distribution("{kind: gamma, shape: 2}"); }).find("unknown distribution kind 'gamma'") != std::string::npos);
    CHECK(error_of([] { (void)parse_distribution("{kind: exponential, rate: -1}"); }).find("rate must be positive") != std::string::npos);
    CHECK(error_of([] { (void)parse_hazard("{form: cubic}"); }).find("unknown hazard form") != std::string::npos);
    CHECK(error_of([] { (void)parse_config("experiment: {replications: 2}"); }).find("requires a system section") != std::string::npos);
    CHECK(error_of([] { (void)parse_config("limit: [1, 2"); }).find("malformed YAML") != std::string::npos);
    CHECK(error_of([] { (void)parse_config("- 1\n- 2\n"); }).find("top level must be a mapping") != std::string::npos);
    CHECK(error_of([] { (void)load_config("/nonexistent/htq.yaml"); }).find("cannot open") != std::string::npos);
    CHECK(error_of([] { (void)parse_config("regulator: {hazard: {form: constant, gamma: 1}, interpolation: cubic}"); })
              .find("regulator.interpolation") != std::string::npos);
  }
}

TEST_SUITE("io") {
  TEST_CASE("shortest round-trip doubles") {
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(1.0) == "1");
    CHECK(format_double(-2.5e-300) == "-2.5e-300");
    CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
    CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
    CHECK(format_double(-std::numeric_limits<double>::infinity()) == "-inf");
    const double x = 0.7978845608028654;
    CHECK(std::stod(format_double(x)) == x);
  }

  TEST_CASE("report JSON round trip") {
    const ConvergenceReport report = small_report();
    const std::string json = to_json(report);
    const ConvergenceReport back = report_from_json(json);
    CHECK(back == report);
    CHECK(to_json(back) == json);
    CHECK_THROWS_WITH_AS(report_from_json("{\"per_n\": 3}"), doctest::Contains("malformed report JSON"), Error);
    CHECK_THROWS_WITH_AS(report_from_json("not json"), doctest::Contains("malformed report JSON"), Error);
  }

  TEST_CASE("CSV outputs are deterministic") {
    const ConvergenceReport a = small_report();
    const ConvergenceReport b = small_report();
    std::ostringstream ta;
    std::ostringstream tb;
    write_table_csv(ta, a);
    write_table_csv(tb, b);
    CHECK(ta.str() == tb.str());
    CHECK(ta.str().rfind("n,ks,quantity,order,estimate,ci,limit,error\n", 0) == 0);
    CHECK(ta.str().back() == '\n');
    CHECK(ta.str().find("abandonment_raw") != std::string::npos);
    CHECK(ta.str().find("queue") != std::string::npos);

    const DiffusionSpec spec = diffusion_limit(parse_config(kMinimal).plan->base);
    const StationaryLaw law = stationary_density(spec, 8.0, 1000);
    std::ostringstream la;
    std::ostringstream lb;
    write_law_csv(la, law);
    write_law_csv(lb, stationary_density(spec, 8.0, 1000));
    CHECK(la.str() == lb.str());
    CHECK(la.str().rfind("x,density\n", 0) == 0);
    std::size_t rows = 0;
    for (char c : la.str()) rows += c == '\n';
    CHECK(rows == law.grid.size() + 1);

    std::ostringstream s;
    write_samples_csv(s, std::vector<double>{0.0, 0.25, 1e-20});
    CHECK(s.str() == "scaled_wait\n0\n0.25\n1e-20\n");
  }

  TEST_CASE("law summary names the limit quantities") {
    const DiffusionSpec spec{0.0, 1.0, 2.0, LinearRou{1.0}};
    const std::string json = law_summary_json(spec, stationary_density(spec));
    for (const char* key : {"\"mean\"", "\"mean_closed_form\"", "\"moments\"", "\"abandonment_limit\"", "\"queue_limit\""}) {
      CHECK(json.find(key) != std::string::npos);
    }
    CHECK(json.find("0.79788456080286") != std::string::npos);
  }

  TEST_CASE("validation and replication JSON") {
    ExperimentPlan plan = *parse_config(kMinimal).plan;
    plan.base.theta = 6.0;
    const std::string v = to_json(validate_assumptions(plan));
    CHECK(v.find("\"passed\": false") != std::string::npos);
    CHECK(v.find("A2") != std::string::npos);
    const ExperimentPlan ok = *parse_config(kMinimal).plan;
    const std::string r = to_json(run_replications(ok, 16));
    CHECK(r.find("scaled_wait_samples") == std::string::npos);
    CHECK(r.find("\"seed\"") != std::string::npos);
  }
}
