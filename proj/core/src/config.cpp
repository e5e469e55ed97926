#include "htq/config.hpp"

#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "htq/error.hpp"

namespace htq {

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& message) {
  throw Error("config: " + where + ": " + message);
}

void allow_keys(const YAML::Node& node, const std::string& where,
                std::initializer_list<const char*> keys) {
  if (!node.IsMap()) fail(where, "expected a mapping");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& item : node) {
    const auto key = item.first.as<std::string>();
    if (!allowed.contains(key)) fail(where, "unknown key '" + key + "'");
  }
}

template <typename T>
T get(const YAML::Node& node, const std::string& key, const std::string& where) {
  const YAML::Node value = node[key];
  if (!value) fail(where, "missing key '" + key + "'");
  try {
    return value.as<T>();
  } catch (const YAML::Exception&) {
    fail(where + "." + key, "malformed value");
  }
}

template <typename T>
T get_or(const YAML::Node& node, const std::string& key, const std::string& where, T fallback) {
  if (!node[key]) return fallback;
  return get<T>(node, key, where);
}

DistributionSpec distribution_from(const YAML::Node& node, const std::string& where) {
  if (!node.IsMap()) fail(where, "expected a tagged record {kind: ...}");
  const auto kind = get<std::string>(node, "kind", where);
  try {
    if (kind == "exponential") {
      allow_keys(node, where, {"kind", "rate"});
      return DistributionSpec::exponential(get<double>(node, "rate", where));
    }
    if (kind == "deterministic") {
      allow_keys(node, where, {"kind", "value"});
      return DistributionSpec::deterministic(get<double>(node, "value", where));
    }
    if (kind == "erlang") {
      allow_keys(node, where, {"kind", "shape", "rate"});
      return DistributionSpec::erlang(get<int>(node, "shape", where), get<double>(node, "rate", where));
    }
    if (kind == "hyperexponential") {
      allow_keys(node, where, {"kind", "probs", "rates"});
      return DistributionSpec::hyper_exponential(get<std::vector<double>>(node, "probs", where),
                                                 get<std::vector<double>>(node, "rates", where));
    }
    if (kind == "uniform") {
      allow_keys(node, where, {"kind", "lo", "hi"});
      return DistributionSpec::uniform(get<double>(node, "lo", where), get<double>(node, "hi", where));
    }
    if (kind == "lognormal") {
      allow_keys(node, where, {"kind", "mu", "sigma"});
      return DistributionSpec::log_normal(get<double>(node, "mu", where),
                                          get<double>(node, "sigma", where));
    }
    if (kind == "empirical") {
      allow_keys(node, where, {"kind", "samples"});
      return DistributionSpec::empirical(get<std::vector<double>>(node, "samples", where));
    }
  } catch (const Error& e) {
    const std::string what = e.what();
    if (what.rfind("config:", 0) == 0) throw;
    fail(where, what);
  }
  fail(where, "unknown distribution kind '" + kind + "'");
}

HazardFunction hazard_from(const YAML::Node& node, const std::string& where) {
  if (!node.IsMap()) fail(where, "expected a tagged record {form: ...}");
  const auto form = get<std::string>(node, "form", where);
  std::optional<GrowthBound> growth;
  if (const YAML::Node g = node["growth"]) {
    allow_keys(g, where + ".growth", {"K", "l"});
    growth = GrowthBound{get<double>(g, "K", where + ".growth"), get<double>(g, "l", where + ".growth")};
  }
  try {
    if (form == "constant") {
      allow_keys(node, where, {"form", "gamma", "growth"});
      auto h = HazardFunction::constant(get<double>(node, "gamma", where));
      return growth ? HazardFunction(h.form(), growth) : h;
    }
    if (form == "linear") {
      allow_keys(node, where, {"form", "slope", "growth"});
      auto h = HazardFunction::linear(get<double>(node, "slope", where));
      return growth ? HazardFunction(h.form(), growth) : h;
    }
    if (form == "polynomial") {
      allow_keys(node, where, {"form", "coeffs", "growth"});
      return HazardFunction(PolynomialHazard{get<std::vector<double>>(node, "coeffs", where)}, growth);
    }
    if (form == "piecewise_linear") {
      allow_keys(node, where, {"form", "knots", "values", "growth"});
      return HazardFunction(PiecewiseLinearHazard{get<std::vector<double>>(node, "knots", where),
                                                  get<std::vector<double>>(node, "values", where)},
                            growth);
    }
    if (form == "tabulated") {
      allow_keys(node, where, {"form", "grid", "values", "growth"});
      return HazardFunction(TabulatedHazard{get<std::vector<double>>(node, "grid", where),
                                            get<std::vector<double>>(node, "values", where)},
                            growth);
    }
  } catch (const Error& e) {
    const std::string what = e.what();
    if (what.rfind("config:", 0) == 0) throw;
    fail(where, what);
  }
  fail(where, "unknown hazard form '" + form + "'");
}

PatienceMode patience_from(const YAML::Node& node, const std::string& where) {
  if (!node) return NoAbandonment{};
  const auto mode = get<std::string>(node, "mode", where);
  if (mode == "none") {
    allow_keys(node, where, {"mode"});
    return NoAbandonment{};
  }
  if (mode == "unscaled") {
    allow_keys(node, where, {"mode", "distribution"});
    return unscaled_patience(distribution_from(node["distribution"], where + ".distribution"));
  }
  if (mode == "hazard") {
    allow_keys(node, where, {"mode", "hazard"});
    return HazardScaledPatience{hazard_from(node["hazard"], where + ".hazard")};
  }
  fail(where, "unknown patience mode '" + mode + "' (expected none, unscaled or hazard)");
}

SystemConfig system_from(const YAML::Node& node) {
  const std::string where = "system";
  allow_keys(node, where, {"lambda", "theta", "x0", "arrival", "service", "patience"});
  SystemConfig cfg;
  cfg.lambda = get<double>(node, "lambda", where);
  cfg.theta = get<double>(node, "theta", where);
  cfg.x0 = get_or<double>(node, "x0", where, 0.0);
  if (!node["arrival"]) fail(where, "missing key 'arrival'");
  if (!node["service"]) fail(where, "missing key 'service'");
  cfg.arrival = distribution_from(node["arrival"], where + ".arrival");
  cfg.service = distribution_from(node["service"], where + ".service");
  cfg.patience = patience_from(node["patience"], where + ".patience");
  return cfg;
}

void experiment_from(const YAML::Node& node, ExperimentPlan& plan, std::optional<int>& simulate_n) {
  const std::string where = "experiment";
  if (!node) return;
  allow_keys(node, where,
             {"n_sequence", "arrivals_per_n", "burn_in_fraction", "replications", "moment_orders",
              "declared_q", "seed", "samples_per_unit_time", "threads", "density_points",
              "simulate_n"});
  plan.n_sequence = get_or(node, "n_sequence", where, plan.n_sequence);
  plan.arrivals_per_n = get_or(node, "arrivals_per_n", where, plan.arrivals_per_n);
  plan.burn_in_fraction = get_or(node, "burn_in_fraction", where, plan.burn_in_fraction);
  plan.replications = get_or(node, "replications", where, plan.replications);
  plan.moment_orders = get_or(node, "moment_orders", where, plan.moment_orders);
  plan.declared_q = get_or(node, "declared_q", where, plan.declared_q);
  plan.seed_root = get_or(node, "seed", where, plan.seed_root);
  plan.samples_per_unit_time = get_or(node, "samples_per_unit_time", where, plan.samples_per_unit_time);
  plan.threads = get_or(node, "threads", where, plan.threads);
  plan.density_points = get_or(node, "density_points", where, plan.density_points);
  if (node["simulate_n"]) simulate_n = get<int>(node, "simulate_n", where);
}

LimitSection limit_from(const YAML::Node& node) {
  LimitSection limit;
  const std::string where = "limit";
  if (!node) return limit;
  allow_keys(node, where, {"grid_cap", "points", "diffusion"});
  limit.grid_cap = get_or(node, "grid_cap", where, limit.grid_cap);
  limit.points = get_or(node, "points", where, limit.points);
  if (const YAML::Node d = node["diffusion"]) {
    const std::string at = where + ".diffusion";
    allow_keys(d, at, {"theta", "lambda", "sigma2", "drift"});
    DiffusionSpec spec;
    spec.theta = get<double>(d, "theta", at);
    spec.lambda = get<double>(d, "lambda", at);
    spec.sigma2 = get<double>(d, "sigma2", at);
    const YAML::Node drift = d["drift"];
    if (!drift) fail(at, "missing key 'drift'");
    const auto mode = get<std::string>(drift, "mode", at + ".drift");
    if (mode == "linear_rou") {
      allow_keys(drift, at + ".drift", {"mode", "f_prime_0"});
      spec.drift = LinearRou{get<double>(drift, "f_prime_0", at + ".drift")};
    } else if (mode == "nonlinear_hazard") {
      allow_keys(drift, at + ".drift", {"mode", "hazard"});
      spec.drift = NonlinearHazard{hazard_from(drift["hazard"], at + ".drift.hazard")};
    } else {
      fail(at + ".drift", "unknown drift mode '" + mode + "' (expected linear_rou or nonlinear_hazard)");
    }
    limit.diffusion = spec;
  }
  return limit;
}

RegulatorSection regulator_from(const YAML::Node& node, const std::filesystem::path& base_dir) {
  const std::string where = "regulator";
  allow_keys(node, where, {"path", "interpolation", "hazard", "dt", "drain"});
  RegulatorSection reg;
  reg.path = get_or<std::string>(node, "path", where, "");
  if (!reg.path.empty() && reg.path.is_relative()) reg.path = base_dir / reg.path;
  const auto interp = get_or<std::string>(node, "interpolation", where, "linear");
  if (interp == "linear") {
    reg.interpolation = Interpolation::Linear;
  } else if (interp == "step") {
    reg.interpolation = Interpolation::Step;
  } else {
    fail(where + ".interpolation", "expected linear or step");
  }
  if (!node["hazard"]) fail(where, "missing key 'hazard'");
  reg.hazard = hazard_from(node["hazard"], where + ".hazard");
  reg.dt = get_or(node, "dt", where, reg.dt);
  if (const YAML::Node d = node["drain"]) {
    allow_keys(d, where + ".drain", {"x", "b", "delta"});
    reg.drain = DrainSection{get<std::vector<double>>(d, "x", where + ".drain"),
                             get<double>(d, "b", where + ".drain"),
                             get<double>(d, "delta", where + ".drain")};
  }
  return reg;
}

YAML::Node parse_yaml(const std::string& text) {
  try {
    return YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw Error(std::string("config: malformed YAML: ") + e.what());
  }
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  const YAML::Node root = parse_yaml(text);
  if (!root.IsMap()) throw Error("config: top level must be a mapping");
  allow_keys(root, "top level", {"system", "experiment", "limit", "regulator"});
  ExperimentConfig config;
  if (const YAML::Node system = root["system"]) {
    ExperimentPlan plan;
    plan.base = system_from(system);
    experiment_from(root["experiment"], plan, config.simulate_n);
    config.plan = std::move(plan);
  } else if (root["experiment"]) {
    throw Error("config: experiment: requires a system section");
  }
  config.limit = limit_from(root["limit"]);
  if (const YAML::Node reg = root["regulator"]) config.regulator = regulator_from(reg, base_dir);
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error("config: cannot open '" + file.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), file.parent_path());
}

DistributionSpec parse_distribution(const std::string& text) {
  return distribution_from(parse_yaml(text), "distribution");
}

HazardFunction parse_hazard(const std::string& text) {
  return hazard_from(parse_yaml(text), "hazard");
}

}  // namespace htq
