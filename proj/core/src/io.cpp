#include "htq/io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <ostream>

#include "json.hpp"

#include "htq/error.hpp"

namespace htq {

using nlohmann::json;

namespace {

json estimate_json(const Estimate& e) { return {{"value", e.value}, {"ci", e.half_width}}; }

Estimate estimate_from(const json& j) {
  return {j.at("value").get<double>(), j.at("ci").get<double>()};
}

// Maps keyed by moment order serialize as [[order, value], ...].
template <typename T, typename F>
json ordered_pairs(const std::map<double, T>& map, F convert) {
  json out = json::array();
  for (const auto& [order, value] : map) out.push_back(json::array({order, convert(value)}));
  return out;
}

}  // namespace

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  std::array<char, 32> buffer{};
  const auto result = std::to_chars(buffer.data(), buffer.data() + buffer.size(), value);
  return std::string(buffer.data(), result.ptr);
}

std::string to_json(const ConvergenceReport& report) {
  json root;
  json per_n = json::array();
  for (const auto& d : report.per_n) {
    per_n.push_back({
        {"n", d.n},
        {"ks_to_limit", d.ks_to_limit},
        {"samples", d.samples},
        {"moment_estimates", ordered_pairs(d.moment_estimates, estimate_json)},
        {"moment_errors", ordered_pairs(d.moment_errors, [](double v) { return v; })},
        {"abandon_scaled", estimate_json(d.abandon_scaled)},
        {"abandon_scaled_raw", estimate_json(d.abandon_scaled_raw)},
        {"abandon_limit_error", d.abandon_limit_error},
        {"queue_scaled", estimate_json(d.queue_scaled)},
        {"queue_limit_error", d.queue_limit_error},
        {"decomposition_residual", d.decomposition_residual},
    });
  }
  root["per_n"] = std::move(per_n);
  root["limit"] = {
      {"moments", ordered_pairs(report.limit.moments, [](double v) { return v; })},
      {"abandonment_limit", report.limit.abandonment_limit},
      {"queue_limit", report.limit.queue_limit},
  };
  root["monotone_flags"] = report.monotone_flags;
  return root.dump(2) + "\n";
}

ConvergenceReport report_from_json(const std::string& text) {
  ConvergenceReport report;
  try {
    const json root = json::parse(text);
    for (const auto& j : root.at("per_n")) {
      PerNDiagnostics d;
      d.n = j.at("n").get<int>();
      d.ks_to_limit = j.at("ks_to_limit").get<double>();
      d.samples = j.at("samples").get<std::size_t>();
      for (const auto& p : j.at("moment_estimates")) {
        d.moment_estimates[p.at(0).get<double>()] = estimate_from(p.at(1));
      }
      for (const auto& p : j.at("moment_errors")) {
        d.moment_errors[p.at(0).get<double>()] = p.at(1).get<double>();
      }
      d.abandon_scaled = estimate_from(j.at("abandon_scaled"));
      d.abandon_scaled_raw = estimate_from(j.at("abandon_scaled_raw"));
      d.abandon_limit_error = j.at("abandon_limit_error").get<double>();
      d.queue_scaled = estimate_from(j.at("queue_scaled"));
      d.queue_limit_error = j.at("queue_limit_error").get<double>();
      d.decomposition_residual = j.at("decomposition_residual").get<double>();
      report.per_n.push_back(std::move(d));
    }
    const json& limit = root.at("limit");
    for (const auto& p : limit.at("moments")) {
      report.limit.moments[p.at(0).get<double>()] = p.at(1).get<double>();
    }
    report.limit.abandonment_limit = limit.at("abandonment_limit").get<double>();
    report.limit.queue_limit = limit.at("queue_limit").get<double>();
    report.monotone_flags = root.at("monotone_flags").get<std::map<std::string, bool>>();
  } catch (const json::exception& e) {
    throw Error(std::string("malformed report JSON: ") + e.what());
  }
  return report;
}

std::string to_json(const std::vector<SimResult>& replications) {
  json reps = json::array();
  for (const auto& r : replications) {
    reps.push_back({
        {"n", r.n},
        {"seed", r.seed},
        {"lane", r.lane},
        {"samples", r.scaled_wait_samples.size()},
        {"scaled_wait_moment", ordered_pairs(r.scaled_wait_moment, estimate_json)},
        {"abandon_prob", estimate_json(r.abandon_prob)},
        {"scaled_abandon_prob", estimate_json(r.scaled_abandon_prob)},
        {"scaled_abandon_conditional", estimate_json(r.scaled_abandon_conditional)},
        {"scaled_queue_mean", estimate_json(r.scaled_queue_mean)},
        {"decomposition_residual", r.decomposition_residual},
        {"decomposition_tolerance", r.decomposition_tolerance},
        {"arrivals", r.counts.arrivals},
        {"served", r.counts.served},
        {"abandoned", r.counts.abandoned},
        {"burn_in_discarded", r.counts.burn_in_discarded},
    });
  }
  return json{{"replications", std::move(reps)}}.dump(2) + "\n";
}

std::string to_json(const ValidationReport& report) {
  json checks = json::array();
  for (const auto& c : report.checks) {
    checks.push_back({{"assumption", c.assumption}, {"passed", c.passed}, {"message", c.message}});
  }
  return json{{"passed", report.passed}, {"checks", std::move(checks)}}.dump(2) + "\n";
}

std::string law_summary_json(const DiffusionSpec& spec, const StationaryLaw& law) {
  json root;
  root["theta"] = spec.theta;
  root["lambda"] = spec.lambda;
  root["sigma2"] = spec.sigma2;
  root["drift"] = std::holds_alternative<LinearRou>(spec.drift) ? "linear_rou" : "nonlinear_hazard";
  root["moments"] = ordered_pairs(law.moments, [](double v) { return v; });
  root["mean"] = law.moments.at(1.0);
  if (law.mean_closed_form) root["mean_closed_form"] = *law.mean_closed_form;
  root["abandonment_limit"] = abandonment_limit(spec, law);
  root["queue_limit"] = spec.lambda * law.moments.at(1.0);
  root["grid_cap"] = law.grid_cap;
  root["grid_points"] = law.grid.size();
  root["log_normalizer"] = law.log_normalizer;
  return root.dump(2) + "\n";
}

void write_law_csv(std::ostream& out, const StationaryLaw& law) {
  out << "x,density\n";
  for (std::size_t i = 0; i < law.grid.size(); ++i) {
    out << format_double(law.grid[i]) << ',' << format_double(law.density[i]) << '\n';
  }
}

void write_samples_csv(std::ostream& out, std::span<const double> samples) {
  out << "scaled_wait\n";
  for (double s : samples) out << format_double(s) << '\n';
}

void write_table_csv(std::ostream& out, const ConvergenceReport& report) {
  out << "n,ks,quantity,order,estimate,ci,limit,error\n";
  auto row = [&](const PerNDiagnostics& d, const char* quantity, const std::string& order,
                 const Estimate& e, double limit, double error) {
    out << d.n << ',' << format_double(d.ks_to_limit) << ',' << quantity << ',' << order << ','
        << format_double(e.value) << ',' << format_double(e.half_width) << ','
        << format_double(limit) << ',' << format_double(error) << '\n';
  };
  for (const auto& d : report.per_n) {
    for (const auto& [m, e] : d.moment_estimates) {
      row(d, "moment", format_double(m), e, report.limit.moments.at(m), d.moment_errors.at(m));
    }
    row(d, "abandonment", "", d.abandon_scaled, report.limit.abandonment_limit,
        d.abandon_limit_error);
    row(d, "abandonment_raw", "", d.abandon_scaled_raw, report.limit.abandonment_limit,
        std::abs(d.abandon_scaled_raw.value - report.limit.abandonment_limit));
    row(d, "queue", "", d.queue_scaled, report.limit.queue_limit, d.queue_limit_error);
  }
}

}  // namespace htq
