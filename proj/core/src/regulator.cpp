#include "htq/regulator.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <string>

#include "htq/error.hpp"
#include "htq/io.hpp"

namespace htq {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct EulerPath {
  std::vector<double> t, z, l;
};

std::vector<double> uniform_grid(double t_end, double dt) {
  const auto steps = static_cast<std::size_t>(std::max(1.0, std::ceil(t_end / dt - 1e-9)));
  std::vector<double> grid(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) {
    grid[k] = std::min(static_cast<double>(k) * dt, t_end);
  }
  grid.back() = t_end;
  return grid;
}

EulerPath euler(const PathRecord& y, const HazardFunction& h, double dt) {
  EulerPath p;
  p.t = uniform_grid(y.t_end(), dt);
  p.z.resize(p.t.size());
  p.l.resize(p.t.size());
  const bool step_input = y.interpolation() == Interpolation::Step;

  double y_prev = y.at(0.0);
  p.z[0] = std::max(y_prev, 0.0);
  p.l[0] = std::max(-y_prev, 0.0);
  for (std::size_t k = 0; k + 1 < p.t.size(); ++k) {
    const double y_next = y.at(p.t[k + 1]);
    const double increment = y_next - y_prev;
    const double width = p.t[k + 1] - p.t[k];
    const double z = p.z[k];
    double l = p.l[k];

    // Drift plus continuous increment, projected; then any jump, projected.
    const double free = z + (step_input ? 0.0 : increment) - h.cumulative(z) * width;
    double next = std::max(free, 0.0);
    l += std::max(-free, 0.0);
    if (step_input && increment != 0.0) {
      const double jumped = next + increment;
      next = std::max(jumped, 0.0);
      l += std::max(-jumped, 0.0);
    }
    p.z[k + 1] = next;
    p.l[k + 1] = l;
    y_prev = y_next;
  }
  return p;
}

void validate_input(const PathRecord& y, const HazardFunction& h, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw Error("regulator requires dt > 0");
  if (y.size() < 2) throw Error("regulator requires a path with at least two points");
  for (double v : y.values()) {
    if (!std::isfinite(v)) throw Error("regulator input has nonfinite values");
  }
  if (dt > y.min_gap() * (1.0 + 1e-12)) {
    throw Error("regulator requires dt <= minimum time gap of the input path");
  }
  (void)h;
}

PathRecord random_path(std::size_t knots, double t_end, Interpolation interpolation,
                       RandomStream& rng, double scale) {
  std::vector<double> times(knots + 1);
  std::vector<double> values(knots + 1);
  values[0] = std::abs(rng.normal()) * scale;
  for (std::size_t k = 0; k <= knots; ++k) {
    times[k] = t_end * static_cast<double>(k) / static_cast<double>(knots);
    if (k > 0) values[k] = values[k - 1] + scale * rng.normal();
  }
  return PathRecord(std::move(times), std::move(values), interpolation);
}

}  // namespace

std::optional<double> lipschitz_ratio(const PathRecord& y1, const PathRecord& y2,
                                      const HazardFunction& h, double dt) {
  validate_input(y1, h, dt);
  validate_input(y2, h, dt);
  if (y1.t_end() != y2.t_end()) throw Error("lipschitz_ratio requires paths on the same horizon");
  const EulerPath a = euler(y1, h, dt);
  const EulerPath b = euler(y2, h, dt);
  double input = 0.0;
  double output = 0.0;
  for (std::size_t k = 0; k < a.t.size(); ++k) {
    input = std::max(input, std::abs(y1.at(a.t[k]) - y2.at(a.t[k])));
    output = std::max(output, std::abs(a.z[k] - b.z[k]));
  }
  if (input <= 0.0) return std::nullopt;
  return output / input;
}

PathRecord::PathRecord(std::vector<double> times, std::vector<double> values,
                       Interpolation interpolation)
    : times_(std::move(times)), values_(std::move(values)), interpolation_(interpolation) {
  if (times_.empty() || times_.size() != values_.size()) {
    throw Error("path needs matching, nonempty times and values");
  }
  if (times_.front() != 0.0) throw Error("path times must start at 0");
  for (std::size_t i = 1; i < times_.size(); ++i) {
    if (!(times_[i] > times_[i - 1])) throw Error("path times must be strictly increasing");
  }
}

double PathRecord::at(double t) const {
  if (t <= times_.front()) return values_.front();
  if (t >= times_.back()) return values_.back();
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  const std::size_t hi = static_cast<std::size_t>(it - times_.begin());
  const std::size_t lo = hi - 1;
  if (interpolation_ == Interpolation::Step) return values_[lo];
  const double w = (t - times_[lo]) / (times_[hi] - times_[lo]);
  return values_[lo] + w * (values_[hi] - values_[lo]);
}

double PathRecord::min_gap() const {
  double gap = kInf;
  for (std::size_t i = 1; i < times_.size(); ++i) gap = std::min(gap, times_[i] - times_[i - 1]);
  return gap;
}

RegulatedPair apply_regulator(const PathRecord& y, const HazardFunction& h, double dt) {
  validate_input(y, h, dt);
  EulerPath coarse = euler(y, h, dt);
  const EulerPath fine = euler(y, h, 0.5 * dt);

  RegulatedPair out;
  // Richardson comparison on the common grid points.
  for (std::size_t k = 0; k < coarse.t.size(); ++k) {
    const std::size_t j = std::min(2 * k, fine.t.size() - 1);
    out.residual = std::max(out.residual, std::abs(coarse.z[k] - fine.z[j]));
  }

  double integral = 0.0;
  for (std::size_t k = 0; k < coarse.t.size(); ++k) {
    if (k > 0) {
      const double width = coarse.t[k] - coarse.t[k - 1];
      integral += 0.5 * width * (h.cumulative(coarse.z[k - 1]) + h.cumulative(coarse.z[k]));
      out.complementarity += coarse.z[k] * (coarse.l[k] - coarse.l[k - 1]);
    }
    const double relation = y.at(coarse.t[k]) - integral + coarse.l[k];
    out.relation_defect = std::max(out.relation_defect, std::abs(coarse.z[k] - relation));
  }

  std::vector<double> times = coarse.t;
  out.z = PathRecord(coarse.t, std::move(coarse.z), Interpolation::Linear);
  out.l = PathRecord(std::move(times), std::move(coarse.l), Interpolation::Linear);
  return out;
}

PathRecord deterministic_trajectory(double x, double b, const HazardFunction& h, double t_end,
                                    double dt) {
  if (!(t_end > 0.0)) throw Error("deterministic trajectory requires t_end > 0");
  if (!(x >= 0.0)) throw Error("deterministic trajectory requires x >= 0");
  const PathRecord ramp({0.0, t_end}, {x, x + b * t_end}, Interpolation::Linear);
  return apply_regulator(ramp, h, dt).z;
}

double estimate_lipschitz(const HazardFunction& h, std::size_t trials, double t_end, double dt,
                          RandomStream& rng) {
  if (trials < 1) throw Error("estimate_lipschitz requires at least one trial");
  constexpr std::size_t knots = 8;
  if (dt > t_end / knots) throw Error("estimate_lipschitz requires dt <= t_end / 8");
  double worst = 0.0;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    const Interpolation mode = trial % 2 == 0 ? Interpolation::Linear : Interpolation::Step;
    const PathRecord y1 = random_path(knots, t_end, mode, rng, 1.0);
    PathRecord y2;
    if (trial % 4 < 2) {
      y2 = random_path(knots, t_end, mode, rng, 1.0);
    } else {
      // Small perturbation of y1.
      const PathRecord bump = random_path(knots, t_end, mode, rng, 0.05);
      std::vector<double> values(y1.values().begin(), y1.values().end());
      for (std::size_t k = 0; k < values.size(); ++k) values[k] += bump.values()[k];
      y2 = PathRecord(std::vector<double>(y1.times().begin(), y1.times().end()),
                      std::move(values), mode);
    }
    if (auto ratio = lipschitz_ratio(y1, y2, h, dt)) worst = std::max(worst, *ratio);
  }
  return worst;
}

double first_hit_time(const PathRecord& path) {
  for (std::size_t k = 0; k < path.size(); ++k) {
    if (path.values()[k] <= kZeroThreshold) return path.times()[k];
  }
  return kInf;
}

DrainResult drain_check(std::span<const double> x_grid, double b, const HazardFunction& h,
                        double dt, double delta) {
  if (x_grid.empty()) throw Error("drain_check requires a nonempty x grid");
  if (!(delta > 0.0)) throw Error("cone condition violated: delta must be positive");
  double x_max = 0.0;
  for (double x : x_grid) {
    if (!(x > 0.0)) throw Error("drain_check requires positive x values");
    x_max = std::max(x_max, x);
  }
  constexpr int probes = 1001;
  for (int i = 0; i < probes; ++i) {
    const double z = x_max * i / (probes - 1);
    if (b - h.cumulative(z) > -delta) throw Error("cone condition violated");
  }

  DrainResult result;
  std::vector<double> ratios;
  for (double x : x_grid) {
    // Drift is at most -delta, so the path must reach zero by x / delta.
    const double horizon = 1.1 * x / delta + 10.0 * dt;
    const double hit = first_hit_time(deterministic_trajectory(x, b, h, horizon, dt));
    result.x.push_back(x);
    result.hit_times.push_back(hit);
    ratios.push_back(hit / x);
  }
  result.d_hat = *std::max_element(ratios.begin(), ratios.end());
  const bool finite = std::all_of(result.hit_times.begin(), result.hit_times.end(),
                                  [](double t) { return std::isfinite(t); });
  if (ratios.size() < 2) {
    result.pass = finite;
  } else {
    // Adding the largest x must not move the linear-drain constant by more
    // than 10%.
    std::vector<std::size_t> order(ratios.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t c) { return result.x[a] < result.x[c]; });
    double previous = 0.0;
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
      previous = std::max(previous, ratios[order[i]]);
    }
    result.pass = finite && std::abs(result.d_hat - previous) <= 0.1 * previous;
  }
  return result;
}

void write_path_csv(std::ostream& out, const PathRecord& path) {
  out << "time,value\n";
  for (std::size_t k = 0; k < path.size(); ++k) {
    out << format_double(path.times()[k]) << ',' << format_double(path.values()[k]) << '\n';
  }
}

PathRecord read_path_csv(std::istream& in, Interpolation interpolation) {
  std::vector<double> times;
  std::vector<double> values;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw Error("path CSV line " + std::to_string(line_no) + ": expected two columns");
    double t = 0.0;
    double v = 0.0;
    const auto first = std::from_chars(line.data(), line.data() + comma, t);
    const auto second = std::from_chars(line.data() + comma + 1, line.data() + line.size(), v);
    if (first.ec != std::errc{} || second.ec != std::errc{}) {
      if (times.empty() && line_no == 1) continue;  // header
      throw Error("path CSV line " + std::to_string(line_no) + ": not numeric");
    }
    times.push_back(t);
    values.push_back(v);
  }
  return PathRecord(std::move(times), std::move(values), interpolation);
}

}  // namespace htq
