// htq: command-line driver for the heavy-traffic abandonment queue toolkit.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "htq/config.hpp"
#include "htq/diffusion.hpp"
#include "htq/error.hpp"
#include "htq/harness.hpp"
#include "htq/io.hpp"
#include "htq/regulator.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitRuntime = 2;

struct Options {
  std::string config;
  /// Empty means "htq-out" (validate writes nothing unless given).
  std::string out;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
  bool verbose = false;
};

// Configuration and validation problems exit 1; everything else exits 2.
struct InvalidInput : htq::Error {
  using htq::Error::Error;
};
// Unreadable or malformed configuration; reported with usage text.
struct ConfigError : InvalidInput {
  using InvalidInput::InvalidInput;
};

class Log {
 public:
  explicit Log(const Options& o) : quiet_(o.quiet), verbose_(o.verbose) {}
  std::ostream& out() { return quiet_ ? null_ : std::cout; }
  std::ostream& debug() { return verbose_ && !quiet_ ? std::cerr : null_; }

 private:
  bool quiet_;
  bool verbose_;
  std::ostringstream null_;
};

htq::ExperimentConfig load(const Options& o) {
  htq::ExperimentConfig config;
  try {
    config = htq::load_config(o.config);
  } catch (const htq::Error& e) {
    throw ConfigError(e.what());
  }
  if (o.seed && config.plan) config.plan->seed_root = *o.seed;
  return config;
}

const htq::ExperimentPlan& require_plan(const htq::ExperimentConfig& config, const char* command) {
  if (!config.plan) throw InvalidInput(std::string(command) + ": config has no system section");
  return *config.plan;
}

void require_valid(const htq::ExperimentPlan& plan, Log& log) {
  const htq::ValidationReport report = htq::validate_assumptions(plan);
  for (const auto& c : report.checks) {
    log.debug() << c.assumption << ": " << (c.passed ? "pass" : "FAIL") << " (" << c.message << ")\n";
  }
  if (!report.passed) throw InvalidInput("validation failed: " + report.first_failure());
}

fs::path prepare_out(const Options& o) {
  const fs::path dir(o.out.empty() ? "htq-out" : o.out);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw htq::Error("cannot write '" + path.string() + "'");
  out << text;
}

template <typename Writer>
void write_csv(const fs::path& path, Writer writer) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw htq::Error("cannot write '" + path.string() + "'");
  writer(out);
}

int cmd_validate(const Options& o) {
  Log log(o);
  const auto config = load(o);
  const auto& plan = require_plan(config, "validate");
  const htq::ValidationReport report = htq::validate_assumptions(plan);
  for (const auto& c : report.checks) {
    if (!c.passed || o.verbose) {
      log.out() << c.assumption << ": " << (c.passed ? "pass" : "FAIL") << " (" << c.message << ")\n";
    }
  }
  if (!o.out.empty()) write_file(prepare_out(o) / "validation.json", htq::to_json(report));
  if (!report.passed) {
    std::cerr << "htq validate: " << report.first_failure() << '\n';
    return kExitInvalid;
  }
  log.out() << "A1-A5: pass\n";
  return kExitOk;
}

int cmd_simulate(const Options& o) {
  Log log(o);
  const auto config = load(o);
  const auto& plan = require_plan(config, "simulate");
  require_valid(plan, log);
  const int n = config.simulate_n.value_or(plan.n_sequence.back());
  const auto start = std::chrono::steady_clock::now();
  const auto reps = htq::run_replications(plan, n);
  log.debug() << "n=" << n << ": " << reps.size() << " replications in "
              << std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()
              << " s\n";

  const fs::path dir = prepare_out(o);
  write_file(dir / "results.json", htq::to_json(reps));
  std::vector<double> pooled;
  for (const auto& r : reps) pooled.insert(pooled.end(), r.scaled_wait_samples.begin(), r.scaled_wait_samples.end());
  write_csv(dir / ("samples_n" + std::to_string(n) + ".csv"),
            [&](std::ostream& out) { htq::write_samples_csv(out, pooled); });
  for (const auto& r : reps) {
    log.out() << "n=" << n << " lane=" << r.lane
              << " E[sqrt(n) W]=" << htq::format_double(r.scaled_wait_moment.at(1.0).value)
              << " sqrt(n) P_a=" << htq::format_double(r.scaled_abandon_prob.value) << '\n';
  }
  return kExitOk;
}

int cmd_limit(const Options& o) {
  Log log(o);
  const auto config = load(o);
  htq::DiffusionSpec spec;
  std::vector<double> orders{1.0, 2.0};
  if (config.limit.diffusion) {
    spec = *config.limit.diffusion;
  } else {
    const auto& plan = require_plan(config, "limit");
    orders = plan.moment_orders;
    try {
      spec = htq::diffusion_limit(plan.base);
    } catch (const htq::Error& e) {
      throw InvalidInput(e.what());
    }
  }
  try {
    htq::validate(spec);
  } catch (const htq::Error& e) {
    throw InvalidInput(e.what());
  }
  const htq::StationaryLaw law =
      htq::stationary_density(spec, config.limit.grid_cap, config.limit.points, orders);
  const std::string summary = htq::law_summary_json(spec, law);
  const fs::path dir = prepare_out(o);
  write_file(dir / "law.json", summary);
  write_csv(dir / "law.csv", [&](std::ostream& out) { htq::write_law_csv(out, law); });
  log.out() << summary;
  return kExitOk;
}

int cmd_compare(const Options& o) {
  Log log(o);
  const auto config = load(o);
  const auto& plan = require_plan(config, "compare");
  require_valid(plan, log);
  htq::ExperimentArtifacts artifacts;
  const auto start = std::chrono::steady_clock::now();
  const htq::ConvergenceReport report = htq::run_experiment(plan, &artifacts);
  log.debug() << "experiment finished in "
              << std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()
              << " s\n";

  const fs::path dir = prepare_out(o);
  write_file(dir / "report.json", htq::to_json(report));
  write_csv(dir / "law.csv", [&](std::ostream& out) { htq::write_law_csv(out, artifacts.law); });
  write_csv(dir / "table.csv", [&](std::ostream& out) { htq::write_table_csv(out, report); });
  for (const auto& [n, samples] : artifacts.pooled_samples) {
    write_csv(dir / ("samples_n" + std::to_string(n) + ".csv"),
              [&](std::ostream& out) { htq::write_samples_csv(out, samples); });
  }
  for (const auto& d : report.per_n) {
    log.out() << "n=" << d.n << " ks=" << htq::format_double(d.ks_to_limit);
    for (const auto& [m, err] : d.moment_errors) {
      log.out() << " moment_err[" << htq::format_double(m) << "]=" << htq::format_double(err);
    }
    log.out() << " abandon_err=" << htq::format_double(d.abandon_limit_error)
              << " queue_err=" << htq::format_double(d.queue_limit_error) << '\n';
  }
  return kExitOk;
}

int cmd_regulator(const Options& o) {
  Log log(o);
  const auto config = load(o);
  if (!config.regulator) throw InvalidInput("regulator: config has no regulator section");
  const htq::RegulatorSection& reg = *config.regulator;
  const fs::path dir = prepare_out(o);
  std::ostringstream json;
  json << "{\n";
  if (!reg.path.empty()) {
    std::ifstream in(reg.path);
    if (!in) throw InvalidInput("regulator: cannot open path file '" + reg.path.string() + "'");
    const htq::PathRecord y = htq::read_path_csv(in, reg.interpolation);
    const htq::RegulatedPair pair = htq::apply_regulator(y, reg.hazard, reg.dt);
    write_csv(dir / "regulated.csv", [&](std::ostream& out) {
      out << "time,z,l\n";
      for (std::size_t k = 0; k < pair.z.size(); ++k) {
        out << htq::format_double(pair.z.times()[k]) << ',' << htq::format_double(pair.z.values()[k])
            << ',' << htq::format_double(pair.l.values()[k]) << '\n';
      }
    });
    json << "  \"residual\": " << htq::format_double(pair.residual) << ",\n"
         << "  \"relation_defect\": " << htq::format_double(pair.relation_defect) << ",\n"
         << "  \"complementarity\": " << htq::format_double(pair.complementarity) << ",\n"
         << "  \"pushing_total\": " << htq::format_double(pair.l.values().back())
         << (reg.drain ? ",\n" : "\n");
  }
  if (reg.drain) {
    const htq::DrainResult drain =
        htq::drain_check(reg.drain->x, reg.drain->b, reg.hazard, reg.dt, reg.drain->delta);
    json << "  \"drain\": {\"d_hat\": " << htq::format_double(drain.d_hat)
         << ", \"pass\": " << (drain.pass ? "true" : "false") << ", \"hit_times\": [";
    for (std::size_t i = 0; i < drain.hit_times.size(); ++i) {
      json << (i ? ", " : "") << "[" << htq::format_double(drain.x[i]) << ", "
           << htq::format_double(drain.hit_times[i]) << "]";
    }
    json << "]}\n";
  }
  json << "}\n";
  write_file(dir / "regulator.json", json.str());
  log.out() << json.str();
  return kExitOk;
}

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("-c,--config", o.config, "Experiment configuration (YAML)")->required()->check(CLI::ExistingFile);
  sub->add_option("-o,--out", o.out, "Output directory");
  sub->add_option("--seed", o.seed, "Override the experiment seed");
  auto* quiet = sub->add_flag("-q,--quiet", o.quiet, "Suppress result summaries");
  sub->add_flag("-v,--verbose", o.verbose, "Print per-assumption and timing detail")->excludes(quiet);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heavy-traffic GI/GI/1+GI queue: simulation, diffusion limits and convergence checks"};
  app.require_subcommand(1, 1);
  app.footer("Environment: HTQ_THREADS sets the default replication thread count.\n"
             "Exit status: 0 success, 1 invalid input or failed validation, 2 runtime error.");
  Options options;
  struct Entry {
    const char* name;
    const char* help;
    int (*run)(const Options&);
  };
  const Entry entries[] = {
      {"validate", "Check the modelling assumptions for every n", cmd_validate},
      {"simulate", "Run the replications of one system in the sequence", cmd_simulate},
      {"limit", "Stationary law, moments and abandonment limit of the diffusion", cmd_limit},
      {"compare", "Full convergence experiment against the diffusion limit", cmd_compare},
      {"regulator", "Apply the nonlinear regulator to a path file and run drain checks", cmd_regulator},
  };
  std::vector<std::pair<CLI::App*, const Entry*>> subs;
  for (const auto& e : entries) {
    CLI::App* sub = app.add_subcommand(e.name, e.help);
    add_common(sub, options);
    subs.emplace_back(sub, &e);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return kExitInvalid;
  }

  for (const auto& [sub, entry] : subs) {
    if (!sub->parsed()) continue;
    try {
      return entry->run(options);
    } catch (const ConfigError& e) {
      std::cerr << "htq " << entry->name << ": " << e.what() << "\n\n" << sub->help();
      return kExitInvalid;
    } catch (const InvalidInput& e) {
      std::cerr << "htq " << entry->name << ": " << e.what() << '\n';
      return kExitInvalid;
    } catch (const std::exception& e) {
      std::cerr << "htq " << entry->name << ": " << e.what() << '\n';
      return kExitRuntime;
    }
  }
  return kExitInvalid;
}
