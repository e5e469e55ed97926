#pragma once

#include <iosfwd>
#include <span>
#include <string>

#include "htq/diffusion.hpp"
#include "htq/harness.hpp"
#include "htq/simulator.hpp"

namespace htq {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

/// JSON documents. Output is deterministic: object keys are sorted and
/// doubles use the shortest round-trip form.
std::string to_json(const ConvergenceReport& report);
ConvergenceReport report_from_json(const std::string& text);

/// Replication summary without the raw sample vector.
std::string to_json(const std::vector<SimResult>& replications);

std::string to_json(const ValidationReport& report);

/// Moments, abandonment limit, queue limit and the closed-form mean where
/// one exists.
std::string law_summary_json(const DiffusionSpec& spec, const StationaryLaw& law);

/// CSV writers: header row, '.' decimal separator, newline-terminated.
void write_law_csv(std::ostream& out, const StationaryLaw& law);
void write_samples_csv(std::ostream& out, std::span<const double> samples);
/// Columns n, ks, quantity, order, estimate, ci, limit, error.
void write_table_csv(std::ostream& out, const ConvergenceReport& report);

}  // namespace htq
