#pragma once

// File formats: JSON inputs for the sensitivity command and the record /
// summary CSV schemas written by the simulation.

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "pcsense/gaussian.hpp"
#include "pcsense/montecarlo.hpp"

namespace pcsense::io {

inline constexpr std::string_view kRecordHeader =
    "sigma_id,rep_id,change_type,sparsity,j,h,repaired";
inline constexpr std::string_view kSummaryHeader =
    "group_kind,group_value,j,mean_h,q05,q25,q75,q95";
inline constexpr std::string_view kProfileHeader = "j,lambda_j,post_mean_j,post_var_j,h";

/// Shortest decimal text that parses back to the same double.
std::string format_double(double x);
double parse_double(std::string_view s);

/// Pre-change correlation matrix from JSON: either a bare array of rows or
/// an object with a "sigma0" member holding one. Throws InputError.
CorrelationMatrix<double> parse_correlation_json(std::string_view text);

/// Change from JSON: {"post_mean": [...], "post_cov": [[...], ...]}.
ChangeSpec<double> parse_change_json(std::string_view text);

std::string read_file(const std::string& path);

void write_record_header(std::ostream& os);
void write_record(std::ostream& os, const SimulationRecord& r);
std::vector<SimulationRecord> read_records(std::istream& is);

void write_summary(std::ostream& os, const std::vector<AggregateSummary>& groups);
void write_summary_header(std::ostream& os);

void write_profile(std::ostream& os, const SensitivityProfile<double>& profile);

}  // namespace pcsense::io
