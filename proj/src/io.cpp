#include "pcsense/io.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "json.hpp"

namespace pcsense::io {
namespace {

using nlohmann::json;

json parse_json(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw InputError(std::string("malformed JSON: ") + e.what());
  }
}

MatrixXd matrix_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.empty())
    throw InputError(std::string(what) + ": expected a nonempty array of rows");
  const auto n = static_cast<Eigen::Index>(j.size());
  MatrixXd m(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n)
      throw InputError(std::string(what) + ": matrix must be square");
    for (Eigen::Index c = 0; c < n; ++c) {
      const auto& v = row[static_cast<std::size_t>(c)];
      if (!v.is_number()) throw InputError(std::string(what) + ": non-numeric entry");
      m(r, c) = v.get<double>();
    }
  }
  return m;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

int parse_int(std::string_view s) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw InputError("CSV: bad integer '" + std::string(s) + "'");
  return v;
}

}  // namespace

std::string format_double(double x) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), ptr);
}

double parse_double(std::string_view s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw InputError("bad number '" + std::string(s) + "'");
  return v;
}

CorrelationMatrix<double> parse_correlation_json(std::string_view text) {
  const json j = parse_json(text);
  const json& body = j.is_object() ? j.value("sigma0", json()) : j;
  return CorrelationMatrix<double>(matrix_from_json(body, "sigma0"));
}

ChangeSpec<double> parse_change_json(std::string_view text) {
  const json j = parse_json(text);
  if (!j.is_object() || !j.contains("post_mean") || !j.contains("post_cov"))
    throw InputError("change: expected an object with post_mean and post_cov");
  const json& mean = j["post_mean"];
  if (!mean.is_array()) throw InputError("change: post_mean must be an array");
  VectorXd mu(static_cast<Eigen::Index>(mean.size()));
  for (std::size_t i = 0; i < mean.size(); ++i) {
    if (!mean[i].is_number()) throw InputError("change: non-numeric post_mean entry");
    mu(static_cast<Eigen::Index>(i)) = mean[i].get<double>();
  }
  return ChangeSpec<double>(std::move(mu), matrix_from_json(j["post_cov"], "post_cov"));
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_record_header(std::ostream& os) { os << kRecordHeader << '\n'; }

void write_record(std::ostream& os, const SimulationRecord& r) {
  os << r.sigma_id << ',' << r.rep_id << ',' << to_string(r.change_type) << ','
     << r.sparsity << ',' << r.j << ',' << format_double(r.h) << ','
     << (r.repaired ? 1 : 0) << '\n';
}

std::vector<SimulationRecord> read_records(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kRecordHeader)
    throw InputError("records CSV: missing or unexpected header");
  std::vector<SimulationRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 7) throw InputError("records CSV: expected 7 fields: " + line);
    SimulationRecord r;
    r.sigma_id = parse_int(f[0]);
    r.rep_id = parse_int(f[1]);
    const auto type = parse_change_type(f[2]);
    if (!type) throw InputError("records CSV: unknown change type " + std::string(f[2]));
    r.change_type = *type;
    r.sparsity = parse_int(f[3]);
    r.j = parse_int(f[4]);
    r.h = parse_double(f[5]);
    r.repaired = parse_int(f[6]) != 0;
    out.push_back(r);
  }
  return out;
}

void write_summary_header(std::ostream& os) { os << kSummaryHeader << '\n'; }

void write_summary(std::ostream& os, const std::vector<AggregateSummary>& groups) {
  for (const auto& g : groups) {
    for (int j = 0; j < g.dim(); ++j) {
      const auto k = static_cast<std::size_t>(j);
      if (g.count[k] == 0) continue;
      os << to_string(g.kind) << ',' << g.group_value << ',' << j + 1 << ','
         << format_double(g.mean[k]) << ',' << format_double(g.q05[k]) << ','
         << format_double(g.q25[k]) << ',' << format_double(g.q75[k]) << ','
         << format_double(g.q95[k]) << '\n';
    }
  }
}

void write_profile(std::ostream& os, const SensitivityProfile<double>& profile) {
  os << kProfileHeader << '\n';
  for (Eigen::Index j = 0; j < profile.h.size(); ++j) {
    const auto& q = profile.post[static_cast<std::size_t>(j)];
    os << j + 1 << ',' << format_double(profile.eigen.eigenvalues(j)) << ','
       << format_double(q.mean) << ',' << format_double(q.variance) << ','
       << format_double(profile.h(j)) << '\n';
  }
}

}  // namespace pcsense::io
