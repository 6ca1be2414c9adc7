#pragma once

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "nadmm/admm.hpp"
#include "nadmm/analysis.hpp"
#include "nadmm/model.hpp"

namespace nadmm::io {

inline constexpr int kSchemaVersion = 1;

/// Malformed input file. The message names the line (syntax errors) or the
/// JSON field (schema errors).
class FileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A problem file after canonicalization. `original` is the problem before
/// slack variables were added; it equals `problem` without inequalities.
struct LoadedProblem {
  Problem problem;
  Problem original;
  InequalitySpec inequalities;
};

/// Parses and canonicalizes without validating.
LoadedProblem parse_problem(const nlohmann::json& doc);
LoadedProblem parse_problem_file(const std::string& path);

/// parse_problem_file, then validate; throws FileError carrying the
/// validation failures.
LoadedProblem load_problem(const std::string& path);

nlohmann::json read_json_file(const std::string& path);

nlohmann::json to_json(const Vector& v);
nlohmann::json to_json(const Matrix& m);
Vector vector_from_json(const nlohmann::json& j, const std::string& field);
Matrix matrix_from_json(const nlohmann::json& j, const std::string& field, Eigen::Index cols_if_empty = 0);

/// Doubles that may be non-finite: finite values as numbers, otherwise the
/// strings "inf", "-inf", "nan".
nlohmann::json number_to_json(double v);
double number_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Iterate& it);
Iterate iterate_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SolveReport& rep);
SolveReport solve_report_from_json(const nlohmann::json& j);

nlohmann::json to_json(const analysis::KktReport& r);
nlohmann::json to_json(const analysis::LicqResult& r);
nlohmann::json to_json(const analysis::SoscResult& r);
nlohmann::json to_json(const analysis::RegularityReport& r);
nlohmann::json to_json(const analysis::LyapunovSeries& s);
nlohmann::json to_json(const std::vector<analysis::RateEntry>& rates);
nlohmann::json to_json(const analysis::KktPoint& p);

/// Primal-dual point (x, y, mu, lambda). Accepts a bare point object or a
/// solve report (its final iterate is used).
struct PrimalDualPoint {
  Vector x, y, mu, lambda;
};
PrimalDualPoint point_from_json(const nlohmann::json& j);

struct TraceCsvOptions {
  bool include_timing = false;  // wall_ms stays empty otherwise, keeping traces reproducible
  /// Fills the V column when given.
  std::optional<analysis::KktPoint> reference;
  double rho = 1.0;
};

/// Columns: k, q_norm, r_norm, x:<name>..., y:<name>..., lambda:<i>...,
/// mu:<i>..., V, wall_ms. One row per iterate.
void write_trace_csv(std::ostream& out, const Problem& prob, const Trace& trace, const TraceCsvOptions& opts = {});

struct TraceTable {
  std::vector<std::string> x_names;
  std::vector<std::string> y_names;
  std::vector<Iterate> iterates;  // k, q_norm, r_norm, x, y, lambda, mu
};

TraceTable read_trace_csv(std::istream& in);

}  // namespace nadmm::io
