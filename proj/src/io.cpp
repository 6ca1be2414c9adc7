#include "nadmm/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <iterator>
#include <limits>
#include <ostream>
#include <sstream>

#include "fmt/format.h"

namespace nadmm::io {

using nlohmann::json;

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileError(fmt::format("cannot open '{}'", path));
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    const auto upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
    throw FileError(fmt::format("{}: line {}: {}", path, line, e.what()));
  }
}

// ---------------------------------------------------------------------------
// Numbers, vectors, matrices

json number_to_json(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

double number_from_json(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw FileError("expected a number");
}

json to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(number_to_json(v[i]));
  return a;
}

json to_json(const Matrix& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(number_to_json(m(i, j)));
    a.push_back(std::move(row));
  }
  return a;
}

Vector vector_from_json(const json& j, const std::string& field) {
  if (!j.is_array()) throw FileError(fmt::format("field '{}' must be an array of numbers", field));
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    try {
      v[static_cast<Eigen::Index>(i)] = number_from_json(j[i]);
    } catch (const FileError&) {
      throw FileError(fmt::format("field '{}[{}]' must be a number", field, i));
    }
  }
  return v;
}

Matrix matrix_from_json(const json& j, const std::string& field, Eigen::Index cols_if_empty) {
  if (!j.is_array()) throw FileError(fmt::format("field '{}' must be an array of rows", field));
  if (j.empty()) return Matrix::Zero(0, cols_if_empty);
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols)
      throw FileError(fmt::format("field '{}' row {} must be an array of {} numbers", field, r, cols));
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[r][c].is_number()) throw FileError(fmt::format("field '{}[{}][{}]' must be a number", field, r, c));
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Problem files

namespace {

const json& require(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key))
    throw FileError(fmt::format("missing field '{}{}'", where, key));
  return obj.at(key);
}

std::vector<std::string> names_from_json(const json& j, const std::string& field) {
  if (!j.is_array()) throw FileError(fmt::format("field '{}' must be an array of names", field));
  std::vector<std::string> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_string()) throw FileError(fmt::format("field '{}[{}]' must be a string", field, i));
    out.push_back(j[i].get<std::string>());
  }
  return out;
}

Expr expr_field(const json& j, const std::string& field) {
  try {
    return parse_expr(j);
  } catch (const ExprError& e) {
    throw FileError(fmt::format("field '{}': {}", field, e.what()));
  }
}

std::vector<Expr> exprs_field(const json& obj, const std::string& key, const std::string& where) {
  std::vector<Expr> out;
  if (!obj.contains(key)) return out;
  const json& arr = obj.at(key);
  if (!arr.is_array()) throw FileError(fmt::format("field '{}{}' must be an array", where, key));
  for (std::size_t i = 0; i < arr.size(); ++i) out.push_back(expr_field(arr[i], fmt::format("{}{}[{}]", where, key, i)));
  return out;
}

Problem parse_canonical(const json& doc) {
  Problem p;
  p.x_names = names_from_json(require(doc, "variables", ""), "variables");
  p.y_names = names_from_json(require(doc, "y_variables", ""), "y_variables");
  p.objective = expr_field(require(doc, "objective", ""), "objective");
  p.constraints = exprs_field(doc, "constraints", "");
  p.A = matrix_from_json(require(doc, "A", ""), "A", p.n());
  p.B = matrix_from_json(require(doc, "B", ""), "B", p.m());
  p.b = vector_from_json(require(doc, "b", ""), "b");
  return p;
}

Problem parse_blocks(const json& doc) {
  const json& blocks = require(doc, "blocks", "");
  if (!blocks.is_array() || blocks.empty()) throw FileError("field 'blocks' must be a non-empty array");
  std::string form = doc.value("form", std::string());
  if (form.empty()) form = blocks[0].contains("B") ? "block" : "shared";

  try {
    if (form == "block") {
      BlockProblem bp;
      bp.y_names = names_from_json(require(doc, "y_variables", ""), "y_variables");
      for (std::size_t i = 0; i < blocks.size(); ++i) {
        const std::string w = fmt::format("blocks[{}].", i);
        CoupledBlock blk;
        blk.x_names = names_from_json(require(blocks[i], "variables", w), w + "variables");
        blk.objective = expr_field(require(blocks[i], "objective", w), w + "objective");
        blk.constraints = exprs_field(blocks[i], "constraints", w);
        blk.A = matrix_from_json(require(blocks[i], "A", w), w + "A", static_cast<Eigen::Index>(blk.x_names.size()));
        blk.B = matrix_from_json(require(blocks[i], "B", w), w + "B", static_cast<Eigen::Index>(bp.y_names.size()));
        blk.b = vector_from_json(require(blocks[i], "b", w), w + "b");
        bp.blocks.push_back(std::move(blk));
      }
      return canonicalize_block(bp);
    }
    if (form == "shared") {
      SharedBudgetProblem sp;
      sp.budget = vector_from_json(require(doc, "b", ""), "b");
      for (std::size_t i = 0; i < blocks.size(); ++i) {
        const std::string w = fmt::format("blocks[{}].", i);
        BudgetBlock blk;
        blk.x_names = names_from_json(require(blocks[i], "variables", w), w + "variables");
        blk.objective = expr_field(require(blocks[i], "objective", w), w + "objective");
        blk.constraints = exprs_field(blocks[i], "constraints", w);
        blk.A = matrix_from_json(require(blocks[i], "A", w), w + "A", static_cast<Eigen::Index>(blk.x_names.size()));
        sp.blocks.push_back(std::move(blk));
      }
      return canonicalize_shared(sp);
    }
  } catch (const ModelError& e) {
    throw FileError(e.what());
  }
  throw FileError(fmt::format("field 'form' must be \"block\" or \"shared\", got \"{}\"", form));
}

}  // namespace

LoadedProblem parse_problem(const json& doc) {
  if (!doc.is_object()) throw FileError("problem file must hold a JSON object");
  LoadedProblem out;
  out.original = doc.contains("blocks") ? parse_blocks(doc) : parse_canonical(doc);
  out.inequalities.constraints = exprs_field(doc, "inequalities", "");
  try {
    out.problem = add_slacks(out.original, out.inequalities);
  } catch (const ModelError& e) {
    throw FileError(e.what());
  }
  return out;
}

LoadedProblem parse_problem_file(const std::string& path) {
  const json doc = read_json_file(path);
  try {
    return parse_problem(doc);
  } catch (const FileError& e) {
    throw FileError(fmt::format("{}: {}", path, e.what()));
  }
}

LoadedProblem load_problem(const std::string& path) {
  LoadedProblem lp = parse_problem_file(path);
  const auto rep = validate(lp.problem);
  if (!rep.ok()) {
    std::string msg = fmt::format("{}: validation failed", path);
    for (const auto& f : rep.failures) msg += "\n  " + f;
    throw FileError(msg);
  }
  return lp;
}

// ---------------------------------------------------------------------------
// Reports

json to_json(const Iterate& it) {
  return {{"k", it.k},
          {"x", to_json(it.x)},
          {"y", to_json(it.y)},
          {"mu", to_json(it.mu)},
          {"lambda", to_json(it.lambda)},
          {"q", to_json(it.q)},
          {"r", to_json(it.r)},
          {"q_norm", number_to_json(it.q_norm)},
          {"r_norm", number_to_json(it.r_norm)},
          {"subproblem_status", std::string(to_string(it.subproblem_status))},
          {"inner_iterations", it.inner_iterations},
          {"inner_stationarity", number_to_json(it.inner_stationarity)},
          {"inner_feasibility", number_to_json(it.inner_feasibility)},
          {"second_order_ok", it.second_order_ok},
          {"dual_identity_residual", number_to_json(it.dual_identity_residual)}};
}

namespace {

NlpStatus nlp_status_from(const std::string& s) {
  for (auto st : {NlpStatus::Converged, NlpStatus::MaxIter, NlpStatus::LinAlgFailure, NlpStatus::Diverged}) {
    if (to_string(st) == s) return st;
  }
  throw FileError(fmt::format("unknown subproblem status '{}'", s));
}

SolveStatus solve_status_from(const std::string& s) {
  for (auto st : {SolveStatus::Solved, SolveStatus::IterLimit, SolveStatus::SubproblemFailure, SolveStatus::Diverged}) {
    if (to_string(st) == s) return st;
  }
  throw FileError(fmt::format("unknown solve status '{}'", s));
}

}  // namespace

Iterate iterate_from_json(const json& j) {
  Iterate it;
  it.k = require(j, "k", "").get<int>();
  it.x = vector_from_json(require(j, "x", ""), "x");
  it.y = vector_from_json(require(j, "y", ""), "y");
  it.mu = vector_from_json(require(j, "mu", ""), "mu");
  it.lambda = vector_from_json(require(j, "lambda", ""), "lambda");
  it.q = vector_from_json(require(j, "q", ""), "q");
  it.r = vector_from_json(require(j, "r", ""), "r");
  it.q_norm = number_from_json(require(j, "q_norm", ""));
  it.r_norm = number_from_json(require(j, "r_norm", ""));
  it.subproblem_status = nlp_status_from(require(j, "subproblem_status", "").get<std::string>());
  it.inner_iterations = require(j, "inner_iterations", "").get<int>();
  it.inner_stationarity = number_from_json(require(j, "inner_stationarity", ""));
  it.inner_feasibility = number_from_json(require(j, "inner_feasibility", ""));
  it.second_order_ok = require(j, "second_order_ok", "").get<bool>();
  it.dual_identity_residual = number_from_json(require(j, "dual_identity_residual", ""));
  return it;
}

json to_json(const SolveReport& rep) {
  return {{"schema_version", kSchemaVersion},
          {"kind", "solve_report"},
          {"status", std::string(to_string(rep.status))},
          {"iterations", rep.iterations},
          {"q_norm", number_to_json(rep.q_norm)},
          {"r_norm", number_to_json(rep.r_norm)},
          {"rho", rep.rho},
          {"eta_p", rep.eta_p},
          {"eta_d", rep.eta_d},
          {"inner_tolerance", rep.inner_tolerance},
          {"lambda0_projection_distance", number_to_json(rep.lambda0_projection_distance)},
          {"message", rep.message},
          {"final", to_json(rep.final_iterate)}};
}

SolveReport solve_report_from_json(const json& j) {
  const int version = require(j, "schema_version", "").get<int>();
  if (version != kSchemaVersion) throw FileError(fmt::format("unsupported schema_version {}", version));
  SolveReport rep;
  rep.status = solve_status_from(require(j, "status", "").get<std::string>());
  rep.iterations = require(j, "iterations", "").get<int>();
  rep.q_norm = number_from_json(require(j, "q_norm", ""));
  rep.r_norm = number_from_json(require(j, "r_norm", ""));
  rep.rho = require(j, "rho", "").get<double>();
  rep.eta_p = require(j, "eta_p", "").get<double>();
  rep.eta_d = require(j, "eta_d", "").get<double>();
  rep.inner_tolerance = require(j, "inner_tolerance", "").get<double>();
  rep.lambda0_projection_distance = number_from_json(require(j, "lambda0_projection_distance", ""));
  rep.message = require(j, "message", "").get<std::string>();
  rep.final_iterate = iterate_from_json(require(j, "final", ""));
  return rep;
}

json to_json(const analysis::KktReport& r) {
  return {{"stationarity_x", number_to_json(r.stationarity_x)},
          {"stationarity_y", number_to_json(r.stationarity_y)},
          {"constraint", number_to_json(r.constraint)},
          {"coupling", number_to_json(r.coupling)}};
}

json to_json(const analysis::LicqResult& r) {
  return {{"licq_ok", r.ok}, {"rank", r.rank}, {"rows", r.rows}};
}

json to_json(const analysis::SoscResult& r) {
  json j = {{"sosc_ok", r.overall_ok}, {"min_projected_eigenvalue", number_to_json(r.min_projected_eigenvalue)}};
  if (r.subproblem_ok) {
    j["subproblem_sosc_ok"] = *r.subproblem_ok;
    j["subproblem_min_eigenvalue"] = number_to_json(*r.subproblem_min_eigenvalue);
  }
  return j;
}

json to_json(const analysis::RegularityReport& r) {
  json j = to_json(r.licq);
  j.update(to_json(r.sosc));
  j["critical_rho"] = number_to_json(r.critical_rho);
  return j;
}

json to_json(const analysis::LyapunovSeries& s) {
  json j;
  j["V"] = json::array();
  for (double v : s.V) j["V"].push_back(number_to_json(v));
  j["rho_distance"] = json::array();
  for (double v : s.rho_distance) j["rho_distance"].push_back(number_to_json(v));
  j["decrease_slack"] = json::array();
  for (double v : s.slack) j["decrease_slack"].push_back(number_to_json(v));
  j["entry_index"] = s.entry_index;
  return j;
}

json to_json(const std::vector<analysis::RateEntry>& rates) {
  json a = json::array();
  for (const auto& r : rates) a.push_back({{"k", r.k}, {"ratio", number_to_json(r.ratio)}});
  return a;
}

json to_json(const analysis::KktPoint& p) {
  return {{"x", to_json(p.x)},
          {"y", to_json(p.y)},
          {"mu", to_json(p.mu)},
          {"lambda", to_json(p.lambda)},
          {"kkt", to_json(p.kkt)},
          {"licq", to_json(p.licq)},
          {"sosc", to_json(p.sosc)}};
}

PrimalDualPoint point_from_json(const json& j) {
  const json& src = j.contains("final") ? j.at("final") : j;
  PrimalDualPoint p;
  p.x = vector_from_json(require(src, "x", ""), "x");
  p.y = vector_from_json(require(src, "y", ""), "y");
  p.mu = src.contains("mu") ? vector_from_json(src.at("mu"), "mu") : Vector::Zero(0);
  p.lambda = vector_from_json(require(src, "lambda", ""), "lambda");
  return p;
}

// ---------------------------------------------------------------------------
// Trace CSV

namespace {

std::string num(double v) { return fmt::format("{:.17g}", v); }

}  // namespace

void write_trace_csv(std::ostream& out, const Problem& prob, const Trace& trace, const TraceCsvOptions& opts) {
  std::string line = "k,q_norm,r_norm";
  for (const auto& x : prob.x_names) line += ",x:" + x;
  for (const auto& y : prob.y_names) line += ",y:" + y;
  for (int i = 0; i < prob.q(); ++i) line += fmt::format(",lambda:{}", i);
  for (int i = 0; i < prob.p(); ++i) line += fmt::format(",mu:{}", i);
  line += ",V,wall_ms\n";
  out << line;

  for (std::size_t r = 0; r < trace.iterates.size(); ++r) {
    const Iterate& it = trace.iterates[r];
    line = fmt::format("{},{},{}", it.k, num(it.q_norm), num(it.r_norm));
    for (Eigen::Index i = 0; i < it.x.size(); ++i) line += "," + num(it.x[i]);
    for (Eigen::Index i = 0; i < it.y.size(); ++i) line += "," + num(it.y[i]);
    for (Eigen::Index i = 0; i < it.lambda.size(); ++i) line += "," + num(it.lambda[i]);
    for (Eigen::Index i = 0; i < it.mu.size(); ++i) line += "," + num(it.mu[i]);
    line += ",";
    if (opts.reference)
      line += num(analysis::lyapunov(it.y, it.lambda, opts.reference->y, opts.reference->lambda, prob.B, opts.rho));
    line += ",";
    if (opts.include_timing && r < trace.wall_ms.size()) line += fmt::format("{:.3f}", trace.wall_ms[r]);
    line += "\n";
    out << line;
  }
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_cell(const std::string& s, std::size_t row, const std::string& col) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FileError(fmt::format("trace row {}: column '{}' holds '{}', not a number", row, col, s));
  }
}

}  // namespace

TraceTable read_trace_csv(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw FileError("trace file is empty");
  if (!header.empty() && header.back() == '\r') header.pop_back();
  const auto cols = split_csv(header);
  if (cols.size() < 5 || cols[0] != "k" || cols[1] != "q_norm" || cols[2] != "r_norm" ||
      cols[cols.size() - 2] != "V" || cols.back() != "wall_ms")
    throw FileError("trace header does not match k,q_norm,r_norm,...,V,wall_ms");

  TraceTable t;
  std::vector<std::size_t> xi, yi, li, mi;
  for (std::size_t c = 3; c + 2 < cols.size(); ++c) {
    const auto& name = cols[c];
    if (name.rfind("x:", 0) == 0) {
      xi.push_back(c);
      t.x_names.push_back(name.substr(2));
    } else if (name.rfind("y:", 0) == 0) {
      yi.push_back(c);
      t.y_names.push_back(name.substr(2));
    } else if (name.rfind("lambda:", 0) == 0) {
      li.push_back(c);
    } else if (name.rfind("mu:", 0) == 0) {
      mi.push_back(c);
    } else {
      throw FileError(fmt::format("unknown trace column '{}'", name));
    }
  }
  auto gather = [](const std::vector<std::string>& cells, const std::vector<std::size_t>& idx, std::size_t row,
                   const std::vector<std::string>& names) {
    Vector v(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i)
      v[static_cast<Eigen::Index>(i)] = parse_cell(cells[idx[i]], row, names[idx[i]]);
    return v;
  };

  std::string line;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != cols.size())
      throw FileError(fmt::format("trace row {} has {} cells, header has {}", row, cells.size(), cols.size()));
    Iterate it;
    it.k = static_cast<int>(parse_cell(cells[0], row, "k"));
    it.q_norm = parse_cell(cells[1], row, "q_norm");
    it.r_norm = parse_cell(cells[2], row, "r_norm");
    it.x = gather(cells, xi, row, cols);
    it.y = gather(cells, yi, row, cols);
    it.lambda = gather(cells, li, row, cols);
    it.mu = gather(cells, mi, row, cols);
    t.iterates.push_back(std::move(it));
  }
  return t;
}

}  // namespace nadmm::io
