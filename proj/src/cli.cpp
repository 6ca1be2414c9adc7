#include "nadmm/cli.hpp"

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "fmt/format.h"
#include "json.hpp"
#include "nadmm/admm.hpp"
#include "nadmm/analysis.hpp"
#include "nadmm/io.hpp"

namespace nadmm::cli {

using nlohmann::json;

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  const auto first = text.find_first_not_of(" \t");
  if (first != std::string::npos && text[first] == '[') {
    const json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_array()) throw std::invalid_argument(fmt::format("bad number list '{}'", text));
    for (const auto& v : j) {
      if (!v.is_number()) throw std::invalid_argument(fmt::format("bad number list '{}'", text));
      out.push_back(v.get<double>());
    }
    return out;
  }
  std::string cell;
  std::istringstream ss(text);
  while (std::getline(ss, cell, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(cell, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || cell.find_first_not_of(" \t", used) != std::string::npos)
      throw std::invalid_argument(fmt::format("bad number '{}' in list '{}'", cell, text));
    out.push_back(v);
  }
  return out;
}

namespace {

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Vector list_flag(const std::string& text, Eigen::Index expected, const char* flag) {
  const Vector v = to_vector(parse_number_list(text));
  if (v.size() != expected)
    throw std::invalid_argument(fmt::format("{} has {} entries, expected {}", flag, v.size(), expected));
  return v;
}

std::uint64_t effective_seed(std::uint64_t flag_seed) {
  if (const char* env = std::getenv("NADMM_SEED"); env != nullptr && *env != '\0') {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw std::invalid_argument(fmt::format("NADMM_SEED='{}' is not an unsigned integer", env));
    }
  }
  return flag_seed;
}

Vector random_point(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = 2.0 * (static_cast<double>(gen() >> 11) * 0x1.0p-53) - 1.0;
  return v;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io::FileError(fmt::format("cannot write '{}'", path));
  f << text;
  if (!f) throw io::FileError(fmt::format("write to '{}' failed", path));
}

struct SolveArgs {
  std::string problem;
  double rho = 0.0;
  double eta_p = 1e-8;
  double eta_d = 1e-8;
  int max_iter = 1000;
  std::string x0, y0, lambda0;
  std::uint64_t seed = 0;
  std::string trace, report, reference;
  std::string warm_start = "previous";
  bool parallel_blocks = false;
  bool record_timing = false;
};

int cmd_solve(const SolveArgs& a, std::ostream& out, std::ostream& err) {
  const io::LoadedProblem lp = io::load_problem(a.problem);
  const Problem& prob = lp.problem;

  AdmmConfig cfg;
  cfg.rho = a.rho;
  cfg.eta_p = a.eta_p;
  cfg.eta_d = a.eta_d;
  cfg.max_iter = a.max_iter;
  cfg.parallel_blocks = a.parallel_blocks;
  cfg.warm_start = a.warm_start == "fixed" ? WarmStart::Fixed : WarmStart::PreviousIterate;

  if (a.x0 == "random") {
    const Vector x = random_point(lp.original.n(), effective_seed(a.seed));
    cfg.x0 = initial_slack_point(lp.original, lp.inequalities, prob, x);
  } else if (!a.x0.empty()) {
    const Vector x = to_vector(parse_number_list(a.x0));
    if (x.size() == prob.n()) {
      cfg.x0 = x;
    } else if (x.size() == lp.original.n()) {
      cfg.x0 = initial_slack_point(lp.original, lp.inequalities, prob, x);
    } else {
      throw std::invalid_argument(fmt::format("--x0 has {} entries, expected {}", x.size(), prob.n()));
    }
  } else if (prob.n() != lp.original.n()) {
    cfg.x0 = initial_slack_point(lp.original, lp.inequalities, prob, Vector::Zero(lp.original.n()));
  }
  if (!a.y0.empty()) cfg.y0 = list_flag(a.y0, prob.m(), "--y0");
  if (!a.lambda0.empty()) cfg.lambda0 = list_flag(a.lambda0, prob.q(), "--lambda0");

  io::TraceCsvOptions trace_opts;
  trace_opts.include_timing = a.record_timing;
  trace_opts.rho = a.rho;
  if (!a.reference.empty()) {
    const auto p = io::point_from_json(io::read_json_file(a.reference));
    analysis::KktPoint ref;
    ref.y = p.y;
    ref.lambda = p.lambda;
    if (ref.y.size() != prob.m() || ref.lambda.size() != prob.q())
      throw std::invalid_argument("--reference point dimensions do not match the problem");
    trace_opts.reference = ref;
  }

  const AdmmSolver solver(prob, cfg);
  const auto [report, trace] = solver.run();

  if (!a.trace.empty()) {
    std::ostringstream csv;
    io::write_trace_csv(csv, prob, trace, trace_opts);
    write_text(a.trace, csv.str());
  }
  const std::string report_text = io::to_json(report).dump(2) + "\n";
  if (!a.report.empty()) write_text(a.report, report_text);

  out << fmt::format("status {} after {} iterations: |q| = {:.3e}, |r| = {:.3e}\n", to_string(report.status),
                     report.iterations, report.q_norm, report.r_norm);
  if (!report.message.empty()) err << report.message << "\n";

  switch (report.status) {
    case SolveStatus::Solved:
      return kOk;
    case SolveStatus::IterLimit:
      return kIterLimit;
    default:
      return kSolverFailure;
  }
}

struct AnalyzeArgs {
  std::string problem;
  std::string trace;
  std::string point;
  int multistart = 20;
  bool critical_rho = false;
  std::optional<double> rho;
  std::string report;
  std::uint64_t seed = 0;
  bool parallel = false;
};

int emit(const json& doc, const std::string& path, std::ostream& out) {
  const std::string text = doc.dump(2) + "\n";
  if (path.empty()) {
    out << text;
  } else {
    write_text(path, text);
  }
  return kOk;
}

int analyze_matrices(const json& doc, const AnalyzeArgs& a, std::ostream& out, std::ostream& err) {
  if (!a.critical_rho) {
    err << "matrix file given without --critical-rho\n";
    return kUsage;
  }
  const Matrix H = io::matrix_from_json(doc.at("H"), "H");
  const Matrix C = doc.contains("C") ? io::matrix_from_json(doc.at("C"), "C", H.cols()) : Matrix::Zero(0, H.cols());
  const Matrix D = io::matrix_from_json(doc.at("D"), "D", H.cols());
  if (H.rows() != H.cols() || C.cols() != H.cols() || D.cols() != H.cols()) {
    err << "H must be square and C, D must have as many columns as H\n";
    return kUsage;
  }
  json rep = {{"schema_version", io::kSchemaVersion}, {"kind", "critical_rho"}};
  try {
    rep["critical_rho"] = io::number_to_json(analysis::critical_rho(H, C, D));
  } catch (const analysis::HypothesisViolation& e) {
    err << e.what() << "\n";
    return kSolverFailure;
  }
  return emit(rep, a.report, out);
}

int cmd_analyze(const AnalyzeArgs& a, std::ostream& out, std::ostream& err) {
  const json doc = io::read_json_file(a.problem);
  if (doc.is_object() && doc.contains("H")) return analyze_matrices(doc, a, out, err);

  if (a.trace.empty() && a.point.empty()) {
    err << "analyze needs --trace or --point\n";
    return kUsage;
  }
  const io::LoadedProblem lp = io::load_problem(a.problem);
  const Problem& prob = lp.problem;
  json rep = {{"schema_version", io::kSchemaVersion}, {"kind", "analysis_report"}};

  if (!a.point.empty()) {
    const auto p = io::point_from_json(io::read_json_file(a.point));
    if (p.x.size() != prob.n() || p.y.size() != prob.m() || p.mu.size() != prob.p() || p.lambda.size() != prob.q()) {
      err << fmt::format("--point dimensions do not match the problem (n={}, m={}, p={}, q={})\n", prob.n(),
                         prob.m(), prob.p(), prob.q());
      return kUsage;
    }
    json pt;
    pt["kkt"] = io::to_json(analysis::check_kkt(prob, p.x, p.y, p.mu, p.lambda));
    pt["regularity"] = io::to_json(analysis::check_regularity(prob, p.x, p.mu, a.rho));
    rep["point"] = std::move(pt);
  }

  if (!a.trace.empty()) {
    if (!a.rho) {
      err << "--trace analysis needs --rho\n";
      return kUsage;
    }
    std::ifstream f(a.trace);
    if (!f) throw io::FileError(fmt::format("cannot open '{}'", a.trace));
    const io::TraceTable table = io::read_trace_csv(f);
    if (table.x_names != prob.x_names || table.y_names != prob.y_names) {
      err << "trace columns do not match the problem variables\n";
      return kUsage;
    }
    if (table.iterates.empty()) {
      err << "trace has no rows\n";
      return kUsage;
    }
    analysis::ReferenceOptions ropts;
    ropts.n_starts = a.multistart;
    ropts.seed = effective_seed(a.seed);
    ropts.parallel = a.parallel;
    const auto refs = analysis::reference_solution(prob, ropts);
    const Iterate& last = table.iterates.back();
    const auto idx = analysis::nearest_reference(refs, last.y, last.lambda, prob.B, *a.rho);
    if (!idx) {
      err << fmt::format("no KKT point found by {} multistart solves\n", a.multistart);
      return kNoReference;
    }
    const analysis::KktPoint& ref = refs[*idx];
    json tr;
    tr["reference"] = io::to_json(ref);
    tr["reference_count"] = refs.size();
    tr["lyapunov"] = io::to_json(analysis::verify_decrease_bound(table.iterates, ref.y, ref.lambda, prob.B, *a.rho));
    tr["rates"] = io::to_json(analysis::convergence_rate(table.iterates, ref.y, ref.lambda, prob.B, *a.rho));
    rep["trace"] = std::move(tr);
  }
  return emit(rep, a.report, out);
}

int cmd_validate(const std::string& path, std::ostream& out) {
  const io::LoadedProblem lp = io::parse_problem_file(path);
  const auto r = validate(lp.problem);
  json rep = {{"schema_version", io::kSchemaVersion},
              {"kind", "validation_report"},
              {"ok", r.ok()},
              {"n", lp.problem.n()},
              {"m", lp.problem.m()},
              {"p", lp.problem.p()},
              {"q", lp.problem.q()},
              {"dimensions_ok", r.dimensions_ok},
              {"b_full_column_rank", r.b_full_column_rank},
              {"b_rank", r.b_rank},
              {"variables_ok", r.variables_ok},
              {"blocks_ok", r.blocks_ok},
              {"failures", r.failures}};
  out << rep.dump(2) << "\n";
  return r.ok() ? kOk : kUsage;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Nonconvex ADMM solver and convergence analysis"};
  app.require_subcommand(1);

  SolveArgs sa;
  auto* solve = app.add_subcommand("solve", "Run ADMM on a problem file");
  solve->add_option("--problem", sa.problem, "Problem JSON")->required()->check(CLI::ExistingFile);
  solve->add_option("--rho", sa.rho, "Penalty parameter")->required()->check(CLI::PositiveNumber);
  solve->add_option("--eta-p", sa.eta_p, "Primal residual tolerance")->check(CLI::PositiveNumber);
  solve->add_option("--eta-d", sa.eta_d, "Dual residual tolerance")->check(CLI::PositiveNumber);
  solve->add_option("--max-iter", sa.max_iter, "Iteration limit")->check(CLI::PositiveNumber);
  solve->add_option("--x0", sa.x0, "Start x: number list, or 'random' (uniform in [-1,1], from --seed)");
  solve->add_option("--y0", sa.y0, "Start y as a number list");
  solve->add_option("--lambda0", sa.lambda0, "Start lambda as a number list");
  solve->add_option("--seed", sa.seed, "Seed for random starts (NADMM_SEED overrides)");
  solve->add_option("--trace", sa.trace, "Trace CSV output path");
  solve->add_option("--report", sa.report, "Report JSON output path");
  solve->add_option("--reference", sa.reference, "Point JSON used to fill the V column of the trace");
  solve->add_option("--warm-start", sa.warm_start, "Subproblem start: previous or fixed")
      ->check(CLI::IsMember({"previous", "fixed"}));
  solve->add_flag("--parallel-blocks", sa.parallel_blocks, "Solve block subproblems in parallel");
  solve->add_flag("--record-timing", sa.record_timing, "Fill the wall_ms trace column");

  AnalyzeArgs aa;
  auto* analyze = app.add_subcommand("analyze", "KKT, regularity and convergence analysis");
  analyze->add_option("--problem", aa.problem, "Problem JSON, or an {H, C, D} matrix file")
      ->required()
      ->check(CLI::ExistingFile);
  analyze->add_option("--trace", aa.trace, "Trace CSV from solve")->check(CLI::ExistingFile);
  analyze->add_option("--point", aa.point, "Point JSON {x, y, mu, lambda} or a solve report")
      ->check(CLI::ExistingFile);
  analyze->add_option("--multistart", aa.multistart, "Reference multistart count")->check(CLI::PositiveNumber);
  analyze->add_flag("--critical-rho", aa.critical_rho, "Critical penalty of an {H, C, D} matrix file");
  analyze->add_option("--rho", aa.rho, "Penalty used by the run")->check(CLI::PositiveNumber);
  analyze->add_option("--report", aa.report, "Output path (default: standard output)");
  analyze->add_option("--seed", aa.seed, "Multistart seed (NADMM_SEED overrides)");
  analyze->add_flag("--parallel", aa.parallel, "Run multistart solves in parallel");

  std::string validate_path;
  auto* validate_cmd = app.add_subcommand("validate", "Check a problem file");
  validate_cmd->add_option("--problem", validate_path, "Problem JSON")->required()->check(CLI::ExistingFile);

  std::vector<const char*> argv;
  for (const auto& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (solve->parsed()) return cmd_solve(sa, out, err);
    if (analyze->parsed()) return cmd_analyze(aa, out, err);
    return cmd_validate(validate_path, out);
  } catch (const SubproblemFailure& e) {
    err << e.what() << "\n";
    return kSolverFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
}

}  // namespace nadmm::cli
