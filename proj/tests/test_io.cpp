#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "nadmm/io.hpp"
#include "support.hpp"

using namespace nadmm;
using nlohmann::json;

namespace {

std::string write_temp(const std::string& name, const std::string& text) {
  const auto path = std::filesystem::temp_directory_path() / ("nadmm_io_" + name);
  std::ofstream(path) << text;
  return path.string();
}

}  // namespace

TEST_CASE("load_problem reads the consensus fixture") {
  const auto lp = io::load_problem(testing::fixture("consensus_qp.json"));
  CHECK(lp.problem.n() == 2);
  CHECK(lp.problem.m() == 1);
  CHECK(lp.problem.q() == 2);
  CHECK(lp.problem.p() == 0);
}

TEST_CASE("load_problem rejects a rank-deficient B by name") {
  CHECK_THROWS_WITH_AS(io::load_problem(testing::fixture("rank_deficient_b.json")), doctest::Contains("B"),
                       io::FileError);
  CHECK_FALSE(validate(io::parse_problem_file(testing::fixture("rank_deficient_b.json")).problem).ok());
}

TEST_CASE("shared-budget fixture canonicalizes to the displayed layout") {
  const Problem p = io::load_problem(testing::fixture("shared_budget.json")).problem;
  Matrix A(3, 3), B(3, 2);
  A << 1, 0, 0, 0, 1, 0, 0, 0, 0;
  B << -1, 0, 0, -1, 1, 1;
  CHECK(p.A == A);
  CHECK(p.B == B);
  CHECK(p.b == (Vector(3) << 0, 0, 2).finished());
  CHECK(p.blocks.size() == 2);
}

TEST_CASE("block and inequality fixtures load") {
  const Problem two = io::load_problem(testing::fixture("two_block_quartic.json")).problem;
  CHECK(two.n() == 4);
  CHECK(two.p() == 2);
  CHECK(two.blocks.size() == 2);
  const auto ineq = io::load_problem(testing::fixture("inequality.json"));
  CHECK(ineq.problem.x_names == std::vector<std::string>{"x", "s_1"});
  CHECK(ineq.original.n() == 1);
}

TEST_CASE("syntax errors name the line and schema errors name the field") {
  const auto bad_syntax = write_temp("syntax.json", "{\n  \"variables\": [\"x\"],\n  \"A\": [[1,]]\n}\n");
  CHECK_THROWS_WITH_AS(io::load_problem(bad_syntax), doctest::Contains("line 3"), io::FileError);

  const auto missing = write_temp("missing.json", R"({"variables":["x"],"y_variables":["y"],"objective":"x^2"})");
  CHECK_THROWS_WITH_AS(io::load_problem(missing), doctest::Contains("'A'"), io::FileError);

  const auto bad_expr = write_temp(
      "expr.json",
      R"({"variables":["x"],"y_variables":["y"],"objective":"x^2","constraints":[{"pow":[{"var":"x"},0.5]}],"A":[[1]],"B":[[-1]],"b":[0]})");
  CHECK_THROWS_WITH_AS(io::load_problem(bad_expr), doctest::Contains("constraints[0]"), io::FileError);

  const auto ragged = write_temp(
      "ragged.json", R"({"variables":["x"],"y_variables":["y"],"objective":"x^2","A":[[1],[1,2]],"B":[[-1]],"b":[0]})");
  CHECK_THROWS_WITH_AS(io::load_problem(ragged), doctest::Contains("'A'"), io::FileError);

  CHECK_THROWS_AS(io::load_problem("/nonexistent/problem.json"), io::FileError);
}

TEST_CASE("solve report JSON round-trips exactly") {
  AdmmConfig cfg;
  cfg.rho = 10.0;
  cfg.lambda0 = (Vector(2) << 0.3, 0.1).finished();
  const auto [rep, trace] = run(testing::load_fixture("consensus_qp.json"), cfg);
  const json j = io::to_json(rep);
  CHECK(j.at("schema_version") == io::kSchemaVersion);
  const SolveReport back = io::solve_report_from_json(json::parse(j.dump()));
  CHECK(io::to_json(back) == j);
  CHECK(back.final_iterate.x == rep.final_iterate.x);
  CHECK(back.final_iterate.lambda == rep.final_iterate.lambda);
  CHECK(back.q_norm == rep.q_norm);
  CHECK(back.lambda0_projection_distance == rep.lambda0_projection_distance);
  CHECK(back.status == rep.status);
}

TEST_CASE("non-finite numbers survive JSON") {
  for (double v : {std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(), 1.5}) {
    CHECK(io::number_from_json(json::parse(io::number_to_json(v).dump())) == v);
  }
  CHECK(std::isnan(io::number_from_json(io::number_to_json(std::nan("")))));
}

TEST_CASE("trace CSV layout and round trip") {
  const Problem p = testing::load_fixture("two_block_quartic.json");
  AdmmConfig cfg;
  cfg.rho = 25.0;
  cfg.x0 = (Vector(4) << 1.25, -0.66, 1.25, -0.66).finished();
  const auto [rep, trace] = run(p, cfg);
  std::ostringstream out;
  io::write_trace_csv(out, p, trace);
  const std::string text = out.str();
  const std::string header = text.substr(0, text.find('\n'));
  CHECK(header == "k,q_norm,r_norm,x:a1,x:b1,x:a2,x:b2,y:y,lambda:0,lambda:1,mu:0,mu:1,V,wall_ms");
  CHECK(std::count(text.begin(), text.end(), '\n') == rep.iterations + 1);

  std::istringstream in(text);
  const auto table = io::read_trace_csv(in);
  REQUIRE(table.iterates.size() == trace.iterates.size());
  CHECK(table.x_names == p.x_names);
  for (std::size_t i = 0; i < table.iterates.size(); ++i) {
    CHECK(table.iterates[i].x == trace.iterates[i].x);
    CHECK(table.iterates[i].lambda == trace.iterates[i].lambda);
    CHECK(table.iterates[i].q_norm == trace.iterates[i].q_norm);
  }

  io::TraceCsvOptions with_v;
  with_v.rho = 25.0;
  analysis::KktPoint ref;
  ref.y = rep.final_iterate.y;
  ref.lambda = rep.final_iterate.lambda;
  with_v.reference = ref;
  with_v.include_timing = true;
  std::ostringstream timed;
  io::write_trace_csv(timed, p, trace, with_v);
  const std::string last = timed.str().substr(timed.str().rfind('\n', timed.str().size() - 2) + 1);
  CHECK(last.find(",0,") != std::string::npos);  // V at the final iterate is zero
  CHECK(last.back() == '\n');
  CHECK(last[last.size() - 2] != ',');  // wall_ms filled
}

TEST_CASE("read_trace_csv rejects malformed traces") {
  std::istringstream empty("");
  CHECK_THROWS_AS(io::read_trace_csv(empty), io::FileError);
  std::istringstream header("k,q,r\n");
  CHECK_THROWS_AS(io::read_trace_csv(header), io::FileError);
  std::istringstream bad_cell("k,q_norm,r_norm,x:x,V,wall_ms\n1,0.5,abc,1,,\n");
  CHECK_THROWS_WITH_AS(io::read_trace_csv(bad_cell), doctest::Contains("r_norm"), io::FileError);
}

TEST_CASE("point_from_json accepts bare points and solve reports") {
  const auto p = io::point_from_json(json::parse(R"({"x":[1],"y":[1],"mu":[],"lambda":[0]})"));
  CHECK(p.x[0] == 1.0);
  CHECK(p.mu.size() == 0);
  AdmmConfig cfg;
  cfg.rho = 10.0;
  const auto [rep, trace] = run(testing::load_fixture("consensus_qp.json"), cfg);
  const auto q = io::point_from_json(io::to_json(rep));
  CHECK(q.x == rep.final_iterate.x);
}
