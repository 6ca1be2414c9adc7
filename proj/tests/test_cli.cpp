#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "nadmm/cli.hpp"
#include "support.hpp"

using namespace nadmm;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "nadmm");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string temp(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("nadmm_cli_" + name)).string();
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("parse_number_list") {
  CHECK(cli::parse_number_list("1,2.5,-3") == std::vector<double>{1, 2.5, -3});
  CHECK(cli::parse_number_list("[1, 2]") == std::vector<double>{1, 2});
  CHECK_THROWS(cli::parse_number_list("1,x"));
  CHECK_THROWS(cli::parse_number_list("[1, \"a\"]"));
}

TEST_CASE("solve converges on the consensus QP") {
  const auto report = temp("qp_report.json");
  const auto trace = temp("qp_trace.csv");
  const auto r = invoke({"solve", "--problem", testing::fixture("consensus_qp.json"), "--rho", "10", "--report", report,
                      "--trace", trace});
  CHECK(r.code == 0);
  const json rep = json::parse(slurp(report));
  CHECK(rep.at("status") == "solved");
  CHECK(rep.at("q_norm").get<double>() <= 1e-8);
  CHECK(rep.at("r_norm").get<double>() <= 1e-8);
  const std::string csv = slurp(trace);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == rep.at("iterations").get<int>() + 1);
}

TEST_CASE("solve exit codes") {
  CHECK(invoke({"solve", "--problem", testing::fixture("consensus_qp.json"), "--rho", "-1"}).code == 1);
  CHECK(invoke({"solve", "--problem", testing::fixture("consensus_qp.json"), "--rho", "1", "--max-iter", "1"}).code == 2);
  CHECK(invoke({"solve", "--problem", "/nonexistent.json", "--rho", "1"}).code == 1);
  CHECK(invoke({"solve", "--problem", testing::fixture("rank_deficient_b.json"), "--rho", "1"}).code == 1);
  CHECK(invoke({"solve", "--problem", testing::fixture("consensus_qp.json"), "--rho", "1", "--y0", "1,2"}).code == 1);
  const auto fail = invoke({"solve", "--problem", testing::fixture("basin.json"), "--rho", "1", "--x0", "1e9"});
  CHECK(fail.code == 3);
  CHECK(invoke({}).code == 1);
  CHECK(invoke({"--help"}).code == 0);
}

TEST_CASE("solve traces are byte-identical for a fixed seed") {
  const auto a = temp("det_a.csv"), b = temp("det_b.csv"), c = temp("det_c.csv");
  const std::vector<std::string> base = {"solve", "--problem", testing::fixture("two_block_quartic.json"), "--rho",
                                         "10", "--x0", "random", "--seed", "42", "--trace"};
  auto args = base;
  args.push_back(a);
  CHECK(invoke(args).code == 0);
  args.back() = b;
  CHECK(invoke(args).code == 0);
  CHECK(slurp(a) == slurp(b));
  CHECK_FALSE(slurp(a).empty());

  args = base;
  args[8] = "43";
  args.push_back(c);
  invoke(args);
  CHECK(slurp(a) != slurp(c));
}

TEST_CASE("NADMM_SEED overrides --seed") {
  const auto a = temp("env_a.csv"), b = temp("env_b.csv");
  ::setenv("NADMM_SEED", "7", 1);
  invoke({"solve", "--problem", testing::fixture("shared_budget.json"), "--rho", "10", "--x0", "random", "--seed", "1",
       "--trace", a});
  ::unsetenv("NADMM_SEED");
  invoke({"solve", "--problem", testing::fixture("shared_budget.json"), "--rho", "10", "--x0", "random", "--seed", "7",
       "--trace", b});
  CHECK(slurp(a) == slurp(b));
}

TEST_CASE("parallel blocks flag gives the same trace") {
  const auto a = temp("par_a.csv"), b = temp("par_b.csv");
  const std::vector<std::string> base = {"solve", "--problem", testing::fixture("two_block_quartic.json"), "--rho",
                                         "25", "--x0", "1.25,-0.66,1.25,-0.66", "--trace"};
  auto args = base;
  args.push_back(a);
  CHECK(invoke(args).code == 0);
  args.back() = b;
  args.push_back("--parallel-blocks");
  CHECK(invoke(args).code == 0);
  CHECK(slurp(a) == slurp(b));
}

TEST_CASE("analyze a point") {
  const auto point = temp("point.json");
  std::ofstream(point) << R"({"x":[1,1],"y":[1],"mu":[],"lambda":[0,0]})";
  const auto r = invoke({"analyze", "--problem", testing::fixture("consensus_qp.json"), "--point", point, "--rho", "10"});
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  const json& pt = j.at("point");
  CHECK(pt.at("regularity").at("licq_ok") == true);
  CHECK(pt.at("regularity").at("sosc_ok") == true);
  CHECK(pt.at("regularity").at("subproblem_sosc_ok") == true);
  for (const auto& [k, v] : pt.at("kkt").items()) CHECK(v.get<double>() <= 1e-10);
}

TEST_CASE("analyze a trace against the multistart reference") {
  const auto trace = temp("an_trace.csv");
  const auto report = temp("an_report.json");
  REQUIRE(invoke({"solve", "--problem", testing::fixture("two_block_quartic.json"), "--rho", "25", "--x0",
               "1.25,-0.66,1.25,-0.66", "--y0", "1.2557", "--lambda0", "3.668,-3.268", "--trace", trace})
              .code == 0);
  const auto r = invoke({"analyze", "--problem", testing::fixture("two_block_quartic.json"), "--trace", trace, "--rho",
                      "25", "--report", report});
  REQUIRE(r.code == 0);
  const json j = json::parse(slurp(report));
  const json& tr = j.at("trace");
  CHECK(tr.at("reference").at("x").at(0).get<double>() == doctest::Approx(1.2507566733));
  const auto& slack = tr.at("lyapunov").at("decrease_slack");
  const auto& V = tr.at("lyapunov").at("V");
  for (std::size_t i = tr.at("lyapunov").at("entry_index").get<std::size_t>(); i < slack.size(); ++i)
    CHECK(slack[i].get<double>() >= -1e-9 * std::max(1.0, V[i].get<double>()));
  for (const auto& e : tr.at("rates")) CHECK(e.at("ratio").get<double>() <= 1 + 1e-9);
}

TEST_CASE("analyze errors and the critical-rho fixture") {
  CHECK(invoke({"analyze", "--problem", testing::fixture("consensus_qp.json")}).code == 1);
  const auto crit = invoke({"analyze", "--problem", testing::fixture("critical_rho_2x2.json"), "--critical-rho"});
  REQUIRE(crit.code == 0);
  CHECK(json::parse(crit.out).at("critical_rho").get<double>() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(invoke({"analyze", "--problem", testing::fixture("critical_rho_2x2.json")}).code == 1);

  // x^2 + 1 = 0 has no real KKT point
  const auto none = temp("no_kkt.json");
  std::ofstream(none)
      << R"({"variables":["x"],"y_variables":["y"],"objective":"x^2","constraints":["x^2 + 1"],"A":[[1]],"B":[[-1]],"b":[0]})";
  const auto trace = temp("no_kkt.csv");
  std::ofstream(trace) << "k,q_norm,r_norm,x:x,y:y,lambda:0,mu:0,V,wall_ms\n1,0,0,0,0,0,0,,\n";
  CHECK(invoke({"analyze", "--problem", none, "--trace", trace, "--rho", "1", "--multistart", "3"}).code == 4);
  CHECK(invoke({"analyze", "--problem", none, "--trace", trace}).code == 1);
}

TEST_CASE("validate reports problems") {
  const auto ok = invoke({"validate", "--problem", testing::fixture("shared_budget.json")});
  CHECK(ok.code == 0);
  CHECK(json::parse(ok.out).at("ok") == true);
  const auto bad = invoke({"validate", "--problem", testing::fixture("rank_deficient_b.json")});
  CHECK(bad.code == 1);
  CHECK(json::parse(bad.out).at("b_full_column_rank") == false);
}
