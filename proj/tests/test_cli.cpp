#include <cstdio>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "cli.hpp"
#include "hybridad/diagram.hpp"
#include "tables.hpp"

using namespace hybridad;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string model(const std::string& name) { return std::string(HYBRIDAD_MODELS_DIR) + "/" + name; }

std::string temp_file(const std::string& name, const std::string& content) {
  const std::string path = ::testing::TempDir() + name;
  std::ofstream(path) << content;
  return path;
}

}  // namespace

TEST(Cli, ValidateOk) {
  auto r = run({"validate", model("first_order.json")});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("ok: 5 blocks"), std::string::npos);
}

TEST(Cli, ValidateReportsViolations) {
  const auto path = temp_file("bad.json", R"({"schema": 1, "name": "bad", "params": {},
    "blocks": [{"id": "g", "kind": "Gain", "k": 1}],
    "links": [{"from": "g.1", "to": "g.1"}],
    "outputs": [{"name": "y", "from": "g.1"}]})");
  auto r = run({"validate", path});
  EXPECT_EQ(r.code, cli::kValidation);
  EXPECT_NE(r.err.find("validation failed"), std::string::npos);
}

TEST(Cli, SchemaErrorIsValidationExit) {
  const auto path = temp_file("broken.json", "{\"schema\": 2}");
  EXPECT_EQ(run({"simulate", path}).code, cli::kValidation);
}

TEST(Cli, UnknownParameterNamesAvailable) {
  auto r = run({"diff", model("first_order.json"), "--theta", "nope"});
  EXPECT_EQ(r.code, cli::kValidation);
  EXPECT_NE(r.err.find("k, tau"), std::string::npos);
  EXPECT_EQ(run({"simulate", model("first_order.json"), "--param", "zz=1"}).code, cli::kValidation);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({}).code, cli::kUsage);
  EXPECT_EQ(run({"table", "nothing"}).code, cli::kUsage);
  EXPECT_EQ(run({"diff", model("first_order.json"), "--theta", "tau", "--order", "3"}).code, cli::kUsage);
  EXPECT_EQ(run({"--help"}).code, cli::kOk);
}

TEST(Cli, SimulationFailureExit) {
  // log of a decreasing state leaves its domain.
  const auto path = temp_file("log.json", R"({"schema": 1, "name": "log", "params": {},
    "blocks": [{"id": "c", "kind": "Constant", "value": [-1]},
               {"id": "x", "kind": "Integrator", "initial": 0.5},
               {"id": "l", "kind": "Fn", "fn": "log"}],
    "links": [{"from": "c.1", "to": "x.1"}, {"from": "x.1", "to": "l.1"}],
    "outputs": [{"name": "l", "from": "l.1"}]})");
  auto r = run({"simulate", path, "--step", "0.01", "--tf", "1"});
  EXPECT_EQ(r.code, cli::kSimulation);
  EXPECT_NE(r.err.find("at t="), std::string::npos);
}

TEST(Cli, BadConfigIsUsage) {
  EXPECT_EQ(run({"simulate", model("first_order.json"), "--step", "-1"}).code, cli::kUsage);
}

TEST(Cli, SimulateIsDeterministic) {
  auto a = run({"simulate", model("second_order.json"), "--step", "0.01", "--tf", "2"});
  auto b = run({"simulate", model("second_order.json"), "--step", "0.01", "--tf", "2"});
  EXPECT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(a.out.rfind("t,", 0), 0u);
}

TEST(Cli, SensRoutesAgree) {
  auto r = run({"sens", model("first_order.json"), "--theta", "k,tau", "--route", "both", "--tf", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("t,y,dy/dk,dy/dtau"), std::string::npos);
  const auto pos = r.err.find("max discrepancy agdm vs sensode: ");
  ASSERT_NE(pos, std::string::npos);
  EXPECT_LE(std::stod(r.err.substr(pos + 33)), 1e-9);
}

TEST(Cli, SensIndependentParameterGivesZeroColumn) {
  const auto path = temp_file("indep.json", R"({"schema": 1, "name": "indep", "params": {"a": 2, "b": 3},
    "blocks": [{"id": "c", "kind": "Constant", "value": ["a"]}, {"id": "x", "kind": "Integrator", "initial": 0}],
    "links": [{"from": "c.1", "to": "x.1"}],
    "outputs": [{"name": "x", "from": "x.1"}]})");
  for (const char* route : {"agdm", "sensode"}) {
    auto r = run({"sens", path, "--theta", "b", "--route", route, "--step", "0.5", "--tf", "1"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out, "t,x,dx/db\n0,0,0\n0.5,1,0\n1,2,0\n") << route;
  }
}

TEST(Cli, DiffRoundTrips) {
  const std::string out = ::testing::TempDir() + "d2.json";
  auto r = run({"diff", model("first_order.json"), "--theta", "tau", "--order", "2", "--out", out});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("blocks"), std::string::npos);
  const Diagram d = load_diagram(out);
  EXPECT_NE(d.output("d2y/dtau2"), nullptr);
  EXPECT_EQ(run({"validate", out}).code, 0);
}

TEST(Cli, OptimizeReportsOptimum) {
  auto r = run({"optimize", model("second_order_cost.json"), "--theta", "zeta", "--step", "0.01", "--tf", "10"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto pos = r.out.find("zeta_opt = ");
  ASSERT_NE(pos, std::string::npos);
  EXPECT_NEAR(std::stod(r.out.substr(pos + 11)), 0.7071, 5e-3);
}

TEST(Cli, OptimizeNonConvergenceExit) {
  // J = -theta has no stationary point: the iterate runs into the upper bound.
  const auto path = temp_file("lin.json", R"({"schema": 1, "name": "lin", "params": {"theta": 1},
    "blocks": [{"id": "c", "kind": "Constant", "value": ["-theta"]}],
    "links": [],
    "outputs": [{"name": "cost", "from": "c.1"}]})");
  auto r = run({"optimize", path, "--theta", "theta", "--step", "0.5", "--tf", "1"});
  EXPECT_EQ(r.code, cli::kOptimization);
  EXPECT_NE(r.err.find("iterate history"), std::string::npos);
}

TEST(Cli, IdentifyJson) {
  auto r = run({"identify", model("first_order.json"), "--theta", "k,tau", "--times", "0.5,1", "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("\"identifiable+observable\""), std::string::npos);
}

TEST(Cli, Tables) {
  auto r = run({"table", "rk4-derivs"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("RK4,-1,2,-6,24,-115,600,-3438.75,19530"), std::string::npos);
  EXPECT_NE(r.out.find("Midpoint,-1,2,-1.5,0,0"), std::string::npos);
  r = run({"table", "newton-sqrt"});
  EXPECT_NE(r.out.find("-0.1360827546"), std::string::npos);
  EXPECT_EQ(run({"table", "sequence"}).code, 0);
  EXPECT_EQ(run({"table", "warmstart"}).code, 0);
}
