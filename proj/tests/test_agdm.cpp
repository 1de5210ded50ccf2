#include <gtest/gtest.h>

#include "hybridad/agdm.hpp"
#include "hybridad/errors.hpp"

using namespace hybridad;

namespace {

std::string model(const std::string& name) { return std::string(HYBRIDAD_MODELS_DIR) + "/" + name + ".json"; }

Diagram doc(const std::string& blocks, const std::string& links, const std::string& outputs,
            const std::string& params = "{}") {
  return parse_diagram(R"({"schema": 1, "name": "t", "params": )" + params + R"(, "blocks": [)" + blocks +
                       R"(], "links": [)" + links + R"(], "outputs": [)" + outputs + "]}");
}

double ev(const ParamExpr& e, const ParamValues& p) { return e.eval(p); }

}  // namespace

TEST(Agdm, Naming) {
  EXPECT_EQ(derivative_block_name("y", "tau"), "d(y)/d(tau)");
  EXPECT_EQ(derivative_block_name("d(y)/d(tau)", "tau"), "d2(y)/d(tau)2");
  EXPECT_EQ(derivative_block_name("d(y)/d(tau)", "k"), "d(d(y)/d(tau))/d(k)");
  EXPECT_EQ(derivative_output_name("y", "tau"), "dy/dtau");
  EXPECT_EQ(derivative_output_name("dy/dtau", "tau"), "d2y/dtau2");
  EXPECT_EQ(derivative_output_name("dy/dtau", "k"), "d(dy/dtau)/dk");
}

TEST(Agdm, UnknownParameterListsAvailable) {
  Diagram d = load_diagram(model("first_order"));
  try {
    agdm_diff(d, "omega");
    FAIL();
  } catch (const UnknownParameter& e) {
    EXPECT_NE(std::string(e.what()).find("tau"), std::string::npos);
  }
}

TEST(Agdm, FirstOrderStructure) {
  Diagram d = load_diagram(model("first_order"));
  Diagram a = agdm_diff(d, "tau");
  EXPECT_TRUE(validate(a).ok());
  ASSERT_EQ(a.outputs.size(), 2u);
  EXPECT_EQ(a.outputs[1].name, "dy/dtau");
  EXPECT_EQ(a.outputs[1].from.block, "d(y)/d(tau)");
  // The step and k*u do not depend on tau: pruned, and the error sum
  // keeps only the feedback term.
  EXPECT_EQ(a.find("d(u)/d(tau)"), nullptr);
  EXPECT_EQ(a.find("d(ku)/d(tau)"), nullptr);
  EXPECT_EQ(std::get<blocks::Sum>(a.find("d(err)/d(tau)")->kind).signs, "-");
  // 1/tau gains a source term d(1/tau)/dtau * err.
  const auto* src = a.find("d(rate)/d(tau)[2]");
  ASSERT_NE(src, nullptr);
  EXPECT_DOUBLE_EQ(ev(std::get<blocks::Gain>(src->kind).k, d.param_values()), -4.0);
  EXPECT_EQ(src->annotation, "d/dtau");
  // The original is untouched.
  for (const auto& b : d.blocks) EXPECT_TRUE(a.find(b.id)->annotation.empty());
}

TEST(Agdm, IndependentParameterPrunesEverything) {
  Diagram d = load_diagram(model("first_order"));
  d.params.push_back({"w", 3.0});
  Diagram a = agdm_diff(d, "w");
  for (const auto& b : a.blocks)
    if (!b.annotation.empty()) {
      EXPECT_EQ(b.id, "zero");
      EXPECT_TRUE(std::holds_alternative<blocks::Constant>(b.kind));
    }
  EXPECT_EQ(a.outputs[1].from.block, "zero");
  EXPECT_TRUE(validate(a).ok());
}

TEST(Agdm, UnprunedKeepsFullDuplicate) {
  Diagram d = load_diagram(model("first_order"));
  AgdmOptions o;
  o.prune = false;
  Diagram a = agdm_diff(d, "k", o);
  for (const auto& b : d.blocks) EXPECT_NE(a.find(derivative_block_name(b.id, "k")), nullptr) << b.id;
  // Gain(1/tau) is independent of k: an identical copy.
  EXPECT_TRUE(same(std::get<blocks::Gain>(a.find("d(rate)/d(k)")->kind).k, ParamExpr::parse("1/tau")));
}

TEST(Agdm, SecondOrderNaming) {
  Diagram d = load_diagram(model("first_order"));
  Diagram a2 = agdm_diff(agdm_diff(d, "tau"), "tau");
  EXPECT_TRUE(validate(a2).ok());
  EXPECT_NE(a2.output("d2y/dtau2"), nullptr);
  EXPECT_NE(a2.find("d2(y)/d(tau)2"), nullptr);
}

TEST(Agdm, TransformedDiagramRoundTrips) {
  Diagram a = agdm_diff(load_diagram(model("discrete_loop")), "K");
  const std::string text = to_json(a);
  Diagram back = parse_diagram(text);
  EXPECT_EQ(to_json(back), text);
}

TEST(Agdm, SwitchCopyTestsOriginalSignal) {
  Diagram d = doc(R"({"id": "u", "kind": "Step", "level": "p"}, {"id": "c", "kind": "Constant", "value": 0.5},
                     {"id": "n", "kind": "Gain", "k": "-p"}, {"id": "s", "kind": "Switch", "threshold": 0.2})",
                  R"({"from": "u.1", "to": "s.1"}, {"from": "c.1", "to": "s.2"}, {"from": "u.1", "to": "n.1"},
                     {"from": "n.1", "to": "s.3"})",
                  R"({"name": "y", "from": "s.1"})", R"({"p": 2})");
  Diagram a = agdm_diff(d, "p");
  auto cond = a.driver({"d(s)/d(p)", 1});
  ASSERT_TRUE(cond);
  EXPECT_EQ(cond->block, "c");
  EXPECT_EQ(a.driver({"d(s)/d(p)", 0})->block, "d(u)/d(p)");
}

TEST(Agdm, QuotientRuleForDivision) {
  Diagram d = doc(R"({"id": "a", "kind": "Step", "level": "p"}, {"id": "b", "kind": "Step", "level": "p*p"},
                     {"id": "q", "kind": "Product", "ops": "*/"})",
                  R"({"from": "a.1", "to": "q.1"}, {"from": "b.1", "to": "q.2"})", R"({"name": "y", "from": "q.1"})",
                  R"({"p": 2})");
  Diagram a = agdm_diff(d, "p");
  EXPECT_EQ(std::get<blocks::Sum>(a.find("d(q)/d(p)")->kind).signs, "+-");
  EXPECT_EQ(std::get<blocks::Product>(a.find("d(q)/d(p)[2]")->kind).ops, "**//");
  EXPECT_EQ(std::get<blocks::Product>(a.find("d(q)/d(p)[1]")->kind).ops, "*/");
}

TEST(Agdm, NonlinearBlockUsesChainRule) {
  Diagram d = doc(R"({"id": "u", "kind": "Step", "level": "p"}, {"id": "f", "kind": "Fn", "fn": "sin"})",
                  R"({"from": "u.1", "to": "f.1"})", R"({"name": "y", "from": "f.1"})", R"({"p": 2})");
  Diagram a = agdm_diff(d, "p");
  EXPECT_EQ(std::get<blocks::Product>(a.find("d(f)/d(p)")->kind).ops, "**");
  auto fp = a.driver({"d(f)/d(p)", 1});
  ASSERT_TRUE(fp);
  EXPECT_EQ(std::get<blocks::Fn>(a.find(fp->block)->kind).fn, ElementaryFn::of(ElementaryFn::Kind::cos));
  EXPECT_EQ(a.driver({fp->block, 0})->block, "u");
}

TEST(Agdm, LookupFdModeWarns) {
  Diagram d = doc(R"({"id": "u", "kind": "Step", "level": "p"},
                     {"id": "L", "kind": "LookupTable1D", "x": [0, 1, 2], "y": [0, 1, 4]})",
                  R"({"from": "u.1", "to": "L.1"})", R"({"name": "y", "from": "L.1"})", R"({"p": 2})");
  EXPECT_TRUE(agdm_diff(d, "p").warnings.empty());
  AgdmOptions o;
  o.lookup_mode = blocks::LookupDerivative1D::Mode::fd;
  Diagram a = agdm_diff(d, "p", o);
  ASSERT_EQ(a.warnings.size(), 1u);
  EXPECT_EQ(a.warnings[0].rfind("M5", 0), 0u);
}

TEST(Agdm, DelayParameterRoutedToSlopeChannel) {
  Diagram a = agdm_diff(load_diagram(model("delay")), "h");
  const auto& td = std::get<blocks::TransportDelay>(a.find("d(xd)/d(h)")->kind);
  ASSERT_TRUE(td.slope);
  EXPECT_TRUE(td.slope->is_one());
  EXPECT_EQ(a.driver({"d(xd)/d(h)", 1})->block, "x");
  EXPECT_FALSE(a.warnings.empty());
}

TEST(Agdm, SubsystemWidensPorts) {
  Diagram d = doc(R"({"id": "u", "kind": "Step"},
                     {"id": "S", "kind": "Subsystem", "diagram": {"params": {}, "blocks": [
                        {"id": "in", "kind": "Inport", "port": 1}, {"id": "g", "kind": "Gain", "k": "k*2"}],
                      "links": [{"from": "in.1", "to": "g.1"}], "outputs": [{"name": "o", "from": "g.1"}]}})",
                  R"({"from": "u.1", "to": "S.1"})", R"({"name": "y", "from": "S.1"})", R"({"k": 1})");
  AgdmOptions o;
  o.prune = false;
  Diagram a = agdm_diff(d, "k", o);
  const auto& body = *std::get<blocks::Subsystem>(a.find("d(S)/d(k)")->kind).body;
  EXPECT_EQ(body.num_inports(), 2);
  ASSERT_EQ(body.outputs.size(), 1u);
  EXPECT_EQ(body.outputs[0].name, "do/dk");
  EXPECT_EQ(std::get<blocks::Inport>(body.find("d(in)/d(k)")->kind).index, 1);
  EXPECT_TRUE(validate(a).ok());
}

TEST(TfParamDerivative, FirstOrderWrtTau) {
  ExprList num{ParamExpr::param("k")}, den{ParamExpr::param("tau"), 1.0};
  auto [n, dd] = tf_param_derivative(num, den, "tau");
  ParamValues p{{"k", 1.5}, {"tau", 0.5}};
  ASSERT_EQ(n.size(), 2u);
  EXPECT_DOUBLE_EQ(n[0].eval(p), -1.5);
  EXPECT_TRUE(n[1].is_zero());
  ASSERT_EQ(dd.size(), 3u);
  EXPECT_DOUBLE_EQ(dd[0].eval(p), 0.25);
  EXPECT_DOUBLE_EQ(dd[1].eval(p), 1.0);
  EXPECT_DOUBLE_EQ(dd[2].eval(p), 1.0);
}

TEST(TfParamDerivative, LinearInK) {
  ExprList num{ParamExpr::param("k")}, den{ParamExpr::param("tau"), 1.0};
  auto [n, dd] = tf_param_derivative(num, den, "k");
  ASSERT_EQ(n.size(), 1u);
  EXPECT_TRUE(n[0].is_one());
  EXPECT_TRUE(same(dd[0], den[0]));
}

TEST(TfParamDerivative, IndependentIsZero) {
  ExprList num{1.0}, den{1.0, 2.0};
  auto [n, dd] = tf_param_derivative(num, den, "k");
  for (const auto& c : n) EXPECT_TRUE(c.is_zero());
}

TEST(SsAugment, FirstOrderBlocks) {
  auto P = [](const char* s) { return ParamExpr::parse(s); };
  StateSpaceMatrices m{{{P("-1/tau")}}, {{P("k/tau")}}, {{1.0}}, {{0.0}}};
  auto a = ss_augment(m, "tau");
  ParamValues p{{"k", 1}, {"tau", 0.5}};
  ASSERT_EQ(a.A.size(), 2u);
  EXPECT_DOUBLE_EQ(a.A[1][0].eval(p), 4.0);
  EXPECT_DOUBLE_EQ(a.A[1][1].eval(p), -2.0);
  EXPECT_TRUE(a.A[0][1].is_zero());
  EXPECT_DOUBLE_EQ(a.B[1][0].eval(p), -4.0);
  EXPECT_TRUE(a.C[1][0].is_zero());
  EXPECT_TRUE(a.C[1][1].is_one());
}

TEST(SsAugment, IndependentHasZeroBlocks) {
  StateSpaceMatrices m{{{1.0, 2.0}, {3.0, 4.0}}, {{1.0}, {0.0}}, {{1.0, 0.0}}, {{0.0}}};
  auto a = ss_augment(m, "k");
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) EXPECT_TRUE(a.A[2 + i][j].is_zero());
}

TEST(SsAugment, DimensionMismatch) {
  StateSpaceMatrices m{{{1.0, 2.0}}, {{1.0}}, {{1.0}}, {{0.0}}};
  EXPECT_THROW(ss_augment(m, "k"), DimensionMismatch);
}

TEST(PruneZero, SumArityReduced) {
  Diagram d = doc(R"({"id": "z", "kind": "Constant", "value": 0}, {"id": "u", "kind": "Step"},
                     {"id": "s", "kind": "Sum", "signs": "+-+"}, {"id": "g", "kind": "Gain", "k": 3})",
                  R"({"from": "u.1", "to": "s.1"}, {"from": "z.1", "to": "g.1"}, {"from": "g.1", "to": "s.2"},
                     {"from": "u.1", "to": "s.3"})",
                  R"({"name": "y", "from": "s.1"})");
  Diagram p = prune_zero(d);
  EXPECT_EQ(std::get<blocks::Sum>(p.find("s")->kind).signs, "++");
  EXPECT_EQ(p.find("g"), nullptr);
  EXPECT_EQ(p.find("z"), nullptr);
  EXPECT_TRUE(validate(p).ok());
}

TEST(PruneZero, ZeroLoopThroughIntegratorRemoved) {
  Diagram d = doc(R"({"id": "i", "kind": "Integrator", "initial": 0}, {"id": "g", "kind": "Gain", "k": -1})",
                  R"({"from": "i.1", "to": "g.1"}, {"from": "g.1", "to": "i.1"})", R"({"name": "y", "from": "i.1"})");
  Diagram p = prune_zero(d);
  ASSERT_EQ(p.blocks.size(), 1u);
  EXPECT_EQ(p.blocks[0].id, "zero");
  EXPECT_EQ(p.outputs[0].from.block, "zero");
}
