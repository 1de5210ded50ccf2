#include <algorithm>

#include <gtest/gtest.h>

#include "hybridad/diagram.hpp"
#include "hybridad/errors.hpp"

using namespace hybridad;

namespace {

std::string model(const std::string& name) { return std::string(HYBRIDAD_MODELS_DIR) + "/" + name + ".json"; }

bool mentions(const ValidationReport& r, const std::string& what) {
  return std::any_of(r.violations.begin(), r.violations.end(),
                     [&](const std::string& v) { return v.find(what) != std::string::npos; });
}

Diagram doc(const std::string& blocks, const std::string& links, const std::string& outputs,
            const std::string& params = "{}") {
  return parse_diagram_unchecked(R"({"schema": 1, "name": "t", "params": )" + params + R"(, "blocks": [)" + blocks +
                                 R"(], "links": [)" + links + R"(], "outputs": [)" + outputs + "]}");
}

}  // namespace

TEST(Diagram, FirstOrderModelParses) {
  Diagram d = load_diagram(model("first_order"));
  EXPECT_EQ(d.blocks.size(), 5u);
  EXPECT_TRUE(std::holds_alternative<blocks::Integrator>(d.find("y")->kind));
  EXPECT_TRUE(std::holds_alternative<blocks::Sum>(d.find("err")->kind));
  EXPECT_DOUBLE_EQ(std::get<blocks::Gain>(d.find("rate")->kind).k.eval(d.param_values()), 2.0);
  EXPECT_TRUE(validate(d).ok());
}

TEST(Diagram, ShippedModelsValidate) {
  for (const char* m : {"first_order", "first_order_tf", "first_order_saturated", "second_order", "discrete_loop",
                        "delay"})
    EXPECT_NO_THROW(load_diagram(model(m))) << m;
}

TEST(Diagram, JsonRoundTrip) {
  for (const char* m : {"first_order", "discrete_loop", "delay"}) {
    Diagram d = load_diagram(model(m));
    const std::string once = to_json(d);
    Diagram back = parse_diagram(once);
    EXPECT_EQ(to_json(back), once) << m;
  }
}

TEST(Diagram, EmptyDiagramHasNoOutputs) {
  try {
    parse_diagram(R"({"schema": 1, "name": "e", "params": {}, "blocks": [], "links": [], "outputs": []})");
    FAIL();
  } catch (const ValidationError& e) {
    ASSERT_EQ(e.violations().size(), 1u);
    EXPECT_NE(e.violations()[0].find("no outputs"), std::string::npos);
  }
}

TEST(Diagram, LinkToMissingPortIsSchemaError) {
  try {
    doc(R"({"id": "g", "kind": "Gain", "k": 1}, {"id": "c", "kind": "Constant", "value": 1})",
        R"({"from": "c.1", "to": "g.1"}, {"from": "c.1", "to": "g.3"})", R"({"name": "y", "from": "g.1"})");
    FAIL();
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.path(), "links[1].to");
  }
}

TEST(Diagram, SchemaErrorPaths) {
  auto path_of = [](const std::string& text) {
    try {
      parse_diagram(text);
    } catch (const SchemaError& e) {
      return e.path();
    }
    return std::string("<none>");
  };
  EXPECT_EQ(path_of(R"({"schema": 2, "blocks": []})"), "schema");
  EXPECT_EQ(path_of(R"({"schema": 1, "blocks": [{"id": "a", "kind": "Gain"}]})"), "blocks[0].k");
  EXPECT_EQ(path_of(R"({"schema": 1, "blocks": [{"id": "a", "kind": "Nope"}]})"), "blocks[0].kind");
  EXPECT_EQ(path_of(R"({"schema": 1, "blocks": [{"id": "a", "kind": "Gain", "k": "1+"}]})"), "blocks[0].k");
  EXPECT_EQ(path_of("{not json"), "");
}

TEST(Diagram, AlgebraicLoopNamesCycle) {
  Diagram d = doc(R"({"id": "c", "kind": "Constant", "value": 1}, {"id": "s", "kind": "Sum", "signs": "+-"},
                     {"id": "g", "kind": "Gain", "k": 2})",
                  R"({"from": "c.1", "to": "s.1"}, {"from": "g.1", "to": "s.2"}, {"from": "s.1", "to": "g.1"})",
                  R"({"name": "y", "from": "g.1"})");
  auto r = validate(d);
  EXPECT_TRUE(mentions(r, "algebraic loop: s -> g -> s") || mentions(r, "algebraic loop: g -> s -> g"));
}

TEST(Diagram, LoopThroughIntegratorIsFine) { EXPECT_TRUE(validate(load_diagram(model("first_order"))).ok()); }

TEST(Diagram, ImproperTransferFunction) {
  Diagram d = doc(R"({"id": "u", "kind": "Step"}, {"id": "H", "kind": "TransferFnS", "num": [1, 0, 0], "den": [1, 1]})",
                  R"({"from": "u.1", "to": "H.1"})", R"({"name": "y", "from": "H.1"})");
  EXPECT_TRUE(mentions(validate(d), "improper transfer function H"));
}

TEST(Diagram, OtherViolations) {
  Diagram d = doc(R"({"id": "u", "kind": "Step"}, {"id": "g", "kind": "Gain", "k": "q"},
                     {"id": "s", "kind": "Sum", "signs": "+-"},
                     {"id": "L", "kind": "LookupTable1D", "x": [0, 2, 1], "y": [0, 1, 2]})",
                  R"({"from": "u.1", "to": "g.1"}, {"from": "u.1", "to": "s.1"}, {"from": "g.1", "to": "L.1"})",
                  R"({"name": "y", "from": "s.1"})");
  auto r = validate(d);
  EXPECT_TRUE(mentions(r, "unknown parameter 'q'"));
  EXPECT_TRUE(mentions(r, "input s.2 is not connected"));
  EXPECT_TRUE(mentions(r, "not strictly increasing"));
}

TEST(Diagram, SignalWidths) {
  Diagram d = doc(R"({"id": "a", "kind": "Constant", "value": [1, 2]}, {"id": "b", "kind": "Constant", "value": 3},
                     {"id": "m", "kind": "Mux", "n": 2}, {"id": "x", "kind": "Demux", "n": 3})",
                  R"({"from": "a.1", "to": "m.1"}, {"from": "b.1", "to": "m.2"}, {"from": "m.1", "to": "x.1"})",
                  R"({"name": "y", "from": "x.3"})");
  auto w = signal_widths(d);
  EXPECT_EQ(w.at({"m", 0}), 3);
  EXPECT_EQ(w.at({"x", 2}), 1);
}

TEST(Diagram, SubsystemBodyIsValidated) {
  Diagram d = doc(R"({"id": "u", "kind": "Step"},
                     {"id": "S", "kind": "Subsystem", "diagram": {"params": {}, "blocks": [
                        {"id": "in", "kind": "Inport", "port": 1}, {"id": "g", "kind": "Gain", "k": "k*2"}],
                      "links": [{"from": "in.1", "to": "g.1"}], "outputs": [{"name": "o", "from": "g.1"}]}})",
                  R"({"from": "u.1", "to": "S.1"})", R"({"name": "y", "from": "S.1"})", R"({"k": 1})");
  EXPECT_TRUE(validate(d).ok());
  EXPECT_TRUE(has_feedthrough(*d.find("S")));
}
