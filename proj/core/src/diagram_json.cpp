#include <charconv>
#include <cmath>

#include <nlohmann/json.hpp>

#include "hybridad/diagram.hpp"
#include "hybridad/errors.hpp"

namespace hybridad {

namespace {

using json = nlohmann::ordered_json;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

class Reader {
 public:
  [[noreturn]] static void fail(const std::string& path, const std::string& what) { throw SchemaError(path, what); }

  static const json& field(const json& obj, const std::string& key, const std::string& path) {
    if (!obj.contains(key)) fail(path + "." + key, "missing field");
    return obj.at(key);
  }

  static double number(const json& v, const std::string& path) {
    if (!v.is_number()) fail(path, "expected a number");
    return v.get<double>();
  }

  static double number_or(const json& obj, const std::string& key, double dflt, const std::string& path) {
    return obj.contains(key) ? number(obj.at(key), path + "." + key) : dflt;
  }

  static int integer(const json& v, const std::string& path) {
    if (!v.is_number_integer()) fail(path, "expected an integer");
    return v.get<int>();
  }

  static std::string string(const json& v, const std::string& path) {
    if (!v.is_string()) fail(path, "expected a string");
    return v.get<std::string>();
  }

  static ParamExpr expr(const json& v, const std::string& path) {
    if (v.is_number()) return v.get<double>();
    if (!v.is_string()) fail(path, "expected a number or an expression string");
    try {
      return ParamExpr::parse(v.get<std::string>());
    } catch (const ParseError& e) {
      fail(path, e.what());
    }
  }

  static ParamExpr expr_or(const json& obj, const std::string& key, double dflt, const std::string& path) {
    return obj.contains(key) ? expr(obj.at(key), path + "." + key) : ParamExpr(dflt);
  }

  static ExprList expr_list(const json& v, const std::string& path) {
    if (!v.is_array()) return {expr(v, path)};
    ExprList out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(expr(v[i], path + "[" + std::to_string(i) + "]"));
    return out;
  }

  static ExprMatrix matrix(const json& v, const std::string& path) {
    if (!v.is_array()) fail(path, "expected a matrix (array of rows)");
    ExprMatrix m;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::string p = path + "[" + std::to_string(i) + "]";
      if (!v[i].is_array()) fail(p, "expected a row array");
      m.push_back(expr_list(v[i], p));
      if (m.back().size() != m.front().size()) fail(p, "ragged matrix");
    }
    return m;
  }

  static std::vector<double> numbers(const json& v, const std::string& path) {
    if (!v.is_array()) fail(path, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(v[i], path + "[" + std::to_string(i) + "]"));
    return out;
  }

  static PortRef port(const json& v, const std::string& path) {
    const std::string s = string(v, path);
    const auto dot = s.rfind('.');
    if (dot == std::string::npos || dot == 0) fail(path, "expected \"block.port\", got \"" + s + "\"");
    int p = 0;
    auto [ptr, ec] = std::from_chars(s.data() + dot + 1, s.data() + s.size(), p);
    if (ec != std::errc{} || ptr != s.data() + s.size() || p < 1) fail(path, "bad port number in \"" + s + "\"");
    return {s.substr(0, dot), p - 1};
  }

  static BlockKind kind(const json& b, const std::string& kind, const std::string& path) {
    using namespace blocks;
    if (kind == "Gain") return Gain{expr(field(b, "k", path), path + ".k")};
    if (kind == "Sum") return Sum{b.contains("signs") ? string(b.at("signs"), path + ".signs") : "++"};
    if (kind == "Product") return Product{b.contains("ops") ? string(b.at("ops"), path + ".ops") : "**"};
    if (kind == "Integrator") {
      Integrator in{expr_or(b, "initial", 0.0, path), std::nullopt, ""};
      if (b.contains("saturation")) {
        auto s = numbers(b.at("saturation"), path + ".saturation");
        if (s.size() != 2) fail(path + ".saturation", "expected [lo, hi]");
        in.saturation = std::make_pair(s[0], s[1]);
      }
      if (b.contains("gated_by")) in.gated_by = string(b.at("gated_by"), path + ".gated_by");
      return in;
    }
    if (kind == "TransferFnS")
      return TransferFnS{expr_list(field(b, "num", path), path + ".num"), expr_list(field(b, "den", path), path + ".den")};
    if (kind == "TransferFnZ")
      return TransferFnZ{expr_list(field(b, "num", path), path + ".num"), expr_list(field(b, "den", path), path + ".den"),
                         number(field(b, "sample_time", path), path + ".sample_time")};
    if (kind == "StateSpaceC" || kind == "StateSpaceD") {
      ExprMatrix A = matrix(field(b, "A", path), path + ".A"), B = matrix(field(b, "B", path), path + ".B"),
                 C = matrix(field(b, "C", path), path + ".C"), D = matrix(field(b, "D", path), path + ".D");
      if (kind == "StateSpaceC") return StateSpaceC{A, B, C, D};
      return StateSpaceD{A, B, C, D, number(field(b, "sample_time", path), path + ".sample_time")};
    }
    if (kind == "Fn") {
      try {
        return Fn{ElementaryFn::parse(string(field(b, "fn", path), path + ".fn"))};
      } catch (const DomainError& e) {
        fail(path + ".fn", e.what());
      }
    }
    if (kind == "Switch") return Switch{number_or(b, "threshold", 0.0, path)};
    if (kind == "Saturation")
      return Saturation{number(field(b, "lo", path), path + ".lo"), number(field(b, "hi", path), path + ".hi")};
    if (kind == "SaturationDynamic") return SaturationDynamic{};
    if (kind == "LookupTable1D")
      return LookupTable1D{numbers(field(b, "x", path), path + ".x"), numbers(field(b, "y", path), path + ".y")};
    if (kind == "LookupDerivative1D") {
      LookupDerivative1D l{numbers(field(b, "x", path), path + ".x"), numbers(field(b, "y", path), path + ".y"),
                           LookupDerivative1D::Mode::slope, false};
      if (b.contains("mode")) {
        const std::string m = string(b.at("mode"), path + ".mode");
        if (m == "fd") l.mode = LookupDerivative1D::Mode::fd;
        else if (m != "slope") fail(path + ".mode", "expected \"slope\" or \"fd\"");
      }
      if (b.contains("central")) {
        if (!b.at("central").is_boolean()) fail(path + ".central", "expected a boolean");
        l.central = b.at("central").get<bool>();
      }
      return l;
    }
    if (kind == "Constant") return Constant{expr_list(field(b, "value", path), path + ".value")};
    if (kind == "Step")
      return Step{number_or(b, "time", 0.0, path), expr_or(b, "initial", 0.0, path), expr_or(b, "level", 1.0, path)};
    if (kind == "TransportDelay") {
      TransportDelay t{expr(field(b, "delay", path), path + ".delay"), expr_or(b, "prehistory", 0.0, path), std::nullopt};
      if (b.contains("slope")) t.slope = expr(b.at("slope"), path + ".slope");
      return t;
    }
    if (kind == "Mux") return Mux{integer(field(b, "n", path), path + ".n")};
    if (kind == "Demux") return Demux{integer(field(b, "n", path), path + ".n")};
    if (kind == "UnitDelay")
      return UnitDelay{expr_or(b, "initial", 0.0, path), number(field(b, "sample_time", path), path + ".sample_time")};
    if (kind == "Subsystem") {
      auto body = std::make_shared<Diagram>(diagram(field(b, "diagram", path), path + ".diagram", false));
      return Subsystem{std::move(body)};
    }
    if (kind == "Inport") return Inport{integer(field(b, "port", path), path + ".port") - 1};
    fail(path + ".kind", "unknown block kind \"" + kind + "\"");
  }

  static Diagram diagram(const json& doc, const std::string& root, bool top) {
    if (!doc.is_object()) fail(root, "expected an object");
    auto path = [&](const std::string& p) { return root.empty() ? p : root + "." + p; };
    Diagram d;
    if (top) {
      const json& schema = field(doc, "schema", root);
      if (!schema.is_number_integer() || schema.get<int>() != 1) fail(path("schema"), "unsupported schema version");
    } else if (doc.contains("schema") && (!doc.at("schema").is_number_integer() || doc.at("schema").get<int>() != 1)) {
      fail(path("schema"), "unsupported schema version");
    }
    if (doc.contains("name")) d.name = string(doc.at("name"), path("name"));
    if (doc.contains("params")) {
      const json& ps = doc.at("params");
      if (!ps.is_object()) fail(path("params"), "expected an object of name: default");
      for (auto it = ps.begin(); it != ps.end(); ++it)
        d.params.emplace_back(it.key(), number(it.value(), path("params." + it.key())));
    }
    const json& bl = doc.contains("blocks") ? doc.at("blocks") : json::array();
    if (!bl.is_array()) fail(path("blocks"), "expected an array");
    for (std::size_t i = 0; i < bl.size(); ++i) {
      const std::string p = path("blocks[" + std::to_string(i) + "]");
      const json& b = bl[i];
      if (!b.is_object()) fail(p, "expected an object");
      Block blk;
      blk.id = string(field(b, "id", p), p + ".id");
      if (blk.id.empty()) fail(p + ".id", "empty block id");
      if (d.find(blk.id)) fail(p + ".id", "duplicate block id \"" + blk.id + "\"");
      blk.kind = kind(b, string(field(b, "kind", p), p + ".kind"), p);
      if (b.contains("annotation")) blk.annotation = string(b.at("annotation"), p + ".annotation");
      d.blocks.push_back(std::move(blk));
    }
    auto check_port = [&](const PortRef& r, bool input, const std::string& p) {
      const Block* b = d.find(r.block);
      if (!b) fail(p, "unknown block \"" + r.block + "\"");
      const int n = input ? num_inputs(*b) : num_outputs(*b);
      if (r.port >= n)
        fail(p, "block \"" + r.block + "\" has no " + (input ? "input" : "output") + " port " + std::to_string(r.port + 1));
    };
    const json& ls = doc.contains("links") ? doc.at("links") : json::array();
    if (!ls.is_array()) fail(path("links"), "expected an array");
    for (std::size_t i = 0; i < ls.size(); ++i) {
      const std::string p = path("links[" + std::to_string(i) + "]");
      if (!ls[i].is_object()) fail(p, "expected an object");
      Link l{port(field(ls[i], "from", p), p + ".from"), port(field(ls[i], "to", p), p + ".to")};
      check_port(l.from, false, p + ".from");
      check_port(l.to, true, p + ".to");
      d.links.push_back(l);
    }
    const json& os = doc.contains("outputs") ? doc.at("outputs") : json::array();
    if (!os.is_array()) fail(path("outputs"), "expected an array");
    for (std::size_t i = 0; i < os.size(); ++i) {
      const std::string p = path("outputs[" + std::to_string(i) + "]");
      if (!os[i].is_object()) fail(p, "expected an object");
      DiagramOutput o{string(field(os[i], "name", p), p + ".name"), port(field(os[i], "from", p), p + ".from")};
      check_port(o.from, false, p + ".from");
      d.outputs.push_back(o);
    }
    if (doc.contains("warnings")) {
      const json& ws = doc.at("warnings");
      if (!ws.is_array()) fail(path("warnings"), "expected an array");
      for (std::size_t i = 0; i < ws.size(); ++i) d.warnings.push_back(string(ws[i], path("warnings[" + std::to_string(i) + "]")));
    }
    return d;
  }
};

json expr_json(const ParamExpr& e) {
  if (auto c = e.constant_value()) return *c;
  return e.str();
}

json list_json(const ExprList& l) {
  json a = json::array();
  for (const auto& e : l) a.push_back(expr_json(e));
  return a;
}

json matrix_json(const ExprMatrix& m) {
  json a = json::array();
  for (const auto& row : m) a.push_back(list_json(row));
  return a;
}

std::string port_str(const PortRef& p) { return p.block + "." + std::to_string(p.port + 1); }

json diagram_json(const Diagram& d, bool top);

json block_json(const Block& b) {
  using namespace blocks;
  json j;
  j["id"] = b.id;
  j["kind"] = kind_name(b.kind);
  std::visit(overloaded{
                 [&](const Gain& g) { j["k"] = expr_json(g.k); },
                 [&](const Sum& s) { j["signs"] = s.signs; },
                 [&](const Product& p) { j["ops"] = p.ops; },
                 [&](const Integrator& in) {
                   j["initial"] = expr_json(in.initial);
                   if (in.saturation) j["saturation"] = {in.saturation->first, in.saturation->second};
                   if (!in.gated_by.empty()) j["gated_by"] = in.gated_by;
                 },
                 [&](const TransferFnS& t) {
                   j["num"] = list_json(t.num);
                   j["den"] = list_json(t.den);
                 },
                 [&](const TransferFnZ& t) {
                   j["num"] = list_json(t.num);
                   j["den"] = list_json(t.den);
                   j["sample_time"] = t.sample_time;
                 },
                 [&](const StateSpaceC& s) {
                   j["A"] = matrix_json(s.A);
                   j["B"] = matrix_json(s.B);
                   j["C"] = matrix_json(s.C);
                   j["D"] = matrix_json(s.D);
                 },
                 [&](const StateSpaceD& s) {
                   j["A"] = matrix_json(s.A);
                   j["B"] = matrix_json(s.B);
                   j["C"] = matrix_json(s.C);
                   j["D"] = matrix_json(s.D);
                   j["sample_time"] = s.sample_time;
                 },
                 [&](const Fn& f) { j["fn"] = f.fn.name(); },
                 [&](const Switch& s) { j["threshold"] = s.threshold; },
                 [&](const Saturation& s) {
                   j["lo"] = s.lo;
                   j["hi"] = s.hi;
                 },
                 [&](const SaturationDynamic&) {},
                 [&](const LookupTable1D& l) {
                   j["x"] = l.x;
                   j["y"] = l.y;
                 },
                 [&](const LookupDerivative1D& l) {
                   j["x"] = l.x;
                   j["y"] = l.y;
                   j["mode"] = l.mode == LookupDerivative1D::Mode::fd ? "fd" : "slope";
                   if (l.central) j["central"] = true;
                 },
                 [&](const Constant& c) {
                   if (c.value.size() == 1) j["value"] = expr_json(c.value[0]);
                   else j["value"] = list_json(c.value);
                 },
                 [&](const Step& s) {
                   j["time"] = s.time;
                   j["initial"] = expr_json(s.initial);
                   j["level"] = expr_json(s.level);
                 },
                 [&](const TransportDelay& t) {
                   j["delay"] = expr_json(t.delay);
                   j["prehistory"] = expr_json(t.prehistory);
                   if (t.slope) j["slope"] = expr_json(*t.slope);
                 },
                 [&](const Mux& m) { j["n"] = m.n; },
                 [&](const Demux& m) { j["n"] = m.n; },
                 [&](const UnitDelay& u) {
                   j["initial"] = expr_json(u.initial);
                   j["sample_time"] = u.sample_time;
                 },
                 [&](const Subsystem& s) { j["diagram"] = diagram_json(*s.body, false); },
                 [&](const Inport& p) { j["port"] = p.index + 1; },
             },
             b.kind);
  if (!b.annotation.empty()) j["annotation"] = b.annotation;
  return j;
}

json diagram_json(const Diagram& d, bool top) {
  json j;
  if (top) j["schema"] = 1;
  if (!d.name.empty() || top) j["name"] = d.name;
  json ps = json::object();
  for (const auto& [k, v] : d.params) ps[k] = v;
  j["params"] = ps;
  json bl = json::array();
  for (const auto& b : d.blocks) bl.push_back(block_json(b));
  j["blocks"] = bl;
  json ls = json::array();
  for (const auto& l : d.links) ls.push_back({{"from", port_str(l.from)}, {"to", port_str(l.to)}});
  j["links"] = ls;
  json os = json::array();
  for (const auto& o : d.outputs) os.push_back({{"name", o.name}, {"from", port_str(o.from)}});
  j["outputs"] = os;
  if (!d.warnings.empty()) j["warnings"] = d.warnings;
  return j;
}

}  // namespace

Diagram parse_diagram_unchecked(const std::string& document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw SchemaError("", std::string("malformed JSON: ") + e.what());
  }
  return Reader::diagram(doc, "", true);
}

Diagram parse_diagram(const std::string& document) {
  Diagram d = parse_diagram_unchecked(document);
  require_valid(d);
  return d;
}

std::string to_json(const Diagram& d, int indent) { return diagram_json(d, true).dump(indent) + "\n"; }

}  // namespace hybridad
