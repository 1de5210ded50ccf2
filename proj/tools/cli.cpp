#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "hybridad/agdm.hpp"
#include "hybridad/analysis.hpp"
#include "hybridad/diagram.hpp"
#include "hybridad/errors.hpp"
#include "hybridad/optimize.hpp"
#include "hybridad/sim.hpp"
#include "tables.hpp"

namespace hybridad::cli {

namespace {

struct SimFlags {
  double step = 1e-3, t0 = 0, tf = 1, event_tol = 1e-10, heaviside_a = 1e3;
  std::string method = "rk4";

  void add(CLI::App* app) {
    app->add_option("--step", step, "Integration step (s)")->capture_default_str();
    app->add_option("--t0", t0, "Start time (s)")->capture_default_str();
    app->add_option("--tf", tf, "End time (s)")->capture_default_str();
    app->add_option("--method", method, "midpoint or rk4")->check(CLI::IsMember({"midpoint", "rk4"}))->capture_default_str();
    app->add_option("--event-tol", event_tol, "Event localization tolerance (s)")->capture_default_str();
    app->add_option("--heaviside-a", heaviside_a, "Heaviside smoothing slope")->capture_default_str();
  }
  SimConfig config() const {
    SimConfig c;
    c.method = parse_method(method);
    c.step = step;
    c.t0 = t0;
    c.tf = tf;
    c.event_tol = event_tol;
    c.heaviside_a = heaviside_a;
    check_config(c);
    return c;
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_list(const std::vector<std::string>& raw) {
  std::vector<std::string> out;
  for (const auto& r : raw) {
    std::stringstream ss(r);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) out.push_back(item);
  }
  return out;
}

// name=value overrides of parameter defaults.
void apply_params(Diagram& d, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw Error("--param expects name=value, got '" + o + "'");
    const std::string name = o.substr(0, eq);
    auto it = std::find_if(d.params.begin(), d.params.end(), [&](const auto& p) { return p.first == name; });
    if (it == d.params.end()) throw UnknownParameter(name, d.param_names());
    it->second = std::stod(o.substr(eq + 1));
  }
}

void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write '" + path + "'");
  f << text;
}

std::string csv(const std::vector<double>& t, const std::vector<std::string>& names,
                const std::vector<std::vector<double>>& cols) {
  std::string s = "t";
  for (const auto& n : names) s += "," + n;
  s += "\n";
  for (std::size_t i = 0; i < t.size(); ++i) {
    s += fmt(t[i]);
    for (const auto& c : cols) s += "," + fmt(c[i]);
    s += "\n";
  }
  return s;
}

struct Columns {
  std::vector<double> t;
  std::vector<std::string> names;
  std::vector<std::vector<double>> cols;
};

// Outputs then d<output>/d<theta> for each theta.
Columns sens_sensode(const Diagram& d, const std::vector<std::string>& thetas, const SimConfig& c) {
  const OdeModel base = flatten(d);
  auto tr = integrate(sensitivity_extend(base, thetas), c);
  Columns r;
  r.t = tr.t;
  for (const auto& y : base.output_names) {
    r.names.push_back(y);
    r.cols.push_back(tr.output(y));
  }
  for (const auto& th : thetas)
    for (const auto& y : base.output_names) {
      r.names.push_back(derivative_output_name(y, th));
      r.cols.push_back(tr.output(r.names.back()));
    }
  return r;
}

Columns sens_agdm(const Diagram& d, const std::vector<std::string>& thetas, const SimConfig& c) {
  Columns r;
  std::vector<std::string> outs;
  for (const auto& o : d.outputs) outs.push_back(o.name);
  for (std::size_t k = 0; k < thetas.size(); ++k) {
    auto tr = integrate(flatten(agdm_diff(d, thetas[k])), c);
    if (k == 0) {
      r.t = tr.t;
      for (const auto& y : outs) {
        r.names.push_back(y);
        r.cols.push_back(tr.output(y));
      }
    } else if (tr.t != r.t) {
      throw SimulationError("AGDM runs produced different time grids");
    }
    for (const auto& y : outs) {
      r.names.push_back(derivative_output_name(y, thetas[k]));
      r.cols.push_back(tr.output(r.names.back()));
    }
  }
  return r;
}

int guarded(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const SchemaError& e) {
    err << "schema error: " << e.what() << "\n";
    return kValidation;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kValidation;
  } catch (const ValidationError& e) {
    err << "validation failed:\n";
    for (const auto& v : e.violations()) err << "  " << v << "\n";
    return kValidation;
  } catch (const UnknownParameter& e) {
    err << e.what() << "\n";
    return kValidation;
  } catch (const SimulationError& e) {
    err << "simulation failed: " << e.what() << "\n";
    return kSimulation;
  } catch (const EvalDomainError& e) {
    err << "simulation failed: " << e.what() << "\n";
    return kSimulation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Block-diagram simulation with automatic differentiation"};
  app.require_subcommand(1);
  std::function<int()> action;

  std::string diagram, out_path;
  std::vector<std::string> params, thetas_raw, times_raw;
  SimFlags sim;

  auto* validate_cmd = app.add_subcommand("validate", "Check a diagram and print the report");
  validate_cmd->add_option("diagram", diagram, "Diagram file")->required();
  validate_cmd->callback([&] {
    action = [&] {
      std::ifstream f(diagram);
      if (!f) throw Error("cannot read '" + diagram + "'");
      std::stringstream ss;
      ss << f.rdbuf();
      const Diagram d = parse_diagram_unchecked(ss.str());
      const auto rep = validate(d);
      if (!rep.ok()) throw ValidationError(rep.violations);
      out << "ok: " << d.blocks.size() << " blocks, " << d.links.size() << " links, " << d.outputs.size()
          << " outputs\n";
      for (const auto& w : d.warnings) out << "warning: " << w << "\n";
      return int(kOk);
    };
  });

  auto* simulate_cmd = app.add_subcommand("simulate", "Simulate a diagram and write CSV");
  simulate_cmd->add_option("diagram", diagram, "Diagram file")->required();
  simulate_cmd->add_option("--param", params, "Parameter override name=value");
  simulate_cmd->add_option("--out", out_path, "Output CSV (default stdout)");
  sim.add(simulate_cmd);
  simulate_cmd->callback([&] {
    action = [&] {
      Diagram d = load_diagram(diagram);
      apply_params(d, params);
      emit(integrate(flatten(d), sim.config()).to_csv(), out_path, out);
      return int(kOk);
    };
  });

  std::string theta;
  int order = 1;
  auto* diff_cmd = app.add_subcommand("diff", "Graphic differentiation of a diagram");
  diff_cmd->add_option("diagram", diagram, "Diagram file")->required();
  diff_cmd->add_option("--theta", theta, "Parameter")->required();
  diff_cmd->add_option("--order", order, "1 or 2")->check(CLI::IsMember({1, 2}))->capture_default_str();
  diff_cmd->add_option("--out", out_path, "Output diagram (default stdout)");
  diff_cmd->callback([&] {
    action = [&] {
      Diagram d = load_diagram(diagram);
      for (int k = 0; k < order; ++k) d = agdm_diff(d, theta);
      emit(to_json(d) + "\n", out_path, out);
      std::ostream& summary = out_path.empty() ? err : out;
      summary << d.blocks.size() << " blocks, " << d.links.size() << " links, " << d.outputs.size() << " outputs\n";
      for (const auto& w : d.warnings) summary << "warning: " << w << "\n";
      return int(kOk);
    };
  });

  std::string route = "sensode";
  auto* sens_cmd = app.add_subcommand("sens", "Output sensitivities as CSV");
  sens_cmd->add_option("diagram", diagram, "Diagram file")->required();
  sens_cmd->add_option("--theta", thetas_raw, "Parameters (comma separated)")->required();
  sens_cmd->add_option("--route", route, "agdm, sensode or both")
      ->check(CLI::IsMember({"agdm", "sensode", "both"}))
      ->capture_default_str();
  sens_cmd->add_option("--param", params, "Parameter override name=value");
  sens_cmd->add_option("--out", out_path, "Output CSV (default stdout)");
  sim.add(sens_cmd);
  sens_cmd->callback([&] {
    action = [&] {
      Diagram d = load_diagram(diagram);
      apply_params(d, params);
      const auto thetas = split_list(thetas_raw);
      for (const auto& th : thetas)
        if (!d.has_param(th)) throw UnknownParameter(th, d.param_names());
      const SimConfig c = sim.config();
      if (route == "agdm") {
        auto r = sens_agdm(d, thetas, c);
        emit(csv(r.t, r.names, r.cols), out_path, out);
        return int(kOk);
      }
      auto r = sens_sensode(d, thetas, c);
      if (route == "both") {
        auto a = sens_agdm(d, thetas, c);
        if (a.t != r.t || a.names != r.names) throw SimulationError("routes produced different layouts");
        double worst = 0;
        for (std::size_t k = 0; k < r.cols.size(); ++k)
          for (std::size_t i = 0; i < r.t.size(); ++i) worst = std::max(worst, std::abs(r.cols[k][i] - a.cols[k][i]));
        err << "max discrepancy agdm vs sensode: " << fmt(worst) << "\n";
      }
      emit(csv(r.t, r.names, r.cols), out_path, out);
      return int(kOk);
    };
  });

  std::string cost = "cost", jacobian = "ad";
  double decimate = 0, theta0 = 0.1;
  auto* opt_cmd = app.add_subcommand("optimize", "Minimize the integral of a cost output over theta");
  opt_cmd->add_option("diagram", diagram, "Diagram file")->required();
  opt_cmd->add_option("--theta", theta, "Parameter")->required();
  opt_cmd->add_option("--cost", cost, "Output used as the integrand")->capture_default_str();
  opt_cmd->add_option("--jacobian", jacobian, "ad or fd")->check(CLI::IsMember({"ad", "fd"}))->capture_default_str();
  opt_cmd->add_option("--decimate", decimate, "Integrand sample interval (s), 0 for none")->capture_default_str();
  opt_cmd->add_option("--theta0", theta0, "Initial value")->capture_default_str();
  opt_cmd->add_option("--param", params, "Parameter override name=value");
  opt_cmd->add_option("--out", out_path, "Iterate history CSV");
  sim.add(opt_cmd);
  opt_cmd->callback([&] {
    action = [&] {
      Diagram d = load_diagram(diagram);
      apply_params(d, params);
      OptimizeOptions o;
      o.jacobian = jacobian == "fd" ? OptimizeOptions::Jacobian::fd : OptimizeOptions::Jacobian::ad;
      o.decimate = decimate;
      o.theta0 = theta0;
      o.sim = sim.config();
      const auto r = optimize(d, theta, cost, o);
      std::string hist = "iteration," + theta + ",J,dJ/d" + theta + ",d2J/d" + theta + "2\n";
      for (std::size_t k = 0; k < r.history.size(); ++k) {
        const auto& h = r.history[k];
        hist += std::to_string(k) + "," + fmt(h.theta) + "," + fmt(h.J) + "," + fmt(h.G) + "," + fmt(h.H) + "\n";
      }
      if (!out_path.empty()) emit(hist, out_path, out);
      out << theta << "_opt = " << fmt(r.theta) << "\nJ = " << fmt(r.J) << "\ndJ/d" << theta << " = " << fmt(r.G)
          << "\niterations = " << r.iterations << "\n";
      if (!r.converged) {
        err << "optimization did not converge; iterate history:\n" << hist;
        return int(kOptimization);
      }
      return int(kOk);
    };
  });

  int count = 0;
  bool json = false;
  auto* id_cmd = app.add_subcommand("identify", "Numeric identifiability test");
  id_cmd->add_option("diagram", diagram, "Diagram file")->required();
  id_cmd->add_option("--theta", thetas_raw, "Parameters (comma separated, default all)");
  id_cmd->add_option("--times", times_raw, "Sample times on the step grid (comma separated)");
  id_cmd->add_option("--count", count, "Equispaced times on (t0, tf] when --times is absent");
  id_cmd->add_option("--param", params, "Parameter override name=value");
  id_cmd->add_flag("--json", json, "JSON report");
  sim.add(id_cmd);
  id_cmd->callback([&] {
    action = [&] {
      Diagram d = load_diagram(diagram);
      apply_params(d, params);
      const OdeModel m = flatten(d);
      const auto thetas = split_list(thetas_raw);
      const SimConfig c = sim.config();
      std::vector<double> times;
      for (const auto& s : split_list(times_raw)) times.push_back(std::stod(s));
      if (times.empty()) {
        const int p = static_cast<int>(thetas.empty() ? m.param_names.size() : thetas.size());
        const int k = count > 0 ? count : std::max(1, (p + m.ny() - 1) / std::max(1, m.ny()));
        for (double t : default_times(k, c.tf - c.t0)) times.push_back(c.t0 + t);
      }
      const auto r = identifiability_test(m, times, thetas, c);
      out << (json ? r.json() + "\n" : r.text());
      return int(kOk);
    };
  });

  std::string which;
  auto* table_cmd = app.add_subcommand("table", "Regenerate a numeric table");
  table_cmd->add_option("which", which, "rk4-derivs, newton-sqrt, sequence or warmstart")
      ->required()
      ->check(CLI::IsMember({"rk4-derivs", "newton-sqrt", "sequence", "warmstart"}));
  table_cmd->callback([&] {
    action = [&] {
      if (which == "rk4-derivs")
        out << render_rk4(rk4_table());
      else if (which == "newton-sqrt")
        out << render_newton_sqrt(newton_sqrt_table());
      else if (which == "sequence")
        out << sequence_probe().text();
      else
        out << render_warmstart(warmstart_table());
      return int(kOk);
    };
  });

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? int(kOk) : int(kUsage);
  }
  if (!action) return kUsage;
  return guarded(action, err);
}

}  // namespace hybridad::cli
