#include "hybridad/optimize.hpp"

#include <algorithm>
#include <cmath>

#include "hybridad/agdm.hpp"
#include "hybridad/errors.hpp"

namespace hybridad {

Diagram cost_diagram(const Diagram& d, const std::string& integrand, double decimate) {
  const DiagramOutput* out = d.output(integrand);
  if (!out) throw ValidationError({"cost integrand '" + integrand + "' is not an output"});
  if (d.output(kCostOutput)) throw ValidationError({std::string("output '") + kCostOutput + "' already exists"});
  if (decimate < 0) throw Error("decimate must be >= 0");
  Diagram c = d;
  PortRef src = out->from;
  if (decimate > 0) {
    c.blocks.push_back({"cost_hold", blocks::TransferFnZ{{ParamExpr(1.0)}, {ParamExpr(1.0)}, decimate}, ""});
    c.links.push_back({src, {"cost_hold", 0}});
    src = {"cost_hold", 0};
  }
  c.blocks.push_back({"cost_J", blocks::Integrator{ParamExpr(0.0), std::nullopt, ""}, ""});
  c.links.push_back({src, {"cost_J", 0}});
  c.outputs.push_back({kCostOutput, {"cost_J", 0}});
  require_valid(c);
  return c;
}

namespace {

double final_value(const OdeModel& m, const SimConfig& c, int col) {
  auto tr = integrate(m, c);
  return tr.y.back()[static_cast<std::size_t>(col)];
}

}  // namespace

OptimizeResult optimize(const Diagram& d, const std::string& theta, const std::string& integrand,
                        const OptimizeOptions& o) {
  if (!d.has_param(theta)) throw UnknownParameter(theta, d.param_names());
  if (!(o.lo < o.hi) || !(o.tol > 0) || !(o.fd_eps_rel > 0) || !(o.max_step > 0))
    throw Error("invalid optimizer options");
  check_config(o.sim);
  const Diagram cost = cost_diagram(d, integrand, o.decimate);
  const bool ad = o.jacobian == OptimizeOptions::Jacobian::ad;
  OdeModel m = flatten(ad ? agdm_diff(agdm_diff(cost, theta), theta) : cost);
  const int jcol = m.output_index(kCostOutput);
  const int gcol = ad ? m.output_index(derivative_output_name(kCostOutput, theta)) : -1;
  const int hcol = ad ? m.output_index(derivative_output_name(derivative_output_name(kCostOutput, theta), theta)) : -1;

  auto J = [&](double th) {
    m.set_param(theta, th);
    return final_value(m, o.sim, jcol);
  };
  auto evaluate = [&](double th) -> OptimizeIterate {
    if (ad) {
      m.set_param(theta, th);
      auto tr = integrate(m, o.sim);
      const auto& y = tr.y.back();
      return {th, y[static_cast<std::size_t>(jcol)], gcol < 0 ? 0.0 : y[static_cast<std::size_t>(gcol)],
              hcol < 0 ? 0.0 : y[static_cast<std::size_t>(hcol)]};
    }
    const double eps = o.fd_eps_rel * std::max(1.0, std::abs(th));
    const double jm = J(th - eps), j0 = J(th), jp = J(th + eps);
    return {th, j0, (jp - jm) / (2 * eps), (jp - 2 * j0 + jm) / (eps * eps)};
  };

  OptimizeResult r;
  double th = std::clamp(o.theta0, o.lo, o.hi);
  for (int it = 0; it < o.max_iter; ++it) {
    const OptimizeIterate cur = evaluate(th);
    r.history.push_back(cur);
    r.theta = th;
    r.J = cur.J;
    r.G = cur.G;
    r.iterations = it;
    double step;
    if (cur.G == 0)
      step = 0;
    else if (cur.H > 0 && std::isfinite(cur.H))
      step = -cur.G / cur.H;
    else
      step = cur.G > 0 ? -o.max_step : o.max_step;  // not locally convex: move downhill
    step = std::clamp(step, -o.max_step, o.max_step);
    const double next = std::clamp(th + step, o.lo, o.hi);
    if (std::abs(next - th) <= o.tol * std::max(1.0, std::abs(th))) {
      // Pinned at a bound by a gradient pointing outward is not a stationary point.
      const bool pinned = (next == o.lo && cur.G > 0) || (next == o.hi && cur.G < 0);
      r.converged = std::isfinite(cur.G) && !pinned;
      return r;
    }
    th = next;
  }
  r.iterations = o.max_iter;
  return r;
}

}  // namespace hybridad
