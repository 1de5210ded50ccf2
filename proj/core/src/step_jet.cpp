#include "hybridad/errors.hpp"
#include "hybridad/sim.hpp"

namespace hybridad {

std::vector<Jet> step_jet(const OdeModel& m, Method method, int order) {
  if (order < 0) throw DomainError("order must be >= 0");
  if (!m.delays.empty() || m.nz > 0 || !m.events.empty())
    throw Error("step_jet needs a continuous model without delays, discrete states or events");
  const auto& theta = m.theta;
  const auto init = tape_eval(m.setup, theta);
  const double t0 = m.has_start ? init[static_cast<std::size_t>(m.n + m.nz)] : 0.0;
  const auto n = static_cast<std::size_t>(m.n);
  const Jet h = Jet::variable(0, order);

  std::vector<Jet> in(static_cast<std::size_t>(m.dynamics_inputs()), Jet::constant(0, order));
  for (std::size_t j = 0; j < theta.size(); ++j) in[static_cast<std::size_t>(m.in_theta()) + j] = Jet::constant(theta[j], order);
  auto rhs = [&](const std::vector<Jet>& x, const Jet& t) {
    std::copy(x.begin(), x.end(), in.begin());
    in[static_cast<std::size_t>(m.in_t())] = t;
    auto out = tape_jet_eval(m.dynamics, in);
    out.resize(n);
    return out;
  };
  std::vector<Jet> x0, tmp(n);
  for (std::size_t i = 0; i < n; ++i) x0.push_back(Jet::constant(init[i], order));
  const Jet t = Jet::constant(t0, order);

  if (method == Method::midpoint) {
    auto k1 = rhs(x0, t);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x0[i] + 0.5 * h * k1[i];
    auto k2 = rhs(tmp, t + 0.5 * h);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x0[i] + h * k2[i];
    return tmp;
  }
  auto k1 = rhs(x0, t);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x0[i] + 0.5 * h * k1[i];
  auto k2 = rhs(tmp, t + 0.5 * h);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x0[i] + 0.5 * h * k2[i];
  auto k3 = rhs(tmp, t + 0.5 * h);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x0[i] + h * k3[i];
  auto k4 = rhs(tmp, t + h);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x0[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  return tmp;
}

}  // namespace hybridad
