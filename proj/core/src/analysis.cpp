#include "hybridad/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hybridad/errors.hpp"

namespace hybridad {

Eigen::MatrixXd finite_difference(const VectorFn& f, std::span<const double> x, const FdScheme& scheme) {
  if (!(scheme.eps_rel > 0)) throw Error("eps_rel must be positive");
  std::vector<double> p(x.begin(), x.end());
  std::vector<double> f0;
  if (scheme.kind == FdScheme::Kind::forward) f0 = f(p);
  Eigen::MatrixXd jac;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double eps = scheme.eps_rel * std::max(1.0, std::abs(x[i]));
    p[i] = x[i] + eps;
    auto up = f(p);
    std::vector<double> col(up.size());
    if (scheme.kind == FdScheme::Kind::forward) {
      for (std::size_t k = 0; k < up.size(); ++k) col[k] = (up[k] - f0[k]) / eps;
    } else {
      p[i] = x[i] - eps;
      auto dn = f(p);
      for (std::size_t k = 0; k < up.size(); ++k) col[k] = (up[k] - dn[k]) / (2 * eps);
    }
    p[i] = x[i];
    if (i == 0) jac.resize(static_cast<Eigen::Index>(col.size()), static_cast<Eigen::Index>(p.size()));
    for (std::size_t k = 0; k < col.size(); ++k) jac(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = col[k];
  }
  return jac;
}

CompareReport compare_report(const Eigen::MatrixXd& ad, const Eigen::MatrixXd& fd, double tol) {
  if (ad.rows() != fd.rows() || ad.cols() != fd.cols()) {
    std::ostringstream os;
    os << "compare_report: " << ad.rows() << "x" << ad.cols() << " vs " << fd.rows() << "x" << fd.cols();
    throw ShapeMismatch(os.str());
  }
  CompareReport r;
  r.tol = tol;
  r.abs_diff = (ad - fd).cwiseAbs();
  r.rel_diff.resizeLike(ad);
  for (Eigen::Index i = 0; i < ad.rows(); ++i)
    for (Eigen::Index j = 0; j < ad.cols(); ++j) {
      const double a = r.abs_diff(i, j);
      const double scale = std::max(std::abs(ad(i, j)), std::abs(fd(i, j)));
      r.rel_diff(i, j) = scale > 0 ? a / scale : (a > 0 ? INFINITY : 0.0);
      if (a > r.max_abs || r.abs_row < 0) {
        r.max_abs = a;
        r.abs_row = static_cast<int>(i);
        r.abs_col = static_cast<int>(j);
      }
      if (r.rel_diff(i, j) > r.max_rel || r.rel_row < 0) {
        r.max_rel = r.rel_diff(i, j);
        r.rel_row = static_cast<int>(i);
        r.rel_col = static_cast<int>(j);
      }
      if (!(a <= tol * std::max(1.0, scale))) r.pass = false;
    }
  return r;
}

std::string CompareReport::text() const {
  std::ostringstream os;
  os.precision(6);
  os << "max abs " << max_abs << " at (" << abs_row << "," << abs_col << ")\n"
     << "max rel " << max_rel << " at (" << rel_row << "," << rel_col << ")\n"
     << (pass ? "PASS" : "FAIL") << " (tol " << tol << ")\n";
  return os.str();
}

std::string CompareReport::json() const {
  nlohmann::json j{{"max_abs", max_abs},
                   {"max_abs_at", {abs_row, abs_col}},
                   {"max_rel", max_rel},
                   {"max_rel_at", {rel_row, rel_col}},
                   {"tol", tol},
                   {"pass", pass}};
  return j.dump(2);
}

std::vector<double> default_times(int count, double tf) {
  if (count < 1 || !(tf > 0)) throw Error("default_times needs count >= 1 and tf > 0");
  std::vector<double> t;
  for (int k = 1; k <= count; ++k) t.push_back(tf * k / count);
  return t;
}

IdentifiabilityReport identifiability_test(const OdeModel& m, std::span<const double> times,
                                           const std::vector<std::string>& params, SimConfig c) {
  IdentifiabilityReport r;
  r.params = params.empty() ? m.param_names : params;
  r.times.assign(times.begin(), times.end());
  const auto P = static_cast<Eigen::Index>(r.params.size());
  const auto rows = static_cast<Eigen::Index>(times.size()) * m.ny();
  if (m.ny() == 0 || P == 0) {
    r.matrix.resize(rows, P);
    return r;
  }
  if (rows < P) {
    std::ostringstream os;
    os << times.size() << " times x " << m.ny() << " outputs give " << rows << " rows for " << P << " parameters";
    throw ShapeMismatch(os.str());
  }
  for (double t : times)
    if (!(t > c.t0)) throw Error("identifiability times must lie after t0");
  c.tf = *std::max_element(times.begin(), times.end());
  auto tr = integrate(sensitivity_extend(m, r.params), c);

  r.matrix.resize(rows, P);
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double idx = (times[k] - tr.t.front()) / c.step;
    const auto row = static_cast<std::size_t>(std::llround(idx));
    if (row >= tr.t.size() || std::abs(tr.t[row] - times[k]) > 1e-9 * std::max(1.0, std::abs(times[k])))
      throw Error("identifiability time " + std::to_string(times[k]) + " is not on the step grid");
    for (int j = 0; j < m.ny(); ++j)
      for (Eigen::Index p = 0; p < P; ++p) {
        const int col = m.ny() * (1 + static_cast<int>(p)) + j;
        r.matrix(static_cast<Eigen::Index>(k) * m.ny() + j, p) = tr.y[row][static_cast<std::size_t>(col)];
      }
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(r.matrix);
  const auto& sv = svd.singularValues();
  r.norm = sv(0);
  r.sigma_min = sv(sv.size() - 1);
  if (rows == P) r.determinant = r.matrix.determinant();
  r.identifiable = r.norm > 0 && r.sigma_min / r.norm > 1e-8;
  return r;
}

std::string IdentifiabilityReport::verdict() const { return identifiable ? "identifiable+observable" : "inconclusive"; }

std::string IdentifiabilityReport::text() const {
  std::ostringstream os;
  os.precision(10);
  os << "sensitivity matrix " << matrix.rows() << "x" << matrix.cols() << "\n" << matrix << "\n";
  if (determinant) os << "determinant " << *determinant << "\n";
  os << "sigma_min " << sigma_min << ", norm " << norm << "\n" << "verdict: " << verdict() << "\n";
  return os.str();
}

std::string IdentifiabilityReport::json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < matrix.cols(); ++j) row.push_back(matrix(i, j));
    rows.push_back(row);
  }
  nlohmann::json j{{"matrix", rows}, {"times", times}, {"params", params}, {"sigma_min", sigma_min},
                   {"norm", norm},   {"verdict", verdict()}};
  j["determinant"] = determinant ? nlohmann::json(*determinant) : nlohmann::json(nullptr);
  return j.dump(2);
}

namespace {

template <class T>
std::pair<T, T> iterate(T x, T dx) {
  T n = -10;
  for (int k = 0; k < 21; ++k) {
    const T s = std::pow(T(10), n);
    x *= s;
    dx *= s;
    n += 1;
  }
  return {x, dx};
}

}  // namespace

SequenceProbe sequence_probe() {
  SequenceProbe p;
  auto [x, dx] = iterate<long double>(0.0L, 1.0L);
  p.value_x = static_cast<double>(x);
  p.value_n = 11;
  p.ad_derivative = static_cast<double>(dx);
  for (double eps : {1e-8, 1e-6}) {
    const double base = iterate<double>(0.0, 0.0).first;
    const double up = iterate<double>(eps, 0.0).first;
    p.fd.push_back({eps, (up - base) / eps});
  }
  return p;
}

std::string SequenceProbe::text() const {
  std::ostringstream os;
  os.precision(17);
  os << "f^21(0,-10) = (" << value_x << ", " << value_n << ")\n";
  os << "AD derivative " << ad_derivative << "\n";
  for (const auto& e : fd) {
    os.precision(3);
    os << "FD eps=" << e.eps;
    os.precision(17);
    os << " derivative " << e.derivative << "\n";
  }
  return os.str();
}

std::string SequenceProbe::json() const {
  nlohmann::json f = nlohmann::json::array();
  for (const auto& e : fd) f.push_back({{"eps", e.eps}, {"derivative", e.derivative}});
  return nlohmann::json{{"value", {value_x, value_n}}, {"ad_derivative", ad_derivative}, {"fd", f}}.dump(2);
}

}  // namespace hybridad
