#include "pmfno/nlstring.hpp"

#include <cmath>
#include <numbers>

namespace pmfno {

namespace {

constexpr double kPi = std::numbers::pi;

Eigen::VectorXd mode_gamma_sq(const StringParams& p, Index m) {
  Eigen::VectorXd g2(m);
  for (Index i = 0; i < m; ++i) {
    const double g = static_cast<double>(i + 1) * kPi / p.length;
    g2[i] = g * g;
  }
  return g2;
}

}  // namespace

NlStringParams NlStringParams::with_defaults() const {
  NlStringParams p = *this;
  p.base = p.base.with_defaults();
  if (p.modes_m <= 0) p.modes_m = 32;
  if (p.oversample <= 0) p.oversample = 8;
  if (p.modes_m > p.base.grid_points)
    throw Error(Error::Code::config, "nlstring modes exceed grid points");
  return p;
}

double tension_extra(const NlStringParams& raw, const Eigen::VectorXd& a) {
  const NlStringParams p = raw.with_defaults();
  if (a.size() != p.modes_m)
    throw Error(Error::Code::config, "tension_extra: modal vector length mismatch");
  const Eigen::VectorXd g2 = mode_gamma_sq(p.base, p.modes_m);
  return 0.25 * p.base.youngs_modulus * p.base.cross_section *
         (g2.array() * a.array().square()).sum();
}

void nlstring_rhs(const NlStringParams& raw, const Eigen::VectorXd& a,
                  const Eigen::VectorXd& adot, Eigen::VectorXd& da, Eigen::VectorXd& dadot) {
  const NlStringParams p = raw.with_defaults();
  const Index m = p.modes_m;
  if (a.size() != m || adot.size() != m)
    throw Error(Error::Code::config, "nlstring_rhs: modal vector length mismatch");
  const double rho_a = p.base.density * p.base.cross_section;
  const double ei = p.base.youngs_modulus * p.base.moment_inertia;

  double ts1 = 0.0;
  da = adot;
  dadot.resize(m);
  // Inline Ts1 to keep one pass over the modes cheap inside RK4.
  const double ea4 = 0.25 * p.base.youngs_modulus * p.base.cross_section;
  for (Index i = 0; i < m; ++i) {
    const double g = static_cast<double>(i + 1) * kPi / p.base.length;
    ts1 += ea4 * g * g * a[i] * a[i];
  }
  const double ts = p.base.tension + ts1;
  for (Index i = 0; i < m; ++i) {
    const double g = static_cast<double>(i + 1) * kPi / p.base.length;
    const double g2 = g * g;
    dadot[i] = -(ei * g2 * g2 * a[i] + ts * g2 * a[i] + (p.base.d1 + p.base.d3 * g2) * adot[i]) /
               rho_a;
  }
}

NlStringState project_to_modes(const NlStringParams& raw, const Tensor& field) {
  const NlStringParams p = raw.with_defaults();
  const Index n = p.base.grid_points;
  if (field.shape() != Shape{2, n})
    throw Error(Error::Code::config, "nlstring field must have shape [2, N]");
  const Eigen::MatrixXd s = sine_modes_matrix(p.base.length, n, p.modes_m);
  const double w = 2.0 / static_cast<double>(n + 1);
  Eigen::Map<const Eigen::VectorXd> u0(field.data(), n);
  Eigen::Map<const Eigen::VectorXd> u1(field.data() + n, n);
  NlStringState st;
  st.a = w * (s.transpose() * u0);
  st.adot = w * (s.transpose() * u1);
  return st;
}

Tensor nlstring_integrate(const NlStringParams& raw, const NlStringState& init, Index steps) {
  const NlStringParams p = raw.with_defaults();
  if (steps < 1) throw Error(Error::Code::config, "integrate requires at least one step");
  const Index m = p.modes_m;
  if (init.a.size() != m || init.adot.size() != m)
    throw Error(Error::Code::config, "nlstring initial state length mismatch");

  const Index n = p.base.grid_points;
  const double h = 1.0 / (p.base.sample_rate * static_cast<double>(p.oversample));
  const Eigen::MatrixXd synth = sine_modes_matrix(p.base.length, n, m);

  Tensor out({steps + 1, 2, n});
  Eigen::VectorXd a = init.a, adot = init.adot;
  Eigen::VectorXd k1a(m), k1v(m), k2a(m), k2v(m), k3a(m), k3v(m), k4a(m), k4v(m);
  Eigen::VectorXd ta(m), tv(m);

  const auto emit = [&](Index k) {
    Eigen::Map<Eigen::VectorXd>(out.data() + out.offset(k, 0, 0), n) = synth * a;
    Eigen::Map<Eigen::VectorXd>(out.data() + out.offset(k, 1, 0), n) = synth * adot;
  };
  emit(0);

  for (Index k = 1; k <= steps; ++k) {
    for (Index r = 0; r < p.oversample; ++r) {
      nlstring_rhs(p, a, adot, k1a, k1v);
      ta = a + 0.5 * h * k1a;
      tv = adot + 0.5 * h * k1v;
      nlstring_rhs(p, ta, tv, k2a, k2v);
      ta = a + 0.5 * h * k2a;
      tv = adot + 0.5 * h * k2v;
      nlstring_rhs(p, ta, tv, k3a, k3v);
      ta = a + h * k3a;
      tv = adot + h * k3v;
      nlstring_rhs(p, ta, tv, k4a, k4v);
      a += (h / 6.0) * (k1a + 2.0 * k2a + 2.0 * k3a + k4a);
      adot += (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    }
    if (!a.allFinite() || !adot.allFinite())
      throw Error(Error::Code::numeric,
                  "non-finite state at output step " + std::to_string(k));
    emit(k);
  }
  return out;
}

}  // namespace pmfno
