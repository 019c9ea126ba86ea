#include "pmfno/modal.hpp"

#include "pmfno/rng.hpp"

#include <cmath>
#include <numbers>

namespace pmfno {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDefaultRadius = 4e-4;  // m

void require(bool ok, Error::Code code, const std::string& msg) {
  if (!ok) throw Error(code, msg);
}

}  // namespace

StringParams StringParams::with_defaults() const {
  StringParams p = *this;
  if (p.cross_section <= 0.0) p.cross_section = kPi * kDefaultRadius * kDefaultRadius;
  if (p.moment_inertia <= 0.0)
    p.moment_inertia = kPi * std::pow(kDefaultRadius, 4) / 4.0;
  if (p.modes <= 0) p.modes = p.grid_points / 2;
  return p;
}

Wave2DParams Wave2DParams::with_defaults() const {
  Wave2DParams p = *this;
  if (p.qx <= 0) p.qx = p.nx / 2;
  if (p.qy <= 0) p.qy = p.ny / 2;
  return p;
}

ModalSystem string_modal_system(const StringParams& raw) {
  const StringParams p = raw.with_defaults();
  require(p.length > 0 && p.density > 0 && p.cross_section > 0 && p.youngs_modulus > 0 &&
              p.moment_inertia > 0 && p.tension > 0 && p.sample_rate > 0,
          Error::Code::config, "string parameters must be positive");
  require(p.d1 >= 0 && p.d3 >= 0, Error::Code::config, "string damping must be >= 0");
  require(is_pow2(p.grid_points), Error::Code::config,
          "string grid_points must be a power of two");
  require(p.modes >= 1 && p.modes <= p.grid_points, Error::Code::config,
          "string modes must lie in [1, grid_points]");

  const Index n = p.grid_points;
  const Index q = p.modes;
  const double rho_a = p.density * p.cross_section;
  const double ei = p.youngs_modulus * p.moment_inertia;

  ModalSystem sys;
  sys.system = "string";
  sys.num_states = 2;
  sys.grid = {n};
  sys.sample_interval = 1.0 / p.sample_rate;
  sys.eigenvalues.resize(2 * q);
  sys.out_basis.resize(2 * n, 2 * q);
  sys.in_basis.resize(2 * q, 2 * n);
  sys.mode_ids.resize(static_cast<std::size_t>(q));

  for (Index i = 0; i < q; ++i) {
    const Index mu = i + 1;
    const double gamma = static_cast<double>(mu) * kPi / p.length;
    const double g2 = gamma * gamma;
    const double g4 = g2 * g2;
    const double sigma = (p.d1 + p.d3 * g2) / (2.0 * rho_a);
    const double om0_sq = (ei * g4 + p.tension * g2) / rho_a;
    if (sigma * sigma >= om0_sq)
      throw Error(Error::Code::synthesis,
                  "string mode " + std::to_string(mu) + " is overdamped (sigma^2 >= omega0^2)");
    const double omega = std::sqrt(om0_sq - sigma * sigma);
    const cplx s(-sigma, omega);

    sys.eigenvalues[2 * i] = s;
    sys.eigenvalues[2 * i + 1] = std::conj(s);
    sys.mode_ids[static_cast<std::size_t>(i)] = {mu, 0};

    // Initial-phase assembly: with sine-series deflection coefficient d and
    // velocity coefficient v, the pair amplitude c = d/2 - i(v + sigma*d)/(2w)
    // solves a(0)=d, a'(0)=v for a(t) = 2 Re(c e^{st}).
    const cplx read_defl(0.5, -sigma / (2.0 * omega));
    const cplx read_vel(0.0, -1.0 / (2.0 * omega));

    for (Index g = 0; g < n; ++g) {
      const double sn = std::sin(gamma * static_cast<double>(g + 1) * p.length /
                                 static_cast<double>(n + 1));
      sys.out_basis(g, 2 * i) = sn;
      sys.out_basis(g, 2 * i + 1) = sn;
      sys.out_basis(n + g, 2 * i) = s * sn;
      sys.out_basis(n + g, 2 * i + 1) = std::conj(s) * sn;

      const double w = 2.0 / static_cast<double>(n + 1) * sn;
      sys.in_basis(2 * i, g) = read_defl * w;
      sys.in_basis(2 * i, n + g) = read_vel * w;
      sys.in_basis(2 * i + 1, g) = std::conj(read_defl) * w;
      sys.in_basis(2 * i + 1, n + g) = std::conj(read_vel) * w;
    }
  }

  // Residual substitution into the PDE dispersion relation for a few modes.
  Rng rng(0x5eedu);
  for (int t = 0; t < 5; ++t) {
    const Index i = static_cast<Index>(rng.below(static_cast<std::uint64_t>(q)));
    const double gamma = static_cast<double>(i + 1) * kPi / p.length;
    const double g2 = gamma * gamma, g4 = g2 * g2;
    const cplx s = sys.eigenvalues[2 * i];
    const cplx res = rho_a * s * s + (p.d1 + p.d3 * g2) * s + ei * g4 + p.tension * g2;
    const double scale =
        rho_a * std::norm(s) + (p.d1 + p.d3 * g2) * std::abs(s) + ei * g4 + p.tension * g2;
    if (std::abs(res) >= 1e-6 * scale)
      throw Error(Error::Code::numeric,
                  "string mode " + std::to_string(i + 1) + " fails the dispersion residual check");
  }
  return sys;
}

ModalSystem wave2d_modal_system(const Wave2DParams& raw) {
  const Wave2DParams p = raw.with_defaults();
  require(p.lx > 0 && p.ly > 0 && p.rho0 > 0 && p.c0 > 0 && p.sample_rate > 0,
          Error::Code::config, "wave2d parameters must be positive");
  require(is_pow2(p.nx) && is_pow2(p.ny), Error::Code::config,
          "wave2d grid must be powers of two");
  require(p.qx >= 1 && p.qy >= 1 && p.qx <= p.nx / 2 && p.qy <= p.ny / 2, Error::Code::config,
          "wave2d mode counts must lie in [1, grid/2]");
  require(p.qx * p.qy - 1 <= p.nx * p.ny, Error::Code::config,
          "wave2d spectrum oversampled: qx*qy-1 exceeds grid size");

  const Index nx = p.nx, ny = p.ny;
  const Index plane = nx * ny;
  const Index npairs = p.qx * p.qy - 1;  // (0,0) excluded

  ModalSystem sys;
  sys.system = "wave2d";
  sys.num_states = 3;
  sys.grid = {nx, ny};
  sys.sample_interval = 1.0 / p.sample_rate;
  sys.eigenvalues.resize(2 * npairs);
  sys.out_basis.setZero(3 * plane, 2 * npairs);
  sys.in_basis.setZero(2 * npairs, 3 * plane);
  sys.mode_ids.resize(static_cast<std::size_t>(npairs));

  const double sx = static_cast<double>(nx - 1) / 2.0;
  const double sy = static_cast<double>(ny - 1) / 2.0;

  Index pair = 0;
  for (Index mu = 0; mu < p.qx; ++mu) {
    for (Index nu = 0; nu < p.qy; ++nu) {
      if (mu == 0 && nu == 0) continue;
      const double gx = static_cast<double>(mu) * kPi / p.lx;
      const double gy = static_cast<double>(nu) * kPi / p.ly;
      const double g2 = gx * gx + gy * gy;
      const double omega = p.c0 * std::sqrt(g2);
      const cplx s(0.0, omega);

      sys.eigenvalues[2 * pair] = s;
      sys.eigenvalues[2 * pair + 1] = std::conj(s);
      sys.mode_ids[static_cast<std::size_t>(pair)] = {mu, nu};

      const double cx = (mu == 0) ? static_cast<double>(nx - 1) : sx;
      const double cy = (nu == 0) ? static_cast<double>(ny - 1) : sy;

      // out columns: pressure cos*cos; velocities from rho0 dv/dt = -grad p.
      const cplx vx_gain = (mu == 0) ? cplx(0, 0) : gx / (p.rho0 * s);
      const cplx vy_gain = (nu == 0) ? cplx(0, 0) : gy / (p.rho0 * s);
      // in rows: cos analysis for pressure plus sine analysis of velocities,
      // blended so the row is exact on consistent fields and defined at mu or
      // nu = 0 (the vanishing component gets zero weight).
      const cplx p_read(0.5, 0.0);
      const cplx vx_read(0.0, 0.5 * p.rho0 * omega * gx / g2);
      const cplx vy_read(0.0, 0.5 * p.rho0 * omega * gy / g2);

      for (Index m = 0; m < nx; ++m) {
        const double tx = kPi * static_cast<double>(mu * m) / static_cast<double>(nx - 1);
        const double cosx = std::cos(tx), sinx = std::sin(tx);
        const double wx = (m == 0 || m == nx - 1) ? 0.5 : 1.0;
        for (Index g = 0; g < ny; ++g) {
          const double ty = kPi * static_cast<double>(nu * g) / static_cast<double>(ny - 1);
          const double cosy = std::cos(ty), siny = std::sin(ty);
          const double wy = (g == 0 || g == ny - 1) ? 0.5 : 1.0;
          const Index at = m * ny + g;

          sys.out_basis(at, 2 * pair) = cosx * cosy;
          sys.out_basis(at, 2 * pair + 1) = cosx * cosy;
          sys.out_basis(plane + at, 2 * pair) = vx_gain * sinx * cosy;
          sys.out_basis(plane + at, 2 * pair + 1) = std::conj(vx_gain) * sinx * cosy;
          sys.out_basis(2 * plane + at, 2 * pair) = vy_gain * cosx * siny;
          sys.out_basis(2 * plane + at, 2 * pair + 1) = std::conj(vy_gain) * cosx * siny;

          const cplx r0 = p_read * (wx * wy / (cx * cy)) * cosx * cosy;
          const cplx r1 = vx_read * (wy / (sx * cy)) * sinx * cosy;
          const cplx r2 = vy_read * (wx / (cx * sy)) * cosx * siny;
          sys.in_basis(2 * pair, at) = r0;
          sys.in_basis(2 * pair, plane + at) = r1;
          sys.in_basis(2 * pair, 2 * plane + at) = r2;
          sys.in_basis(2 * pair + 1, at) = std::conj(r0);
          sys.in_basis(2 * pair + 1, plane + at) = std::conj(r1);
          sys.in_basis(2 * pair + 1, 2 * plane + at) = std::conj(r2);
        }
      }
      ++pair;
    }
  }

  // Residual substitution into the dispersion relation s^2 = -c0^2 |gamma|^2.
  Rng rng(0x5eedu);
  for (int t = 0; t < 5; ++t) {
    const Index i = static_cast<Index>(rng.below(static_cast<std::uint64_t>(npairs)));
    const auto [mu, nu] = sys.mode_ids[static_cast<std::size_t>(i)];
    const double gx = static_cast<double>(mu) * kPi / p.lx;
    const double gy = static_cast<double>(nu) * kPi / p.ly;
    const double g2 = gx * gx + gy * gy;
    const cplx s = sys.eigenvalues[2 * i];
    const double scale = std::norm(s) + p.c0 * p.c0 * g2;
    if (std::abs(s * s + p.c0 * p.c0 * g2) >= 1e-6 * scale)
      throw Error(Error::Code::numeric, "wave2d mode fails the dispersion residual check");
  }
  return sys;
}

namespace {

Eigen::Map<const Eigen::VectorXd> flat_field(const ModalSystem& sys, const Tensor& field) {
  Shape want;
  want.push_back(sys.num_states);
  for (Index d : sys.grid) want.push_back(d);
  if (field.shape() != want)
    throw Error(Error::Code::config, "state field shape " + shape_str(field.shape()) +
                                         " does not match system shape " + shape_str(want));
  return {field.data(), field.size()};
}

}  // namespace

Eigen::VectorXcd slt_forward(const ModalSystem& sys, const Tensor& field) {
  return sys.in_basis * flat_field(sys, field).cast<cplx>();
}

Tensor slt_inverse(const ModalSystem& sys, const Eigen::VectorXcd& coeff) {
  if (coeff.size() != sys.eigenvalues.size())
    throw Error(Error::Code::config, "modal coefficient count mismatch");
  const Eigen::VectorXcd u = sys.out_basis * coeff;
  Shape shape;
  shape.push_back(sys.num_states);
  for (Index d : sys.grid) shape.push_back(d);
  Tensor out(shape);
  for (Index i = 0; i < u.size(); ++i) out[i] = u[i].real();
  return out;
}

Eigen::VectorXcd modal_init(const ModalSystem& sys, const Tensor& u_init) {
  return slt_forward(sys, u_init);
}

void modal_step(const ModalSystem& sys, Eigen::VectorXcd& coeff) {
  if (coeff.size() != sys.eigenvalues.size())
    throw Error(Error::Code::config, "modal coefficient count mismatch");
  const double T = sys.sample_interval;
  for (Index i = 0; i < coeff.size(); ++i) coeff[i] *= std::exp(sys.eigenvalues[i] * T);
}

Tensor synthesize(const ModalSystem& sys, const Tensor& u_init, Index steps) {
  if (steps < 1) throw Error(Error::Code::config, "synthesize requires at least one step");
  const Eigen::VectorXcd c0 = slt_forward(sys, u_init);
  const Index q2 = c0.size();
  const double T = sys.sample_interval;

  Eigen::MatrixXcd coef(q2, steps + 1);
  for (Index k = 0; k <= steps; ++k)
    for (Index j = 0; j < q2; ++j)
      coef(j, k) = c0[j] * std::exp(sys.eigenvalues[j] * (T * static_cast<double>(k)));

  const Eigen::MatrixXcd traj = sys.out_basis * coef;  // [D x K+1]

  double max_re = 0.0, max_im = 0.0;
  for (Index k = 0; k <= steps; ++k) {
    bool finite = true;
    for (Index i = 0; i < traj.rows(); ++i) {
      const cplx v = traj(i, k);
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) finite = false;
      max_re = std::max(max_re, std::abs(v.real()));
      max_im = std::max(max_im, std::abs(v.imag()));
    }
    if (!finite)
      throw Error(Error::Code::numeric,
                  "non-finite synthesized state at frame " + std::to_string(k));
  }
  if (max_im > 1e-9 * std::max(max_re, 1e-300))
    throw Error(Error::Code::numeric, "synthesized trajectory has imaginary residue");

  Shape shape;
  shape.push_back(steps + 1);
  shape.push_back(sys.num_states);
  for (Index d : sys.grid) shape.push_back(d);
  Tensor out(shape);
  const Index d = sys.state_dim();
  for (Index k = 0; k <= steps; ++k)
    for (Index i = 0; i < d; ++i) out[k * d + i] = traj(i, k).real();
  return out;
}

Eigen::MatrixXd sine_modes_matrix(double length, Index n_grid, Index modes) {
  require(n_grid >= 1 && modes >= 1 && modes <= n_grid, Error::Code::config,
          "sine basis requires 1 <= modes <= grid points");
  (void)length;  // the sampled arguments reduce to (m+1)pi(n+1)/(N+1)
  Eigen::MatrixXd s(n_grid, modes);
  for (Index n = 0; n < n_grid; ++n)
    for (Index m = 0; m < modes; ++m)
      s(n, m) = std::sin(kPi * static_cast<double>((m + 1) * (n + 1)) /
                         static_cast<double>(n_grid + 1));
  return s;
}

Eigen::VectorXd project_onto_sine_modes(double length, Index modes, const Eigen::VectorXd& u) {
  const Index n = u.size();
  const Eigen::MatrixXd s = sine_modes_matrix(length, n, modes);
  const Eigen::VectorXd a = (2.0 / static_cast<double>(n + 1)) * (s.transpose() * u);
  return s * a;
}

Eigen::MatrixXd project_onto_cos_modes(const Wave2DParams& raw, const Eigen::MatrixXd& field) {
  const Wave2DParams p = raw.with_defaults();
  require(field.rows() == p.nx && field.cols() == p.ny, Error::Code::config,
          "field shape does not match wave2d grid");

  Eigen::MatrixXd cx(p.nx, p.qx), cy(p.ny, p.qy);
  Eigen::VectorXd wx(p.nx), wy(p.ny);
  for (Index m = 0; m < p.nx; ++m) {
    wx[m] = (m == 0 || m == p.nx - 1) ? 0.5 : 1.0;
    for (Index mu = 0; mu < p.qx; ++mu)
      cx(m, mu) = std::cos(kPi * static_cast<double>(mu * m) / static_cast<double>(p.nx - 1));
  }
  for (Index g = 0; g < p.ny; ++g) {
    wy[g] = (g == 0 || g == p.ny - 1) ? 0.5 : 1.0;
    for (Index nu = 0; nu < p.qy; ++nu)
      cy(g, nu) = std::cos(kPi * static_cast<double>(nu * g) / static_cast<double>(p.ny - 1));
  }

  Eigen::MatrixXd a =
      cx.transpose() * wx.asDiagonal() * field * wy.asDiagonal() * cy;  // [qx x qy]
  for (Index mu = 0; mu < p.qx; ++mu) {
    const double nx_norm = (mu == 0) ? static_cast<double>(p.nx - 1)
                                     : static_cast<double>(p.nx - 1) / 2.0;
    for (Index nu = 0; nu < p.qy; ++nu) {
      const double ny_norm = (nu == 0) ? static_cast<double>(p.ny - 1)
                                       : static_cast<double>(p.ny - 1) / 2.0;
      a(mu, nu) /= nx_norm * ny_norm;
    }
  }
  a(0, 0) = 0.0;  // spatial mean removed: the DC mode is not part of the span
  return cx * a * cy.transpose();
}

}  // namespace pmfno
