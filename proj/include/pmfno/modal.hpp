#pragma once

#include "pmfno/tensor.hpp"

#include <array>

namespace pmfno {

struct StringParams {
  double length = 0.65;            // m
  double density = 7850.0;         // kg/m^3
  double cross_section = 0.0;      // m^2; 0 -> pi*r^2 with r = 0.4 mm
  double youngs_modulus = 2e11;    // Pa
  double moment_inertia = 0.0;     // m^4; 0 -> pi*r^4/4 with r = 0.4 mm
  double tension = 60.0;           // N
  double d1 = 2e-4;                // kg/(m*s)
  double d3 = 1e-5;                // kg*m/s
  Index grid_points = 64;          // power of two, interior points
  Index modes = 0;                 // 0 -> grid_points/2; must stay <= grid_points
  double sample_rate = 48000.0;    // Hz

  StringParams with_defaults() const;
};

struct Wave2DParams {
  double lx = 0.6, ly = 0.5;       // m
  double rho0 = 1.2;               // kg/m^3
  double c0 = 343.0;               // m/s
  Index nx = 32, ny = 32;          // powers of two, boundary-inclusive
  Index qx = 0, qy = 0;            // 0 -> nx/2, ny/2
  double sample_rate = 48000.0;    // Hz

  Wave2DParams with_defaults() const;
};

// Modal state-space description of a linear system: eigenvalues plus a
// grid-sampled synthesis basis (out) and its matched analysis rows (in).
// in_basis * out_basis == I within 1e-9 by construction; eigenvalues with
// nonzero imaginary part come in conjugate pairs, interleaved (+, -).
struct ModalSystem {
  std::string system;                          // "string" | "wave2d"
  Index num_states = 0;                        // state channels C
  Shape grid;                                  // spatial dimensions
  double sample_interval = 0.0;                // T (s)
  Eigen::VectorXcd eigenvalues;                // [2*pairs] rad/s
  Eigen::MatrixXcd out_basis;                  // [C*prod(grid) x 2*pairs]
  Eigen::MatrixXcd in_basis;                   // [2*pairs x C*prod(grid)]
  std::vector<std::array<Index, 2>> mode_ids;  // per pair; string uses {mu, 0}

  Index pairs() const { return eigenvalues.size() / 2; }
  Index state_dim() const { return num_states * shape_size(grid); }
};

ModalSystem string_modal_system(const StringParams& p);
ModalSystem wave2d_modal_system(const Wave2DParams& p);

// Analysis: field [C, grid...] -> modal coefficients (exact on the modal span).
Eigen::VectorXcd slt_forward(const ModalSystem& sys, const Tensor& field);

// Synthesis: modal coefficients -> field [C, grid...] (real part of the sum;
// the imaginary residue is checked against 1e-9 of the field amplitude).
Tensor slt_inverse(const ModalSystem& sys, const Eigen::VectorXcd& coeff);

// Initial coefficients such that synthesis at k=0 reproduces u_init exactly
// on the modal span (identical to slt_forward; named for the stepping API).
Eigen::VectorXcd modal_init(const ModalSystem& sys, const Tensor& u_init);

// One sample step: elementwise multiplication by e^{s*T}.
void modal_step(const ModalSystem& sys, Eigen::VectorXcd& coeff);

// Full trajectory [K+1, C, grid...] from an initial field.
Tensor synthesize(const ModalSystem& sys, const Tensor& u_init, Index steps);

// Interior-grid sine synthesis matrix S[n, m] = sin((m+1)*pi*x_n/length),
// x_n = (n+1)*length/(n_grid+1). Shared by the linear and the
// tension-modulated string (analysis weight is 2/(n_grid+1) * S^T).
Eigen::MatrixXd sine_modes_matrix(double length, Index n_grid, Index modes);

// Projections onto the representable span, used when building random
// initial conditions. The wave2d projection excludes the (0,0) mode, which
// removes the spatial mean.
Eigen::VectorXd project_onto_sine_modes(double length, Index modes, const Eigen::VectorXd& u);
Eigen::MatrixXd project_onto_cos_modes(const Wave2DParams& p, const Eigen::MatrixXd& field);

}  // namespace pmfno
