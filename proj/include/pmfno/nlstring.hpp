#pragma once

#include "pmfno/modal.hpp"

namespace pmfno {

struct NlStringParams {
  StringParams base;       // grid/physics shared with the linear string
  Index modes_m = 32;      // sine modes carried by the ODE system
  Index oversample = 8;    // ODE step h = T / oversample

  NlStringParams with_defaults() const;
};

struct NlStringState {
  Eigen::VectorXd a;     // modal displacements (m)
  Eigen::VectorXd adot;  // modal velocities (m/s)
};

// Amplitude-dependent tension increment, closed form on the sine series:
// Ts1 = (E*A_cs/4) * sum_k gamma_k^2 a_k^2.
double tension_extra(const NlStringParams& p, const Eigen::VectorXd& a);

// Modal accelerations of the tension-modulated string:
// addot_m = -[E*I*g^4 a + (Ts0 + Ts1(a)) g^2 a + (d1 + d3 g^2) adot] / (rho*A).
void nlstring_rhs(const NlStringParams& p, const Eigen::VectorXd& a,
                  const Eigen::VectorXd& adot, Eigen::VectorXd& da, Eigen::VectorXd& dadot);

// Sine-analysis of grid fields onto the first M modes.
NlStringState project_to_modes(const NlStringParams& p, const Tensor& field);

// Classic RK4 at step h = T/R; every R-th state is expanded to the interior
// grid (deflection and velocity) and appended. Output [K+1, 2, N] with index
// k at time t = k*T. Non-finite states abort with the step index.
Tensor nlstring_integrate(const NlStringParams& p, const NlStringState& init, Index steps);

}  // namespace pmfno
