#pragma once

#include "pmfno/tensor.hpp"

namespace pmfno {

struct LstsqResult {
  Eigen::MatrixXd x;      // [n x p] minimizer
  double cond;            // 2-norm condition of A (largest / smallest singular value)
  bool ill_conditioned;   // cond > 1e12 or truncated rank < min(rows, cols)
};

// Minimize ||A x - B||_F by singular value decomposition: singular values
// below rel_cutoff times the largest are treated as zero and the minimal-norm
// solution over the remaining directions is returned. Retained directions are
// solved without bias, so planted solutions are recovered to machine
// precision; the relative cutoff keeps the solution invariant when A and B
// are scaled together. Rank-deficient systems are flagged, not fatal.
LstsqResult lstsq(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                  double rel_cutoff = 1e-12);

// Eigenvalues of a general real square matrix (Hessenberg reduction followed
// by shifted QR). Complex eigenvalues come out in exact conjugate pairs.
// Throws Error(numeric) if the QR iteration fails to converge.
Eigen::VectorXcd eig_general(const Eigen::MatrixXd& a);

}  // namespace pmfno
