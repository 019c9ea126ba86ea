#include "pmfno/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <limits>

namespace pmfno {

LstsqResult lstsq(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double rel_cutoff) {
  if (a.rows() != b.rows())
    throw Error(Error::Code::config, "lstsq: A and B row counts differ");
  // Fewer rows than unknowns is allowed: the truncated pseudo-inverse is the
  // minimal-norm solution and the condition flag reports the rank deficiency.

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success)
    throw Error(Error::Code::numeric, "lstsq: singular value decomposition failed");
  const Eigen::VectorXd& sv = svd.singularValues();
  const Index full = std::min(a.rows(), a.cols());
  const double smax = sv.size() > 0 ? sv(0) : 0.0;

  LstsqResult r;
  if (smax <= 0.0) {  // A == 0: every direction is free, pick the zero solution
    r.x = Eigen::MatrixXd::Zero(a.cols(), b.cols());
    r.cond = std::numeric_limits<double>::infinity();
    r.ill_conditioned = true;
    return r;
  }

  const double cutoff = rel_cutoff * smax;
  Index rank = 0;
  while (rank < sv.size() && sv(rank) > cutoff) ++rank;

  Eigen::MatrixXd scaled = svd.matrixU().leftCols(rank).transpose() * b;
  for (Index i = 0; i < rank; ++i) scaled.row(i) /= sv(i);
  r.x = svd.matrixV().leftCols(rank) * scaled;

  const double smin = sv(sv.size() - 1);
  r.cond = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
  r.ill_conditioned = !(r.cond <= 1e12) || rank < full;
  return r;
}

Eigen::VectorXcd eig_general(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols())
    throw Error(Error::Code::config, "eig_general: matrix is not square");
  Eigen::EigenSolver<Eigen::MatrixXd> es(a, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success)
    throw Error(Error::Code::numeric,
                "eig_general: QR iteration did not converge for a " +
                    std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " matrix");
  return es.eigenvalues();
}

}  // namespace pmfno
