#include "drainsim/linalg.hpp"

#include <stdexcept>

namespace drainsim::linalg {

Subspace orthonormalize(const CMat& m) {
  if (m.rows() < 1 || m.cols() < 1) {
    throw std::invalid_argument("orthonormalize: empty matrix");
  }
  if (!m.allFinite()) {
    throw std::invalid_argument("orthonormalize: non-finite entries");
  }
  Eigen::JacobiSVD<CMat> svd(m, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  int rank = 0;
  if (sv.size() > 0 && sv(0) > 0.0) {
    const double thresh = sv(0) * kRankTol;
    while (rank < sv.size() && sv(rank) > thresh) ++rank;
  }
  Subspace s;
  s.ambient_dim = static_cast<int>(m.rows());
  s.basis = svd.matrixU().leftCols(rank);
  return s;
}

CMat projector(const Subspace& s) {
  if (s.dim() == 0) {
    return CMat::Zero(s.ambient_dim, s.ambient_dim);
  }
  return s.basis * s.basis.adjoint();
}

CMat null_projector(const Subspace& s) {
  return CMat::Identity(s.ambient_dim, s.ambient_dim) - projector(s);
}

double orthogonality_residual(const CMat& a, const CMat& b) {
  if (a.rows() != b.rows()) {
    throw std::invalid_argument("orthogonality_residual: row mismatch");
  }
  const Subspace ua = orthonormalize(a);
  const Subspace ub = orthonormalize(b);
  if (ua.dim() == 0 || ub.dim() == 0) return 0.0;
  return (ua.basis.adjoint() * ub.basis).norm();
}

Subspace dominant_direction(const CMat& cov, double tau) {
  if (cov.rows() != cov.cols()) {
    throw std::invalid_argument("dominant_direction: not square");
  }
  const double scale = cov.norm();
  if ((cov - cov.adjoint()).norm() > 1e-8 * std::max(1.0, scale)) {
    throw std::invalid_argument("dominant_direction: not Hermitian");
  }
  Subspace s;
  s.ambient_dim = static_cast<int>(cov.rows());
  if (scale == 0.0) {
    s.basis = CMat::Zero(s.ambient_dim, 0);
    return s;
  }
  Eigen::SelfAdjointEigenSolver<CMat> es(cov);
  const auto& ev = es.eigenvalues();  // ascending
  const double lmax = ev(ev.size() - 1);
  if (lmax < -1e-8 * scale) {
    throw std::invalid_argument("dominant_direction: not PSD");
  }
  const double thresh = tau * lmax;
  int first = 0;
  while (first < ev.size() && ev(first) <= thresh) ++first;
  const int dim = static_cast<int>(ev.size()) - first;
  s.basis = es.eigenvectors().rightCols(dim);
  return s;
}

}  // namespace drainsim::linalg
