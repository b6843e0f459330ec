#pragma once

#include <Eigen/Dense>

namespace drainsim::linalg {

using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using Complex = std::complex<double>;

/// Relative tolerance for numerical rank and orthonormality checks.
inline constexpr double kRankTol = 1e-10;

/// Eigenvalue inclusion threshold for dominant_direction, relative to the
/// largest eigenvalue.
inline constexpr double kEigFraction = 1e-3;

/// A subspace of C^ambient_dim represented by an orthonormal basis.
/// The basis is non-unique; compare subspaces via principal angles
/// (orthogonality_residual), never entrywise.
struct Subspace {
  int ambient_dim = 0;
  CMat basis;  // ambient_dim x dim, orthonormal columns

  int dim() const { return static_cast<int>(basis.cols()); }
};

/// Orthonormal basis of the column space of m. Rank determined at kRankTol
/// relative to the largest singular value; an all-zero input yields dim 0.
Subspace orthonormalize(const CMat& m);

/// Projector onto s (basis * basis^H).
CMat projector(const Subspace& s);

/// Projector onto the orthogonal complement of s: I - basis * basis^H.
CMat null_projector(const Subspace& s);

/// ||Ua^H Ub||_F for orthonormalized column spaces of a and b. Zero iff the
/// column spaces are mutually orthogonal; bounded by sqrt(min(dim_a, dim_b)).
double orthogonality_residual(const CMat& a, const CMat& b);

/// Basis of the dominant eigenspace of a Hermitian PSD covariance: the
/// eigenvectors whose eigenvalues exceed tau times the largest one.
/// A zero covariance yields dim 0.
Subspace dominant_direction(const CMat& cov, double tau = kEigFraction);

}  // namespace drainsim::linalg
