#pragma once

#include <complex>
#include <functional>

#include <Eigen/Dense>

namespace delaystab {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

/// Matrix exponential by scaling and squaring with a degree-13 diagonal Padé
/// approximant (theta_13 = 5.37).
MatrixXd Expm(const MatrixXd& a);

/// Real Schur form A = Q T Qᵀ with the eigenvalues selected by `keep`
/// moved to the leading block. Complex pairs are selected together.
struct OrderedSchur {
  MatrixXd t;
  MatrixXd q;
  VectorXcd eigenvalues;  // diagonal of T in final order
  int leading = 0;        // size of the selected block
};

OrderedSchur ComputeOrderedSchur(
    const MatrixXd& a, const std::function<bool(std::complex<double>)>& keep);

/// Solves A X − X B = C for upper quasi-triangular A, B (LAPACK dtrsyl).
/// Throws if A and B share an eigenvalue.
MatrixXd SolveQuasiTriangularSylvester(const MatrixXd& a, const MatrixXd& b,
                                       const MatrixXd& c);

/// Stabilizing solution of AᵀX + XA − XBR⁻¹BᵀX + Q = 0 via the stable
/// invariant subspace of the Hamiltonian. Returns false when the pair is not
/// stabilizable (Hamiltonian eigenvalue on the imaginary axis or singular
/// U11 block).
bool SolveContinuousAlgebraicRiccati(const MatrixXd& a, const MatrixXd& b,
                                     const MatrixXd& q, const MatrixXd& r,
                                     MatrixXd* x);

/// Orthonormal basis of the null space of `a`, taking singular values
/// ≤ cutoff as zero.
MatrixXcd NullSpace(const MatrixXcd& a, double cutoff);

/// Orthonormal basis of range(a) with singular-value cutoff.
MatrixXd RangeBasis(const MatrixXd& a, double cutoff);

int NumericalRank(const MatrixXcd& a, double cutoff);

double SpectralAbscissa(const MatrixXd& a);

}  // namespace delaystab
