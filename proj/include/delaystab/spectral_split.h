#pragma once

#include <complex>
#include <optional>
#include <vector>

#include "delaystab/linalg.h"
#include "delaystab/model.h"

namespace delaystab {

struct EigenvalueInfo {
  std::complex<double> value;
  int algebraic_mult = 1;
  /// dim ker(A − λI); only resolved on the unstable block, 0 elsewhere.
  int geometric_mult = 0;
  bool unstable = false;
};

struct SplitResiduals {
  double idempotency = 0.0;      // ‖P₊² − P₊‖_max / ‖P₊‖
  double commutation = 0.0;      // ‖P₊A − AP₊‖_max / (‖P₊‖‖A‖)
  double biorthogonality = 0.0;  // ‖WᵀV − I‖_max
  double orthogonality = 0.0;    // max |(z, ζ)_H|, z ∈ H₋, ζ ∈ H₊*, unit-scaled
};

/// Unstable/stable decomposition H = H₊ ⊕ H₋ for Σ₊ = {Re λ ≥ −σ}.
///
/// Coordinates on H₊: z₊ = V ξ with V = basis_plus (Euclidean orthonormal
/// Schur vectors) and ξ = Wᵀ z with W = basis_plus_adj, so P₊ = V Wᵀ.
/// The adjoint unstable subspace H₊* is M⁻¹·range(W), M the mass matrix.
struct SpectralSplit {
  double sigma = 0.0;
  double cluster_tol = 0.0;
  std::vector<EigenvalueInfo> eigenvalues;  // unstable clusters first
  int n_plus = 0;
  int N_plus_ctrl = 0;
  MatrixXd basis_plus;
  MatrixXd basis_plus_adj;
  MatrixXd P_plus;
  MatrixXd A_plus;          // n₊×n₊, A restricted to H₊ in ξ coordinates
  MatrixXd input_plus;      // Wᵀ B = B₊p₊ in coordinates, n₊×m
  MatrixXd B_plus;          // Wᵀ B i₊, n₊×dim U₊
  double stable_abscissa = 0.0;  // σ₋ (+∞ when Σ₋ is empty)
  MatrixXd u_plus;   // orthonormal basis of U₊ = B*H₊*, m×dim U₊
  MatrixXd u_minus;  // orthonormal basis of U₋ = B*H₋*
  MatrixXd p_plus;   // orthogonal projections in U
  MatrixXd p_minus;
  SplitResiduals residuals;
  VectorXd mass_weights;

  int state_dim() const { return static_cast<int>(P_plus.rows()); }
  int dim_u_plus() const { return static_cast<int>(u_plus.cols()); }
  double gap() const { return stable_abscissa - sigma; }

  VectorXd Coordinates(const VectorXd& z) const {
    return basis_plus_adj.transpose() * z;
  }
  VectorXd Lift(const VectorXd& xi) const { return basis_plus * xi; }
  /// ‖V ξ‖_H.
  double NormPlus(const VectorXd& xi) const;
};

/// Raises ErrorClass::kSpectral when an eigenvalue sits within cluster_tol
/// of Re λ = −σ. cluster_tol ≤ 0 selects 1e-6 · spectral radius.
SpectralSplit ComputeSplit(const ParabolicModel& model, double sigma,
                           double cluster_tol = 0.0);

struct HautusEntry {
  std::complex<double> eigenvalue;
  int kernel_dim = 0;
  double sigma_min = 0.0;              // σ_min(B* E_j)
  double sigma_min_transformed = 0.0;  // same for B₊* e^{−τA₊*}
  bool passed = false;
};

struct HautusReport {
  std::vector<HautusEntry> entries;
  bool passed = true;
  bool transformed_agrees = true;
  double tolerance = 0.0;  // absolute: svd_tol · ‖B‖
};

HautusReport HautusCheck(const SpectralSplit& split,
                         const ParabolicModel& model, double svd_tol = 1e-8,
                         double tau = 0.0);

/// sup_t ‖e^{At}(I − P₊)‖_H e^{σ₋ t} over `samples` uniform times in
/// [0, horizon]; the measured constant of the stable-block decay bound.
double StableBlockBound(const ParabolicModel& model, const SpectralSplit& split,
                        double horizon, int samples = 40);

}  // namespace delaystab
