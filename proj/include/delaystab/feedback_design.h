#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "delaystab/linalg.h"
#include "delaystab/model.h"
#include "delaystab/spectral_split.h"

namespace delaystab {

/// Stabilizing gain for the delay-free transformed pair
/// (A₊, e^{−τA₊}B₊p₊) together with its functional representation
/// G φ = Σ_k (φ, ζ_k)_H v_k.
///
/// All n₊-dimensional quantities are in the ξ coordinates of the split.
struct FeedbackDesign {
  double tau = 0.0;
  double sigma = 0.0;
  double sigma_star = 0.0;
  MatrixXd directions;      // v_k: m×r, orthonormal, inside U₊
  MatrixXd gain_reduced;    // Ĝ: r×n₊
  MatrixXd gain;            // G = V Ĝ: m×n₊, acts on ξ
  MatrixXd gain_state;      // G Wᵀ: m×n, acts on z and vanishes on H₋
  MatrixXd zeta;            // ζ_k: n×r, columns in H₊*
  MatrixXd transformed_input;  // e^{−τA₊}B₊ : n₊×dim U₊
  MatrixXd coupling;        // B₊p₊G in ξ coordinates: n₊×n₊
  double achieved_abscissa = 0.0;  // max Re eig(A₊ + e^{−τA₊}B₊p₊G)
  int rank = 0;
  bool stabilizing = true;
  /// max |Gφ − Σ(φ,ζ_k)v_k| / ‖G‖ over the unit vectors φ = e_i.
  double representation_gap = 0.0;

  int n_plus() const { return static_cast<int>(gain.cols()); }
  int input_dim() const { return static_cast<int>(gain.rows()); }
  /// Σ_k (φ, ζ_k)_H v_k.
  VectorXd ApplyFunctionals(const ParabolicModel& model,
                            const VectorXd& phi) const;
};

struct DesignOptions {
  std::optional<double> sigma_star;
  double svd_tol = 1e-8;
  /// When false, a failed Hautus test or regulator solve yields the zero
  /// gain (stabilizing = false) instead of an error. Used for negative
  /// controls only.
  bool require_hautus = true;
};

/// σ + max(0.5, 0.25(σ₋ − σ)).
double DefaultSigmaStar(const SpectralSplit& split);

/// Regulator-based gain with rank ≤ N₊: selects N₊ input directions in U₊
/// maximizing the weakest mode/input coupling, then solves the algebraic
/// Riccati equation for (A₊ + σ⋆I, e^{−τA₊}B₊V).
FeedbackDesign DesignGain(const SpectralSplit& split,
                          const ParabolicModel& model, double tau,
                          const DesignOptions& options = {});

/// Wraps a user gain acting on z₊ (m×n) into a design. The gain must have
/// rank ≤ N₊, range inside U₊, and place the transformed closed loop left
/// of −σ⋆.
FeedbackDesign DesignFromGain(const SpectralSplit& split,
                              const ParabolicModel& model, double tau,
                              const MatrixXd& gain_state, double sigma_star);

/// Pole placement for a one-dimensional unstable block: returns the design
/// whose transformed closed-loop eigenvalue is `target`.
FeedbackDesign PlaceScalarPole(const SpectralSplit& split,
                               const ParabolicModel& model, double tau,
                               double target, double sigma_star);

/// Sampled solution of the memory-kernel Volterra equation on D_T.
///
/// The kernel depends on (t, s) only through the lag u = t − s, so the
/// triangle is stored as the lag profile κ(pΔ), p = 0..N. K jumps across
/// t − s = τ; `lag` holds the pointwise value there (the indicator term is
/// off), `lag_delay_left` the limit from below.
struct MemoryKernel {
  double tau = 0.0;
  double horizon = 0.0;
  double step = 0.0;
  int delay_steps = 0;  // P = τ/Δ
  int steps = 0;        // N = T/Δ
  int n_plus = 0;
  std::vector<MatrixXd> lag;
  MatrixXd lag_delay_left;
  std::vector<MatrixXd> k0;  // K₀(pΔ), p = 0..P
  double k0_sup = 0.0;
  double kernel_sup = 0.0;
  double residual_sup = 0.0;
  double tolerance = 0.0;

  bool residual_ok() const { return residual_sup <= tolerance; }
  /// K(t_i, s_j) for j ≤ i.
  const MatrixXd& At(int i, int j) const { return lag[i - j]; }
  /// Lag value approached from below (u → pΔ⁻).
  const MatrixXd& LeftLimit(int p) const {
    return p == delay_steps && delay_steps > 0 ? lag_delay_left : lag[p];
  }
};

struct KernelOptions {
  /// Relative residual tolerance; the absolute bound is rel_tol · ‖K₀‖_∞.
  double rel_tol = 1e-6;
  /// Upper bound on the number of staggered midpoints re-checked.
  int max_checks = 4000;
  /// Accept τ = 0 and return K ≡ 0 (static feedback diagnostic).
  bool allow_zero_delay = false;
};

MemoryKernel SolveKernel(const FeedbackDesign& design, const SpectralSplit& split,
                         double horizon, double step,
                         const KernelOptions& options = {});

/// Independent re-quadrature of the kernel equation at staggered midpoints
/// (cubic interpolation of the samples, 3-point Gauss–Legendre panels).
double KernelResidual(const MemoryKernel& kernel, const MatrixXd& a_plus,
                      const MatrixXd& coupling, int max_checks = 4000);

/// w(t_i) = ξ(t_i) + ∫₀^{t_i} K(t_i, s) ξ(s) ds by the trapezoidal rule with
/// one-sided kernel limits at the jump. `xi` holds columns ξ(t_0..t_i).
VectorXd TransformedState(const MemoryKernel& kernel, const MatrixXd& xi,
                          int i);

/// Memory feedback v(t) = 𝟙_{t≥τ} G[z₊(t−τ) + ∫₀^{t−τ}K(t−τ,s)z₊(s)ds].
/// `history` holds z(t_0), z(t_1), … on the kernel grid; only the samples up
/// to t − τ are read. Both representations of G are evaluated and must
/// agree to 1e-12.
VectorXd EvalFeedback(const FeedbackDesign& design, const MemoryKernel& kernel,
                      const SpectralSplit& split, const ParabolicModel& model,
                      const std::vector<VectorXd>& history, double t);

/// Binary triangle dump: four little-endian float64 header values
/// (n₊, T, Δ, τ) followed, for i = 0..N and j = 0..i, by the row-major
/// n₊×n₊ matrix K(t_i, s_j). `stride` > 1 subsamples the grid (the header
/// then carries Δ·stride).
void WriteKernelBinary(std::ostream& out, const MemoryKernel& kernel,
                       int stride = 1);

struct KernelDump {
  int n_plus = 0;
  double horizon = 0.0;
  double step = 0.0;
  double tau = 0.0;
  int steps = 0;
  std::vector<double> values;  // triangle, layout as written

  double Norm(int i, int j) const;  // Frobenius norm of K(t_i, s_j)
};

KernelDump ReadKernelBinary(std::istream& in);

}  // namespace delaystab
