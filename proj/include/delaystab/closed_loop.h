#pragma once

#include <functional>
#include <string>
#include <vector>

#include "delaystab/feedback_design.h"
#include "delaystab/linalg.h"
#include "delaystab/model.h"
#include "delaystab/spectral_split.h"

namespace delaystab {

/// Sampled closed-loop run on the uniform grid t_i = i·dt. All per-sample
/// arrays share one length; columns of the matrices are samples.
struct Trajectory {
  double dt = 0.0;
  double tau = 0.0;
  VectorXd times;
  MatrixXd states;       // n × samples
  MatrixXd controls;     // m × samples, v(t_i) with v(τ) = G w(0)
  MatrixXd transformed;  // n₊ × samples, w(t_i) in ξ coordinates
  MatrixXd forcing;      // n × samples; empty when the source is identically 0
  MatrixXd forcing_plus; // n₊ × samples, Wᵀ f(t_i)
  VectorXd norms;        // ‖z‖_H
  VectorXd plus_norms;   // ‖z₊‖_H
  VectorXd transformed_norms;  // ‖w‖_H
  VectorXd forcing_norms;      // ‖f‖_H
  VectorXd h1_norms;     // ‖z‖_{H¹₀}; empty unless distributed control
  VectorXd graph_norms;  // ‖Az‖_H; same availability as h1_norms
  VectorXd derivative_norms;  // ‖z'‖_H by differences; same availability
  VectorXd r1;           // Artstein ODE residual
  VectorXd r2;           // Artstein identity residual, NaN for t > T − τ
  bool blew_up = false;
  std::string diagnostic;

  int samples() const { return static_cast<int>(times.size()); }
};

struct SimulationOptions {
  /// false forces v ≡ 0 (open loop).
  bool feedback = true;
  double blowup_threshold = 1e12;
  bool residuals = true;
};

/// Crank–Nicolson on A with the trapezoidal rule on Bv + f, where v is the
/// memory feedback read from the stored history (τ ≥ dt keeps it explicit).
/// dt must equal the kernel step and divide τ. Throws kSimulate on blow-up.
Trajectory SimulateLinear(const ParabolicModel& model, const SpectralSplit& split,
                          const FeedbackDesign& design, const MemoryKernel& kernel,
                          const VectorXd& z0, const Forcing& forcing, double horizon,
                          double dt, const SimulationOptions& options = {});

/// Same scheme with a sampled source: column i of `source` is f(t_i).
Trajectory SimulateLinearSampled(const ParabolicModel& model,
                                 const SpectralSplit& split,
                                 const FeedbackDesign& design,
                                 const MemoryKernel& kernel, const VectorXd& z0,
                                 const MatrixXd& source, double horizon, double dt,
                                 const SimulationOptions& options = {});

/// Semilinear run: the nonlinearity fills the forcing slot, extrapolated
/// explicitly (second-order Adams–Bashforth). Blow-up is reported through
/// Trajectory::blew_up, not thrown.
Trajectory SimulateSemilinear(const ParabolicModel& model,
                              const SpectralSplit& split,
                              const FeedbackDesign& design,
                              const MemoryKernel& kernel, const VectorXd& z0,
                              double horizon, double dt,
                              const SimulationOptions& options = {});

/// Outer fixed-point iteration f ↦ N(z[f]) around the linear closed loop.
struct PicardReport {
  std::vector<double> increments;  // ‖f⁽ᵏ⁺¹⁾ − f⁽ᵏ⁾‖ in L²_σ(0,T;H)
  std::vector<double> ratios;      // successive increment ratios
  bool converged = false;
  Trajectory limit;

  double max_ratio() const;
};

PicardReport OuterPicard(const ParabolicModel& model, const SpectralSplit& split,
                         const FeedbackDesign& design, const MemoryKernel& kernel,
                         const VectorXd& z0, double horizon, double dt,
                         int max_iterations = 40, double tol = 1e-13);

struct ArtsteinResiduals {
  VectorXd r1;
  VectorXd r2;
  double max_r1 = 0.0;
  double max_r2 = 0.0;
};

/// r₁ = ‖w' − A₊w − e^{−τA₊}B₊p₊Gw − P₊f‖ (central differences) and
/// r₂ = ‖w − z₊ − ∫_t^{t+τ} e^{(t−s)A₊}B₊p₊v(s)ds‖, both in ‖·‖_H.
ArtsteinResiduals ComputeArtsteinResiduals(const Trajectory& traj,
                                           const SpectralSplit& split,
                                           const FeedbackDesign& design,
                                           const MemoryKernel& kernel);

struct DecayCertificate {
  double fitted_rate = 0.0;
  bool rate_infinite = false;  // a norm vanished inside the window
  double t_lo = 0.0;
  double t_hi = 0.0;
  double c_witness = 0.0;
  /// Strong-norm witness; NaN when the run carries no H¹ data.
  double strong_witness = 0.0;
  double sigma = 0.0;
  bool passed = false;
};

/// Least-squares fit of log‖z(t)‖ on [t_lo, t_hi] ⊂ (2τ, T].
DecayCertificate FitDecay(const Trajectory& traj, double t_lo, double t_hi,
                          double sigma, double rate_tol = 0.02);

/// Bisection on the amplitude of `profile` for the largest initial datum
/// whose semilinear closed loop stays bounded and ends below its start.
double EstimateStabilityRadius(const ParabolicModel& model,
                               const SpectralSplit& split,
                               const FeedbackDesign& design,
                               const MemoryKernel& kernel,
                               const VectorXd& profile, double horizon,
                               double dt, double lo, double hi,
                               int iterations = 12);

}  // namespace delaystab
