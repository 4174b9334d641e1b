#pragma once

#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <variant>

#include "delaystab/linalg.h"

namespace delaystab {

enum class ModelKind { kAbstract, kDistributed1d, kBoundary1d, kSemilinear1d };

const char* ToString(ModelKind kind);

/// A spatial coefficient or shape, x ↦ value.
using Profile = std::function<double(double)>;

/// Source term f(t). `zero` promises the evaluator returns the zero vector.
struct Forcing {
  std::function<VectorXd(double)> evaluate;
  double decay_rate = 0.0;
  bool zero = true;

  static Forcing Zero(int state_dim);
  /// f(t) = amplitude · e^{-rate t} · profile.
  static Forcing Decaying(const VectorXd& profile, double rate,
                          double amplitude = 1.0);
};

/// Local nonlinearity N with N(0) = 0, entering the state equation through
/// the forcing slot.
struct Nonlinearity {
  std::function<VectorXd(const VectorXd&)> evaluate;
  std::string lipschitz_note;
};

/// N(z) = −z³ pointwise.
Nonlinearity CubicNonlinearity();
/// N(z) = −z ∂ₓz with an upwind difference and homogeneous Dirichlet ends.
Nonlinearity BurgersNonlinearity(double spacing);

struct DistributedControl {
  double x_a = 0.0;
  double x_b = 0.0;
  /// Number of input columns: shape k is cos(kπ(x−x_a)/(x_b−x_a)) on the
  /// window, so shape 0 is the constant indicator.
  int shapes = 1;
};

/// Dirichlet control at x = 0.
struct BoundaryControl {};

using ControlSpec = std::variant<DistributedControl, BoundaryControl>;

struct ConvectionDiffusion1dParams {
  double length = 1.0;
  int intervals = 16;  // grid size n; the state lives on the n−1 interior nodes
  double diffusion = 1.0;
  Profile drift = [](double) { return 0.0; };
  Profile reaction = [](double) { return 0.0; };
  ControlSpec control = DistributedControl{0.0, 1.0, 1};
  std::optional<double> shift;  // λ₀; defaults to max(c) + 1
};

/// Finite-dimensional parabolic system z' = Az + Bv + f on H = (ℝⁿ, mass
/// weighted inner product). Immutable once built.
struct ParabolicModel {
  ModelKind kind = ModelKind::kAbstract;
  MatrixXd generator;
  MatrixXd input_map;
  VectorXd grid;          // interior nodes; empty for abstract models
  VectorXd mass_weights;  // diagonal of the H Gram matrix
  double shift = 0.0;     // λ₀ in the resolvent set

  // 1-D metadata.
  double length = 0.0;
  double spacing = 0.0;
  double diffusion = 0.0;
  VectorXd drift;
  VectorXd reaction;
  /// Continuous-level regularity exponents of B and f; only recorded.
  double gamma = 0.0;
  double gamma_prime = 0.0;
  /// D₀(1) on interior nodes, boundary kind only.
  VectorXd lifting;

  std::optional<Nonlinearity> nonlinearity;

  int state_dim() const { return static_cast<int>(generator.rows()); }
  int input_dim() const { return static_cast<int>(input_map.cols()); }
  bool is_pde() const { return kind != ModelKind::kAbstract; }

  double Inner(const VectorXd& a, const VectorXd& b) const;
  double Norm(const VectorXd& z) const;
  /// Discrete H¹₀ norm ‖∂ₓz‖ with zero boundary values (1-D kinds only).
  double H1Norm(const VectorXd& z) const;
};

ParabolicModel BuildCustomLti(const MatrixXd& generator,
                              const MatrixXd& input_map, double shift);

ParabolicModel BuildConvectionDiffusion1d(
    const ConvectionDiffusion1dParams& params);

struct BoundaryLift {
  VectorXd input_column;  // (λ₀ − A_h) D₀(1)
  VectorXd lifting;       // D₀(1)
};

/// Discrete lifting of unit Dirichlet data at x = 0 into the interior. The
/// returned column realises B = (λ₀−A)D₀ and is bounded at every grid size,
/// unlike its continuous counterpart (γ > 3/4).
BoundaryLift LiftBoundaryControl(const ParabolicModel& model, double shift);

ParabolicModel BuildSemilinear1d(const ParabolicModel& base,
                                 Nonlinearity nonlinearity);

/// Row-major CSV, 17 significant digits.
void WriteMatrixCsv(std::ostream& out, const MatrixXd& m);

/// printf("%.17g").
std::string FormatDouble(double x);

}  // namespace delaystab
