#include "delaystab/model.h"

#include <cmath>
#include <cstdio>

#include "delaystab/error.h"

namespace delaystab {
namespace {

void CheckShift(const MatrixXd& generator, double shift) {
  const int n = static_cast<int>(generator.rows());
  const MatrixXd shifted = shift * MatrixXd::Identity(n, n) - generator;
  Eigen::BDCSVD<MatrixXd> svd(shifted);
  const double smallest = svd.singularValues().minCoeff();
  const double scale = std::max(1.0, generator.norm());
  if (!(smallest > 1e-10 * scale)) {
    throw Error(ErrorClass::kModel,
                "shift " + FormatDouble(shift) +
                    " lies in the spectrum of the generator (smallest "
                    "singular value of shift·I − A is " +
                    FormatDouble(smallest) + ")");
  }
}

void CheckFullColumnRank(const MatrixXd& input_map) {
  if (input_map.cols() == 0) {
    throw Error(ErrorClass::kModel, "input map has no columns");
  }
  Eigen::JacobiSVD<MatrixXd> svd(input_map);
  const auto& sv = svd.singularValues();
  const double cutoff = 1e-12 * std::max(1.0, sv(0));
  if (sv.size() < input_map.cols() || sv(sv.size() - 1) <= cutoff) {
    throw Error(ErrorClass::kModel, "input map is not of full column rank");
  }
}

}  // namespace

const char* ToString(ModelKind kind) {
  switch (kind) {
    case ModelKind::kAbstract:
      return "abstract";
    case ModelKind::kDistributed1d:
      return "distributed_1d";
    case ModelKind::kBoundary1d:
      return "boundary_1d";
    case ModelKind::kSemilinear1d:
      return "semilinear_1d";
  }
  return "unknown";
}

Forcing Forcing::Zero(int state_dim) {
  Forcing f;
  f.evaluate = [state_dim](double) { return VectorXd::Zero(state_dim); };
  f.zero = true;
  return f;
}

Forcing Forcing::Decaying(const VectorXd& profile, double rate,
                          double amplitude) {
  Forcing f;
  f.evaluate = [profile, rate, amplitude](double t) -> VectorXd {
    return amplitude * std::exp(-rate * t) * profile;
  };
  f.decay_rate = rate;
  f.zero = amplitude == 0.0 || profile.isZero(0.0);
  return f;
}

Nonlinearity CubicNonlinearity() {
  return {[](const VectorXd& z) -> VectorXd { return -z.array().cube(); },
          "-z^3: locally Lipschitz, constant 3r^2 on the ball of radius r"};
}

Nonlinearity BurgersNonlinearity(double spacing) {
  return {[spacing](const VectorXd& z) -> VectorXd {
            const int n = static_cast<int>(z.size());
            VectorXd out(n);
            for (int i = 0; i < n; ++i) {
              const double left = i > 0 ? z(i - 1) : 0.0;
              const double right = i + 1 < n ? z(i + 1) : 0.0;
              const double dz =
                  z(i) >= 0.0 ? (z(i) - left) / spacing : (right - z(i)) / spacing;
              out(i) = -z(i) * dz;
            }
            return out;
          },
          "-z z_x (upwind): quadratic, Lipschitz constant O(r/h) on the ball "
          "of radius r"};
}

double ParabolicModel::Inner(const VectorXd& a, const VectorXd& b) const {
  return (a.array() * mass_weights.array() * b.array()).sum();
}

double ParabolicModel::Norm(const VectorXd& z) const {
  return std::sqrt(Inner(z, z));
}

double ParabolicModel::H1Norm(const VectorXd& z) const {
  if (!is_pde()) {
    throw Error(ErrorClass::kModel, "H1 norm needs a 1-D grid");
  }
  const int n = static_cast<int>(z.size());
  double acc = 0.0;
  double prev = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double cur = i < n ? z(i) : 0.0;
    acc += (cur - prev) * (cur - prev);
    prev = cur;
  }
  return std::sqrt(acc / spacing);
}

ParabolicModel BuildCustomLti(const MatrixXd& generator,
                              const MatrixXd& input_map, double shift) {
  if (generator.rows() == 0 || generator.rows() != generator.cols()) {
    throw Error(ErrorClass::kModel, "generator must be a non-empty square matrix");
  }
  if (input_map.rows() != generator.rows()) {
    throw Error(ErrorClass::kModel,
                "input map has " + std::to_string(input_map.rows()) +
                    " rows, generator is " + std::to_string(generator.rows()) +
                    "x" + std::to_string(generator.cols()));
  }
  if (!generator.allFinite() || !input_map.allFinite() ||
      !std::isfinite(shift)) {
    throw Error(ErrorClass::kModel, "non-finite model data");
  }
  CheckFullColumnRank(input_map);
  CheckShift(generator, shift);

  ParabolicModel m;
  m.kind = ModelKind::kAbstract;
  m.generator = generator;
  m.input_map = input_map;
  m.mass_weights = VectorXd::Ones(generator.rows());
  m.shift = shift;
  return m;
}

BoundaryLift LiftBoundaryControl(const ParabolicModel& model, double shift) {
  if (model.kind != ModelKind::kBoundary1d) {
    throw Error(ErrorClass::kModel, "boundary lifting needs a boundary_1d model");
  }
  const int n = model.state_dim();
  const double h = model.spacing;
  // Weight of the x = 0 boundary value in the stencil of the first node.
  const double boundary_coeff =
      model.diffusion / (h * h) - model.drift(0) / (2.0 * h);
  VectorXd rhs = VectorXd::Zero(n);
  rhs(0) = boundary_coeff;

  const MatrixXd shifted = shift * MatrixXd::Identity(n, n) - model.generator;
  Eigen::FullPivLU<MatrixXd> lu(shifted);
  lu.setThreshold(1e-12);
  if (!lu.isInvertible()) {
    throw Error(ErrorClass::kModel,
                "lifting solve is singular: shift is an eigenvalue");
  }
  CheckShift(model.generator, shift);

  BoundaryLift out;
  out.lifting = lu.solve(rhs);
  out.input_column = shifted * out.lifting;
  return out;
}

ParabolicModel BuildConvectionDiffusion1d(
    const ConvectionDiffusion1dParams& p) {
  if (p.intervals < 16) {
    throw Error(ErrorClass::kModel, "grid size must be at least 16");
  }
  if (!(p.length > 0.0) || !std::isfinite(p.length)) {
    throw Error(ErrorClass::kModel, "domain length must be positive");
  }
  if (!(p.diffusion > 0.0) || !std::isfinite(p.diffusion)) {
    throw Error(ErrorClass::kModel, "diffusion must be positive");
  }
  const int n = p.intervals - 1;
  const double h = p.length / p.intervals;

  ParabolicModel m;
  m.length = p.length;
  m.spacing = h;
  m.diffusion = p.diffusion;
  m.grid.resize(n);
  m.drift.resize(n);
  m.reaction.resize(n);
  for (int i = 0; i < n; ++i) {
    const double x = (i + 1) * h;
    m.grid(i) = x;
    m.drift(i) = p.drift(x);
    m.reaction(i) = p.reaction(x);
  }
  if (!m.drift.allFinite() || !m.reaction.allFinite()) {
    throw Error(ErrorClass::kModel, "non-finite coefficients");
  }
  const double peclet = h * m.drift.cwiseAbs().maxCoeff() / (2.0 * p.diffusion);
  if (!(peclet < 1.0)) {
    throw Error(ErrorClass::kModel,
                "cell Peclet number " + FormatDouble(peclet) +
                    " >= 1; refine the grid");
  }

  m.generator = MatrixXd::Zero(n, n);
  const double nu_h2 = p.diffusion / (h * h);
  for (int i = 0; i < n; ++i) {
    const double adv = m.drift(i) / (2.0 * h);
    m.generator(i, i) = -2.0 * nu_h2 + m.reaction(i);
    if (i > 0) m.generator(i, i - 1) = nu_h2 - adv;
    if (i + 1 < n) m.generator(i, i + 1) = nu_h2 + adv;
  }
  m.mass_weights = VectorXd::Constant(n, h);
  m.shift = p.shift.value_or(m.reaction.maxCoeff() + 1.0);
  CheckShift(m.generator, m.shift);

  if (const auto* dc = std::get_if<DistributedControl>(&p.control)) {
    if (!(dc->x_a >= 0.0 && dc->x_a < dc->x_b && dc->x_b <= p.length)) {
      throw Error(ErrorClass::kModel,
                  "control window must satisfy 0 <= x_a < x_b <= L");
    }
    if (dc->shapes < 1) {
      throw Error(ErrorClass::kModel, "need at least one control shape");
    }
    m.kind = ModelKind::kDistributed1d;
    m.input_map = MatrixXd::Zero(n, dc->shapes);
    int inside = 0;
    const double width = dc->x_b - dc->x_a;
    for (int i = 0; i < n; ++i) {
      const double x = m.grid(i);
      if (x <= dc->x_a || x >= dc->x_b) continue;
      ++inside;
      for (int k = 0; k < dc->shapes; ++k) {
        m.input_map(i, k) = std::cos(k * M_PI * (x - dc->x_a) / width);
      }
    }
    if (inside == 0) {
      throw Error(ErrorClass::kModel, "control window contains no grid node");
    }
    CheckFullColumnRank(m.input_map);
  } else {
    m.kind = ModelKind::kBoundary1d;
    m.gamma = 0.75;  // continuous B is in L(U, H_{-γ}) for every γ > 3/4
    const BoundaryLift lift = LiftBoundaryControl(m, m.shift);
    m.input_map = lift.input_column;
    m.lifting = lift.lifting;
  }
  return m;
}

ParabolicModel BuildSemilinear1d(const ParabolicModel& base,
                                 Nonlinearity nonlinearity) {
  if (base.kind != ModelKind::kDistributed1d) {
    throw Error(ErrorClass::kModel,
                "semilinear models extend a distributed_1d model");
  }
  if (!nonlinearity.evaluate) {
    throw Error(ErrorClass::kModel, "nonlinearity has no evaluator");
  }
  const VectorXd at_zero =
      nonlinearity.evaluate(VectorXd::Zero(base.state_dim()));
  if (at_zero.size() != base.state_dim() || !(at_zero.norm() == 0.0)) {
    throw Error(ErrorClass::kModel, "nonlinearity must vanish at the origin");
  }
  ParabolicModel m = base;
  m.kind = ModelKind::kSemilinear1d;
  m.nonlinearity = std::move(nonlinearity);
  return m;
}

std::string FormatDouble(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void WriteMatrixCsv(std::ostream& out, const MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << FormatDouble(m(i, j));
    }
    out << '\n';
  }
}

}  // namespace delaystab
