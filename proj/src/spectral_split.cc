#include "delaystab/spectral_split.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "delaystab/error.h"

namespace delaystab {
namespace {

constexpr double kInvariantTol = 1e-10;

double OperatorNorm(const MatrixXd& a) {
  if (a.size() == 0) return 0.0;
  Eigen::BDCSVD<MatrixXd> svd(a);
  return svd.singularValues()(0);
}

// Groups numerically split copies of one eigenvalue together.
std::vector<EigenvalueInfo> Cluster(const VectorXcd& values, int begin, int end,
                                    bool unstable) {
  std::vector<EigenvalueInfo> out;
  std::vector<std::complex<double>> sums;
  for (int k = begin; k < end; ++k) {
    const std::complex<double> z = values(k);
    bool merged = false;
    for (size_t c = 0; c < out.size(); ++c) {
      const double tol = 1e-5 * std::max(1.0, std::abs(out[c].value));
      if (std::abs(z - out[c].value) <= tol) {
        sums[c] += z;
        ++out[c].algebraic_mult;
        out[c].value = sums[c] / static_cast<double>(out[c].algebraic_mult);
        merged = true;
        break;
      }
    }
    if (!merged) {
      out.push_back({z, 1, 0, unstable});
      sums.push_back(z);
    }
  }
  return out;
}

}  // namespace

double SpectralSplit::NormPlus(const VectorXd& xi) const {
  const VectorXd z = basis_plus * xi;
  return std::sqrt((z.array().square() * mass_weights.array()).sum());
}

SpectralSplit ComputeSplit(const ParabolicModel& model, double sigma,
                           double cluster_tol) {
  if (!(sigma > 0.0)) {
    throw Error(ErrorClass::kSpectral, "decay target sigma must be positive");
  }
  const MatrixXd& a = model.generator;
  const MatrixXd& b = model.input_map;
  const int n = model.state_dim();

  const OrderedSchur schur = ComputeOrderedSchur(
      a, [sigma](std::complex<double> z) { return z.real() >= -sigma; });
  const double radius = schur.eigenvalues.cwiseAbs().maxCoeff();
  if (cluster_tol <= 0.0) cluster_tol = 1e-6 * std::max(radius, 1e-300);
  for (int k = 0; k < n; ++k) {
    const double re = schur.eigenvalues(k).real();
    if (std::abs(re + sigma) < cluster_tol) {
      throw Error(ErrorClass::kSpectral,
                  "eigenvalue " + FormatDouble(re) + (schur.eigenvalues(k).imag() != 0.0 ? "+i" + FormatDouble(schur.eigenvalues(k).imag()) : "") +
                      " lies within cluster_tol of Re = -sigma; the split "
                      "is ill-posed");
    }
  }

  SpectralSplit s;
  s.sigma = sigma;
  s.cluster_tol = cluster_tol;
  s.mass_weights = model.mass_weights;
  const int np = schur.leading;
  const int nm = n - np;
  s.n_plus = np;

  const MatrixXd t11 = schur.t.topLeftCorner(np, np);
  const MatrixXd t12 = schur.t.topRightCorner(np, nm);
  const MatrixXd t22 = schur.t.bottomRightCorner(nm, nm);
  MatrixXd x;
  try {
    x = SolveQuasiTriangularSylvester(t11, t22, -t12);
  } catch (const std::exception& e) {
    throw Error(ErrorClass::kSpectral,
                std::string("spectral decoupling failed: ") + e.what());
  }
  const MatrixXd q1 = schur.q.leftCols(np);
  const MatrixXd q2 = schur.q.rightCols(nm);
  s.basis_plus = q1;
  s.basis_plus_adj = q1 - q2 * x.transpose();
  s.P_plus = s.basis_plus * s.basis_plus_adj.transpose();
  s.A_plus = t11;
  s.input_plus = s.basis_plus_adj.transpose() * b;

  s.stable_abscissa = std::numeric_limits<double>::infinity();
  for (int k = np; k < n; ++k) {
    s.stable_abscissa = std::min(s.stable_abscissa, -schur.eigenvalues(k).real());
  }
  if (s.gap() < cluster_tol) {
    throw Error(ErrorClass::kSpectral,
                "stable gap sigma_- - sigma below cluster_tol");
  }

  // Multiplicities; Jordan structure only matters on the small unstable block.
  const double norm_a = std::max(1.0, OperatorNorm(a));
  s.eigenvalues = Cluster(schur.eigenvalues, 0, np, true);
  s.N_plus_ctrl = 0;
  for (auto& ev : s.eigenvalues) {
    const MatrixXcd shifted =
        t11.cast<std::complex<double>>() -
        ev.value * MatrixXcd::Identity(np, np);
    ev.geometric_mult = np - NumericalRank(shifted, 1e-8 * norm_a);
    s.N_plus_ctrl = std::max(s.N_plus_ctrl, ev.geometric_mult);
  }
  const auto stable = Cluster(schur.eigenvalues, np, n, false);
  s.eigenvalues.insert(s.eigenvalues.end(), stable.begin(), stable.end());

  // U₊ = B*H₊* = range(BᵀW); U₋ = B*H₋* = range(Bᵀ(I − P₊ᵀ)).
  const MatrixXd bw = b.transpose() * s.basis_plus_adj;
  const double bw_norm = bw.size() ? OperatorNorm(bw) : 0.0;
  s.u_plus = RangeBasis(bw, 1e-10 * std::max(bw_norm, 1e-300));
  const MatrixXd bm =
      b.transpose() * (MatrixXd::Identity(n, n) - s.P_plus.transpose());
  const double bm_norm = OperatorNorm(bm);
  s.u_minus = RangeBasis(bm, 1e-10 * std::max(bm_norm, 1e-300));
  s.p_plus = s.u_plus * s.u_plus.transpose();
  s.p_minus = s.u_minus * s.u_minus.transpose();
  s.B_plus = s.input_plus * s.u_plus;

  // Invariants.
  const double p_norm = std::max(1.0, s.P_plus.norm());
  SplitResiduals& r = s.residuals;
  r.idempotency = (s.P_plus * s.P_plus - s.P_plus).cwiseAbs().maxCoeff() / p_norm;
  r.commutation =
      (s.P_plus * a - a * s.P_plus).cwiseAbs().maxCoeff() / (p_norm * norm_a);
  if (np > 0) {
    r.biorthogonality =
        (s.basis_plus_adj.transpose() * s.basis_plus -
         MatrixXd::Identity(np, np))
            .cwiseAbs()
            .maxCoeff();
    const MatrixXd stable_proj = MatrixXd::Identity(n, n) - s.P_plus;
    // (z, M⁻¹w)_H = zᵀw for z ∈ range(I − P₊), w ∈ range(W).
    r.orthogonality =
        (stable_proj.transpose() * s.basis_plus_adj).cwiseAbs().maxCoeff() /
        (p_norm * std::max(1.0, s.basis_plus_adj.norm()));
  } else {
    r.idempotency = r.commutation = 0.0;
  }
  const double worst = std::max({r.idempotency, r.commutation,
                                 r.biorthogonality, r.orthogonality});
  if (!(worst < kInvariantTol)) {
    throw Error(ErrorClass::kSpectral,
                "spectral projection failed its invariant checks (worst "
                "residual " +
                    FormatDouble(worst) + ")");
  }
  return s;
}

HautusReport HautusCheck(const SpectralSplit& split,
                         const ParabolicModel& model, double svd_tol,
                         double tau) {
  using Complex = std::complex<double>;
  HautusReport report;
  const MatrixXd& b = model.input_map;
  const int np = split.n_plus;
  // ‖B‖ as a map U → H.
  const VectorXd sqrt_m = model.mass_weights.cwiseSqrt();
  Eigen::BDCSVD<MatrixXd> bsvd(sqrt_m.asDiagonal() * b);
  report.tolerance = svd_tol * bsvd.singularValues()(0);
  if (np == 0) return report;

  const double norm_a = std::max(1.0, OperatorNorm(model.generator));
  const MatrixXcd t11 = split.A_plus.cast<Complex>();
  const MatrixXcd wtb = split.input_plus.cast<Complex>();
  const MatrixXcd transformed =
      Expm(-tau * split.A_plus).cast<Complex>() * split.input_plus;
  const MatrixXcd w = split.basis_plus_adj.cast<Complex>();
  const VectorXd inv_m = model.mass_weights.cwiseInverse();

  for (const auto& ev : split.eigenvalues) {
    if (!ev.unstable) continue;
    HautusEntry entry;
    entry.eigenvalue = ev.value;
    // Left eigenvectors y = W u with T11ᴴ u = λ̄ u; adjoint eigenvectors of A
    // in H are ε = M⁻¹ y, and B*ε = Bᵀ y.
    const MatrixXcd shifted =
        t11.adjoint() - std::conj(ev.value) * MatrixXcd::Identity(np, np);
    const MatrixXcd u = NullSpace(shifted, 1e-8 * norm_a);
    entry.kernel_dim = static_cast<int>(u.cols());
    if (u.cols() == 0) {
      // Cannot happen for a genuine eigenvalue; treat as failure.
      entry.passed = false;
      report.passed = false;
      report.entries.push_back(entry);
      continue;
    }
    const MatrixXcd y = w * u;
    const MatrixXcd gram = y.adjoint() * inv_m.asDiagonal() * y;
    Eigen::LLT<MatrixXcd> llt(gram);
    const MatrixXcd l = llt.matrixL();
    // Rows: (B*ε_k)ᴴ for an H-orthonormal basis ε_k of the eigenspace.
    const MatrixXcd coupling =
        l.triangularView<Eigen::Lower>().solve(u.adjoint() * wtb);
    const MatrixXcd coupling_t =
        l.triangularView<Eigen::Lower>().solve(u.adjoint() * transformed);
    auto smallest = [](const MatrixXcd& c) {
      Eigen::JacobiSVD<MatrixXcd> svd(c);
      const int rows = static_cast<int>(c.rows());
      const auto& sv = svd.singularValues();
      return static_cast<int>(sv.size()) < rows ? 0.0 : sv(rows - 1);
    };
    entry.sigma_min = smallest(coupling);
    entry.sigma_min_transformed = smallest(coupling_t);
    entry.passed = entry.sigma_min > report.tolerance;
    const double scaled_tol =
        report.tolerance * std::exp(-tau * ev.value.real());
    const bool transformed_pass = entry.sigma_min_transformed > scaled_tol;
    if (transformed_pass != entry.passed) report.transformed_agrees = false;
    if (!entry.passed) report.passed = false;
    report.entries.push_back(entry);
  }
  return report;
}

double StableBlockBound(const ParabolicModel& model, const SpectralSplit& split,
                        double horizon, int samples) {
  const int n = model.state_dim();
  if (split.n_plus == n) return 0.0;
  const double dt = horizon / samples;
  const MatrixXd step = Expm(dt * model.generator);
  const VectorXd s = model.mass_weights.cwiseSqrt();
  const VectorXd s_inv = s.cwiseInverse();
  MatrixXd flow = MatrixXd::Identity(n, n) - split.P_plus;
  double bound = 0.0;
  for (int k = 0; k <= samples; ++k) {
    const MatrixXd scaled = s.asDiagonal() * flow * s_inv.asDiagonal();
    const double value =
        OperatorNorm(scaled) * std::exp(split.stable_abscissa * k * dt);
    bound = std::max(bound, value);
    flow = step * flow;
  }
  return bound;
}

}  // namespace delaystab
