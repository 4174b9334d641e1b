#include "delaystab/feedback_design.h"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <random>

#include "delaystab/error.h"

namespace delaystab {
namespace {

// Returns k with a ≈ k·b, or -1 when a is not an integer multiple of b.
int IntegerRatio(double a, double b) {
  const double r = a / b;
  const double k = std::round(r);
  if (std::abs(r - k) > 1e-9 * std::max(1.0, std::abs(r))) return -1;
  return static_cast<int>(k);
}

double MaxNorm(const MatrixXd& m) {
  return m.size() ? m.cwiseAbs().maxCoeff() : 0.0;
}

FeedbackDesign Assemble(const SpectralSplit& split, const ParabolicModel& model,
                        double tau, double sigma_star, MatrixXd directions,
                        MatrixXd gain_reduced) {
  FeedbackDesign d;
  const int np = split.n_plus;
  d.tau = tau;
  d.sigma = split.sigma;
  d.sigma_star = sigma_star;
  d.directions = std::move(directions);
  d.gain_reduced = std::move(gain_reduced);
  d.gain = d.directions * d.gain_reduced;
  d.gain_state = d.gain * split.basis_plus_adj.transpose();
  d.zeta = model.mass_weights.cwiseInverse().asDiagonal() *
           split.basis_plus_adj * d.gain_reduced.transpose();
  const MatrixXd back = Expm(-tau * split.A_plus);
  d.transformed_input = back * split.B_plus;
  d.coupling = split.input_plus * d.gain;
  d.achieved_abscissa = SpectralAbscissa(split.A_plus + back * d.coupling);
  d.rank = d.gain.size()
               ? NumericalRank(d.gain.cast<std::complex<double>>(),
                               1e-12 * std::max(1e-300, d.gain.norm()))
               : 0;
  if (np > 0 && d.gain.rows() > 0) {
    const MatrixXd functional = d.directions * d.zeta.transpose() *
                                model.mass_weights.asDiagonal();
    const double scale = std::max(MaxNorm(d.gain_state), 1e-300);
    d.representation_gap = MaxNorm(functional - d.gain_state) / scale;
  }
  return d;
}

FeedbackDesign ZeroDesign(const SpectralSplit& split,
                          const ParabolicModel& model, double tau,
                          double sigma_star) {
  FeedbackDesign d =
      Assemble(split, model, tau, sigma_star,
               MatrixXd::Zero(model.input_dim(), 0), MatrixXd(0, split.n_plus));
  d.stabilizing = d.achieved_abscissa < -sigma_star;
  return d;
}

// k-th largest singular value (1-based), 0 when rank-deficient in size.
double KthSingularValue(const MatrixXcd& c, int k) {
  if (k <= 0) return std::numeric_limits<double>::infinity();
  if (c.size() == 0) return 0.0;
  Eigen::JacobiSVD<MatrixXcd> svd(c);
  const auto& sv = svd.singularValues();
  return k <= sv.size() ? sv(k - 1) : 0.0;
}

struct Coupling {
  MatrixXcd matrix;  // E_jᴴ Ĥ, ℓ_j × dim U₊
  int geometric = 1;
};

double CouplingObjective(const std::vector<Coupling>& couplings,
                         const MatrixXd& q) {
  double worst = std::numeric_limits<double>::infinity();
  const int cols = static_cast<int>(q.cols());
  for (const auto& c : couplings) {
    const MatrixXcd restricted = c.matrix * q.cast<std::complex<double>>();
    worst = std::min(worst,
                     KthSingularValue(restricted, std::min(c.geometric, cols)));
  }
  return worst;
}

// Appends `v` to the orthonormal columns of q; false when v ∈ span(q).
bool AppendOrthonormal(MatrixXd& q, VectorXd v) {
  const double original = v.norm();
  if (original == 0.0) return false;
  for (int pass = 0; pass < 2; ++pass) {
    v -= q * (q.transpose() * v);
  }
  if (v.norm() < 1e-8 * original) return false;
  q.conservativeResize(q.rows(), q.cols() + 1);
  q.col(q.cols() - 1) = v / v.norm();
  return true;
}

}  // namespace

VectorXd FeedbackDesign::ApplyFunctionals(const ParabolicModel& model,
                                          const VectorXd& phi) const {
  VectorXd out = VectorXd::Zero(input_dim());
  for (int k = 0; k < directions.cols(); ++k) {
    out += model.Inner(phi, zeta.col(k)) * directions.col(k);
  }
  return out;
}

double DefaultSigmaStar(const SpectralSplit& split) {
  double margin = 0.5;
  if (std::isfinite(split.stable_abscissa)) {
    margin = std::max(margin, 0.25 * (split.stable_abscissa - split.sigma));
  }
  return split.sigma + margin;
}

FeedbackDesign DesignGain(const SpectralSplit& split,
                          const ParabolicModel& model, double tau,
                          const DesignOptions& options) {
  if (!(tau >= 0.0)) throw Error(ErrorClass::kDesign, "delay must be positive");
  const double sigma_star = options.sigma_star.value_or(DefaultSigmaStar(split));
  if (!(sigma_star > split.sigma)) {
    throw Error(ErrorClass::kDesign, "sigma_star must exceed sigma");
  }
  const HautusReport hautus =
      HautusCheck(split, model, options.svd_tol, tau);
  if (!hautus.passed) {
    if (options.require_hautus) {
      std::string where;
      for (const auto& e : hautus.entries) {
        if (!e.passed) {
          where = FormatDouble(e.eigenvalue.real());
          if (e.eigenvalue.imag() != 0.0) {
            where += (e.eigenvalue.imag() > 0 ? "+" : "") +
                     FormatDouble(e.eigenvalue.imag()) + "i";
          }
          break;
        }
      }
      throw Error(ErrorClass::kDesign,
                  "Fattorini-Hautus test fails at eigenvalue " + where);
    }
    return ZeroDesign(split, model, tau, sigma_star);
  }

  const int np = split.n_plus;
  const int m = model.input_dim();
  if (np == 0) {
    return Assemble(split, model, tau, sigma_star, MatrixXd::Zero(m, 0),
                    MatrixXd(0, 0));
  }
  const int du = split.dim_u_plus();
  const int r = split.N_plus_ctrl;
  if (du < r) {
    if (!options.require_hautus) {
      return ZeroDesign(split, model, tau, sigma_star);
    }
    throw Error(ErrorClass::kDesign, "dim U+ smaller than N+");
  }

  const MatrixXd hhat = Expm(-tau * split.A_plus) * split.B_plus;

  std::vector<Coupling> couplings;
  std::vector<VectorXd> candidates;
  for (int i = 0; i < du; ++i) candidates.push_back(VectorXd::Unit(du, i));
  const MatrixXcd t11 = split.A_plus.cast<std::complex<double>>();
  for (const auto& ev : split.eigenvalues) {
    if (!ev.unstable) continue;
    const MatrixXcd shifted =
        t11.adjoint() - std::conj(ev.value) * MatrixXcd::Identity(np, np);
    Eigen::JacobiSVD<MatrixXcd> svd(shifted, Eigen::ComputeFullV);
    const MatrixXcd left = svd.matrixV().rightCols(ev.geometric_mult);
    Coupling c;
    c.matrix = left.adjoint() * hhat.cast<std::complex<double>>();
    c.geometric = ev.geometric_mult;
    Eigen::JacobiSVD<MatrixXcd> csvd(c.matrix, Eigen::ComputeFullV);
    for (int k = 0; k < c.geometric && k < du; ++k) {
      const VectorXcd v = csvd.matrixV().col(k);
      for (const VectorXd& part : {VectorXd(v.real()), VectorXd(v.imag())}) {
        if (part.norm() > 1e-12) candidates.push_back(part / part.norm());
      }
    }
    couplings.push_back(std::move(c));
  }

  // Greedy column selection, then seeded random orthonormal frames; every
  // frame is kept and tried in order of decreasing coupling.
  std::vector<std::pair<double, MatrixXd>> frames;
  {
    MatrixXd q(du, 0);
    while (q.cols() < r) {
      double best = -1.0;
      MatrixXd best_q;
      for (const auto& cand : candidates) {
        MatrixXd trial = q;
        if (!AppendOrthonormal(trial, cand)) continue;
        const double value = CouplingObjective(couplings, trial);
        if (value > best) {
          best = value;
          best_q = trial;
        }
      }
      if (best_q.size() == 0) break;
      q = best_q;
    }
    if (q.cols() == r) frames.emplace_back(CouplingObjective(couplings, q), q);
  }
  std::mt19937_64 rng(0x5eedULL);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 16 && du > r; ++trial) {
    MatrixXd g(du, r);
    for (int i = 0; i < g.size(); ++i) g.data()[i] = normal(rng);
    Eigen::HouseholderQR<MatrixXd> qr(g);
    const MatrixXd q = qr.householderQ() * MatrixXd::Identity(du, r);
    frames.emplace_back(CouplingObjective(couplings, q), q);
  }
  std::stable_sort(frames.begin(), frames.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });

  const MatrixXd shifted_a =
      split.A_plus + sigma_star * MatrixXd::Identity(np, np);
  // State weight ‖V ξ‖²_H, so the design does not depend on the grid scaling
  // of the Schur coordinates.
  MatrixXd gram = split.basis_plus.transpose() *
                  model.mass_weights.asDiagonal() * split.basis_plus;
  gram = 0.5 * (gram + gram.transpose()).eval();
  for (const auto& [objective, q] : frames) {
    if (!(objective > 0.0)) break;
    const MatrixXd bq = hhat * q;
    MatrixXd x;
    if (!SolveContinuousAlgebraicRiccati(shifted_a, bq, gram,
                                         MatrixXd::Identity(r, r), &x)) {
      continue;
    }
    const MatrixXd gain_reduced = -bq.transpose() * x;
    FeedbackDesign d = Assemble(split, model, tau, sigma_star,
                                split.u_plus * q, gain_reduced);
    if (d.achieved_abscissa < -sigma_star) return d;
  }
  if (!options.require_hautus) return ZeroDesign(split, model, tau, sigma_star);
  throw Error(ErrorClass::kDesign,
              "regulator solve failed for every set of " + std::to_string(r) +
                  " input directions");
}

FeedbackDesign DesignFromGain(const SpectralSplit& split,
                              const ParabolicModel& model, double tau,
                              const MatrixXd& gain_state, double sigma_star) {
  if (!(tau >= 0.0)) throw Error(ErrorClass::kDesign, "delay must be positive");
  if (gain_state.rows() != model.input_dim() ||
      gain_state.cols() != model.state_dim()) {
    throw Error(ErrorClass::kDesign, "gain must be input_dim x state_dim");
  }
  const MatrixXd g = gain_state * split.basis_plus;  // m×n₊ on ξ
  MatrixXd directions(model.input_dim(), 0);
  MatrixXd reduced(0, split.n_plus);
  if (g.size() > 0 && g.norm() > 0.0) {
    Eigen::JacobiSVD<MatrixXd> svd(g, Eigen::ComputeThinU);
    int r = 0;
    for (int k = 0; k < svd.singularValues().size(); ++k) {
      if (svd.singularValues()(k) > 1e-12 * svd.singularValues()(0)) ++r;
    }
    if (r > split.N_plus_ctrl) {
      throw Error(ErrorClass::kDesign,
                  "gain rank " + std::to_string(r) + " exceeds N+ = " +
                      std::to_string(split.N_plus_ctrl));
    }
    directions = svd.matrixU().leftCols(r);
    const double leak =
        MaxNorm(directions - split.p_plus * directions);
    if (leak > 1e-8) {
      throw Error(ErrorClass::kDesign, "gain range leaves U+");
    }
    reduced = directions.transpose() * g;
  }
  FeedbackDesign d =
      Assemble(split, model, tau, sigma_star, directions, reduced);
  if (!(d.achieved_abscissa < -sigma_star)) {
    throw Error(ErrorClass::kDesign,
                "gain leaves the transformed closed loop at abscissa " +
                    FormatDouble(d.achieved_abscissa) + " >= -sigma_star");
  }
  return d;
}

FeedbackDesign PlaceScalarPole(const SpectralSplit& split,
                               const ParabolicModel& model, double tau,
                               double target, double sigma_star) {
  if (split.n_plus != 1) {
    throw Error(ErrorClass::kDesign,
                "scalar pole placement needs exactly one unstable mode");
  }
  const MatrixXd hhat = Expm(-tau * split.A_plus) * split.B_plus;  // 1×dim U₊
  const double size = hhat.norm();
  if (!(size > 1e-12)) {
    throw Error(ErrorClass::kDesign, "unstable mode is not reachable");
  }
  const VectorXd q = hhat.row(0).transpose() / size;
  MatrixXd directions = split.u_plus * q;
  MatrixXd reduced(1, 1);
  reduced(0, 0) = (target - split.A_plus(0, 0)) / size;
  FeedbackDesign d =
      Assemble(split, model, tau, sigma_star, directions, reduced);
  if (!(d.achieved_abscissa < -sigma_star)) {
    throw Error(ErrorClass::kDesign, "target pole is not left of -sigma_star");
  }
  return d;
}

MemoryKernel SolveKernel(const FeedbackDesign& design, const SpectralSplit& split,
                         double horizon, double step,
                         const KernelOptions& options) {
  if (!(step > 0.0)) throw Error(ErrorClass::kDesign, "kernel step must be positive");
  const int np = split.n_plus;
  MemoryKernel k;
  k.tau = design.tau;
  k.horizon = horizon;
  k.step = step;
  k.n_plus = np;
  k.steps = IntegerRatio(horizon, step);
  if (k.steps <= 0) {
    throw Error(ErrorClass::kDesign, "kernel step must divide the horizon");
  }
  if (design.tau == 0.0) {
    if (!options.allow_zero_delay) {
      throw Error(ErrorClass::kDesign, "delay must be positive");
    }
    k.delay_steps = 0;
    k.lag.assign(k.steps + 1, MatrixXd::Zero(np, np));
    k.lag_delay_left = MatrixXd::Zero(np, np);
    return k;
  }
  k.delay_steps = IntegerRatio(design.tau, step);
  if (k.delay_steps <= 0) {
    throw Error(ErrorClass::kDesign, "kernel step must divide the delay");
  }
  if (k.steps < 2 * k.delay_steps) {
    throw Error(ErrorClass::kDesign, "kernel horizon must be at least 2 tau");
  }
  const int P = k.delay_steps;
  const int N = k.steps;

  k.k0.resize(P + 1);
  for (int p = 0; p <= P; ++p) {
    k.k0[p] = Expm((p * step - design.tau) * split.A_plus) * design.coupling;
    k.k0_sup = std::max(k.k0_sup, np ? k.k0[p].norm() : 0.0);
  }
  k.lag.assign(N + 1, MatrixXd::Zero(np, np));
  k.lag_delay_left = MatrixXd::Zero(np, np);
  if (np == 0) return k;

  // K₀ blocks in reverse lag order [K₀_P, …, K₀_1], and trapezoid node values
  // stacked vertically (the jump node carries the mean of both limits).
  MatrixXd k0_rev(np, np * P);
  for (int p = 1; p <= P; ++p) k0_rev.middleCols((P - p) * np, np) = k.k0[p];
  MatrixXd nodes = MatrixXd::Zero(np * (N + 1), np);

  const Eigen::PartialPivLU<MatrixXd> implicit(
      MatrixXd::Identity(np, np) - 0.5 * step * k.k0[0]);
  k.lag[0] = k.k0[0];
  nodes.topRows(np) = k.lag[0];
  MatrixXd rhs(np, np);
  for (int p = 1; p <= N; ++p) {
    const int lo = std::max(p - P, 0);
    const int interior = p - lo - 1;
    rhs.setZero();
    if (p <= P) rhs = k.k0[p];
    if (interior > 0) {
      rhs.noalias() += step * k0_rev.rightCols(interior * np) *
                       nodes.middleRows((p - interior) * np, interior * np);
    }
    rhs.noalias() += 0.5 * step * k.k0[p - lo] * k.lag[lo];
    const MatrixXd value = implicit.solve(rhs);
    if (p == P) {
      k.lag_delay_left = value;
      k.lag[p] = value - k.k0[P];
      nodes.middleRows(p * np, np) = 0.5 * (value + k.lag[p]);
    } else {
      k.lag[p] = value;
      nodes.middleRows(p * np, np) = value;
    }
  }
  for (const auto& m : k.lag) k.kernel_sup = std::max(k.kernel_sup, m.norm());
  k.kernel_sup = std::max(k.kernel_sup, k.lag_delay_left.norm());

  k.tolerance = options.rel_tol * k.k0_sup;
  k.residual_sup =
      KernelResidual(k, split.A_plus, design.coupling, options.max_checks);
  return k;
}

double KernelResidual(const MemoryKernel& k, const MatrixXd& a_plus,
                      const MatrixXd& coupling, int max_checks) {
  const int np = k.n_plus;
  const int P = k.delay_steps;
  const int N = k.steps;
  if (np == 0 || P == 0) return 0.0;
  const double dt = k.step;
  const double tau = k.tau;
  auto k0_at = [&](double theta) -> MatrixXd {
    return Expm((theta - tau) * a_plus) * coupling;
  };
  constexpr double kGlNode[3] = {0.5 - 0.3872983346207417, 0.5,
                                 0.5 + 0.3872983346207417};
  constexpr double kGlWeight[3] = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};

  // K₀ at the quadrature abscissae; θ for a full panel at lag index j is
  // (j + ½ − x_g)Δ, the two half panels are tabulated separately.
  std::vector<std::array<MatrixXd, 3>> full(P + 1);
  std::array<MatrixXd, 3> low_half, high_half;
  for (int g = 0; g < 3; ++g) {
    for (int j = 1; j <= P; ++j) full[j][g] = k0_at((j + 0.5 - kGlNode[g]) * dt);
    low_half[g] = k0_at((P - 0.5 * kGlNode[g]) * dt);
    high_half[g] = k0_at((0.5 - 0.5 * kGlNode[g]) * dt);
  }
  std::vector<MatrixXd> k0_mid(P);
  for (int p = 0; p < P; ++p) k0_mid[p] = k0_at((p + 0.5) * dt);

  // Cubic Lagrange interpolation of κ at position x (in steps) inside panel
  // [q, q+1], restricted to the smooth piece containing that panel. κ jumps
  // at lag τ and loses one derivative at each further multiple of τ.
  MatrixXd interp(np, np);
  auto kappa_at = [&](int q, double x) -> const MatrixXd& {
    const bool left_piece = q + 1 <= P;
    const int a = (q / P) * P;
    const int b = std::min(a + P, N);
    const int count = std::min(4, b - a + 1);
    int start = std::clamp(q - 1, a, b - count + 1);
    auto value = [&](int node) -> const MatrixXd& {
      if (node == P) return left_piece ? k.lag_delay_left : k.lag[P];
      return k.lag[node];
    };
    interp.setZero();
    for (int i = 0; i < count; ++i) {
      double w = 1.0;
      for (int j = 0; j < count; ++j) {
        if (j != i) w *= (x - (start + j)) / double(i - j);
      }
      interp += w * value(start + i);
    }
    return interp;
  };

  std::vector<int> checks;
  const int stride = std::max(1, (N + max_checks - 1) / std::max(1, max_checks));
  for (int p = 0; p < N; p += stride) checks.push_back(p);
  for (int p : {P - 1, P, 2 * P - 1, 2 * P, N - 1}) {
    if (p >= 0 && p < N) checks.push_back(p);
  }

  double worst = 0.0;
  MatrixXd acc(np, np);
  for (int p : checks) {
    const double u = p + 0.5;
    acc.setZero();
    if (p < P) acc = k0_mid[p];
    int first_full = 0;
    if (p >= P) {
      for (int g = 0; g < 3; ++g) {
        const MatrixXd& kv = kappa_at(p - P, p - P + 0.5 + 0.5 * kGlNode[g]);
        acc.noalias() += (0.5 * dt * kGlWeight[g]) * low_half[g] * kv;
      }
      first_full = p - P + 1;
    }
    for (int q = first_full; q < p; ++q) {
      for (int g = 0; g < 3; ++g) {
        const MatrixXd& kv = kappa_at(q, q + kGlNode[g]);
        acc.noalias() += (dt * kGlWeight[g]) * full[p - q][g] * kv;
      }
    }
    for (int g = 0; g < 3; ++g) {
      const MatrixXd& kv = kappa_at(p, p + 0.5 * kGlNode[g]);
      acc.noalias() += (0.5 * dt * kGlWeight[g]) * high_half[g] * kv;
    }
    const MatrixXd mid = kappa_at(p, u);
    worst = std::max(worst, (mid - acc).norm());
  }
  return worst;
}

VectorXd TransformedState(const MemoryKernel& kernel, const MatrixXd& xi,
                          int i) {
  const int np = kernel.n_plus;
  VectorXd w = xi.col(i);
  if (i == 0 || np == 0 || kernel.delay_steps == 0) return w;
  if (i > kernel.steps) {
    throw Error(ErrorClass::kSimulate, "time beyond the kernel horizon");
  }
  const double dt = kernel.step;
  const int P = kernel.delay_steps;
  w.noalias() += 0.5 * dt * kernel.lag[0] * xi.col(i);
  w.noalias() += 0.5 * dt * kernel.LeftLimit(i) * xi.col(0);
  for (int j = 1; j < i; ++j) {
    const int lag = i - j;
    if (lag == P) {
      w.noalias() += (0.5 * dt) * (kernel.lag_delay_left + kernel.lag[P]) * xi.col(j);
    } else if (np == 1) {
      w(0) += dt * kernel.lag[lag](0, 0) * xi(0, j);
    } else {
      w.noalias() += dt * kernel.lag[lag] * xi.col(j);
    }
  }
  return w;
}

VectorXd EvalFeedback(const FeedbackDesign& design, const MemoryKernel& kernel,
                      const SpectralSplit& split, const ParabolicModel& model,
                      const std::vector<VectorXd>& history, double t) {
  const int m = design.input_dim();
  if (t < 0.0) throw Error(ErrorClass::kSimulate, "negative time");
  if (t < design.tau) return VectorXd::Zero(m);
  const int i = IntegerRatio(t, kernel.step);
  if (i < 0) throw Error(ErrorClass::kSimulate, "time is not on the kernel grid");
  const int k = i - kernel.delay_steps;
  if (k > kernel.steps) {
    throw Error(ErrorClass::kSimulate, "t - tau beyond the kernel horizon");
  }
  if (static_cast<int>(history.size()) < k + 1) {
    throw Error(ErrorClass::kSimulate, "history shorter than t - tau");
  }
  const int np = split.n_plus;
  MatrixXd xi(np, k + 1);
  for (int j = 0; j <= k; ++j) xi.col(j) = split.Coordinates(history[j]);
  const VectorXd w = TransformedState(kernel, xi, k);
  const VectorXd v = design.gain * w;

  // Same value through the functionals: φ = z(t−τ) + (memory term lifted to H).
  const VectorXd phi = history[k] + split.Lift(w - xi.col(k));
  const VectorXd v_functional = design.ApplyFunctionals(model, phi);
  const double scale =
      1.0 + design.gain.cwiseAbs().maxCoeff() * (w.cwiseAbs().maxCoeff() +
                                                  history[k].cwiseAbs().maxCoeff());
  if ((v - v_functional).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw Error(ErrorClass::kDesign,
                "gain and functional representations disagree");
  }
  return v;
}

namespace {

void WriteLe(std::ostream& out, double x) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(x);
  if constexpr (std::endian::native == std::endian::big) {
    bits = __builtin_bswap64(bits);
  }
  out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
}

double ReadLe(std::istream& in) {
  std::uint64_t bits = 0;
  in.read(reinterpret_cast<char*>(&bits), sizeof bits);
  if (!in) throw Error(ErrorClass::kDesign, "truncated kernel file");
  if constexpr (std::endian::native == std::endian::big) {
    bits = __builtin_bswap64(bits);
  }
  return std::bit_cast<double>(bits);
}

}  // namespace

void WriteKernelBinary(std::ostream& out, const MemoryKernel& kernel,
                       int stride) {
  stride = std::max(1, stride);
  const int np = kernel.n_plus;
  const int n = kernel.steps / stride;
  WriteLe(out, np);
  WriteLe(out, n * stride * kernel.step);
  WriteLe(out, stride * kernel.step);
  WriteLe(out, kernel.tau);
  for (int i = 0; i <= n; ++i) {
    for (int j = 0; j <= i; ++j) {
      const MatrixXd& m = kernel.At(i * stride, j * stride);
      for (int r = 0; r < np; ++r) {
        for (int c = 0; c < np; ++c) WriteLe(out, m(r, c));
      }
    }
  }
}

KernelDump ReadKernelBinary(std::istream& in) {
  KernelDump d;
  d.n_plus = static_cast<int>(ReadLe(in));
  d.horizon = ReadLe(in);
  d.step = ReadLe(in);
  d.tau = ReadLe(in);
  if (d.n_plus < 0 || !(d.step > 0.0)) {
    throw Error(ErrorClass::kDesign, "malformed kernel header");
  }
  d.steps = static_cast<int>(std::lround(d.horizon / d.step));
  const size_t count = static_cast<size_t>(d.steps + 1) * (d.steps + 2) / 2 *
                       d.n_plus * d.n_plus;
  d.values.resize(count);
  for (auto& v : d.values) v = ReadLe(in);
  return d;
}

double KernelDump::Norm(int i, int j) const {
  const size_t block = static_cast<size_t>(n_plus) * n_plus;
  const size_t offset = (static_cast<size_t>(i) * (i + 1) / 2 + j) * block;
  double acc = 0.0;
  for (size_t k = 0; k < block; ++k) acc += values[offset + k] * values[offset + k];
  return std::sqrt(acc);
}

}  // namespace delaystab
