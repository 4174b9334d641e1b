#include "delaystab/closed_loop.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "delaystab/error.h"

namespace delaystab {
namespace {

enum class Source { kZero, kSampled, kNonlinear };

int CheckGrid(const MemoryKernel& kernel, double tau, double horizon,
              double dt) {
  if (!(dt > 0.0)) throw Error(ErrorClass::kSimulate, "dt must be positive");
  if (std::abs(dt - kernel.step) > 1e-12 * kernel.step) {
    throw Error(ErrorClass::kSimulate, "dt must equal the kernel step");
  }
  if (std::abs(tau - kernel.tau) > 1e-12 * std::max(1.0, tau)) {
    throw Error(ErrorClass::kSimulate, "kernel was built for another delay");
  }
  const double ratio = tau / dt;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio)) {
    throw Error(ErrorClass::kSimulate, "dt must divide tau");
  }
  const double steps = horizon / dt;
  const long n = std::lround(steps);
  if (n <= 0 || std::abs(steps - n) > 1e-9 * std::max(1.0, steps)) {
    throw Error(ErrorClass::kSimulate, "dt must divide the horizon");
  }
  if (n > kernel.steps) {
    throw Error(ErrorClass::kSimulate, "kernel horizon shorter than the run");
  }
  return static_cast<int>(n);
}

double WeightedL2(const VectorXd& times, const VectorXd& values, double sigma) {
  double acc = 0.0;
  for (int i = 0; i + 1 < times.size(); ++i) {
    const double a = std::exp(2 * sigma * times(i)) * values(i) * values(i);
    const double b =
        std::exp(2 * sigma * times(i + 1)) * values(i + 1) * values(i + 1);
    acc += 0.5 * (times(i + 1) - times(i)) * (a + b);
  }
  return std::sqrt(acc);
}

void Truncate(Trajectory& t, int samples) {
  auto cut = [samples](MatrixXd& m) {
    if (m.cols() > samples) m.conservativeResize(m.rows(), samples);
  };
  auto cutv = [samples](VectorXd& v) {
    if (v.size() > samples) v.conservativeResize(samples);
  };
  cutv(t.times);
  cut(t.states);
  cut(t.controls);
  cut(t.transformed);
  cut(t.forcing);
  cut(t.forcing_plus);
  cutv(t.norms);
  cutv(t.plus_norms);
  cutv(t.transformed_norms);
  cutv(t.forcing_norms);
  cutv(t.h1_norms);
  cutv(t.graph_norms);
  cutv(t.derivative_norms);
}

void FillDerivativeNorms(const ParabolicModel& model, Trajectory& t) {
  const int samples = t.samples();
  t.derivative_norms = VectorXd::Zero(samples);
  if (samples < 2) return;
  for (int i = 0; i < samples; ++i) {
    const int a = std::max(i - 1, 0);
    const int b = std::min(i + 1, samples - 1);
    t.derivative_norms(i) =
        model.Norm(t.states.col(b) - t.states.col(a)) / (t.times(b) - t.times(a));
  }
}

Trajectory Integrate(const ParabolicModel& model, const SpectralSplit& split,
                     const FeedbackDesign& design, const MemoryKernel& kernel,
                     const VectorXd& z0, double horizon, double dt,
                     Source source, const MatrixXd* sampled,
                     const SimulationOptions& options, bool throw_on_blowup) {
  const int n = model.state_dim();
  const int m = model.input_dim();
  const int np = split.n_plus;
  if (z0.size() != n) {
    throw Error(ErrorClass::kSimulate, "initial state has the wrong dimension");
  }
  const int steps = CheckGrid(kernel, design.tau, horizon, dt);
  const int P = kernel.delay_steps;
  const int samples = steps + 1;
  if (source == Source::kSampled &&
      (sampled->rows() != n || sampled->cols() < samples)) {
    throw Error(ErrorClass::kSimulate, "sampled source has the wrong shape");
  }
  const bool strong = model.kind == ModelKind::kDistributed1d ||
                      model.kind == ModelKind::kSemilinear1d;
  const bool feedback = options.feedback && np > 0 && design.gain.size() > 0;
  const bool static_feedback = feedback && P == 0;

  Trajectory t;
  t.dt = dt;
  t.tau = design.tau;
  t.times = VectorXd::LinSpaced(samples, 0.0, steps * dt);
  t.states = MatrixXd::Zero(n, samples);
  t.controls = MatrixXd::Zero(m, samples);
  t.transformed = MatrixXd::Zero(np, samples);
  t.forcing_plus = MatrixXd::Zero(np, samples);
  if (source != Source::kZero) t.forcing = MatrixXd::Zero(n, samples);
  t.norms = VectorXd::Zero(samples);
  t.plus_norms = VectorXd::Zero(samples);
  t.transformed_norms = VectorXd::Zero(samples);
  t.forcing_norms = VectorXd::Zero(samples);
  if (strong) {
    t.h1_norms = VectorXd::Zero(samples);
    t.graph_norms = VectorXd::Zero(samples);
  }

  MatrixXd a_eff = model.generator;
  if (static_feedback) a_eff += model.input_map * design.gain_state;
  const Eigen::SparseMatrix<double> a_sparse = model.generator.sparseView();
  Eigen::SparseMatrix<double> id(n, n);
  id.setIdentity();
  const Eigen::SparseMatrix<double> lhs =
      (id - 0.5 * dt * a_eff.sparseView()).pruned();
  const Eigen::SparseMatrix<double> rhs_op =
      (id + 0.5 * dt * a_eff.sparseView()).pruned();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(lhs);
  if (lu.info() != Eigen::Success) {
    throw Error(ErrorClass::kSimulate, "Crank-Nicolson factorization failed");
  }

  VectorXd f_prev, f_cur;
  auto source_at = [&](int i, const VectorXd& z) -> VectorXd {
    switch (source) {
      case Source::kZero:
        return VectorXd::Zero(n);
      case Source::kSampled:
        return sampled->col(i);
      case Source::kNonlinear:
        return model.nonlinearity->evaluate(z);
    }
    return VectorXd::Zero(n);
  };
  // ξ history lives in its own buffer; TransformedState reads columns 0..i.
  MatrixXd xi_hist = MatrixXd::Zero(np, samples);
  auto advance_transformed = [&](int i) {
    xi_hist.col(i) = split.Coordinates(t.states.col(i));
    t.transformed.col(i) = TransformedState(kernel, xi_hist, i);
    t.transformed_norms(i) = split.NormPlus(t.transformed.col(i));
    t.plus_norms(i) = split.NormPlus(xi_hist.col(i));
    t.norms(i) = model.Norm(t.states.col(i));
    if (strong) {
      t.h1_norms(i) = model.H1Norm(t.states.col(i));
      t.graph_norms(i) = model.Norm(a_sparse * t.states.col(i));
    }
  };
  t.states.col(0) = z0;
  advance_transformed(0);
  f_cur = source_at(0, z0);
  auto store_source = [&](int i, const VectorXd& f) {
    if (source == Source::kZero) return;
    t.forcing.col(i) = f;
    t.forcing_plus.col(i) = split.Coordinates(f);
    t.forcing_norms(i) = model.Norm(f);
  };
  store_source(0, f_cur);

  auto control_right = [&](int i) -> VectorXd {
    if (!feedback) return VectorXd::Zero(m);
    if (static_feedback) return design.gain * xi_hist.col(i);
    if (i < P) return VectorXd::Zero(m);
    return design.gain * t.transformed.col(i - P);
  };
  auto control_left = [&](int i) -> VectorXd {
    if (!feedback || static_feedback || i <= P) return VectorXd::Zero(m);
    return design.gain * t.transformed.col(i - P);
  };

  for (int i = 0; i < steps; ++i) {
    const VectorXd v_right = control_right(i);
    t.controls.col(i) = v_right;
    VectorXd rhs = rhs_op * t.states.col(i);
    if (feedback && !static_feedback) {
      rhs.noalias() +=
          0.5 * dt * model.input_map * (v_right + control_left(i + 1));
    }
    switch (source) {
      case Source::kZero:
        break;
      case Source::kSampled:
        rhs += 0.5 * dt * (f_cur + sampled->col(i + 1));
        break;
      case Source::kNonlinear:
        if (i == 0) {
          rhs += dt * f_cur;
        } else {
          rhs += dt * (1.5 * f_cur - 0.5 * f_prev);
        }
        break;
    }
    t.states.col(i + 1) = lu.solve(rhs);
    advance_transformed(i + 1);
    const double norm = t.norms(i + 1);
    if (!std::isfinite(norm) || norm > options.blowup_threshold) {
      t.blew_up = true;
      t.diagnostic = "state norm exceeded " +
                     FormatDouble(options.blowup_threshold) + " at t = " +
                     FormatDouble(t.times(i + 1));
      Truncate(t, i + 2);
      if (strong) FillDerivativeNorms(model, t);
      if (throw_on_blowup) throw Error(ErrorClass::kSimulate, t.diagnostic);
      return t;
    }
    f_prev = f_cur;
    f_cur = source_at(i + 1, t.states.col(i + 1));
    store_source(i + 1, f_cur);
  }
  t.controls.col(steps) = control_right(steps);
  if (strong) FillDerivativeNorms(model, t);

  if (options.residuals) {
    const ArtsteinResiduals res =
        ComputeArtsteinResiduals(t, split, design, kernel);
    t.r1 = res.r1;
    t.r2 = res.r2;
  }
  return t;
}

}  // namespace

double PicardReport::max_ratio() const {
  double worst = 0.0;
  for (double r : ratios) worst = std::max(worst, r);
  return worst;
}

Trajectory SimulateLinear(const ParabolicModel& model, const SpectralSplit& split,
                          const FeedbackDesign& design, const MemoryKernel& kernel,
                          const VectorXd& z0, const Forcing& forcing,
                          double horizon, double dt,
                          const SimulationOptions& options) {
  if (forcing.zero || !forcing.evaluate) {
    return Integrate(model, split, design, kernel, z0, horizon, dt,
                     Source::kZero, nullptr, options, true);
  }
  const int steps = CheckGrid(kernel, design.tau, horizon, dt);
  MatrixXd sampled(model.state_dim(), steps + 1);
  for (int i = 0; i <= steps; ++i) sampled.col(i) = forcing.evaluate(i * dt);
  return Integrate(model, split, design, kernel, z0, horizon, dt,
                   Source::kSampled, &sampled, options, true);
}

Trajectory SimulateLinearSampled(const ParabolicModel& model,
                                 const SpectralSplit& split,
                                 const FeedbackDesign& design,
                                 const MemoryKernel& kernel, const VectorXd& z0,
                                 const MatrixXd& source, double horizon,
                                 double dt, const SimulationOptions& options) {
  return Integrate(model, split, design, kernel, z0, horizon, dt,
                   Source::kSampled, &source, options, true);
}

Trajectory SimulateSemilinear(const ParabolicModel& model,
                              const SpectralSplit& split,
                              const FeedbackDesign& design,
                              const MemoryKernel& kernel, const VectorXd& z0,
                              double horizon, double dt,
                              const SimulationOptions& options) {
  if (model.kind != ModelKind::kSemilinear1d || !model.nonlinearity) {
    throw Error(ErrorClass::kSimulate, "semilinear run needs a semilinear_1d model");
  }
  return Integrate(model, split, design, kernel, z0, horizon, dt,
                   Source::kNonlinear, nullptr, options, false);
}

PicardReport OuterPicard(const ParabolicModel& model, const SpectralSplit& split,
                         const FeedbackDesign& design, const MemoryKernel& kernel,
                         const VectorXd& z0, double horizon, double dt,
                         int max_iterations, double tol) {
  if (model.kind != ModelKind::kSemilinear1d || !model.nonlinearity) {
    throw Error(ErrorClass::kSimulate, "Picard mode needs a semilinear_1d model");
  }
  const int steps = CheckGrid(kernel, design.tau, horizon, dt);
  const int n = model.state_dim();
  SimulationOptions quiet;
  quiet.residuals = false;

  PicardReport report;
  MatrixXd source = MatrixXd::Zero(n, steps + 1);
  Trajectory traj = SimulateLinearSampled(model, split, design, kernel, z0,
                                          source, horizon, dt, quiet);
  const VectorXd times = traj.times;
  for (int k = 0; k < max_iterations; ++k) {
    MatrixXd next(n, steps + 1);
    VectorXd diff(steps + 1), size(steps + 1);
    for (int i = 0; i <= steps; ++i) {
      next.col(i) = model.nonlinearity->evaluate(traj.states.col(i));
      diff(i) = model.Norm(next.col(i) - source.col(i));
      size(i) = model.Norm(next.col(i));
    }
    const double increment = WeightedL2(times, diff, split.sigma);
    if (!report.increments.empty() && report.increments.back() > 0.0) {
      report.ratios.push_back(increment / report.increments.back());
    }
    report.increments.push_back(increment);
    source = std::move(next);
    traj = SimulateLinearSampled(model, split, design, kernel, z0, source,
                                 horizon, dt, quiet);
    if (increment <= tol * (1.0 + WeightedL2(times, size, split.sigma))) {
      report.converged = true;
      break;
    }
  }
  const ArtsteinResiduals res =
      ComputeArtsteinResiduals(traj, split, design, kernel);
  traj.r1 = res.r1;
  traj.r2 = res.r2;
  report.limit = std::move(traj);
  return report;
}

ArtsteinResiduals ComputeArtsteinResiduals(const Trajectory& traj,
                                           const SpectralSplit& split,
                                           const FeedbackDesign& design,
                                           const MemoryKernel& kernel) {
  ArtsteinResiduals out;
  const int samples = traj.samples();
  const int np = split.n_plus;
  out.r1 = VectorXd::Zero(samples);
  out.r2 = VectorXd::Constant(samples, std::numeric_limits<double>::quiet_NaN());
  if (np == 0 || samples < 3) {
    out.r2.setZero();
    return out;
  }
  const double dt = traj.dt;
  const int P = kernel.delay_steps;
  const MatrixXd& w = traj.transformed;

  const MatrixXd closed =
      split.A_plus + Expm(-design.tau * split.A_plus) * design.coupling;
  for (int i = 0; i < samples; ++i) {
    VectorXd wdot;
    if (i == 0) {
      wdot = (-3.0 * w.col(0) + 4.0 * w.col(1) - w.col(2)) / (2.0 * dt);
    } else if (i == samples - 1) {
      wdot = (3.0 * w.col(i) - 4.0 * w.col(i - 1) + w.col(i - 2)) / (2.0 * dt);
    } else {
      wdot = (w.col(i + 1) - w.col(i - 1)) / (2.0 * dt);
    }
    out.r1(i) =
        split.NormPlus(wdot - closed * w.col(i) - traj.forcing_plus.col(i));
  }

  // ũ_j = Wᵀ B v(t_j); the only jump of v is at t = τ, where the left
  // limit vanishes.
  const MatrixXd u_right = split.input_plus * traj.controls;
  std::vector<MatrixXd> back(P + 1);
  for (int k = 0; k <= P; ++k) back[k] = Expm(-k * dt * split.A_plus);
  VectorXd acc(np);
  for (int i = 0; i + P < samples; ++i) {
    acc.setZero();
    for (int k = 0; k < P; ++k) {
      const int j = i + k;
      acc.noalias() += 0.5 * dt * back[k] * u_right.col(j);
      if (j + 1 != P) acc.noalias() += 0.5 * dt * back[k + 1] * u_right.col(j + 1);
    }
    const VectorXd xi = split.Coordinates(traj.states.col(i));
    out.r2(i) = split.NormPlus(w.col(i) - xi - acc);
  }
  for (int i = 0; i < samples; ++i) {
    out.max_r1 = std::max(out.max_r1, out.r1(i));
    if (!std::isnan(out.r2(i))) out.max_r2 = std::max(out.max_r2, out.r2(i));
  }
  return out;
}

DecayCertificate FitDecay(const Trajectory& traj, double t_lo, double t_hi,
                          double sigma, double rate_tol) {
  const int samples = traj.samples();
  if (samples == 0) throw Error(ErrorClass::kSimulate, "empty trajectory");
  const double t_end = traj.times(samples - 1);
  const double eps = 1e-9 * std::max(1.0, t_end);
  if (t_lo < 2.0 * traj.tau - eps || t_hi > t_end + eps || !(t_lo < t_hi)) {
    throw Error(ErrorClass::kSimulate,
                "fit window must lie inside (2 tau, T]");
  }
  DecayCertificate c;
  c.t_lo = t_lo;
  c.t_hi = t_hi;
  c.sigma = sigma;

  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int count = 0;
  bool vanished = false;
  for (int i = 0; i < samples; ++i) {
    const double ti = traj.times(i);
    if (ti < t_lo - eps || ti > t_hi + eps) continue;
    ++count;
    if (!(traj.norms(i) > 0.0)) {
      vanished = true;
      continue;
    }
    const double y = std::log(traj.norms(i));
    sx += ti;
    sy += y;
    sxx += ti * ti;
    sxy += ti * y;
  }
  if (count < 10) {
    throw Error(ErrorClass::kSimulate, "fit window holds fewer than 10 samples");
  }
  if (vanished) {
    c.rate_infinite = true;
    c.fitted_rate = std::numeric_limits<double>::infinity();
  } else {
    const double slope = (count * sxy - sx * sy) / (count * sxx - sx * sx);
    c.fitted_rate = -slope;
  }

  const double f_norm = WeightedL2(traj.times, traj.forcing_norms, sigma);
  const double denom = traj.norms(0) + f_norm;
  double sup = 0.0;
  for (int i = 0; i < samples; ++i) {
    sup = std::max(sup, std::exp(sigma * traj.times(i)) * traj.norms(i));
  }
  c.c_witness = denom > 0.0 ? sup / denom : 0.0;

  c.strong_witness = std::numeric_limits<double>::quiet_NaN();
  if (traj.h1_norms.size() == samples && traj.derivative_norms.size() == samples) {
    double sup_h1 = 0.0;
    for (int i = 0; i < samples; ++i) {
      sup_h1 = std::max(sup_h1, std::exp(sigma * traj.times(i)) * traj.h1_norms(i));
    }
    const double numer = sup_h1 + WeightedL2(traj.times, traj.graph_norms, sigma) +
                         WeightedL2(traj.times, traj.derivative_norms, sigma);
    const double strong_denom = traj.h1_norms(0) + f_norm;
    c.strong_witness = strong_denom > 0.0 ? numer / strong_denom : 0.0;
  }
  c.passed = c.fitted_rate >= sigma - rate_tol;
  return c;
}

double EstimateStabilityRadius(const ParabolicModel& model,
                               const SpectralSplit& split,
                               const FeedbackDesign& design,
                               const MemoryKernel& kernel,
                               const VectorXd& profile, double horizon,
                               double dt, double lo, double hi,
                               int iterations) {
  SimulationOptions quiet;
  quiet.residuals = false;
  quiet.blowup_threshold = 1e6 * std::max(1.0, model.Norm(profile) * hi);
  auto stable = [&](double amplitude) {
    const Trajectory t = SimulateSemilinear(model, split, design, kernel,
                                            amplitude * profile, horizon, dt, quiet);
    return !t.blew_up && t.norms(t.samples() - 1) < t.norms(0);
  };
  if (stable(hi)) return hi;
  if (!stable(lo)) return 0.0;
  for (int k = 0; k < iterations; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (stable(mid)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

}  // namespace delaystab
