// Acceptance run: one PASS/FAIL line per criterion, exit status 1 on any FAIL.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "delaystab/cli.h"
#include "delaystab/closed_loop.h"
#include "delaystab/config.h"
#include "delaystab/error.h"
#include "delaystab/feedback_design.h"
#include "delaystab/linalg.h"
#include "delaystab/spectral_split.h"
#include "oracles.h"

namespace delaystab {
namespace {

namespace fs = std::filesystem;

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void Check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

ScenarioConfig Scenario(const std::string& name,
                        const std::vector<std::pair<std::string, std::string>>& overrides = {}) {
  const fs::path path = fs::path(DELAYSTAB_SOURCE_DIR) / "scenarios" / (name + ".ini");
  ScenarioConfig c = LoadConfig(path.string());
  if (!overrides.empty()) {
    const std::string base = c.base_dir;
    c = ParseConfig(c.source_text, overrides);
    c.base_dir = base;
  }
  return c;
}

// Every scenario that carries a stabilizing design, sweep points included.
std::vector<std::pair<std::string, ScenarioConfig>> ShippedDesigns() {
  std::vector<std::pair<std::string, ScenarioConfig>> out;
  for (const char* name : {"scalar", "heat_distributed", "heat_boundary", "forced_heat",
                           "semilinear_cubic"}) {
    out.emplace_back(name, Scenario(name));
  }
  const ScenarioConfig sweep = Scenario("delay_sweep");
  for (const auto& tau : sweep.sweep[0].values) {
    for (const auto& reaction : sweep.sweep[1].values) {
      out.emplace_back("delay_sweep[" + tau + "," + reaction + "]",
                       Scenario("delay_sweep", {{sweep.sweep[0].key, tau},
                                                {sweep.sweep[1].key, reaction}}));
    }
  }
  return out;
}

double MaxFinite(const VectorXd& v) {
  double out = 0.0;
  for (int i = 0; i < v.size(); ++i) {
    if (std::isfinite(v(i))) out = std::max(out, v(i));
  }
  return out;
}

Pipeline Designed(const ScenarioConfig& c) {
  Pipeline p = RunAnalyze(c);
  RunDesign(p);
  return p;
}

// 1. Scalar loop against the closed-form delay loop and its RK4 integration.
void ScalarOracle(Verdict& v) {
  const auto start = Clock::now();
  Pipeline p = Designed(testing::ScalarConfig(1e-3, 10.0));
  RunSimulate(p);
  const double runtime = Seconds(start);
  const double g = -2.0 * std::exp(0.5);
  const double closed = 1.0 + g * std::exp(-0.5);
  const auto rk4 = testing::ScalarDelayLoopRk4(1.0, g, 0.5, 1.0, 10.0, 1e-4);
  double oracle_gap = 0.0;
  for (int i = 0; i < p.trajectory->samples(); i += 10) {
    oracle_gap = std::max(oracle_gap, std::abs(p.trajectory->states(0, i) - rk4[10 * i]));
  }
  const double rate = p.certificate->fitted_rate;
  v.detail << "gain " << p.design->gain_state(0, 0) << ", closed-loop eigenvalue " << closed
           << ", fitted rate " << rate << ", sup gap to RK4 " << oracle_gap << ", "
           << runtime << " s";
  v.Check(std::abs(p.design->gain_state(0, 0) - g) < 1e-12, "gain");
  v.Check(std::abs(rate + closed) <= 1e-3, "rate within 1e-3 of 1");
  v.Check(oracle_gap < 1e-4, "trajectory matches oracle");
  v.Check(runtime < 1.0, "runtime < 1 s");
}

// 2. Kernel: analytic scalar profile, then every shipped design against the
// Picard oracle and its own residual bound.
void KernelCorrectness(Verdict& v) {
  Pipeline scalar = Designed(testing::ScalarConfig(1e-3, 2.0));
  std::vector<double> errors;
  for (double step : {0.01, 0.005, 0.0025}) {
    const MemoryKernel k = SolveKernel(*scalar.design, scalar.split, 2.0, step);
    double err = std::abs(k.lag_delay_left(0, 0) + 2.0 * std::exp(-0.5));
    for (int p = 0; p < k.delay_steps; ++p) {
      err = std::max(err, std::abs(k.lag[p](0, 0) + 2.0 * std::exp(-p * step)));
    }
    errors.push_back(err);
  }
  const double q1 = errors[0] / errors[1];
  const double q2 = errors[1] / errors[2];
  v.detail << "analytic errors " << errors[0] << " " << errors[1] << " " << errors[2]
           << " (ratios " << q1 << ", " << q2 << ")";
  v.Check(std::abs(q1 - 4.0) < 0.4 && std::abs(q2 - 4.0) < 0.4, "error quartering");

  for (const auto& [name, config] : ShippedDesigns()) {
    const auto start = Clock::now();
    const Pipeline p = Designed(config);
    const MemoryKernel& k = *p.kernel;
    const int count = std::min(k.steps, 3 * std::max(k.delay_steps, 1)) + 1;
    const testing::PicardColumn col = testing::PicardKernelColumn(
        p.split.A_plus, p.design->coupling, k.tau, k.step, count);
    double gap = 0.0;
    for (int l = 0; l < count; ++l) {
      gap = std::max(gap, (col.values[l] - k.lag[l]).norm());
      gap = std::max(gap, (col.left_limit[l] - k.LeftLimit(l)).norm());
    }
    const double runtime = Seconds(start);
    v.detail << "; " << name << ": residual " << k.residual_sup << " / " << k.tolerance
             << ", Picard gap " << gap << ", " << runtime << " s";
    v.Check(col.converged, name + " Picard converged");
    v.Check(gap <= 10.0 * k.residual_sup, name + " Picard gap <= 10 residual");
    v.Check(k.residual_sup <= 1e-6 * k.k0_sup, name + " residual <= 1e-6 |K0|");
    v.Check(runtime < 10.0, name + " runtime < 10 s");
  }
}

double MaxResidualRatio(const Trajectory& t) {
  const double plus = t.plus_norms.maxCoeff();
  return std::max(MaxFinite(t.r1), MaxFinite(t.r2)) / plus;
}

// 3. Artstein identities on every shipped run and their refinement order.
void ArtsteinIdentities(Verdict& v) {
  const auto start = Clock::now();
  double worst = 0.0;
  for (const auto& [name, config] : ShippedDesigns()) {
    Pipeline p = Designed(config);
    RunSimulate(p);
    double ratio = MaxResidualRatio(*p.trajectory);
    if (p.picard) ratio = std::max(ratio, MaxResidualRatio(p.picard->limit));
    worst = std::max(worst, ratio);
    v.Check(ratio <= 1e-4, name + " residual <= 1e-4 max|z+|");
  }
  v.detail << "worst residual / max|z+| " << worst;

  auto order = [&](const ScenarioConfig& coarse_config, const ScenarioConfig& fine_config) {
    double r1[2], r2[2];
    int slot = 0;
    for (const ScenarioConfig* c : {&coarse_config, &fine_config}) {
      Pipeline p = Designed(*c);
      RunSimulate(p);
      r1[slot] = MaxFinite(p.trajectory->r1);
      r2[slot] = MaxFinite(p.trajectory->r2);
      ++slot;
    }
    return std::make_pair(std::log2(r1[0] / r1[1]), std::log2(r2[0] / r2[1]));
  };
  const auto scalar = order(testing::ScalarConfig(0.004, 4.0), testing::ScalarConfig(0.002, 4.0));
  const auto heat = order(testing::HeatConfig("distributed_1d", 48, 0.002, 2.0),
                          testing::HeatConfig("distributed_1d", 48, 0.001, 2.0));
  v.detail << ", observed orders r1/r2: scalar " << scalar.first << "/" << scalar.second
           << ", heat " << heat.first << "/" << heat.second;
  for (double o : {scalar.first, scalar.second, heat.first, heat.second}) {
    v.Check(o > 1.8, "second-order refinement");
  }
  const double runtime = Seconds(start);
  v.detail << ", " << runtime << " s";
  v.Check(runtime < 30.0, "runtime < 30 s");
}

// 4. Heat pipeline, distributed and boundary input, two grids each.
void PdePipeline(Verdict& v) {
  const auto start = Clock::now();
  for (const char* name : {"heat_distributed", "heat_boundary"}) {
    double rates[2];
    int n_plus[2], big_n[2];
    int slot = 0;
    for (const char* intervals : {"100", "200"}) {
      Pipeline p = Designed(Scenario(name, {{"model.intervals", intervals}}));
      RunSimulate(p);
      rates[slot] = p.certificate->fitted_rate;
      n_plus[slot] = p.split.n_plus;
      big_n[slot] = p.split.N_plus_ctrl;
      v.detail << name << " n=" << intervals << ": n+ " << n_plus[slot] << ", N+ "
               << big_n[slot] << ", rate " << rates[slot] << "; ";
      v.Check(rates[slot] >= 0.48, std::string(name) + " rate >= 0.48");
      ++slot;
    }
    v.Check(n_plus[0] == 1 && n_plus[0] == n_plus[1], std::string(name) + " one unstable mode on both grids");
    v.Check(big_n[0] == big_n[1], std::string(name) + " N+ grid independent");
    v.Check(std::abs(rates[0] - rates[1]) <= 0.02, std::string(name) + " rates within 0.02");
  }
  const double runtime = Seconds(start);
  v.detail << runtime << " s";
  v.Check(runtime < 120.0, "runtime < 2 min");
}

// 5. Split invariants on every construction and similarity invariance.
void SplitInvariants(Verdict& v) {
  std::vector<std::pair<std::string, ParabolicModel>> models;
  for (const char* name : {"scalar", "heat_distributed", "heat_boundary", "forced_heat",
                           "semilinear_cubic", "delay_sweep", "blind_actuator"}) {
    models.emplace_back(name, BuildModel(Scenario(name)));
  }
  MatrixXd jordan(2, 2);
  jordan << 0, 1, 0, 0;
  models.emplace_back("jordan", testing::AbstractModel(jordan, MatrixXd::Identity(2, 2)));
  MatrixXd rot(4, 4);
  rot << 0.3, -2.0, 0.5, 0.0, 2.0, 0.3, 0.0, 1.0, 0.0, 0.0, -4.0, 1.0, 0.0, 0.0, 0.0, -6.0;
  models.emplace_back("complex pair", testing::AbstractModel(rot, MatrixXd::Identity(4, 2)));
  double worst = 0.0;
  for (const auto& [name, m] : models) {
    const SpectralSplit s = ComputeSplit(m, name == "scalar" ? 0.9 : 0.5);
    const auto& r = s.residuals;
    const double w = std::max({r.idempotency, r.commutation, r.biorthogonality, r.orthogonality});
    worst = std::max(worst, w);
    v.Check(w < 1e-10, name + " invariants < 1e-10");
  }
  v.detail << "worst invariant residual " << worst;

  MatrixXd a = VectorXd(Eigen::Vector4d(1, 1, -2, -3)).asDiagonal();
  a(0, 2) = 0.7;
  a(1, 3) = -0.4;
  const MatrixXd b = MatrixXd::Identity(4, 2) + MatrixXd::Constant(4, 2, 0.1);
  const SpectralSplit base = ComputeSplit(testing::AbstractModel(a, b), 0.5);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unif(-0.5, 0.5);
  double set_gap = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    MatrixXd s = MatrixXd::Identity(4, 4);
    for (int i = 0; i < 16; ++i) s.data()[i] += unif(rng);
    const SpectralSplit t = ComputeSplit(testing::AbstractModel(s * a * s.inverse(), s * b), 0.5);
    v.Check(t.n_plus == base.n_plus && t.N_plus_ctrl == base.N_plus_ctrl,
            "similarity keeps n+ and N+");
    for (const auto& e : base.eigenvalues) {
      if (!e.unstable) continue;
      double nearest = INFINITY;
      for (const auto& f : t.eigenvalues) {
        if (f.unstable) nearest = std::min(nearest, std::abs(e.value - f.value));
      }
      set_gap = std::max(set_gap, nearest);
    }
  }
  v.detail << ", similarity set gap " << set_gap;
  v.Check(set_gap <= 1e-8, "unstable set agreement 1e-8");
}

// 6. Blind actuator: Hautus fails and the loop diverges.
void HautusGate(Verdict& v) {
  const ScenarioConfig c = Scenario("blind_actuator");
  const ParabolicModel m = BuildModel(c);
  const SpectralSplit s = ComputeSplit(m, c.design.sigma);
  const HautusReport h = HautusCheck(s, m, c.design.svd_tol, c.design.tau);
  DesignOptions lax;
  lax.require_hautus = false;
  const FeedbackDesign d = DesignGain(s, m, c.design.tau, lax);
  const MemoryKernel k = SolveKernel(d, s, c.simulation.horizon, c.simulation.dt);
  const Trajectory t = SimulateLinear(m, s, d, k, InitialState(c, m), Forcing::Zero(m.state_dim()),
                                      c.simulation.horizon, c.simulation.dt);
  const double growth = std::log(t.norms(t.samples() - 1) / t.norms(0)) / c.simulation.horizon;
  bool design_refused = false;
  try {
    DesignGain(s, m, c.design.tau);
  } catch (const Error& e) {
    design_refused = e.error_class() == ErrorClass::kDesign;
  }
  v.detail << "Hautus " << (h.passed ? "passed" : "failed") << ", sigma_min "
           << h.entries.at(0).sigma_min << ", log-growth rate " << growth;
  v.Check(!h.passed, "Hautus fails");
  v.Check(design_refused, "design refused");
  v.Check(growth > 0.5, "norm grows");
}

// 7. rank G ≤ N₊ everywhere, Jordan block case.
void RankConstraint(Verdict& v) {
  for (const auto& [name, config] : ShippedDesigns()) {
    const Pipeline p = Designed(config);
    v.Check(p.design->rank <= p.split.N_plus_ctrl, name + " rank <= N+");
    v.Check(p.design->achieved_abscissa < -p.design->sigma_star, name + " abscissa");
  }
  MatrixXd jordan(2, 2);
  jordan << 0, 1, 0, 0;
  const ParabolicModel m = testing::AbstractModel(jordan, MatrixXd::Identity(2, 2));
  const SpectralSplit s = ComputeSplit(m, 0.5);
  const FeedbackDesign d = DesignGain(s, m, 0.2);
  v.detail << "Jordan block: n+ " << s.n_plus << ", N+ " << s.N_plus_ctrl << ", rank "
           << d.rank << ", abscissa " << d.achieved_abscissa << " vs -sigma* "
           << -d.sigma_star;
  v.Check(s.N_plus_ctrl == 1, "Jordan N+ = 1");
  v.Check(d.rank == 1, "Jordan rank 1");
  v.Check(d.achieved_abscissa < -d.sigma_star, "Jordan abscissa < -sigma*");
}

// 8. Semilinear surrogate and the forced linear run.
void Semilinear(Verdict& v) {
  const auto start = Clock::now();
  Pipeline p = Designed(Scenario("semilinear_cubic"));
  RunSimulate(p);
  const Trajectory& direct = *p.trajectory;
  const Trajectory& limit = p.picard->limit;
  double gap = 0.0;
  for (int i = 0; i < direct.samples(); ++i) {
    gap = std::max(gap, p.model.Norm(direct.states.col(i) - limit.states.col(i)));
  }
  gap /= direct.norms.maxCoeff();
  Pipeline forced = Designed(Scenario("forced_heat"));
  RunSimulate(forced);
  const double runtime = Seconds(start);
  v.detail << "rate " << p.certificate->fitted_rate << " (sigma " << p.config.design.sigma
           << "), Picard max ratio " << p.picard->max_ratio() << " in "
           << p.picard->increments.size() << " iterations, relative gap to direct run "
           << gap << ", forced C_witness " << forced.certificate->c_witness << ", "
           << runtime << " s";
  v.Check(!direct.blew_up, "bounded");
  v.Check(p.certificate->fitted_rate >= p.config.design.sigma - 0.05, "rate >= sigma - 0.05");
  v.Check(p.picard->converged && p.picard->max_ratio() < 1.0, "Picard contracts");
  v.Check(gap <= 1e-6, "fixed point matches direct run");
  v.Check(std::isfinite(forced.certificate->c_witness), "forced C_witness finite");
  v.Check(runtime < 60.0, "runtime < 1 min");
}

// 9. Samples newer than t − τ never reach v(t).
void Causality(Verdict& v) {
  Pipeline p = Designed(testing::HeatConfig("distributed_1d", 48, 0.001, 2.0));
  const int n = p.model.state_dim();
  const int P = p.kernel->delay_steps;
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal;
  std::vector<VectorXd> history;
  for (int i = 0; i <= 2000; ++i) {
    VectorXd z(n);
    for (int j = 0; j < n; ++j) z(j) = normal(rng);
    history.push_back(z);
  }
  int checked = 0;
  for (int i = 0; i <= 2000; i += 37) {
    const double t = i * p.config.simulation.dt;
    const VectorXd before = EvalFeedback(*p.design, *p.kernel, p.split, p.model, history, t);
    std::vector<VectorXd> tampered = history;
    for (int j = std::max(i - P + 1, 0); j <= 2000; ++j) tampered[j] *= -3.0;
    const VectorXd after = EvalFeedback(*p.design, *p.kernel, p.split, p.model, tampered, t);
    v.Check(before == after, "v(" + std::to_string(t) + ") unchanged");
    ++checked;
  }
  // Same through the integrator: a source change at t* leaves v on [0, t* + τ].
  const int cut = 600;
  MatrixXd source = MatrixXd::Zero(n, 2001);
  MatrixXd tampered = source;
  tampered.rightCols(2000 - cut).setConstant(10.0);
  const VectorXd z0 = InitialState(p.config, p.model);
  const Trajectory a = SimulateLinearSampled(p.model, p.split, *p.design, *p.kernel, z0, source,
                                             2.0, 0.001);
  const Trajectory b = SimulateLinearSampled(p.model, p.split, *p.design, *p.kernel, z0,
                                             tampered, 2.0, 0.001);
  const bool same = a.controls.leftCols(cut + P + 1) == b.controls.leftCols(cut + P + 1);
  const bool reacts = a.controls.col(cut + P + 2) != b.controls.col(cut + P + 2);
  v.detail << checked << " feedback evaluations and one integrator run compared bitwise";
  v.Check(same, "integrator controls unchanged up to t* + tau");
  v.Check(reacts, "integrator controls react after t* + tau");
}

}  // namespace
}  // namespace delaystab

int main() {
  using namespace delaystab;
  ConfigureLogging();
  const std::vector<std::pair<const char*, std::function<void(Verdict&)>>> criteria = {
      {"scalar delay loop matches the closed-form oracle", ScalarOracle},
      {"memory kernel: analytic profile, Picard oracle, residual", KernelCorrectness},
      {"Artstein identities on shipped runs, second order", ArtsteinIdentities},
      {"heat pipeline, distributed and boundary input", PdePipeline},
      {"spectral split invariants and similarity invariance", SplitInvariants},
      {"blind actuator fails Hautus and diverges", HautusGate},
      {"gain rank bounded by N+, Jordan block", RankConstraint},
      {"semilinear surrogate, outer Picard, forced run", Semilinear},
      {"feedback ignores history newer than t - tau", Causality},
  };
  int failures = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      criteria[i].second(v);
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail << " [exception: " << e.what() << "]";
    }
    failures += !v.pass;
    std::printf("%s criterion %zu: %s: %s\n", v.pass ? "PASS" : "FAIL", i + 1,
                criteria[i].first, v.detail.str().c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures,
              criteria.size());
  return failures == 0 ? 0 : 1;
}
