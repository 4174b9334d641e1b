#include "delaystab/closed_loop.h"

#include <cmath>

#include <gtest/gtest.h>

#include "delaystab/error.h"
#include "oracles.h"

namespace delaystab {
namespace {

using testing::AbstractModel;
using testing::HeatModel;

MatrixXd Scalar(double x) { return MatrixXd::Constant(1, 1, x); }

struct Loop {
  ParabolicModel model;
  SpectralSplit split;
  FeedbackDesign design;
  MemoryKernel kernel;

  Loop(ParabolicModel m, double sigma, double tau, double horizon, double dt,
       bool require_hautus = true)
      : model(std::move(m)), split(ComputeSplit(model, sigma)) {
    DesignOptions opts;
    opts.require_hautus = require_hautus;
    design = DesignGain(split, model, tau, opts);
    kernel = SolveKernel(design, split, horizon, dt);
  }

  Trajectory Run(const VectorXd& z0, double horizon, double dt,
                 const SimulationOptions& options = {}) const {
    return SimulateLinear(model, split, design, kernel, z0,
                          Forcing::Zero(model.state_dim()), horizon, dt, options);
  }
};

Loop ScalarLoop(double horizon, double dt) {
  ParabolicModel m = AbstractModel(Scalar(1.0), Scalar(1.0));
  Loop loop(m, 0.9, 0.5, horizon, dt);
  loop.design = PlaceScalarPole(loop.split, loop.model, 0.5, -1.0, 0.95);
  loop.kernel = SolveKernel(loop.design, loop.split, horizon, dt);
  return loop;
}

VectorXd FirstMode(const ParabolicModel& m) { return m.grid.array().sin().matrix(); }

ErrorClass ClassOf(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.error_class();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorClass::kModel;
}

double MaxAbs(const VectorXd& v) {
  double out = 0.0;
  for (int i = 0; i < v.size(); ++i) {
    if (std::isfinite(v(i))) out = std::max(out, std::abs(v(i)));
  }
  return out;
}

TEST(ScalarOracle, Rk4AgreesWithClosedForm) {
  const double g = -2.0 * std::exp(0.5);
  const auto z = testing::ScalarDelayLoopRk4(1.0, g, 0.5, 1.0, 4.0, 1e-3);
  for (size_t i = 0; i < z.size(); i += 50) {
    EXPECT_NEAR(z[i], testing::ScalarDelayLoopExact(1.0, g, 0.5, 1.0, i * 1e-3), 1e-10);
  }
  EXPECT_NEAR(testing::ScalarDelayLoopExact(1.0, g, 0.5, 1.0, 3.0), std::exp(1.0 - 3.0),
              1e-14);
}

TEST(SimulateLinear, ScalarLoopConvergesAtSecondOrder) {
  const double g = -2.0 * std::exp(0.5);
  double previous = 0.0;
  for (double dt : {0.004, 0.002, 0.001}) {
    const Loop loop = ScalarLoop(4.0, dt);
    const Trajectory t = loop.Run(VectorXd::Ones(1), 4.0, dt);
    const int stride = static_cast<int>(std::lround(0.004 / dt));
    const auto oracle = testing::ScalarDelayLoopRk4(1.0, g, 0.5, 1.0, 4.0, 1e-4);
    double err = 0.0;
    for (int i = 0; i < t.samples(); i += stride) {
      const int k = static_cast<int>(std::lround(t.times(i) / 1e-4));
      err = std::max(err, std::abs(t.states(0, i) - oracle[k]));
    }
    EXPECT_LT(err, 1e-4);
    if (previous > 0.0) EXPECT_NEAR(previous / err, 4.0, 0.5) << "dt " << dt;
    previous = err;
  }
}

TEST(SimulateLinear, ScalarLoopDecaysAtPlacedRate) {
  const Loop loop = ScalarLoop(10.0, 0.001);
  const Trajectory t = loop.Run(VectorXd::Ones(1), 10.0, 0.001);
  const DecayCertificate c = FitDecay(t, 2.0, 10.0, 0.9);
  EXPECT_NEAR(c.fitted_rate, 1.0, 1e-3);
  EXPECT_TRUE(c.passed);
  EXPECT_TRUE(std::isnan(c.strong_witness));
}

TEST(SimulateLinear, StableHeatWithoutFeedbackDecaysAtFirstEigenvalue) {
  const Loop loop(HeatModel(64, 0.0, false), 0.5, 0.3, 4.0, 0.001);
  ASSERT_EQ(loop.split.n_plus, 0);
  const Trajectory t = loop.Run(FirstMode(loop.model), 4.0, 0.001);
  const DecayCertificate c = FitDecay(t, 1.0, 4.0, 0.5);
  EXPECT_NEAR(c.fitted_rate, 1.0, 1e-3);
  EXPECT_EQ(MaxAbs(t.r1), 0.0);
  EXPECT_EQ(MaxAbs(t.r2), 0.0);
}

TEST(SimulateLinear, ZeroInitialStateStaysZero) {
  const Loop loop(HeatModel(48, 2.0, false), 0.5, 0.3, 2.0, 0.001);
  const Trajectory t = loop.Run(VectorXd::Zero(loop.model.state_dim()), 2.0, 0.001);
  EXPECT_EQ(t.states.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(t.controls.cwiseAbs().maxCoeff(), 0.0);
}

TEST(SimulateLinear, NoControlBeforeDelay) {
  const Loop loop(HeatModel(48, 2.0, false), 0.5, 0.3, 2.0, 0.001);
  const Trajectory t = loop.Run(FirstMode(loop.model), 2.0, 0.001);
  const int P = loop.kernel.delay_steps;
  EXPECT_EQ(t.controls.leftCols(P).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_GT(t.controls.col(P).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_NEAR((t.controls.col(P) - loop.design.gain_state * t.states.col(0)).norm(), 0.0,
              1e-12 * t.controls.col(P).norm());
}

TEST(SimulateLinear, ControlIgnoresFutureSource) {
  const Loop loop(HeatModel(48, 2.0, false), 0.5, 0.3, 2.0, 0.001);
  const int n = loop.model.state_dim();
  const int samples = 2001;
  MatrixXd source = MatrixXd::Zero(n, samples);
  for (int i = 0; i < samples; ++i) source.col(i) = std::cos(2.0 * i * 0.001) * FirstMode(loop.model);
  const int cut = 700;
  MatrixXd tampered = source;
  tampered.rightCols(samples - cut - 1).setConstant(50.0);
  const VectorXd z0 = 0.3 * FirstMode(loop.model);
  const Trajectory a = SimulateLinearSampled(loop.model, loop.split, loop.design,
                                             loop.kernel, z0, source, 2.0, 0.001);
  const Trajectory b = SimulateLinearSampled(loop.model, loop.split, loop.design,
                                             loop.kernel, z0, tampered, 2.0, 0.001);
  const int P = loop.kernel.delay_steps;
  EXPECT_EQ((a.states.leftCols(cut + 1) - b.states.leftCols(cut + 1)).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((a.controls.leftCols(cut + P + 1) - b.controls.leftCols(cut + P + 1))
                .cwiseAbs()
                .maxCoeff(),
            0.0);
  EXPECT_GT((a.controls.col(cut + P + 2) - b.controls.col(cut + P + 2)).norm(), 0.0);
}

TEST(SimulateLinear, Superposition) {
  const Loop loop(HeatModel(48, 2.0, false), 0.5, 0.3, 2.0, 0.001);
  const ParabolicModel& m = loop.model;
  const VectorXd za = FirstMode(m);
  const VectorXd zb = (2.0 * m.grid.array()).sin().matrix() + 0.1 * m.grid;
  const Forcing f = Forcing::Decaying((3.0 * m.grid.array()).sin().matrix(), 0.7, 0.4);
  const Forcing none = Forcing::Zero(m.state_dim());
  const Trajectory ab = SimulateLinear(m, loop.split, loop.design, loop.kernel,
                                       za + zb, f, 2.0, 0.001);
  const Trajectory a = SimulateLinear(m, loop.split, loop.design, loop.kernel, za,
                                      none, 2.0, 0.001);
  const Trajectory b = SimulateLinear(m, loop.split, loop.design, loop.kernel, zb,
                                      f, 2.0, 0.001);
  const double scale = ab.states.cwiseAbs().maxCoeff();
  EXPECT_LE((ab.states - a.states - b.states).cwiseAbs().maxCoeff(), 1e-11 * scale);
  EXPECT_LE((ab.controls - a.controls - b.controls).cwiseAbs().maxCoeff(),
            1e-11 * ab.controls.cwiseAbs().maxCoeff());
}

TEST(SimulateLinear, BoundaryRunIndependentOfLiftingShift) {
  std::vector<Trajectory> runs;
  for (double shift : {4.0, 11.0}) {
    ConvectionDiffusion1dParams p;
    p.length = 3.14159265358979323846;
    p.intervals = 48;
    p.reaction = [](double) { return 2.0; };
    p.control = BoundaryControl{};
    p.shift = shift;
    const Loop loop(BuildConvectionDiffusion1d(p), 0.5, 0.3, 2.0, 0.001);
    runs.push_back(loop.Run(FirstMode(loop.model), 2.0, 0.001));
  }
  EXPECT_LE((runs[0].states - runs[1].states).cwiseAbs().maxCoeff(),
            1e-9 * runs[0].states.cwiseAbs().maxCoeff());
  EXPECT_TRUE(std::isnan(FitDecay(runs[0], 1.0, 2.0, 0.5).strong_witness));
}

TEST(ArtsteinResiduals, VanishWithoutGain) {
  MatrixXd b(2, 1);
  b << 0, 1;
  const Loop loop(AbstractModel(VectorXd(Eigen::Vector2d(1, -2)).asDiagonal(), b), 0.5,
                  0.2, 2.0, 0.002, false);
  ASSERT_FALSE(loop.design.stabilizing);
  const Trajectory t = loop.Run(VectorXd::Ones(2), 2.0, 0.002);
  EXPECT_EQ(MaxAbs(t.r2), 0.0);
  EXPECT_EQ(t.controls.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_NEAR(t.states(0, t.samples() - 1), std::exp(2.0), 1e-4 * std::exp(2.0));
}

TEST(ArtsteinResiduals, SecondOrderInStep) {
  double prev_r1 = 0.0;
  double prev_r2 = 0.0;
  for (double dt : {0.004, 0.002}) {
    const Loop loop = ScalarLoop(4.0, dt);
    const Trajectory t = loop.Run(VectorXd::Ones(1), 4.0, dt);
    const ArtsteinResiduals r = ComputeArtsteinResiduals(t, loop.split, loop.design, loop.kernel);
    EXPECT_EQ(r.max_r1, MaxAbs(t.r1));
    // r₂ is undefined where t + τ leaves the run.
    EXPECT_TRUE(std::isnan(t.r2(t.samples() - 1)));
    EXPECT_LT(r.max_r1, 1e-3);
    EXPECT_LT(r.max_r2, 1e-3);
    if (prev_r1 > 0.0) {
      EXPECT_NEAR(prev_r1 / r.max_r1, 4.0, 0.6);
      EXPECT_NEAR(prev_r2 / r.max_r2, 4.0, 0.6);
    }
    prev_r1 = r.max_r1;
    prev_r2 = r.max_r2;
  }
}

TEST(SimulateLinear, DecayWitnessStableUnderRefinement) {
  double previous = 0.0;
  for (double dt : {0.002, 0.001}) {
    const Loop loop = ScalarLoop(10.0, dt);
    const Trajectory t = loop.Run(VectorXd::Ones(1), 10.0, dt);
    const double c = FitDecay(t, 2.0, 10.0, 0.9).c_witness;
    EXPECT_TRUE(std::isfinite(c));
    if (previous > 0.0) EXPECT_NEAR(c, previous, 1e-3 * previous);
    previous = c;
  }
}

TEST(SimulateLinear, ForcedRunCertificate) {
  const Loop loop(HeatModel(48, 2.0, false), 0.5, 0.3, 6.0, 0.0005);
  const ParabolicModel& m = loop.model;
  const Forcing f = Forcing::Decaying(FirstMode(m) / m.Norm(FirstMode(m)), 1.0, 0.5);
  const Trajectory t = SimulateLinear(m, loop.split, loop.design, loop.kernel,
                                      FirstMode(m), f, 6.0, 0.0005);
  ASSERT_EQ(t.forcing_norms.size(), t.samples());
  EXPECT_NEAR(t.forcing_norms(0), 0.5, 1e-12);
  const DecayCertificate c = FitDecay(t, 2.0, 6.0, 0.5);
  EXPECT_TRUE(c.passed);
  EXPECT_NEAR(c.fitted_rate, 1.0, 0.02);
  EXPECT_TRUE(std::isfinite(c.c_witness));
  EXPECT_TRUE(std::isfinite(c.strong_witness));
  EXPECT_LT(MaxAbs(t.r1), 1e-3 * t.transformed_norms.maxCoeff());
}

TEST(SimulateLinear, BlowUpIsReported) {
  const Loop loop(HeatModel(32, 2.0, false), 0.5, 0.3, 6.0, 0.002);
  SimulationOptions open;
  open.feedback = false;
  open.blowup_threshold = 10.0;
  EXPECT_EQ(ClassOf([&] { loop.Run(FirstMode(loop.model), 6.0, 0.002, open); }),
            ErrorClass::kSimulate);
  const ParabolicModel cubic = BuildSemilinear1d(loop.model, CubicNonlinearity());
  // The cubic term saturates the open-loop growth near norm 1; the threshold
  // sits below that plateau.
  open.blowup_threshold = 0.5;
  const Trajectory t = SimulateSemilinear(cubic, loop.split, loop.design, loop.kernel,
                                          0.1 * FirstMode(cubic), 6.0, 0.002, open);
  EXPECT_TRUE(t.blew_up);
  EXPECT_FALSE(t.diagnostic.empty());
  EXPECT_LT(t.samples(), 3001);
  EXPECT_EQ(t.norms.size(), t.samples());
}

TEST(SimulateLinear, RejectsMismatchedGrids) {
  const Loop loop = ScalarLoop(2.0, 0.01);
  EXPECT_EQ(ClassOf([&] { loop.Run(VectorXd::Ones(1), 2.0, 0.005); }), ErrorClass::kSimulate);
  EXPECT_EQ(ClassOf([&] { loop.Run(VectorXd::Ones(1), 3.0, 0.01); }), ErrorClass::kSimulate);
  EXPECT_EQ(ClassOf([&] { loop.Run(VectorXd::Ones(2), 2.0, 0.01); }), ErrorClass::kSimulate);
}

class SemilinearTest : public ::testing::Test {
 protected:
  SemilinearTest()
      : loop(HeatModel(32, 2.0, false), 0.5, 0.3, 3.0, 0.001),
        cubic(BuildSemilinear1d(loop.model, CubicNonlinearity())) {}
  Loop loop;
  ParabolicModel cubic;
};

TEST_F(SemilinearTest, ZeroStaysZero) {
  const Trajectory t = SimulateSemilinear(cubic, loop.split, loop.design, loop.kernel,
                                          VectorXd::Zero(cubic.state_dim()), 3.0, 0.001);
  EXPECT_EQ(t.states.cwiseAbs().maxCoeff(), 0.0);
}

TEST_F(SemilinearTest, SmallDataDecays) {
  const Trajectory t = SimulateSemilinear(cubic, loop.split, loop.design, loop.kernel,
                                          0.05 * FirstMode(cubic), 3.0, 0.001);
  ASSERT_FALSE(t.blew_up);
  EXPECT_TRUE(FitDecay(t, 1.0, 3.0, 0.5).passed);
}

TEST_F(SemilinearTest, OuterPicardContractsToDirectRun) {
  const VectorXd z0 = 0.05 * FirstMode(cubic);
  const PicardReport r = OuterPicard(cubic, loop.split, loop.design, loop.kernel, z0, 3.0, 0.001);
  ASSERT_TRUE(r.converged);
  EXPECT_LT(r.max_ratio(), 1.0);
  for (size_t k = 1; k < r.increments.size(); ++k) {
    EXPECT_LT(r.increments[k], r.increments[k - 1]);
  }
  const Trajectory direct = SimulateSemilinear(cubic, loop.split, loop.design, loop.kernel,
                                               z0, 3.0, 0.001);
  EXPECT_LE((r.limit.states - direct.states).cwiseAbs().maxCoeff(),
            1e-6 * direct.states.cwiseAbs().maxCoeff());
  EXPECT_EQ(r.limit.r1.size(), r.limit.samples());
}

TEST_F(SemilinearTest, StabilityRadiusIsConsistent) {
  const VectorXd profile = FirstMode(cubic);
  const double radius = EstimateStabilityRadius(cubic, loop.split, loop.design,
                                                loop.kernel, profile, 3.0, 0.001, 0.01, 4.0, 6);
  EXPECT_GE(radius, 0.01);
  EXPECT_LE(radius, 4.0);
  SimulationOptions quiet;
  quiet.residuals = false;
  const Trajectory t = SimulateSemilinear(cubic, loop.split, loop.design, loop.kernel,
                                          radius * profile, 3.0, 0.001, quiet);
  EXPECT_FALSE(t.blew_up);
  EXPECT_LT(t.norms(t.samples() - 1), t.norms(0));
}

TEST(FitDecay, SyntheticExponential) {
  Trajectory t;
  t.dt = 0.01;
  t.tau = 0.1;
  t.times = VectorXd::LinSpaced(301, 0.0, 3.0);
  t.norms = (-2.0 * t.times.array()).exp().matrix();
  t.forcing_norms = VectorXd::Zero(301);
  const DecayCertificate c = FitDecay(t, 0.5, 3.0, 1.5);
  EXPECT_NEAR(c.fitted_rate, 2.0, 1e-12);
  EXPECT_TRUE(c.passed);
  EXPECT_NEAR(c.c_witness, 1.0, 1e-12);
  EXPECT_FALSE(FitDecay(t, 0.5, 3.0, 2.5).passed);

  EXPECT_EQ(ClassOf([&] { FitDecay(t, 0.1, 3.0, 1.0); }), ErrorClass::kSimulate);
  EXPECT_EQ(ClassOf([&] { FitDecay(t, 0.5, 3.5, 1.0); }), ErrorClass::kSimulate);
  EXPECT_EQ(ClassOf([&] { FitDecay(t, 1.0, 1.05, 1.0); }), ErrorClass::kSimulate);

  t.norms.tail(50).setZero();
  const DecayCertificate gone = FitDecay(t, 0.5, 3.0, 1.5);
  EXPECT_TRUE(gone.rate_infinite);
  EXPECT_TRUE(std::isinf(gone.fitted_rate));
  EXPECT_TRUE(gone.passed);
}

}  // namespace
}  // namespace delaystab
