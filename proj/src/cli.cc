#include "delaystab/cli.h"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "delaystab/report.h"

namespace delaystab {

void ConfigureLogging() {
  static std::once_flag once;
  std::call_once(once, [] {
    auto logger = spdlog::stderr_logger_mt("delaystab");
    logger->set_pattern("[%l] %v");
    spdlog::set_default_logger(logger);
  });
  const char* env = std::getenv("DELAYSTAB_LOG");
  const std::string level = env ? env : "info";
  if (level == "quiet") {
    spdlog::set_level(spdlog::level::off);
  } else if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else {
    spdlog::set_level(spdlog::level::info);
    if (level != "info") {
      spdlog::warn("DELAYSTAB_LOG='{}' not recognised, using info", level);
    }
  }
}

namespace {

namespace fs = std::filesystem;

std::string Hex(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

uint64_t Fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::ofstream OpenOut(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}

void WriteText(const fs::path& path, const std::string& text) {
  auto out = OpenOut(path);
  out << text;
}

void WriteMatrixFile(const fs::path& path, const MatrixXd& m) {
  auto out = OpenOut(path);
  WriteMatrixCsv(out, m);
}

const char* Bool(bool b) { return b ? "true" : "false"; }

// ---- stage outputs ---------------------------------------------------------

void WriteAnalyze(const fs::path& dir, const Pipeline& p) {
  {
    auto out = OpenOut(dir / "eigenvalues.csv");
    out << "re,im,algebraic,geometric,unstable\n";
    for (const auto& e : p.split.eigenvalues) {
      out << FormatDouble(e.value.real()) << "," << FormatDouble(e.value.imag())
          << "," << e.algebraic_mult << "," << e.geometric_mult << ","
          << (e.unstable ? 1 : 0) << "\n";
    }
  }
  {
    auto out = OpenOut(dir / "hautus.csv");
    out << "re,im,kernel_dim,sigma_min,sigma_min_transformed,passed\n";
    for (const auto& e : p.hautus.entries) {
      out << FormatDouble(e.eigenvalue.real()) << ","
          << FormatDouble(e.eigenvalue.imag()) << "," << e.kernel_dim << ","
          << FormatDouble(e.sigma_min) << ","
          << FormatDouble(e.sigma_min_transformed) << "," << (e.passed ? 1 : 0)
          << "\n";
    }
  }
  std::ostringstream s;
  const auto& r = p.split.residuals;
  s << "model_kind = " << ToString(p.model.kind) << "\n"
    << "state_dim = " << p.model.state_dim() << "\n"
    << "input_dim = " << p.model.input_dim() << "\n"
    << "sigma = " << FormatDouble(p.split.sigma) << "\n"
    << "n_plus = " << p.split.n_plus << "\n"
    << "N_plus = " << p.split.N_plus_ctrl << "\n"
    << "dim_U_plus = " << p.split.dim_u_plus() << "\n"
    << "stable_abscissa = " << FormatDouble(p.split.stable_abscissa) << "\n"
    << "residual_idempotency = " << FormatDouble(r.idempotency) << "\n"
    << "residual_commutation = " << FormatDouble(r.commutation) << "\n"
    << "residual_biorthogonality = " << FormatDouble(r.biorthogonality) << "\n"
    << "residual_orthogonality = " << FormatDouble(r.orthogonality) << "\n"
    << "hautus_passed = " << Bool(p.hautus.passed) << "\n"
    << "hautus_transformed_agrees = " << Bool(p.hautus.transformed_agrees) << "\n"
    << "hautus_tolerance = " << FormatDouble(p.hautus.tolerance) << "\n";
  WriteText(dir / "split.txt", s.str());
}

int KernelStride(const ScenarioConfig& c, const MemoryKernel& k) {
  if (c.output.kernel_stride > 0) return c.output.kernel_stride;
  const double block = std::max(1, k.n_plus * k.n_plus);
  int stride = 1;
  while (true) {
    const double n = k.steps / stride;
    if ((n + 1) * (n + 2) / 2 * block <= 4e6) break;
    ++stride;
  }
  return stride;
}

void WriteDesign(const fs::path& dir, const Pipeline& p) {
  const FeedbackDesign& d = *p.design;
  const MemoryKernel& k = *p.kernel;
  WriteMatrixFile(dir / "gain.csv", d.gain_state);
  WriteMatrixFile(dir / "gain_reduced.csv", d.gain_reduced);
  WriteMatrixFile(dir / "directions.csv", d.directions);
  WriteMatrixFile(dir / "zeta.csv", d.zeta);
  const int stride = KernelStride(p.config, k);
  {
    auto out = OpenOut(dir / "kernel.bin");
    WriteKernelBinary(out, k, stride);
  }
  std::ostringstream s;
  s << "tau = " << FormatDouble(d.tau) << "\n"
    << "sigma = " << FormatDouble(d.sigma) << "\n"
    << "sigma_star = " << FormatDouble(d.sigma_star) << "\n"
    << "rank = " << d.rank << "\n"
    << "directions = " << d.directions.cols() << "\n"
    << "achieved_abscissa = " << FormatDouble(d.achieved_abscissa) << "\n"
    << "stabilizing = " << Bool(d.stabilizing) << "\n"
    << "representation_gap = " << FormatDouble(d.representation_gap) << "\n"
    << "kernel_step = " << FormatDouble(k.step) << "\n"
    << "kernel_horizon = " << FormatDouble(k.horizon) << "\n"
    << "kernel_dump_stride = " << stride << "\n"
    << "kernel_k0_sup = " << FormatDouble(k.k0_sup) << "\n"
    << "kernel_sup = " << FormatDouble(k.kernel_sup) << "\n"
    << "kernel_residual = " << FormatDouble(k.residual_sup) << "\n"
    << "kernel_tolerance = " << FormatDouble(k.tolerance) << "\n"
    << "kernel_residual_ok = " << Bool(k.residual_ok()) << "\n";
  WriteText(dir / "design.txt", s.str());
}

void WriteCertificate(std::ostream& s, const DecayCertificate& c) {
  s << "window = " << FormatDouble(c.t_lo) << ", " << FormatDouble(c.t_hi) << "\n"
    << "sigma = " << FormatDouble(c.sigma) << "\n"
    << "fitted_rate = " << FormatDouble(c.fitted_rate) << "\n"
    << "rate_infinite = " << Bool(c.rate_infinite) << "\n"
    << "c_witness = " << FormatDouble(c.c_witness) << "\n"
    << "strong_witness = " << FormatDouble(c.strong_witness) << "\n"
    << "passed = " << Bool(c.passed) << "\n";
}

void WriteSimulate(const fs::path& dir, const Pipeline& p) {
  const Trajectory& t = *p.trajectory;
  {
    auto out = OpenOut(dir / "trajectory.csv");
    const bool h1 = t.h1_norms.size() == t.samples();
    const bool forced = t.forcing.size() > 0;
    out << "t,norm_z";
    if (h1) out << ",norm_h1";
    for (int k = 0; k < t.controls.rows(); ++k) out << ",v_" << k + 1;
    out << ",norm_w,r1,r2";
    if (forced) out << ",norm_f";
    out << "\n";
    const bool residuals = t.r1.size() == t.samples();
    const std::string nan = FormatDouble(std::nan(""));
    for (int i = 0; i < t.samples(); ++i) {
      out << FormatDouble(t.times(i)) << "," << FormatDouble(t.norms(i));
      if (h1) out << "," << FormatDouble(t.h1_norms(i));
      for (int k = 0; k < t.controls.rows(); ++k) {
        out << "," << FormatDouble(t.controls(k, i));
      }
      out << "," << FormatDouble(t.transformed_norms(i)) << ","
          << (residuals ? FormatDouble(t.r1(i)) : nan) << ","
          << (residuals ? FormatDouble(t.r2(i)) : nan);
      if (forced) out << "," << FormatDouble(t.forcing_norms(i));
      out << "\n";
    }
  }
  std::ostringstream s;
  s << "samples = " << t.samples() << "\n"
    << "blew_up = " << Bool(t.blew_up) << "\n";
  if (!t.diagnostic.empty()) s << "diagnostic = " << t.diagnostic << "\n";
  if (t.r1.size() > 0) {
    double r1 = 0, r2 = 0;
    for (int i = 0; i < t.samples(); ++i) {
      r1 = std::max(r1, t.r1(i));
      if (!std::isnan(t.r2(i))) r2 = std::max(r2, t.r2(i));
    }
    s << "max_r1 = " << FormatDouble(r1) << "\n"
      << "max_r2 = " << FormatDouble(r2) << "\n"
      << "max_plus_norm = " << FormatDouble(t.plus_norms.maxCoeff()) << "\n";
  }
  if (p.certificate) WriteCertificate(s, *p.certificate);
  WriteText(dir / "certificate.txt", s.str());

  if (p.picard) {
    auto out = OpenOut(dir / "picard.csv");
    out << "iteration,increment,ratio\n";
    for (size_t k = 0; k < p.picard->increments.size(); ++k) {
      out << k + 1 << "," << FormatDouble(p.picard->increments[k]) << ","
          << (k >= 1 && k - 1 < p.picard->ratios.size()
                  ? FormatDouble(p.picard->ratios[k - 1])
                  : FormatDouble(std::nan("")))
          << "\n";
    }
  }
}

// ---- reuse stamps ----------------------------------------------------------

std::vector<std::string> StageOutputs(const std::string& sub) {
  std::vector<std::string> files = {"eigenvalues.csv", "hautus.csv", "split.txt"};
  if (sub == "analyze") return files;
  for (const char* f : {"gain.csv", "gain_reduced.csv", "directions.csv",
                        "zeta.csv", "kernel.bin", "design.txt"}) {
    files.push_back(f);
  }
  if (sub == "design") return files;
  files.push_back("trajectory.csv");
  files.push_back("certificate.txt");
  return files;
}

bool Reusable(const fs::path& dir, const std::string& sub,
              const std::string& stamp) {
  std::ifstream in(dir / (".stamp_" + sub));
  std::string stored;
  if (!(in >> stored) || stored != stamp) return false;
  for (const auto& f : StageOutputs(sub)) {
    if (!fs::exists(dir / f)) return false;
  }
  return true;
}

// ---- subcommands -----------------------------------------------------------

fs::path OutputDir(const ScenarioConfig& c, const CliOptions& o) {
  fs::path dir = o.out_dir.empty() ? fs::path(c.output.directory) : fs::path(o.out_dir);
  fs::create_directories(dir);
  return dir;
}

void Report(const ScenarioConfig& c, const fs::path& dir) {
  if (!fs::exists(dir / "trajectory.csv")) {
    throw Error(ErrorClass::kSimulate,
                "no simulate output in '" + dir.string() + "'; run simulate first");
  }
  const CsvTable table = ReadCsv((dir / "trajectory.csv").string());
  Trajectory t;
  t.tau = c.design.tau;
  t.dt = c.simulation.dt;
  const int rows = table.rows();
  t.times = Eigen::Map<const VectorXd>(table.column("t").data(), rows);
  t.norms = Eigen::Map<const VectorXd>(table.column("norm_z").data(), rows);
  t.forcing_norms = table.has("norm_f")
                        ? VectorXd(Eigen::Map<const VectorXd>(
                              table.column("norm_f").data(), rows))
                        : VectorXd::Zero(rows);
  const double hi = std::min(c.window_hi(), rows > 0 ? t.times(rows - 1) : 0.0);
  const DecayCertificate cert = FitDecay(t, c.window_lo(), hi, c.design.sigma);

  std::ostringstream s;
  s << "delaystab report\n\n[simulation]\n";
  WriteCertificate(s, cert);
  auto column_max = [&](const std::string& name) {
    double m = 0.0;
    for (double v : table.column(name)) {
      if (!std::isnan(v)) m = std::max(m, v);
    }
    return m;
  };
  s << "max_r1 = " << FormatDouble(column_max("r1")) << "\n"
    << "max_r2 = " << FormatDouble(column_max("r2")) << "\n";
  for (const char* name : {"split.txt", "design.txt"}) {
    std::ifstream in(dir / name);
    if (in) s << "\n[" << fs::path(name).stem().string() << "]\n" << in.rdbuf();
  }
  WriteText(dir / "report.txt", s.str());
  std::cout << s.str();

  if (!c.output.plots) return;
  WriteText(dir / "norm.svg",
            NormPlotSvg(table.column("t"), table.column("norm_z"), c.design.sigma));
  if (fs::exists(dir / "eigenvalues.csv")) {
    const CsvTable eig = ReadCsv((dir / "eigenvalues.csv").string());
    std::vector<std::complex<double>> values;
    for (int i = 0; i < eig.rows(); ++i) {
      values.emplace_back(eig.column("re")[i], eig.column("im")[i]);
    }
    WriteText(dir / "eigenvalues.svg", EigenvalueSvg(values, c.design.sigma));
  }
  if (fs::exists(dir / "kernel.bin")) {
    std::ifstream in(dir / "kernel.bin", std::ios::binary);
    WriteText(dir / "kernel.svg", KernelSvg(ReadKernelBinary(in)));
  }
  spdlog::info("report written to {}", dir.string());
}

struct SweepRow {
  std::vector<std::string> values;
  std::string status = "ok";
  int n_plus = 0, N_plus = 0, rank = 0;
  double achieved = NAN, rate = NAN, c_witness = NAN, r1 = NAN, r2 = NAN,
         kernel_residual = NAN, seconds = 0;
};

void Sweep(const ScenarioConfig& base, const fs::path& dir, int jobs) {
  if (base.sweep.empty()) {
    throw Error(ErrorClass::kConfig, "sweep needs a [sweep] section");
  }
  std::vector<std::vector<std::string>> combos = {{}};
  for (const auto& axis : base.sweep) {
    std::vector<std::vector<std::string>> next;
    for (const auto& c : combos) {
      for (const auto& v : axis.values) {
        auto e = c;
        e.push_back(v);
        next.push_back(std::move(e));
      }
    }
    combos = std::move(next);
  }
  // Every combination must parse before anything runs.
  std::vector<ScenarioConfig> configs;
  for (const auto& combo : combos) {
    std::vector<std::pair<std::string, std::string>> overrides;
    for (size_t a = 0; a < combo.size(); ++a) {
      overrides.emplace_back(base.sweep[a].key, combo[a]);
    }
    ScenarioConfig c = ParseConfig(base.source_text, overrides);
    c.base_dir = base.base_dir;
    configs.push_back(std::move(c));
  }

  std::vector<SweepRow> rows(configs.size());
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next++; i < configs.size(); i = next++) {
      SweepRow& row = rows[i];
      row.values = combos[i];
      const auto start = std::chrono::steady_clock::now();
      try {
        Pipeline p = RunAnalyze(configs[i]);
        row.n_plus = p.split.n_plus;
        row.N_plus = p.split.N_plus_ctrl;
        RunDesign(p);
        row.rank = p.design->rank;
        row.achieved = p.design->achieved_abscissa;
        row.kernel_residual = p.kernel->residual_sup;
        RunSimulate(p);
        if (p.certificate) {
          row.rate = p.certificate->fitted_rate;
          row.c_witness = p.certificate->c_witness;
        }
        if (p.trajectory->blew_up) row.status = "blew_up";
        if (p.trajectory->r1.size() > 0) {
          row.r1 = p.trajectory->r1.maxCoeff();
          row.r2 = 0;
          for (int k = 0; k < p.trajectory->r2.size(); ++k) {
            if (!std::isnan(p.trajectory->r2(k))) {
              row.r2 = std::max(row.r2, p.trajectory->r2(k));
            }
          }
        }
      } catch (const Error& e) {
        row.status = ToString(e.error_class());
        spdlog::warn("sweep scenario {}: {}", i, e.what());
      }
      row.seconds = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - start).count();
      spdlog::info("sweep scenario {} done ({})", i, row.status);
    }
  };
  const int workers = std::max(1, std::min<int>(jobs, configs.size()));
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  auto out = OpenOut(dir / "sweep_summary.csv");
  out << "scenario";
  for (const auto& axis : base.sweep) out << "," << axis.key;
  out << ",status,n_plus,N_plus,rank,achieved_abscissa,fitted_rate,c_witness,"
         "max_r1,max_r2,kernel_residual\n";
  auto timing = OpenOut(dir / "sweep_timing.csv");
  timing << "scenario,wall_seconds\n";
  for (size_t i = 0; i < rows.size(); ++i) {
    const SweepRow& r = rows[i];
    out << i;
    for (const auto& v : r.values) out << "," << v;
    out << "," << r.status << "," << r.n_plus << "," << r.N_plus << "," << r.rank
        << "," << FormatDouble(r.achieved) << "," << FormatDouble(r.rate) << ","
        << FormatDouble(r.c_witness) << "," << FormatDouble(r.r1) << ","
        << FormatDouble(r.r2) << "," << FormatDouble(r.kernel_residual) << "\n";
    timing << i << "," << FormatDouble(r.seconds) << "\n";
  }
}

}  // namespace

int ExitCode(ErrorClass c) {
  switch (c) {
    case ErrorClass::kModel:
    case ErrorClass::kConfig:
      return 2;
    case ErrorClass::kSpectral:
      return 3;
    case ErrorClass::kDesign:
      return 4;
    case ErrorClass::kSimulate:
      return 5;
  }
  return 1;
}

Pipeline RunAnalyze(const ScenarioConfig& config) {
  Pipeline p;
  p.config = config;
  p.model = BuildModel(config);
  p.split = ComputeSplit(p.model, config.design.sigma, config.design.cluster_tol);
  p.hautus = HautusCheck(p.split, p.model, config.design.svd_tol, config.design.tau);
  spdlog::debug("split: n_plus = {}, N_plus = {}, sigma_minus = {}",
                p.split.n_plus, p.split.N_plus_ctrl, p.split.stable_abscissa);
  return p;
}

void RunDesign(Pipeline& p) {
  const auto& d = p.config.design;
  const bool open_loop = !p.config.simulation.feedback;
  if (!p.hautus.passed && !open_loop) {
    std::string modes;
    for (const auto& e : p.hautus.entries) {
      if (!e.passed) {
        modes += " " + FormatDouble(e.eigenvalue.real()) +
                 (e.eigenvalue.imag() != 0 ? "+" + FormatDouble(e.eigenvalue.imag()) + "i" : "");
      }
    }
    throw Error(ErrorClass::kDesign,
                "Hautus test failed; unstable modes invisible to the input:" + modes);
  }
  if (d.placement) {
    const double target = *d.placement;
    const double sigma_star = d.sigma_star.value_or(0.5 * (d.sigma - target));
    p.design = PlaceScalarPole(p.split, p.model, d.tau, target, sigma_star);
  } else if (d.gain) {
    p.design = DesignFromGain(p.split, p.model, d.tau, *d.gain,
                              d.sigma_star.value_or(DefaultSigmaStar(p.split)));
  } else {
    DesignOptions o;
    o.sigma_star = d.sigma_star;
    o.svd_tol = d.svd_tol;
    o.require_hautus = !open_loop;
    p.design = DesignGain(p.split, p.model, d.tau, o);
  }
  KernelOptions ko;
  ko.rel_tol = d.kernel_rel_tol;
  ko.allow_zero_delay = d.diagnostic_static_feedback;
  p.kernel = SolveKernel(*p.design, p.split, p.config.simulation.horizon,
                         p.config.simulation.dt, ko);
  if (!p.kernel->residual_ok()) {
    spdlog::warn("kernel residual {} above tolerance {}; refine dt",
                 p.kernel->residual_sup, p.kernel->tolerance);
  }
  spdlog::debug("design: rank {}, abscissa {}", p.design->rank,
                p.design->achieved_abscissa);
}

void RunSimulate(Pipeline& p) {
  const auto& s = p.config.simulation;
  const VectorXd z0 = InitialState(p.config, p.model);
  SimulationOptions o;
  o.feedback = s.feedback;
  if (p.model.kind == ModelKind::kSemilinear1d) {
    p.trajectory = SimulateSemilinear(p.model, p.split, *p.design, *p.kernel, z0,
                                      s.horizon, s.dt, o);
    if (s.picard) {
      p.picard = OuterPicard(p.model, p.split, *p.design, *p.kernel, z0,
                             s.horizon, s.dt);
    }
  } else {
    p.trajectory = SimulateLinear(p.model, p.split, *p.design, *p.kernel, z0,
                                  BuildForcing(p.config, p.model), s.horizon,
                                  s.dt, o);
  }
  if (p.trajectory->blew_up) {
    spdlog::warn("{}", p.trajectory->diagnostic);
    return;
  }
  p.certificate = FitDecay(*p.trajectory, p.config.window_lo(),
                           p.config.window_hi(), p.config.design.sigma);
}

int RunCommand(const std::string& subcommand, const CliOptions& options) {
  ConfigureLogging();
  try {
    if (subcommand != "analyze" && subcommand != "design" &&
        subcommand != "simulate" && subcommand != "sweep" &&
        subcommand != "report") {
      throw Error(ErrorClass::kConfig, "unknown subcommand '" + subcommand + "'");
    }
    const ScenarioConfig config = LoadConfig(options.config_path);
    const fs::path dir = OutputDir(config, options);
    if (subcommand == "report") {
      Report(config, dir);
      return 0;
    }
    if (subcommand == "sweep") {
      Sweep(config, dir, options.jobs);
      return 0;
    }
    const std::string stamp = Hex(Fnv1a(subcommand + "\n" + config.source_text));
    if (options.reuse && Reusable(dir, subcommand, stamp)) {
      spdlog::info("{}: outputs in {} are current, reusing", subcommand, dir.string());
      return 0;
    }
    Pipeline p = RunAnalyze(config);
    WriteAnalyze(dir, p);
    spdlog::info("analyze: n_plus = {}, N_plus = {}, Hautus {}", p.split.n_plus,
                 p.split.N_plus_ctrl, p.hautus.passed ? "passed" : "failed");
    if (subcommand != "analyze") {
      RunDesign(p);
      WriteDesign(dir, p);
      spdlog::info("design: rank {}, closed-loop abscissa {:.6g}", p.design->rank,
                   p.design->achieved_abscissa);
    }
    if (subcommand == "simulate") {
      RunSimulate(p);
      WriteSimulate(dir, p);
      if (p.certificate) {
        spdlog::info("simulate: fitted rate {:.6g} (sigma {})",
                     p.certificate->fitted_rate, p.config.design.sigma);
      }
    }
    WriteText(dir / (".stamp_" + subcommand), stamp + "\n");
    return 0;
  } catch (const Error& e) {
    std::cerr << "delaystab: error[" << ToString(e.error_class()) << "]: "
              << e.what() << "\n";
    return ExitCode(e.error_class());
  } catch (const std::exception& e) {
    std::cerr << "delaystab: error[internal]: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace delaystab
