#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "delaystab/cli.h"
#include "delaystab/closed_loop.h"
#include "delaystab/config.h"
#include "delaystab/error.h"
#include "delaystab/feedback_design.h"
#include "delaystab/linalg.h"
#include "delaystab/spectral_split.h"

namespace py = pybind11;
using namespace delaystab;

namespace {

py::dict SplitDict(const SpectralSplit& s) {
  py::dict d;
  std::vector<std::complex<double>> values;
  std::vector<bool> unstable;
  std::vector<int> algebraic;
  for (const auto& e : s.eigenvalues) {
    values.push_back(e.value);
    unstable.push_back(e.unstable);
    algebraic.push_back(e.algebraic_mult);
  }
  d["sigma"] = s.sigma;
  d["n_plus"] = s.n_plus;
  d["N_plus"] = s.N_plus_ctrl;
  d["eigenvalues"] = values;
  d["unstable"] = unstable;
  d["algebraic_multiplicity"] = algebraic;
  d["projection"] = s.P_plus;
  d["a_plus"] = s.A_plus;
  d["stable_abscissa"] = s.stable_abscissa;
  py::dict r;
  r["idempotency"] = s.residuals.idempotency;
  r["commutation"] = s.residuals.commutation;
  r["biorthogonality"] = s.residuals.biorthogonality;
  r["orthogonality"] = s.residuals.orthogonality;
  d["residuals"] = r;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Delayed-input feedback stabilization of parabolic systems";

  static py::exception<Error> error(m, "DelaystabError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyErr_SetString(error.ptr(),
                      (std::string(ToString(e.error_class())) + ": " + e.what()).c_str());
    }
  });

  m.def("expm", &Expm, py::arg("a"));

  m.def(
      "split_lti",
      [](const MatrixXd& generator, const MatrixXd& input_map, double sigma) {
        const double shift = std::max(0.0, SpectralAbscissa(generator)) + 1.0;
        const ParabolicModel model = BuildCustomLti(generator, input_map, shift);
        const SpectralSplit s = ComputeSplit(model, sigma);
        py::dict d = SplitDict(s);
        d["hautus_passed"] = HautusCheck(s, model).passed;
        return d;
      },
      py::arg("generator"), py::arg("input_map"), py::arg("sigma"));

  m.def(
      "run",
      [](const std::string& subcommand, const std::string& config,
         const std::string& out, bool reuse, int jobs) {
        CliOptions o;
        o.config_path = config;
        o.out_dir = out;
        o.reuse = reuse;
        o.jobs = jobs;
        py::gil_scoped_release release;
        return RunCommand(subcommand, o);
      },
      py::arg("subcommand"), py::arg("config"), py::arg("out") = "",
      py::arg("reuse") = false, py::arg("jobs") = 1,
      "Runs one CLI subcommand and returns its exit code.");

  m.def(
      "simulate",
      [](const std::string& config_path) {
        Pipeline p = RunAnalyze(LoadConfig(config_path));
        RunDesign(p);
        RunSimulate(p);
        py::dict d;
        d["split"] = SplitDict(p.split);
        d["gain"] = p.design->gain_state;
        d["rank"] = p.design->rank;
        d["achieved_abscissa"] = p.design->achieved_abscissa;
        d["kernel_residual"] = p.kernel->residual_sup;
        d["kernel_tolerance"] = p.kernel->tolerance;
        d["times"] = p.trajectory->times;
        d["norms"] = p.trajectory->norms;
        d["controls"] = p.trajectory->controls;
        d["blew_up"] = p.trajectory->blew_up;
        if (p.certificate) {
          d["fitted_rate"] = p.certificate->fitted_rate;
          d["c_witness"] = p.certificate->c_witness;
          d["passed"] = p.certificate->passed;
        }
        return d;
      },
      py::arg("config"),
      "Analyze, design and simulate one scenario file; returns the results.");
}
