#pragma once

#include <complex>
#include <map>
#include <string>
#include <vector>

#include "delaystab/feedback_design.h"
#include "delaystab/linalg.h"

namespace delaystab {

/// Numeric CSV with a header row; "nan" cells parse to NaN.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;

  bool has(const std::string& name) const;
  const std::vector<double>& column(const std::string& name) const;
  int rows() const {
    return columns.empty() ? 0 : static_cast<int>(columns[0].size());
  }
};

CsvTable ReadCsv(const std::string& path);

/// log₁₀‖z(t)‖ with the reference slope ‖z(0)‖e^{−σt}.
std::string NormPlotSvg(const std::vector<double>& times,
                        const std::vector<double>& norms, double sigma);

/// Eigenvalue scatter with the vertical line Re λ = −σ.
std::string EigenvalueSvg(const std::vector<std::complex<double>>& eigenvalues,
                          double sigma);

/// Heat map of ‖K(t, s)‖ over the triangle 0 ≤ s ≤ t ≤ T.
std::string KernelSvg(const KernelDump& dump);

}  // namespace delaystab
