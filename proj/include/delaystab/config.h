#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "delaystab/closed_loop.h"
#include "delaystab/linalg.h"
#include "delaystab/model.h"

namespace delaystab {

struct ModelSection {
  std::string kind = "distributed_1d";
  // abstract
  MatrixXd generator;
  MatrixXd input_map;
  // 1-D kinds
  double length = 3.14159265358979323846;
  int intervals = 100;
  double diffusion = 1.0;
  double drift = 0.0;
  double reaction = 0.0;
  double control_a = 0.0;
  double control_b = 3.14159265358979323846;
  int control_shapes = 1;
  std::optional<double> shift;
  std::string nonlinearity = "cubic";
};

struct DesignSection {
  double sigma = 0.5;
  double tau = 0.3;
  std::optional<double> sigma_star;
  double svd_tol = 1e-8;
  double cluster_tol = 0.0;
  double kernel_rel_tol = 1e-6;
  bool diagnostic_static_feedback = false;
  /// Scalar pole placement target for n₊ = 1.
  std::optional<double> placement;
  /// User gain on z (m×n); bypasses the regulator.
  std::optional<MatrixXd> gain;
};

struct SimulationSection {
  double horizon = 20.0;
  double dt = 0.01;
  std::string initial = "eigenmode:1";
  double amplitude = 1.0;
  std::string forcing = "none";
  std::optional<double> window_lo;
  std::optional<double> window_hi;
  bool feedback = true;
  bool picard = false;
};

struct OutputSection {
  std::string directory = "delaystab_out";
  bool plots = true;
  int kernel_stride = 0;  // 0: pick so that the dump stays below ~4e6 values
};

/// `section.key = v1, v2, ...`; the sweep runs the Cartesian product.
struct SweepAxis {
  std::string key;
  std::vector<std::string> values;
};

struct ScenarioConfig {
  ModelSection model;
  DesignSection design;
  SimulationSection simulation;
  OutputSection output;
  std::vector<SweepAxis> sweep;
  std::string source_text;
  std::string base_dir;  // relative file: paths resolve against it

  double window_lo() const;
  double window_hi() const;
};

/// Strict INI-like grammar: `[section]`, `key = value`, `#` comments.
/// Overrides are applied as if appended to their section
/// ("design.tau" → "0.2"). Throws ErrorClass::kConfig listing every
/// violation found.
ScenarioConfig ParseConfig(
    const std::string& text,
    const std::vector<std::pair<std::string, std::string>>& overrides = {});

ScenarioConfig LoadConfig(const std::string& path);

/// Matrix literal "1,0;0,2".
MatrixXd ParseMatrix(const std::string& text);

ParabolicModel BuildModel(const ScenarioConfig& config);
VectorXd InitialState(const ScenarioConfig& config, const ParabolicModel& model);
Forcing BuildForcing(const ScenarioConfig& config, const ParabolicModel& model);

}  // namespace delaystab
