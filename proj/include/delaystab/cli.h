#pragma once

#include <optional>
#include <string>

#include "delaystab/closed_loop.h"
#include "delaystab/config.h"
#include "delaystab/error.h"
#include "delaystab/feedback_design.h"
#include "delaystab/model.h"
#include "delaystab/spectral_split.h"

namespace delaystab {

struct CliOptions {
  std::string config_path;
  std::string out_dir;  // empty: output.directory from the config
  bool reuse = false;
  int jobs = 1;
};

/// Logs go to stderr; DELAYSTAB_LOG selects quiet, info (default) or debug.
void ConfigureLogging();

/// 2 config, 3 spectral, 4 design, 5 simulate.
int ExitCode(ErrorClass c);

/// Runs one subcommand; errors are reported on stderr as
/// "delaystab: error[<class>]: <message>" and mapped through ExitCode.
int RunCommand(const std::string& subcommand, const CliOptions& options);

/// In-memory pipeline shared by the subcommands, the sweep and the bindings.
struct Pipeline {
  ScenarioConfig config;
  ParabolicModel model;
  SpectralSplit split;
  HautusReport hautus;
  std::optional<FeedbackDesign> design;
  std::optional<MemoryKernel> kernel;
  std::optional<Trajectory> trajectory;
  std::optional<DecayCertificate> certificate;
  std::optional<PicardReport> picard;
};

Pipeline RunAnalyze(const ScenarioConfig& config);
void RunDesign(Pipeline& p);
void RunSimulate(Pipeline& p);

}  // namespace delaystab
