#include <string>

#include <CLI11.hpp>

#include "delaystab/cli.h"

int main(int argc, char** argv) {
  CLI::App app{"Delayed-input stabilization of parabolic systems"};
  app.require_subcommand(1, 1);
  delaystab::CliOptions options;
  for (const char* name : {"analyze", "design", "simulate", "sweep", "report"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", options.config_path, "scenario file")->required();
    sub->add_option("--out", options.out_dir, "output directory");
    sub->add_flag("--reuse", options.reuse, "skip stages whose outputs are current");
    sub->add_option("--jobs", options.jobs, "sweep worker threads")
        ->check(CLI::PositiveNumber);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  return delaystab::RunCommand(app.get_subcommands().front()->get_name(), options);
}
