#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "pdenetpp/experiment.hpp"

int main(int argc, char** argv) {
  using namespace pdenetpp::experiment;
  CLI::App app{"Hybrid learned-discretization PDE simulation experiments"};
  app.require_subcommand(1);
  std::string config, out;
  std::uint64_t seed = 0;
  bool quiet = false;
  const char* commands[][2] = {
      {"generate", "simulate training/test datasets with the reference solver"},
      {"train", "train a hybrid or black-box model on a generated dataset"},
      {"evaluate", "roll out a checkpoint on a test dataset and report errors"},
      {"rollout", "export a predicted trajectory and PGM frames"},
      {"schemes", "run the 1-D advection scheme demos"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config, "JSON configuration file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output directory (overrides the config)");
    sub->add_option("--seed", seed, "seed (overrides the config)");
    sub->add_flag("--quiet", quiet, "suppress progress output");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }
  Options options;
  options.config = config;
  if (!out.empty()) options.out = out;
  if (!app.get_subcommands().front()->get_option("--seed")->empty()) options.seed = seed;
  if (!quiet) options.progress = &std::cerr;
  return run(app.get_subcommands().front()->get_name(), options, std::cout, std::cerr);
}
