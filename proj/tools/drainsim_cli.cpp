// Command-line front end: validate experiment specs and run sweeps.
#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "drainsim/experiment.hpp"

namespace {

int cmd_validate(const std::string& path) {
  using drainsim::experiment::Diagnostic;
  try {
    const auto spec = drainsim::experiment::load_spec_file(path);
    const auto diags = drainsim::experiment::validate_spec(spec);
    bool failed = false;
    for (const Diagnostic& d : diags) {
      std::cerr << (d.error ? "error" : "warning") << ": " << d.field << ": "
                << d.message << "\n";
      failed |= d.error;
    }
    if (failed) return 2;
    std::cout << "ok: " << path << "\n";
    return 0;
  } catch (const drainsim::experiment::SpecError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

int cmd_run(const std::string& path,
            const drainsim::experiment::RunOptions& opts) {
  try {
    const auto spec = drainsim::experiment::load_spec_file(path);
    bool failed = false;
    for (const auto& d : drainsim::experiment::validate_spec(spec)) {
      std::cerr << (d.error ? "error" : "warning") << ": " << d.field << ": "
                << d.message << "\n";
      failed |= d.error;
    }
    if (failed) return 2;
    return drainsim::experiment::run_experiment(spec, opts, std::cout);
  } catch (const drainsim::experiment::SpecError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Macrocell/small-cell downlink simulator"};
  app.require_subcommand(1);

  std::string spec_path;
  drainsim::experiment::RunOptions opts;
  std::uint64_t seed = 0;

  auto* run = app.add_subcommand("run", "Run an experiment spec");
  run->add_option("spec", spec_path, "Path to the JSON experiment spec")
      ->required();
  auto* seed_opt =
      run->add_option("--seed", seed, "Override the spec's seed");
  run->add_option("--workers", opts.workers, "Parallel trial workers")
      ->default_val(1);
  run->add_option("--out", opts.output_dir,
                  "Output directory (overrides the spec)");

  auto* validate = app.add_subcommand("validate", "Check a spec, run nothing");
  validate->add_option("spec", spec_path, "Path to the JSON experiment spec")
      ->required();

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) {
    opts.override_seed = seed_opt->count() > 0;
    opts.seed = seed;
    return cmd_run(spec_path, opts);
  }
  return cmd_validate(spec_path);
}
