// Benchmark: serial reference trial loop vs the OpenMP loop, with a result
// equality check.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "drainsim/sim.hpp"

namespace {

double wall_seconds(const std::function<void()>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(t1 - t0).count();
}

bool identical(const std::vector<drainsim::sim::TrialResult>& a,
               const std::vector<drainsim::sim::TrialResult>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].rows.size() != b[i].rows.size()) return false;
    for (std::size_t r = 0; r < a[i].rows.size(); ++r) {
      if (a[i].rows[r].node_id != b[i].rows[r].node_id) return false;
      if (a[i].rows[r].rate != b[i].rows[r].rate) return false;
    }
  }
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trial-loop benchmark: serial reference vs OpenMP"};
  drainsim::sim::ScenarioConfig cfg;
  int workers = 4;
  cfg.trials = 32;
  cfg.k_sbs = 20;
  cfg.n_mue = 10;
  app.add_option("--trials", cfg.trials, "Monte Carlo trials")->default_val(32);
  app.add_option("--sbs", cfg.k_sbs, "Small cells")->default_val(20);
  app.add_option("--mue", cfg.n_mue, "Macrocell users")->default_val(10);
  app.add_option("--workers", workers, "OpenMP worker count")->default_val(4);
  app.add_option("--seed", cfg.seed, "Seed")->default_val(1);
  std::string strategy = "id_ia";
  app.add_option("--strategy", strategy, "frequency_reuse | ia | id_ia")
      ->default_val("id_ia");
  CLI11_PARSE(app, argc, argv);
  cfg.strategy = drainsim::sim::strategy_from(strategy);

  std::vector<drainsim::sim::TrialResult> serial, parallel;
  const double t_serial =
      wall_seconds([&] { serial = drainsim::sim::run_trials(cfg, 1); });
  const double t_parallel =
      wall_seconds([&] { parallel = drainsim::sim::run_trials(cfg, workers); });

  std::printf("trials=%d sbs=%d mue=%d strategy=%s\n", cfg.trials, cfg.k_sbs,
              cfg.n_mue, strategy.c_str());
  std::printf("serial   : %8.3f s  (%.3f s/trial)\n", t_serial,
              t_serial / cfg.trials);
  std::printf("openmp x%d: %8.3f s  (speedup %.2fx)\n", workers, t_parallel,
              t_serial / t_parallel);
  std::printf("results identical: %s\n", identical(serial, parallel) ? "yes" : "NO");
  return identical(serial, parallel) ? 0 : 1;
}
