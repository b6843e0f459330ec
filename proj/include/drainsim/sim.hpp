#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <tuple>
#include <vector>

#include "drainsim/channel.hpp"
#include "drainsim/game.hpp"
#include "drainsim/power.hpp"
#include "drainsim/precoding.hpp"
#include "drainsim/rates.hpp"

namespace drainsim::sim {

enum class Strategy { FrequencyReuse, IAOnly, IDIA };

const char* strategy_name(Strategy s);
Strategy strategy_from(const std::string& name);

struct ScenarioConfig {
  int n_mue = 10;
  int k_sbs = 20;
  int a_n = 4;   // MBS antennas
  int a_k = 4;   // SBS antennas
  int b = 2;     // UE antennas
  int d_n = 2;   // MBS streams per MUE
  int d_k = 2;   // SBS streams per SUE
  double delta_db = 12.0;
  double p_max_mbs_dbm = 40.0;
  double p_max_sbs_dbm = 20.0;
  int n_subchannels = 32;
  int phi_k_limit = 4;
  Strategy strategy = Strategy::IDIA;
  int trials = 200;
  std::uint64_t seed = 1;
  bool compensate_path_loss = false;  // desired links only
  double lambda = precoding::kDefaultLambda;
  int max_rounds = 10;
  int max_draining_iters = 60;
  power::SplitMode split_mode = power::SplitMode::WaterFilling;
  double macro_radius_m = 650.0;
  double small_cell_radius_m = 20.0;
};

/// Thermal noise power over one 180 kHz subchannel at -174 dBm/Hz, Watts.
double noise_power_w();

/// The `budget` lowest-energy subchannels, ties broken by lowest index.
std::vector<int> select_subchannels(const std::vector<double>& sensed_energy,
                                    int budget);

struct ReceiverRow {
  int node_id = 0;
  bool is_sue = false;
  double rate = 0.0;  // bits/s/Hz
  int dof_used = 0;
  int released = 0;                // MUE streams released by modified WF
  int coalition_size = 1;          // SBS count of the owning coalition (SUEs)
  double interference_total = 0.0;               // Watts at the antennas
  double interference_in_desired_subspace = 0.0;  // Watts
};

struct TrialResult {
  int trial = 0;
  std::vector<ReceiverRow> rows;
  game::Partition partition;
  int coalition_count = 0;       // blocks containing at least one SBS
  double avg_coalition_size = 0.0;
  int committed_moves = 0;
};

struct MetricsReport {
  double avg_payoff_sue = 0.0;
  double avg_payoff_mue = 0.0;
  double avg_coalition_size = 0.0;
  double avg_coalition_count = 0.0;
  double interference_in_desired_subspace_pct = 0.0;
  std::vector<double> se_cdf;  // SUE spectral efficiency at 100 quantiles
  std::vector<TrialResult> raw;
};

/// Per-trial scenario state: placement, subchannel assignments, MBS
/// precoding, and lazily drawn channels. Deterministic for a fixed
/// (cfg, trial index).
class TrialContext {
 public:
  ScenarioConfig cfg;
  int trial = 0;
  channel::Scenario sc;
  double noise = 0.0;
  double delta_lin = 0.0;
  double p_mbs_w = 0.0;
  double p_sbs_w = 0.0;
  int d_n = 0;  // effective stream counts (capped by antennas)
  int d_k = 0;

  std::map<int, int> mue_channel;                // mue id -> subchannel
  std::map<int, std::vector<int>> sbs_channels;  // sbs id -> baseline picks
  std::map<int, std::vector<int>> sbs_extended;  // sbs id -> full sensed picks
  std::map<int, std::vector<int>> mues_on;       // subchannel -> mue ids
  std::map<int, std::vector<int>> sbss_on;       // subchannel -> sbs ids

  std::map<int, linalg::CMat> mbs_precoder;  // mue id -> V_n
  std::map<int, power::PowerAllocation> mbs_classical;

  mutable std::map<std::tuple<int, int, int>, linalg::CMat> chan_cache;
  mutable std::map<std::string, precoding::DrainingSolution> draining_cache;

  int streams_on_channel(int sbs) const;
  double sbs_power_per_channel(int sbs) const;
  bool is_desired_link(int tx, int rx) const;

  /// Lazily drawn channel matrix; desired links are compensated when the
  /// config says so.
  const linalg::CMat& chan(int tx, int rx, int f) const;

  /// Deterministic (fading-free) received power of tx at rx, Watts.
  double rssi(int tx, int rx, double tx_power) const;
};

/// Value function bound to one trial, usable with the game module directly.
std::unique_ptr<game::ValueFunction> make_value_function(
    std::shared_ptr<TrialContext> ctx);

std::shared_ptr<TrialContext> make_trial_context(const ScenarioConfig& cfg,
                                                 int trial_index);

const channel::Scenario& context_scenario(const TrialContext& ctx);

/// One Monte Carlo round: placement, channel draws, MBS water-filling, SBS
/// sensing and selection, strategy dispatch, rates.
TrialResult run_trial(const ScenarioConfig& cfg, int trial_index);

/// All trials. workers <= 1 runs the serial reference loop; larger counts
/// run the OpenMP loop. Results are identical either way.
std::vector<TrialResult> run_trials(const ScenarioConfig& cfg, int workers = 1);

MetricsReport aggregate(const std::vector<TrialResult>& results);

}  // namespace drainsim::sim
