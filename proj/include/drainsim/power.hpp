#pragma once

#include <vector>

namespace drainsim::power {

/// Per-stream transmit powers (Watts, linear) under a total budget.
struct PowerAllocation {
  std::vector<double> powers;
  double budget = 0.0;
  bool possible = true;  // false when every gain was zero

  double total() const;
  std::vector<int> active() const;  // indices with power > 0
};

/// Effective scalar state of one post-processed signal stream.
struct StreamCondition {
  int stream = 0;
  double gain = 0.0;                     // effective channel gain, linear
  double interference_plus_noise = 0.0;  // Watts at the stream output
  double sir = 0.0;                      // linear signal-to-interference ratio
};

enum class SplitMode { WaterFilling, Uniform };

/// Classical water-filling: P_d = max(0, mu - noise/g_d) with mu chosen so the
/// powers sum to the budget. Zero-gain streams get zero power. Exact
/// sorting-based active-set computation, no iteration.
PowerAllocation waterfill(const std::vector<double>& gains, double noise,
                          double budget);

/// Sum-rate of an allocation over the given stream conditions when the power
/// of each of the d_divisor nominal streams is derated by d_divisor:
/// sum_d log2(1 + (P_d / d_divisor) * gain_d / ipn_d).
double stream_rate(const std::vector<StreamCondition>& conds,
                   const std::vector<double>& powers, int d_divisor);

struct ModifiedResult {
  PowerAllocation alloc;          // length d_n, zeros on released streams
  std::vector<int> released;      // released stream indices, ascending
  double rate = 0.0;              // achieved rate over retained streams
  double baseline_rate = 0.0;     // classical all-stream rate on same inputs
};

/// Modified water-filling: streams whose SIR falls below delta/d_n are
/// released greedily (worst SIR first) while the recomputed rate over the
/// retained set strictly improves. Never returns a rate below the classical
/// allocation's rate; at least one stream is always retained.
ModifiedResult modified_waterfill(const std::vector<StreamCondition>& conds,
                                  double budget, double delta, int d_n,
                                  SplitMode mode = SplitMode::WaterFilling);

}  // namespace drainsim::power
