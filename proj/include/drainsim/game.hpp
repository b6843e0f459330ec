#pragma once

#include <map>
#include <string>
#include <vector>

namespace drainsim::game {

/// Players are MUEs and SBSs, identified by node id.
struct Player {
  int id = 0;
  bool is_sbs = false;
};

using Coalition = std::vector<int>;       // sorted player ids
using Partition = std::vector<Coalition>; // canonical (see canonicalize)
using Payoffs = std::map<int, double>;    // player id -> rate, bits/s/Hz

/// Absolute dominance tolerance on rates.
inline constexpr double kDominanceTol = 1e-9;

/// Partition-form NTU value function: payoffs depend on the whole partition.
/// Implementations must be deterministic for a fixed scenario.
class ValueFunction {
 public:
  virtual ~ValueFunction() = default;
  virtual std::vector<Player> players() const = 0;
  virtual Payoffs evaluate(const Partition& partition) const = 0;

  /// Interferers of an SBS player, strongest first (empty when unknown).
  virtual std::vector<int> interferers_of(int /*sbs*/) const { return {}; }

  /// Total interference power received at the SUE of this SBS; drives the
  /// negotiation order (strongest victims move first).
  virtual double received_interference(int /*sbs*/) const { return 0.0; }

  /// True when some stream of this MUE sits below the delta/d_n SIR
  /// threshold under the given partition.
  virtual bool mue_release_triggered(int /*mue*/,
                                     const Partition& /*p*/) const {
    return false;
  }

  /// Coalition the MUE would associate with (its dominant interferers).
  virtual Coalition dominant_coalition_of(int /*mue*/,
                                          const Partition& /*p*/) const {
    return {};
  }
};

struct Outcome {
  Payoffs payoff;
  Partition partition;
};

/// Sort members within blocks and blocks by first member.
Partition canonicalize(Partition p);

Partition singletons(const std::vector<Player>& players);

std::string partition_key(const Partition& p);

/// All set partitions of the given (sorted) player ids.
std::vector<Partition> enumerate_partitions(const std::vector<int>& ids);

Outcome evaluate_partition(const ValueFunction& vf, const Partition& p);

/// y Pareto-dominates x over the coalition: no member worse, at least one
/// strictly better (tolerance kDominanceTol).
bool pareto_dominates(const Payoffs& y, const Payoffs& x, const Coalition& over,
                      double tol = kDominanceTol);

/// Literal inductive recursive-core construction over residual games.
/// Residual games are evaluated with the already-departed coalitions frozen
/// into the partition, so externalities are carried through. Player sets
/// above 6 are refused (Bell-number explosion guard).
std::vector<Outcome> recursive_core_bruteforce(const ValueFunction& vf);

/// Dominance test of a single outcome per the recursive-core definition.
bool is_dominated(const ValueFunction& vf, const Outcome& outcome);

struct TraceEntry {
  int round = 0;
  int actor = 0;
  Coalition proposed;
  std::map<int, double> payoff_delta;
  bool committed = false;
  double total_value = 0.0;  // after this event
};

struct FormationResult {
  Partition partition;
  Outcome outcome;
  std::vector<TraceEntry> trace;
  int rounds = 0;
};

/// Distributed coalition formation: sequential pairwise coalition merges in
/// interferer order gated by draining feasibility and Pareto dominance, then
/// MUE degree-of-freedom release, repeated until a full round commits no
/// change.
FormationResult form_coalitions(const ValueFunction& vf, int max_rounds);

/// Trace export as a JSON array (one record per evaluated move).
std::string trace_json(const std::vector<TraceEntry>& trace);

}  // namespace drainsim::game
