#include "drainsim/game.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace drainsim::game {

Partition canonicalize(Partition p) {
  for (auto& block : p) std::sort(block.begin(), block.end());
  p.erase(std::remove_if(p.begin(), p.end(),
                         [](const Coalition& c) { return c.empty(); }),
          p.end());
  std::sort(p.begin(), p.end(),
            [](const Coalition& a, const Coalition& b) { return a[0] < b[0]; });
  return p;
}

Partition singletons(const std::vector<Player>& players) {
  Partition p;
  for (const auto& pl : players) p.push_back({pl.id});
  return canonicalize(p);
}

std::string partition_key(const Partition& p) {
  std::ostringstream os;
  for (const auto& block : p) {
    for (int id : block) os << id << ',';
    os << '|';
  }
  return os.str();
}

std::vector<Partition> enumerate_partitions(const std::vector<int>& ids) {
  std::vector<Partition> out;
  Partition current;
  auto rec = [&](auto&& self, std::size_t i) -> void {
    if (i == ids.size()) {
      out.push_back(canonicalize(current));
      return;
    }
    // Index-based: the recursive call below grows `current`, which would
    // invalidate a range-for reference on reallocation.
    for (std::size_t b = 0; b < current.size(); ++b) {
      current[b].push_back(ids[i]);
      self(self, i + 1);
      current[b].pop_back();
    }
    current.push_back({ids[i]});
    self(self, i + 1);
    current.pop_back();
  };
  rec(rec, 0);
  return out;
}

Outcome evaluate_partition(const ValueFunction& vf, const Partition& p) {
  return Outcome{vf.evaluate(p), p};
}

bool pareto_dominates(const Payoffs& y, const Payoffs& x, const Coalition& over,
                      double tol) {
  bool strict = false;
  for (int id : over) {
    const double yi = y.at(id);
    const double xi = x.at(id);
    if (yi < xi - tol) return false;
    if (yi > xi + tol) strict = true;
  }
  return strict;
}

namespace {

double total_value(const Payoffs& x) {
  double t = 0.0;
  for (const auto& [id, v] : x) t += v;
  return t;
}

Payoffs restrict(const Payoffs& x, const std::vector<int>& ids) {
  Payoffs out;
  for (int id : ids) out[id] = x.at(id);
  return out;
}

Partition merge_partitions(const Partition& a, const Partition& b) {
  Partition out = a;
  out.insert(out.end(), b.begin(), b.end());
  return canonicalize(out);
}

// Recursive-core solver. Residual games carry the frozen arrangement of the
// already-departed players, so cross-coalition externalities stay visible.
class CoreSolver {
 public:
  explicit CoreSolver(const ValueFunction& vf) : vf_(vf) {}

  std::vector<Outcome> core(const std::vector<int>& ids,
                            const Partition& frozen) {
    const std::string key =
        partition_key({ids}) + "#" + partition_key(frozen);
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;

    std::vector<Outcome> result;
    if (ids.empty()) {
      result.push_back(Outcome{});
    } else {
      for (const Partition& p : enumerate_partitions(ids)) {
        const Payoffs full = vf_.evaluate(merge_partitions(p, frozen));
        result.push_back(Outcome{restrict(full, ids), p});
      }
      result.erase(std::remove_if(result.begin(), result.end(),
                                  [&](const Outcome& o) {
                                    return dominated(o, ids, frozen);
                                  }),
                   result.end());
    }
    memo_[key] = result;
    return result;
  }

  bool dominated(const Outcome& o, const std::vector<int>& ids,
                 const Partition& frozen) {
    const int n = static_cast<int>(ids.size());
    for (unsigned mask = 1; mask < (1u << n); ++mask) {
      Coalition s;
      std::vector<int> rest;
      for (int i = 0; i < n; ++i) {
        if (mask & (1u << i)) {
          s.push_back(ids[i]);
        } else {
          rest.push_back(ids[i]);
        }
      }
      const Partition frozen_s = merge_partitions({s}, frozen);
      std::vector<Outcome> assumption = core(rest, frozen_s);
      if (assumption.empty()) {
        // Empty residual core: assume any residual arrangement.
        for (const Partition& rp : enumerate_partitions(rest)) {
          const Payoffs full = vf_.evaluate(merge_partitions(rp, frozen_s));
          assumption.push_back(Outcome{restrict(full, rest), rp});
        }
      }
      for (const Outcome& a : assumption) {
        const Partition full_p = merge_partitions(a.partition, frozen_s);
        const Payoffs y = vf_.evaluate(full_p);
        if (pareto_dominates(y, o.payoff, s)) return true;
      }
    }
    return false;
  }

 private:
  const ValueFunction& vf_;
  std::map<std::string, std::vector<Outcome>> memo_;
};

}  // namespace

std::vector<Outcome> recursive_core_bruteforce(const ValueFunction& vf) {
  std::vector<int> ids;
  for (const auto& p : vf.players()) ids.push_back(p.id);
  std::sort(ids.begin(), ids.end());
  if (ids.size() > 6) {
    throw std::invalid_argument(
        "recursive_core_bruteforce: more than 6 players (Bell-number guard)");
  }
  CoreSolver solver(vf);
  return solver.core(ids, {});
}

bool is_dominated(const ValueFunction& vf, const Outcome& outcome) {
  std::vector<int> ids;
  for (const auto& p : vf.players()) ids.push_back(p.id);
  std::sort(ids.begin(), ids.end());
  if (ids.size() > 6) {
    throw std::invalid_argument("is_dominated: more than 6 players");
  }
  CoreSolver solver(vf);
  Outcome full = outcome;
  full.payoff = restrict(outcome.payoff, ids);
  return solver.dominated(full, ids, {});
}

namespace {

Coalition block_of(const Partition& p, int id) {
  for (const auto& block : p) {
    if (std::find(block.begin(), block.end(), id) != block.end()) return block;
  }
  throw std::out_of_range("block_of: player not in partition");
}

Partition with_merged(const Partition& p, const Coalition& a,
                      const Coalition& b) {
  Partition out;
  Coalition merged = a;
  merged.insert(merged.end(), b.begin(), b.end());
  for (const auto& block : p) {
    if (block == a || block == b) continue;
    out.push_back(block);
  }
  out.push_back(merged);
  return canonicalize(out);
}

Partition with_moved(const Partition& p, int id, const Coalition& target) {
  Partition out;
  for (auto block : p) {
    block.erase(std::remove(block.begin(), block.end(), id), block.end());
    if (block == target) block.push_back(id);
    out.push_back(block);
  }
  return canonicalize(out);
}

}  // namespace

FormationResult form_coalitions(const ValueFunction& vf, int max_rounds) {
  if (max_rounds < 1) throw std::invalid_argument("form_coalitions: rounds");
  const std::vector<Player> players = vf.players();

  FormationResult res;
  res.partition = singletons(players);
  Payoffs x = vf.evaluate(res.partition);

  std::vector<int> sbs_ids, mue_ids;
  for (const auto& p : players) {
    (p.is_sbs ? sbs_ids : mue_ids).push_back(p.id);
  }
  std::sort(sbs_ids.begin(), sbs_ids.end());
  std::sort(mue_ids.begin(), mue_ids.end());
  // Strongest interference victims negotiate first; ties break by id.
  std::stable_sort(sbs_ids.begin(), sbs_ids.end(), [&](int a, int b) {
    return vf.received_interference(a) > vf.received_interference(b);
  });

  for (int round = 1; round <= max_rounds; ++round) {
    res.rounds = round;
    bool changed = false;

    for (int k : sbs_ids) {
      const Coalition mine = block_of(res.partition, k);
      // Distinct partner coalitions in interferer order, capped to keep the
      // per-actor proposal count bounded at network scale.
      constexpr std::size_t kMaxPartnerBlocks = 4;
      constexpr std::size_t kMaxDeepBlocks = 2;  // for 3-way merges / switches
      std::vector<Coalition> partners;
      for (int j : vf.interferers_of(k)) {
        const Coalition other = block_of(res.partition, j);
        if (other == mine) continue;
        if (std::find(partners.begin(), partners.end(), other) !=
            partners.end()) {
          continue;
        }
        partners.push_back(other);
        if (partners.size() >= kMaxPartnerBlocks) break;
      }

      // Candidate moves: merge with one partner coalition, merge with two at
      // once, or leave the current coalition to join a partner. Each move is
      // admissible only if no affected player loses and someone strictly
      // gains; the actor commits the admissible move with its highest own
      // payoff.
      struct Move {
        Partition partition;
        Coalition affected;
      };
      std::vector<Move> moves;
      for (const Coalition& other : partners) {
        Coalition merged = mine;
        merged.insert(merged.end(), other.begin(), other.end());
        std::sort(merged.begin(), merged.end());
        moves.push_back({with_merged(res.partition, mine, other), merged});
      }
      const std::size_t deep = std::min(partners.size(), kMaxDeepBlocks);
      for (std::size_t a = 0; a < deep; ++a) {
        for (std::size_t b = a + 1; b < deep; ++b) {
          Coalition merged = mine;
          merged.insert(merged.end(), partners[a].begin(), partners[a].end());
          merged.insert(merged.end(), partners[b].begin(), partners[b].end());
          std::sort(merged.begin(), merged.end());
          const Partition mid = with_merged(res.partition, mine, partners[a]);
          moves.push_back(
              {with_merged(mid, block_of(mid, k), partners[b]), merged});
        }
      }
      if (mine.size() > 1) {
        for (std::size_t a = 0; a < deep; ++a) {
          Coalition affected = mine;
          affected.insert(affected.end(), partners[a].begin(),
                          partners[a].end());
          std::sort(affected.begin(), affected.end());
          moves.push_back({with_moved(res.partition, k, partners[a]), affected});
        }
      }

      Partition best_partition;
      Payoffs best_payoffs;
      Coalition best_merged;
      bool have_best = false;
      for (const Move& mv : moves) {
        const Payoffs y = vf.evaluate(mv.partition);
        const bool admissible = pareto_dominates(y, x, mv.affected);
        TraceEntry ev;
        ev.round = round;
        ev.actor = k;
        ev.proposed = mv.affected;
        for (int id : mv.affected) ev.payoff_delta[id] = y.at(id) - x.at(id);
        ev.committed = false;
        ev.total_value = total_value(x);
        res.trace.push_back(ev);

        if (admissible &&
            (!have_best || y.at(k) > best_payoffs.at(k))) {
          best_partition = mv.partition;
          best_payoffs = y;
          best_merged = mv.affected;
          have_best = true;
        }
      }
      if (have_best) {
        res.partition = best_partition;
        x = best_payoffs;
        changed = true;
        TraceEntry ev;
        ev.round = round;
        ev.actor = k;
        ev.proposed = best_merged;
        ev.committed = true;
        ev.total_value = total_value(x);
        res.trace.push_back(ev);
      }
    }

    for (int n : mue_ids) {
      if (block_of(res.partition, n).size() > 1) continue;  // already joined
      if (!vf.mue_release_triggered(n, res.partition)) continue;
      const Coalition host = vf.dominant_coalition_of(n, res.partition);
      if (host.empty()) continue;
      const Partition candidate = with_moved(res.partition, n, host);
      const Payoffs y = vf.evaluate(candidate);

      TraceEntry ev;
      ev.round = round;
      ev.actor = n;
      ev.proposed = host;
      ev.payoff_delta[n] = y.at(n) - x.at(n);
      // Commit rule for an MUE: its cooperative rate must not fall below the
      // classical one.
      ev.committed = y.at(n) >= x.at(n) - kDominanceTol;
      if (ev.committed) {
        res.partition = candidate;
        x = y;
        changed = true;
      }
      ev.total_value = total_value(x);
      res.trace.push_back(ev);
    }

    if (!changed) break;
  }

  res.outcome = Outcome{x, res.partition};
  return res;
}

std::string trace_json(const std::vector<TraceEntry>& trace) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& t : trace) {
    nlohmann::json deltas = nlohmann::json::object();
    for (const auto& [id, d] : t.payoff_delta) {
      deltas[std::to_string(id)] = d;
    }
    arr.push_back({{"round", t.round},
                   {"actor", t.actor},
                   {"proposed", t.proposed},
                   {"payoff_delta", deltas},
                   {"committed", t.committed},
                   {"total_value", t.total_value}});
  }
  return arr.dump(2);
}

}  // namespace drainsim::game
