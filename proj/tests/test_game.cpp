#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <functional>
#include <set>
#include <vector>

#include "drainsim/game.hpp"

using namespace drainsim::game;

namespace {

// Table-driven game: payoffs come from a user function of the partition, and
// every SBS sees every other SBS as a potential partner.
class TableGame : public ValueFunction {
 public:
  TableGame(std::vector<Player> players,
            std::function<Payoffs(const Partition&)> payoff)
      : players_(std::move(players)), payoff_(std::move(payoff)) {}

  std::vector<Player> players() const override { return players_; }
  Payoffs evaluate(const Partition& p) const override { return payoff_(p); }

  std::vector<int> interferers_of(int sbs) const override {
    std::vector<int> out;
    for (const auto& p : players_) {
      if (p.is_sbs && p.id != sbs) out.push_back(p.id);
    }
    return out;
  }

  double received_interference(int sbs) const override {
    auto it = interference_.find(sbs);
    return it == interference_.end() ? 0.0 : it->second;
  }

  bool mue_release_triggered(int mue, const Partition&) const override {
    return triggered_.count(mue) > 0;
  }

  Coalition dominant_coalition_of(int mue,
                                  const Partition& p) const override {
    auto it = host_of_.find(mue);
    if (it == host_of_.end()) return {};
    for (const auto& block : p) {
      if (std::find(block.begin(), block.end(), it->second) != block.end()) {
        return block;
      }
    }
    return {};
  }

  std::map<int, double> interference_;
  std::set<int> triggered_;
  std::map<int, int> host_of_;  // mue -> anchor sbs of its dominant coalition

 private:
  std::vector<Player> players_;
  std::function<Payoffs(const Partition&)> payoff_;
};

std::vector<Player> sbs_players(std::vector<int> ids) {
  std::vector<Player> out;
  for (int id : ids) out.push_back({id, true});
  return out;
}

int block_size_of(const Partition& p, int id) {
  for (const auto& block : p) {
    if (std::find(block.begin(), block.end(), id) != block.end()) {
      return static_cast<int>(block.size());
    }
  }
  return 0;
}

// Everyone earns more in bigger groups: the grand coalition is the unique
// stable outcome.
Payoffs club_payoffs(const std::vector<Player>& players, const Partition& p) {
  Payoffs x;
  for (const auto& pl : players) {
    x[pl.id] = 1.0 + 0.5 * (block_size_of(p, pl.id) - 1);
  }
  return x;
}

}  // namespace

TEST_CASE("partition counts follow the Bell numbers") {
  const std::vector<int> bell = {1, 1, 2, 5, 15, 52, 203};
  std::vector<int> ids;
  for (int n = 0; n <= 6; ++n) {
    CHECK(enumerate_partitions(ids).size() == bell[n]);
    ids.push_back(n + 1);
  }
}

TEST_CASE("enumerated partitions are canonical and distinct") {
  const auto parts = enumerate_partitions({1, 2, 3, 4});
  std::set<std::string> keys;
  for (const auto& p : parts) {
    CHECK(partition_key(canonicalize(p)) == partition_key(p));
    keys.insert(partition_key(p));
  }
  CHECK(keys.size() == parts.size());
}

TEST_CASE("canonicalize sorts members, drops empties, and orders blocks") {
  const Partition p = canonicalize({{3, 1}, {}, {2}});
  REQUIRE(p.size() == 2);
  CHECK(p[0] == Coalition{1, 3});
  CHECK(p[1] == Coalition{2});
}

TEST_CASE("singletons puts every player in its own block") {
  const Partition p = singletons(sbs_players({4, 2, 7}));
  REQUIRE(p.size() == 3);
  CHECK(p[0] == Coalition{2});
  CHECK(p[1] == Coalition{4});
  CHECK(p[2] == Coalition{7});
}

TEST_CASE("Pareto dominance needs one strict winner and no losers") {
  const Payoffs x = {{1, 1.0}, {2, 2.0}};
  CHECK_FALSE(pareto_dominates(x, x, {1, 2}));
  CHECK(pareto_dominates({{1, 1.5}, {2, 2.0}}, x, {1, 2}));
  CHECK_FALSE(pareto_dominates({{1, 1.5}, {2, 1.5}}, x, {1, 2}));
  // Gains within the tolerance do not count as strict.
  CHECK_FALSE(pareto_dominates({{1, 1.0 + 1e-12}, {2, 2.0}}, x, {1, 2}));
  // Losses within the tolerance do not veto.
  CHECK(pareto_dominates({{1, 1.5}, {2, 2.0 - 1e-12}}, x, {1, 2}));
}

TEST_CASE("mutual gain drives formation to the grand coalition") {
  const auto players = sbs_players({1, 2, 3});
  TableGame g(players,
              [&](const Partition& p) { return club_payoffs(players, p); });
  const FormationResult res = form_coalitions(g, 10);
  REQUIRE(res.partition.size() == 1);
  CHECK(res.partition[0] == Coalition{1, 2, 3});
  for (const auto& pl : players) CHECK(res.outcome.payoff.at(pl.id) == 2.0);

  // The stable set contains exactly the grand coalition here.
  const auto core = recursive_core_bruteforce(g);
  REQUIRE(core.size() == 1);
  CHECK(core[0].partition == Partition{{1, 2, 3}});
  CHECK_FALSE(is_dominated(g, res.outcome));
}

TEST_CASE("a singleton outcome of the club game is dominated") {
  const auto players = sbs_players({1, 2, 3});
  TableGame g(players,
              [&](const Partition& p) { return club_payoffs(players, p); });
  const Partition alone = singletons(players);
  CHECK(is_dominated(g, evaluate_partition(g, alone)));
}

TEST_CASE("with flat payoffs nothing moves and nothing dominates") {
  const auto players = sbs_players({1, 2});
  TableGame g(players, [&](const Partition&) {
    return Payoffs{{1, 1.0}, {2, 1.0}};
  });
  const FormationResult res = form_coalitions(g, 10);
  CHECK(res.partition == Partition{{1}, {2}});
  CHECK(res.rounds == 1);
  // Every arrangement is stable: dominance needs a strict improvement.
  CHECK(recursive_core_bruteforce(g).size() == 2);
}

TEST_CASE("a merge that hurts one side is proposed but never committed") {
  const auto players = sbs_players({1, 2});
  TableGame g(players, [&](const Partition& p) {
    const bool together = block_size_of(p, 1) == 2;
    return Payoffs{{1, together ? 5.0 : 1.0}, {2, together ? 0.5 : 1.0}};
  });
  const FormationResult res = form_coalitions(g, 10);
  CHECK(res.partition == Partition{{1}, {2}});
  bool saw_proposal = false;
  for (const auto& ev : res.trace) {
    if (ev.proposed == Coalition{1, 2}) {
      saw_proposal = true;
      CHECK_FALSE(ev.committed);
    }
  }
  CHECK(saw_proposal);
}

TEST_CASE("formation is invariant under relabeling of the players") {
  const auto players = sbs_players({5, 8, 11});
  TableGame g(players,
              [&](const Partition& p) { return club_payoffs(players, p); });
  const FormationResult res = form_coalitions(g, 10);
  REQUIRE(res.partition.size() == 1);
  CHECK(res.partition[0] == Coalition{5, 8, 11});
}

TEST_CASE("the strongest interference victim negotiates first") {
  const auto players = sbs_players({1, 2, 3});
  TableGame g(players,
              [&](const Partition& p) { return club_payoffs(players, p); });
  g.interference_ = {{1, 0.1}, {2, 9.0}, {3, 1.0}};
  const FormationResult res = form_coalitions(g, 10);
  REQUIRE_FALSE(res.trace.empty());
  CHECK(res.trace.front().actor == 2);
}

TEST_CASE("a squeezed macro user joins its dominant coalition") {
  std::vector<Player> players = sbs_players({1, 2});
  players.push_back({9, false});
  TableGame g(players, [](const Partition& p) {
    Payoffs x;
    x[1] = block_size_of(p, 1) >= 2 ? 2.0 : 1.0;
    x[2] = block_size_of(p, 2) >= 2 ? 2.0 : 1.0;
    x[9] = block_size_of(p, 9) > 1 ? 3.0 : 2.0;
    return x;
  });
  g.triggered_ = {9};
  g.host_of_ = {{9, 1}};
  const FormationResult res = form_coalitions(g, 10);
  CHECK(res.partition == Partition{{1, 2, 9}});
  CHECK(res.outcome.payoff.at(9) == 3.0);
}

TEST_CASE("a macro user refuses a coalition that lowers its rate") {
  std::vector<Player> players = sbs_players({1, 2});
  players.push_back({9, false});
  TableGame g(players, [](const Partition& p) {
    Payoffs x;
    x[1] = block_size_of(p, 1) >= 2 ? 2.0 : 1.0;
    x[2] = block_size_of(p, 2) >= 2 ? 2.0 : 1.0;
    x[9] = block_size_of(p, 9) > 1 ? 1.0 : 2.0;  // joining hurts
    return x;
  });
  g.triggered_ = {9};
  g.host_of_ = {{9, 1}};
  const FormationResult res = form_coalitions(g, 10);
  CHECK(block_size_of(res.partition, 9) == 1);
  CHECK(res.outcome.payoff.at(9) == 2.0);
}

TEST_CASE("formation terminates and its trace stays small") {
  const auto players = sbs_players({1, 2, 3, 4, 5});
  TableGame g(players,
              [&](const Partition& p) { return club_payoffs(players, p); });
  const FormationResult res = form_coalitions(g, 10);
  CHECK(res.rounds <= 10);
  CHECK(res.trace.size() < 10 * 52);  // well under rounds x partition count
  // Each committed merge must survive an after-the-fact dominance re-check
  // against the payoffs recorded just before it.
  double before = 0.0;
  for (const auto& ev : res.trace) {
    if (ev.committed) CHECK(ev.total_value >= before - 1e-9);
    before = ev.total_value;
  }
}

TEST_CASE("trace export is valid JSON with one record per event") {
  const auto players = sbs_players({1, 2});
  TableGame g(players,
              [&](const Partition& p) { return club_payoffs(players, p); });
  const FormationResult res = form_coalitions(g, 10);
  const std::string js = trace_json(res.trace);
  CHECK(js.front() == '[');
  CHECK(std::count(js.begin(), js.end(), '{') >=
        static_cast<long>(res.trace.size()));
}

TEST_CASE("oversized player sets are refused by the exact solver") {
  const auto players = sbs_players({1, 2, 3, 4, 5, 6, 7});
  TableGame g(players,
              [&](const Partition& p) { return club_payoffs(players, p); });
  CHECK_THROWS(recursive_core_bruteforce(g));
}
