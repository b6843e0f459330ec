#include "drainsim/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <tuple>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace drainsim::sim {

using channel::LinkChannel;
using channel::NodeKind;
using linalg::CMat;

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::FrequencyReuse: return "frequency_reuse";
    case Strategy::IAOnly: return "ia";
    case Strategy::IDIA: return "id_ia";
  }
  return "?";
}

Strategy strategy_from(const std::string& name) {
  if (name == "frequency_reuse") return Strategy::FrequencyReuse;
  if (name == "ia") return Strategy::IAOnly;
  if (name == "id_ia") return Strategy::IDIA;
  throw std::invalid_argument("unknown strategy: " + name);
}

double noise_power_w() {
  const double dbm = -174.0 + 10.0 * std::log10(180e3);
  return std::pow(10.0, (dbm - 30.0) / 10.0);
}

std::vector<int> select_subchannels(const std::vector<double>& sensed_energy,
                                    int budget) {
  if (budget < 1) throw std::invalid_argument("select_subchannels: budget");
  const int n = static_cast<int>(sensed_energy.size());
  budget = std::min(budget, n);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return sensed_energy[a] < sensed_energy[b];
  });
  std::vector<int> out(order.begin(), order.begin() + budget);
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double dbm_to_w(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

// Interference subspace for receive projection: dominant covariance
// directions that also rise above the thermal noise floor. Sub-noise
// interference does not cost receive dimensions, and a receiver carrying d
// desired streams in B dimensions can spare at most B - d of them, so the
// nulled subspace is capped there (strongest directions first).
linalg::Subspace interference_subspace(const CMat& cov, double noise,
                                       int spare_dims) {
  linalg::Subspace s;
  s.ambient_dim = static_cast<int>(cov.rows());
  s.basis = CMat::Zero(s.ambient_dim, 0);
  if (cov.size() == 0 || cov.norm() == 0.0 || spare_dims <= 0) return s;
  Eigen::SelfAdjointEigenSolver<CMat> es(cov);
  const auto& ev = es.eigenvalues();
  const double lmax = ev(ev.size() - 1);
  const double thresh = std::max(linalg::kEigFraction * lmax, noise);
  int first = 0;
  while (first < ev.size() && ev(first) <= thresh) ++first;
  int dim = static_cast<int>(ev.size()) - first;
  dim = std::min(dim, spare_dims);
  s.basis = es.eigenvectors().rightCols(dim);
  return s;
}

}  // namespace

int TrialContext::streams_on_channel(int /*sbs*/) const {
  // One spatial stream per occupied subchannel: the d_k-dimensional signal is
  // modulated over d_k distinct subchannels under every strategy; strategies
  // differ only in how precoders are coordinated.
  return 1;
}

double TrialContext::sbs_power_per_channel(int sbs) const {
  return p_sbs_w / static_cast<double>(sbs_extended.at(sbs).size());
}

bool TrialContext::is_desired_link(int tx, int rx) const {
  if (tx == 0) return sc.node(rx).kind == NodeKind::MUE;
  if (sc.node(tx).kind == NodeKind::SBS) return sc.sue_of(tx) == rx;
  return false;
}

const CMat& TrialContext::chan(int tx, int rx, int f) const {
  const auto key = std::make_tuple(tx, rx, f);
  auto it = chan_cache.find(key);
  if (it == chan_cache.end()) {
    const bool comp = cfg.compensate_path_loss && is_desired_link(tx, rx);
    it = chan_cache.emplace(key, channel::draw_channel(sc, tx, rx, f, comp).h)
             .first;
  }
  return it->second;
}

double TrialContext::rssi(int tx, int rx, double tx_power) const {
  return tx_power * channel::db_to_linear(-channel::link_loss_db(sc, tx, rx));
}

const channel::Scenario& context_scenario(const TrialContext& ctx) {
  return ctx.sc;
}

std::shared_ptr<TrialContext> make_trial_context(const ScenarioConfig& cfg,
                                                 int trial_index) {
  auto ctx = std::make_shared<TrialContext>();
  ctx->cfg = cfg;
  ctx->trial = trial_index;
  ctx->noise = noise_power_w();
  ctx->delta_lin = channel::db_to_linear(cfg.delta_db);
  ctx->p_mbs_w = dbm_to_w(cfg.p_max_mbs_dbm);
  ctx->p_sbs_w = dbm_to_w(cfg.p_max_sbs_dbm);
  ctx->d_n = std::min({cfg.d_n, cfg.a_n, cfg.b});
  ctx->d_k = std::min({cfg.d_k, cfg.a_k, cfg.b});

  channel::PlacementConfig pc;
  pc.n_mue = cfg.n_mue;
  pc.k_sbs = cfg.k_sbs;
  pc.macro_radius_m = cfg.macro_radius_m;
  pc.small_cell_radius_m = cfg.small_cell_radius_m;
  pc.mbs_antennas = cfg.a_n;
  pc.sbs_antennas = cfg.a_k;
  pc.ue_antennas = cfg.b;
  ctx->sc = channel::place_scenario(pc, mix_seed(cfg.seed, trial_index));

  // MBS subchannel assignment: round-robin over the macro band.
  for (std::size_t i = 0; i < ctx->sc.mues.size(); ++i) {
    const int n = ctx->sc.mues[i];
    const int f = static_cast<int>(i) % cfg.n_subchannels;
    ctx->mue_channel[n] = f;
    ctx->mues_on[f].push_back(n);
  }

  // Interference-unaware MBS precoding and water-filling per MUE.
  for (int n : ctx->sc.mues) {
    const int f = ctx->mue_channel[n];
    const CMat& h = ctx->chan(0, n, f);
    Eigen::JacobiSVD<CMat> svd(h, Eigen::ComputeThinV);
    ctx->mbs_precoder[n] = svd.matrixV().leftCols(ctx->d_n);
    std::vector<double> gains(ctx->d_n);
    for (int d = 0; d < ctx->d_n; ++d) {
      gains[d] = svd.singularValues()(d) * svd.singularValues()(d);
    }
    ctx->mbs_classical[n] = power::waterfill(gains, ctx->noise, ctx->p_mbs_w);
  }

  // SBS sensing over the macrocell spectrum (genie: deterministic received
  // power from the MBS and already-assigned SBSs), then least-energy
  // selection. The baseline picks carry one stream per channel without any
  // coordination; cooperative strategies may additionally occupy sensed
  // channels up to the per-SBS limit when draining makes them usable.
  const int base_budget = std::min(ctx->d_k, cfg.phi_k_limit);
  const int ext_budget = cfg.strategy == Strategy::FrequencyReuse
                             ? base_budget
                             : std::min(cfg.phi_k_limit, cfg.n_subchannels);
  for (int k : ctx->sc.sbss) {
    std::vector<double> energy(cfg.n_subchannels, 0.0);
    for (const auto& [n, f] : ctx->mue_channel) {
      energy[f] += ctx->rssi(0, k, ctx->mbs_classical[n].total());
    }
    for (const auto& [j, channels] : ctx->sbs_extended) {
      for (int f : channels) {
        energy[f] += ctx->rssi(j, k, ctx->p_sbs_w / channels.size());
      }
    }
    ctx->sbs_channels[k] = select_subchannels(energy, base_budget);
    ctx->sbs_extended[k] = select_subchannels(energy, ext_budget);
    for (int f : ctx->sbs_extended[k]) ctx->sbss_on[f].push_back(k);
  }
  return ctx;
}

// ---------------------------------------------------------------------------
// Partition-form value function over one trial.

namespace {

struct RxDetail {
  double rate = 0.0;
  int dof_used = 0;
  int released = 0;
  double interference_total = 0.0;
  double interference_in_desired = 0.0;
  std::vector<double> stream_sir;
};

struct Detail {
  game::Payoffs payoffs;
  std::map<int, RxDetail> rx;  // receiver node id
  std::map<int, power::PowerAllocation> mue_alloc;  // after MUE phase
};

class NetworkValue : public game::ValueFunction {
 public:
  explicit NetworkValue(std::shared_ptr<TrialContext> ctx)
      : ctx_(std::move(ctx)) {}

  std::vector<game::Player> players() const override {
    std::vector<game::Player> out;
    for (int n : ctx_->sc.mues) out.push_back({n, false});
    for (int k : ctx_->sc.sbss) out.push_back({k, true});
    return out;
  }

  game::Payoffs evaluate(const game::Partition& p) const override {
    return detail(p).payoffs;
  }

  std::vector<int> interferers_of(int sbs) const override {
    // Measured potential interference of every other small cell at this
    // cell's user, strongest first. The list is not limited to currently
    // co-channel cells: a merge reshuffles the shared channel set, so any
    // neighbour is a meaningful negotiation partner.
    const int sue = ctx_->sc.sue_of(sbs);
    std::vector<std::pair<double, int>> order;
    for (int j : ctx_->sc.sbss) {
      if (j == sbs) continue;
      order.push_back({ctx_->rssi(j, sue, ctx_->sbs_power_per_channel(j)), j});
    }
    std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    std::vector<int> out;
    for (const auto& [s, j] : order) out.push_back(j);
    return out;
  }

  double received_interference(int sbs) const override {
    const int sue = ctx_->sc.sue_of(sbs);
    double total = 0.0;
    for (int f : ctx_->sbs_extended.at(sbs)) {
      for (int j : ctx_->sbss_on.at(f)) {
        if (j != sbs) total += ctx_->rssi(j, sue, ctx_->sbs_power_per_channel(j));
      }
    }
    return total;
  }

  bool mue_release_triggered(int mue, const game::Partition& p) const override {
    const auto& sirs = detail(p).rx.at(mue).stream_sir;
    const double threshold = ctx_->delta_lin / ctx_->d_n;
    return std::any_of(sirs.begin(), sirs.end(),
                       [&](double s) { return s < threshold; });
  }

  game::Coalition dominant_coalition_of(int mue,
                                        const game::Partition& p) const override {
    const int f = ctx_->mue_channel.at(mue);
    game::Coalition best;
    double best_strength = 0.0;
    for (const auto& block : p) {
      double s = 0.0;
      for (int id : block) {
        if (ctx_->sc.node(id).kind != NodeKind::SBS) continue;
        const auto& channels = ctx_->sbs_extended.at(id);
        if (std::find(channels.begin(), channels.end(), f) == channels.end()) {
          continue;
        }
        s += ctx_->rssi(id, mue, ctx_->sbs_power_per_channel(id));
      }
      if (s > best_strength) {
        best_strength = s;
        best = block;
      }
    }
    return best;
  }

  const Detail& detail(const game::Partition& p) const;

 private:
  struct MueEval {
    RxDetail rx;
    power::PowerAllocation alloc;
  };
  struct SueChannelEval {
    double rate = 0.0;
    int dof = 0;
    double interference_total = 0.0;
    double interference_in_desired = 0.0;
  };

  const CMat& matched_precoder(int sbs, int f) const {
    auto it = matched_.find({sbs, f});
    if (it == matched_.end()) {
      const CMat& h = ctx_->chan(sbs, ctx_->sc.sue_of(sbs), f);
      Eigen::JacobiSVD<CMat> svd(h, Eigen::ComputeThinV);
      it = matched_
               .emplace(std::make_pair(sbs, f),
                        svd.matrixV().leftCols(ctx_->streams_on_channel(sbs)))
               .first;
    }
    return it->second;
  }

  static void append_double(std::string& s, double x) {
    std::uint64_t u = 0;
    std::memcpy(&u, &x, sizeof(u));
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%llx", static_cast<unsigned long long>(u));
    s += buf;
  }

  std::shared_ptr<TrialContext> ctx_;
  mutable std::map<std::string, Detail> memo_;
  mutable std::map<std::pair<int, int>, CMat> matched_;
  // Receiver-level memoization keyed by the local interference environment,
  // so re-evaluating a partition that only changed elsewhere is cheap.
  mutable std::map<std::string, MueEval> mue_cache_;
  mutable std::map<std::string, SueChannelEval> sue_cache_;
};

const Detail& NetworkValue::detail(const game::Partition& partition) const {
  const std::string key = game::partition_key(partition);
  auto found = memo_.find(key);
  if (found != memo_.end()) return found->second;

  const TrialContext& ctx = *ctx_;
  const double noise = ctx.noise;
  Detail det;

  std::map<int, int> block_of;  // player id -> block index
  for (std::size_t bi = 0; bi < partition.size(); ++bi) {
    for (int id : partition[bi]) block_of[id] = static_cast<int>(bi);
  }

  // --- Active subchannels per SBS under this partition. Cooperative SBSs
  // may occupy all their sensed channels up to the per-SBS limit; a channel
  // beyond the baseline picks survives only where draining makes it usable.
  // A coalition pools its members' channels (including a joined MUE's one),
  // capped at the same limit; this is where cooperation buys extra DoF.
  const bool coalitions = ctx.cfg.strategy != Strategy::FrequencyReuse;
  std::map<int, std::vector<int>> active;  // sbs -> provisional channels
  for (const auto& block : partition) {
    std::vector<int> sbs_members;
    std::vector<int> pool;
    for (int id : block) {
      if (ctx.sc.node(id).kind == NodeKind::SBS) {
        sbs_members.push_back(id);
        for (int f : ctx.sbs_extended.at(id)) pool.push_back(f);
      } else if (coalitions) {
        pool.push_back(ctx.mue_channel.at(id));
      }
    }
    if (sbs_members.empty()) continue;
    if (!coalitions) {
      for (int k : sbs_members) active[k] = ctx.sbs_channels.at(k);
      continue;
    }
    std::sort(pool.begin(), pool.end());
    pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
    if (static_cast<int>(pool.size()) > ctx.cfg.phi_k_limit) {
      // Keep the least-occupied channels: fewest transmitters assigned at
      // sensing time, ties broken by lowest index.
      auto load = [&](int f) {
        int c = 0;
        auto mit = ctx.mues_on.find(f);
        if (mit != ctx.mues_on.end()) c += static_cast<int>(mit->second.size());
        auto sit = ctx.sbss_on.find(f);
        if (sit != ctx.sbss_on.end()) c += static_cast<int>(sit->second.size());
        return c;
      };
      std::stable_sort(pool.begin(), pool.end(), [&](int a, int b) {
        return load(a) != load(b) ? load(a) < load(b) : a < b;
      });
      pool.resize(ctx.cfg.phi_k_limit);
      std::sort(pool.begin(), pool.end());
    }
    for (int k : sbs_members) active[k] = pool;
  }

  // --- Per-(coalition, subchannel) draining. A channel is kept by a member
  // that does not own it only when the coalition's joint precoding is usable
  // there; owned channels fall back to matched precoding.
  std::map<std::pair<int, int>, CMat> v;        // (sbs, f) -> precoder
  std::map<std::pair<int, int>, CMat> q_sol;    // coalition receive filters
  std::map<std::pair<int, int>, bool> drained;  // intra-coalition suppressed
  std::map<std::pair<int, int>, std::string> gid;  // draining-group identity

  auto owns = [&](int k, int f) {
    const auto& own = ctx.sbs_channels.at(k);
    return std::find(own.begin(), own.end(), f) != own.end();
  };

  for (const auto& block : partition) {
    std::map<int, std::vector<int>> groups;  // f -> sbs members on it
    for (int id : block) {
      if (ctx.sc.node(id).kind != NodeKind::SBS) continue;
      for (int f : active.at(id)) groups[f].push_back(id);
    }
    for (auto& [f, members] : groups) {
      std::sort(members.begin(), members.end());
      const bool mue_present = ctx.mues_on.count(f) > 0;
      const bool need_solve =
          coalitions && (members.size() > 1 || mue_present);

      bool usable = false;
      if (need_solve) {
        std::ostringstream os;
        os << f << ':';
        for (int id : members) os << id << ',';
        const std::string cache_key = os.str();
        auto it = ctx.draining_cache.find(cache_key);
        if (it == ctx.draining_cache.end()) {
          precoding::DrainingProblem problem;
          problem.delta = ctx.delta_lin;
          problem.lambda = ctx.cfg.lambda;
          for (int k : members) {
            problem.members.push_back({k, ctx.chan(k, ctx.sc.sue_of(k), f),
                                       ctx.streams_on_channel(k)});
          }
          for (int from : members) {
            for (int to : members) {
              if (from == to) continue;
              problem.cross.push_back(
                  {from, to, ctx.chan(from, ctx.sc.sue_of(to), f)});
            }
          }
          auto mit = ctx.mues_on.find(f);
          if (mit != ctx.mues_on.end()) {
            for (int n : mit->second) {
              precoding::MueConstraint mc;
              mc.mue = n;
              mc.signal = ctx.chan(0, n, f) * ctx.mbs_precoder.at(n);
              for (int k : members) mc.from[k] = ctx.chan(k, n, f);
              problem.mues.push_back(std::move(mc));
            }
          }
          it = ctx.draining_cache
                   .emplace(cache_key,
                            precoding::solve_draining(
                                problem, ctx.cfg.max_draining_iters))
                   .first;
        }
        const auto& sol = it->second;

        usable = sol.feasible;
        if (usable && ctx.cfg.strategy == Strategy::IAOnly) {
          // Strict alignment regime: antenna-count condition must hold for
          // every member.
          int mue_streams = 0;
          auto mit = ctx.mues_on.find(f);
          if (mit != ctx.mues_on.end()) {
            mue_streams = static_cast<int>(mit->second.size()) * ctx.d_n;
          }
          for (int k : members) {
            const int peers = static_cast<int>(members.size()) - 1;
            if (!precoding::ia_feasible(
                    ctx.cfg.a_k, ctx.streams_on_channel(k), {mue_streams},
                    {peers * ctx.streams_on_channel(k)})) {
              usable = false;
              break;
            }
          }
        }
        if (usable) {
          for (int k : members) {
            v[{k, f}] = sol.precoders.at(k);
            q_sol[{k, f}] = sol.post_processors.at(k);
            drained[{k, f}] = true;
            gid[{k, f}] = cache_key;
          }
        }
      }
      if (!usable) {
        // Without a usable joint design, only the baseline picks stay on the
        // air (matched precoding); everyone else vacates the channel.
        for (int k : members) {
          if (need_solve && !owns(k, f)) {
            auto& ch = active.at(k);
            ch.erase(std::remove(ch.begin(), ch.end(), f), ch.end());
            continue;
          }
          v[{k, f}] = matched_precoder(k, f);
          drained[{k, f}] = false;
          gid[{k, f}] = "m";
        }
      }
    }
  }

  // --- Final occupancy and per-channel transmit power.
  std::map<int, std::vector<int>> on_channel;  // f -> sbs ids, sorted
  std::map<int, double> power_per_channel;     // sbs -> Watts per channel
  for (const auto& [k, channels] : active) {
    for (int f : channels) on_channel[f].push_back(k);
    power_per_channel[k] =
        ctx.p_sbs_w / static_cast<double>(std::max<std::size_t>(1, channels.size()));
  }
  for (auto& [f, ids] : on_channel) std::sort(ids.begin(), ids.end());

  // --- MUE phase: receive filters, interference, power allocation.
  for (int n : ctx.sc.mues) {
    const int f = ctx.mue_channel.at(n);

    const bool cooperative = [&] {
      const auto& block = partition[block_of.at(n)];
      return std::any_of(block.begin(), block.end(), [&](int id) {
        return ctx.sc.node(id).kind == NodeKind::SBS;
      });
    }();

    std::string sig = "M";
    sig += std::to_string(n);
    sig += cooperative ? 'c' : 'u';
    auto sit = on_channel.find(f);
    if (sit != on_channel.end()) {
      for (int k : sit->second) {
        sig += ';';
        sig += std::to_string(k);
        sig += ':';
        append_double(sig, power_per_channel.at(k));
        sig += ':';
        sig += gid.at({k, f});
      }
    }
    auto cached = mue_cache_.find(sig);
    if (cached != mue_cache_.end()) {
      det.rx[n] = cached->second.rx;
      det.payoffs[n] = cached->second.rx.rate;
      det.mue_alloc[n] = cached->second.alloc;
      continue;
    }

    const CMat& h = ctx.chan(0, n, f);
    const CMat& vn = ctx.mbs_precoder.at(n);

    CMat cov = CMat::Zero(ctx.cfg.b, ctx.cfg.b);  // antenna domain, Watts
    std::vector<rates::Interferer> interferers;
    if (sit != on_channel.end()) {
      for (int k : sit->second) {
        const CMat& hk = ctx.chan(k, n, f);
        const CMat& vk = v.at({k, f});
        const double p = power_per_channel.at(k);
        const int dk = ctx.streams_on_channel(k);
        const CMat eff = hk * vk;
        cov += (p / dk) * (eff * eff.adjoint());
        interferers.push_back({hk, vk, p, dk});
      }
    }

    const CMat g =
        linalg::CMat::Identity(ctx.cfg.b, ctx.cfg.b) -
        linalg::projector(
            interference_subspace(cov, noise, ctx.cfg.b - ctx.d_n));
    const CMat q = precoding::build_post_processor(h, vn, cov, ctx.d_n);
    const CMat icov = rates::interference_cov(interferers, q, noise);

    const auto& classical = ctx.mbs_classical.at(n);
    const auto conds =
        rates::stream_conditions(h, vn, g, classical, icov, noise);

    RxDetail rx;
    for (const auto& c : conds) rx.stream_sir.push_back(c.sir);

    rates::RateReport rep;
    if (cooperative) {
      const auto mod = power::modified_waterfill(
          conds, ctx.p_mbs_w, ctx.delta_lin, ctx.d_n, ctx.cfg.split_mode);
      rep = rates::rate_mue_cooperative(h, vn, q, g, mod.alloc, icov, noise);
      rx.released = static_cast<int>(mod.released.size());
      det.mue_alloc[n] = mod.alloc;
    } else {
      rep = rates::rate_mue(h, vn, q, g, classical, icov, noise);
      det.mue_alloc[n] = classical;
    }
    rx.rate = rep.rate;
    rx.dof_used = rep.dof_used;
    rx.interference_total = cov.trace().real();
    const linalg::Subspace desired = linalg::orthonormalize(h * vn);
    if (desired.dim() > 0) {
      rx.interference_in_desired =
          (desired.basis.adjoint() * cov * desired.basis).trace().real();
    }
    mue_cache_[sig] = MueEval{rx, det.mue_alloc[n]};
    det.rx[n] = std::move(rx);
    det.payoffs[n] = rep.rate;
  }

  // --- SUE phase.
  for (int k : ctx.sc.sbss) {
    const int sue = ctx.sc.sue_of(k);
    RxDetail rx;
    double rate = 0.0;
    int dof = 0;
    for (int f : active.at(k)) {
      std::string sig = "S";
      sig += std::to_string(k);
      sig += '@';
      sig += std::to_string(f);
      sig += ':';
      sig += gid.at({k, f});
      sig += ':';
      append_double(sig, power_per_channel.at(k));
      for (int j : on_channel.at(f)) {
        if (j == k) continue;
        sig += ';';
        sig += std::to_string(j);
        sig += ':';
        append_double(sig, power_per_channel.at(j));
        sig += ':';
        sig += gid.at({j, f});
      }
      {
        auto mit = ctx.mues_on.find(f);
        if (mit != ctx.mues_on.end()) {
          for (int n : mit->second) {
            const auto& alloc = det.mue_alloc.at(n);
            sig += ";n";
            sig += std::to_string(n);
            sig += ':';
            for (double p : alloc.powers) {
              append_double(sig, p);
              sig += ',';
            }
          }
        }
      }
      auto cached = sue_cache_.find(sig);
      if (cached != sue_cache_.end()) {
        rate += cached->second.rate;
        dof += cached->second.dof;
        rx.interference_total += cached->second.interference_total;
        rx.interference_in_desired += cached->second.interference_in_desired;
        continue;
      }

      const CMat& h = ctx.chan(k, sue, f);
      const CMat& vk = v.at({k, f});
      const int dk = ctx.streams_on_channel(k);

      std::vector<rates::Interferer> outside;
      CMat cov_rate = CMat::Zero(ctx.cfg.b, ctx.cfg.b);
      CMat cov_all = CMat::Zero(ctx.cfg.b, ctx.cfg.b);
      for (int j : on_channel.at(f)) {
        if (j == k) continue;
        const CMat& hj = ctx.chan(j, sue, f);
        const CMat& vj = v.at({j, f});
        const double p = power_per_channel.at(j);
        const int dj = ctx.streams_on_channel(j);
        const CMat eff = hj * vj;
        const CMat c = (p / dj) * (eff * eff.adjoint());
        cov_all += c;
        const bool same_coalition = block_of.at(j) == block_of.at(k) &&
                                    drained.at({k, f}) && drained.at({j, f});
        if (same_coalition) continue;  // drained within the coalition
        cov_rate += c;
        outside.push_back({hj, vj, p, dj});
      }
      std::vector<rates::Interferer> mbs;
      auto mit = ctx.mues_on.find(f);
      if (mit != ctx.mues_on.end()) {
        for (int n : mit->second) {
          const CMat& h0 = ctx.chan(0, sue, f);
          const auto& alloc = det.mue_alloc.at(n);
          int retained = 0;
          for (double p : alloc.powers) {
            if (p > 0.0) ++retained;
          }
          if (retained == 0) continue;
          const CMat& vn = ctx.mbs_precoder.at(n);
          const double p = alloc.total();
          const CMat eff = h0 * vn;
          cov_rate += (p / retained) * (eff * eff.adjoint());
          cov_all += (p / retained) * (eff * eff.adjoint());
          mbs.push_back({h0, vn, p, retained});
        }
      }

      const CMat g =
          linalg::CMat::Identity(ctx.cfg.b, ctx.cfg.b) -
          linalg::projector(
              interference_subspace(cov_rate, noise, ctx.cfg.b - dk));
      CMat q;
      if (drained.at({k, f}) && q_sol.count({k, f})) {
        q = q_sol.at({k, f});
      } else {
        q = precoding::build_post_processor(h, vk, cov_rate, dk);
      }
      const CMat icov_out = rates::interference_cov(outside, q, noise);
      const CMat icov_mbs = rates::interference_cov(mbs, q, noise);

      power::PowerAllocation alloc;
      alloc.budget = power_per_channel.at(k);
      alloc.powers.assign(dk, alloc.budget / dk);
      const auto rep = rates::rate_sue_cooperative(h, vk, q, g, alloc, icov_out,
                                                   icov_mbs, noise);
      SueChannelEval eval;
      eval.rate = rep.rate;
      eval.dof = rep.dof_used;
      eval.interference_total = cov_all.trace().real();
      // The desired-signal subspace at the receiver is the span the combiner
      // actually detects in (for a matched filter this coincides with the
      // received desired span).
      const linalg::Subspace desired = linalg::orthonormalize(q.adjoint());
      if (desired.dim() > 0) {
        eval.interference_in_desired =
            (desired.basis.adjoint() * cov_all * desired.basis).trace().real();
      }
      sue_cache_[sig] = eval;
      rate += eval.rate;
      dof += eval.dof;
      rx.interference_total += eval.interference_total;
      rx.interference_in_desired += eval.interference_in_desired;
    }
    rx.rate = rate;
    rx.dof_used = dof;
    det.rx[sue] = std::move(rx);
    det.payoffs[k] = rate;
  }

  return memo_.emplace(key, std::move(det)).first->second;
}

}  // namespace

std::unique_ptr<game::ValueFunction> make_value_function(
    std::shared_ptr<TrialContext> ctx) {
  return std::make_unique<NetworkValue>(std::move(ctx));
}

TrialResult run_trial(const ScenarioConfig& cfg, int trial_index) {
  auto ctx = make_trial_context(cfg, trial_index);
  NetworkValue vf(ctx);

  TrialResult res;
  res.trial = trial_index;
  if (cfg.strategy == Strategy::FrequencyReuse) {
    res.partition = game::singletons(vf.players());
  } else {
    const auto formation = game::form_coalitions(vf, cfg.max_rounds);
    res.partition = formation.partition;
    for (const auto& t : formation.trace) {
      if (t.committed) ++res.committed_moves;
    }
  }

  const Detail& det = vf.detail(res.partition);
  std::map<int, int> coalition_sbs_count;
  for (std::size_t bi = 0; bi < res.partition.size(); ++bi) {
    int count = 0;
    for (int id : res.partition[bi]) {
      if (ctx->sc.node(id).kind == NodeKind::SBS) ++count;
    }
    coalition_sbs_count[static_cast<int>(bi)] = count;
    if (count > 0) {
      ++res.coalition_count;
      res.avg_coalition_size += count;
    }
  }
  if (res.coalition_count > 0) res.avg_coalition_size /= res.coalition_count;

  std::map<int, int> block_of;
  for (std::size_t bi = 0; bi < res.partition.size(); ++bi) {
    for (int id : res.partition[bi]) block_of[id] = static_cast<int>(bi);
  }

  for (int n : ctx->sc.mues) {
    const auto& rx = det.rx.at(n);
    ReceiverRow row;
    row.node_id = n;
    row.is_sue = false;
    row.rate = rx.rate;
    row.dof_used = rx.dof_used;
    row.released = rx.released;
    row.interference_total = rx.interference_total;
    row.interference_in_desired_subspace = rx.interference_in_desired;
    res.rows.push_back(row);
  }
  for (int k : ctx->sc.sbss) {
    const auto& rx = det.rx.at(ctx->sc.sue_of(k));
    ReceiverRow row;
    row.node_id = ctx->sc.sue_of(k);
    row.is_sue = true;
    row.rate = rx.rate;
    row.dof_used = rx.dof_used;
    row.coalition_size = coalition_sbs_count.at(block_of.at(k));
    row.interference_total = rx.interference_total;
    row.interference_in_desired_subspace = rx.interference_in_desired;
    res.rows.push_back(row);
  }
  return res;
}

std::vector<TrialResult> run_trials(const ScenarioConfig& cfg, int workers) {
  std::vector<TrialResult> out(cfg.trials);
  if (workers <= 1) {
    // Serial reference loop.
    for (int t = 0; t < cfg.trials; ++t) out[t] = run_trial(cfg, t);
    return out;
  }
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(workers)
  for (int t = 0; t < cfg.trials; ++t) {
    out[t] = run_trial(cfg, t);
  }
#else
  for (int t = 0; t < cfg.trials; ++t) out[t] = run_trial(cfg, t);
#endif
  return out;
}

MetricsReport aggregate(const std::vector<TrialResult>& results) {
  if (results.empty()) throw std::invalid_argument("aggregate: no results");
  MetricsReport rep;
  double sue_sum = 0.0, mue_sum = 0.0;
  int sue_count = 0, mue_count = 0;
  double frac_sum = 0.0;
  int frac_count = 0;
  double size_sum = 0.0, count_sum = 0.0;
  int size_trials = 0;
  std::vector<double> sue_rates;

  for (const auto& tr : results) {
    for (const auto& row : tr.rows) {
      if (row.is_sue) {
        sue_sum += row.rate;
        ++sue_count;
        sue_rates.push_back(row.rate);
      } else {
        mue_sum += row.rate;
        ++mue_count;
      }
      if (row.interference_total > 0.0) {
        frac_sum += row.interference_in_desired_subspace / row.interference_total;
        ++frac_count;
      }
    }
    count_sum += tr.coalition_count;
    if (tr.coalition_count > 0) {
      size_sum += tr.avg_coalition_size;
      ++size_trials;
    }
  }
  rep.avg_payoff_sue = sue_count ? sue_sum / sue_count : 0.0;
  rep.avg_payoff_mue = mue_count ? mue_sum / mue_count : 0.0;
  rep.avg_coalition_size = size_trials ? size_sum / size_trials : 0.0;
  rep.avg_coalition_count = count_sum / results.size();
  rep.interference_in_desired_subspace_pct =
      frac_count ? 100.0 * frac_sum / frac_count : 0.0;

  std::sort(sue_rates.begin(), sue_rates.end());
  if (!sue_rates.empty()) {
    rep.se_cdf.resize(100);
    const std::size_t n = sue_rates.size();
    for (int i = 0; i < 100; ++i) {
      // i-th entry is the (i+1)/100 quantile.
      const auto idx = static_cast<std::size_t>(
          std::ceil((i + 1) / 100.0 * static_cast<double>(n))) - 1;
      rep.se_cdf[i] = sue_rates[std::min(n - 1, idx)];
    }
  }
  rep.raw = results;
  return rep;
}

}  // namespace drainsim::sim
