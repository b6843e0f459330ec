#include "drainsim/precoding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace drainsim::precoding {

using linalg::Subspace;

bool ia_feasible(int a_k, int own_streams, const std::vector<int>& mue_streams,
                 const std::vector<int>& peer_streams) {
  int required = own_streams;
  for (int d : mue_streams) required += d;
  for (int d : peer_streams) required += d;
  return a_k >= required;
}

namespace {

// Top-d right singular directions of the desired channel (matched precoder).
CMat matched_precoder(const CMat& desired, int streams) {
  Eigen::JacobiSVD<CMat> svd(desired, Eigen::ComputeThinV);
  return svd.matrixV().leftCols(streams);
}

// d smallest-eigenvalue directions of Hermitian PSD m. Within a null
// eigenspace wider than d, rotate toward the strongest directions of
// `prefer` (rows act on the chosen directions), which leaves the objective
// unchanged.
CMat least_eigvecs(const CMat& m, int d, const CMat& prefer) {
  const int n = static_cast<int>(m.rows());
  const double scale = m.norm();
  if (scale == 0.0) {
    Eigen::JacobiSVD<CMat> svd(prefer, Eigen::ComputeThinV);
    return svd.matrixV().leftCols(d);
  }
  Eigen::SelfAdjointEigenSolver<CMat> es(m);
  const auto& ev = es.eigenvalues();  // ascending
  const double tiny = 1e-12 * scale;
  int null_dim = 0;
  while (null_dim < n && ev(null_dim) <= tiny) ++null_dim;
  if (null_dim <= d) {
    return es.eigenvectors().leftCols(d);
  }
  const CMat nullspace = es.eigenvectors().leftCols(null_dim);
  Eigen::JacobiSVD<CMat> svd(prefer * nullspace, Eigen::ComputeThinV);
  return nullspace * svd.matrixV().leftCols(d);
}

struct Index {
  std::map<int, int> of;  // sbs id -> member slot
};

// Cross-tier protection acts on the MUE's received signal subspace: the
// effective channel to protect is U_n^H H_kn with U_n spanning H_0n V_n.
// This keeps the alignment dimension count at d_n per MUE, matching the
// antenna-count feasibility rule.
std::map<int, CMat> protected_channels(const MueConstraint& mu) {
  std::map<int, CMat> out;
  if (mu.signal.size() == 0 || mu.signal.norm() == 0.0) return out;
  const Subspace u = linalg::orthonormalize(mu.signal);
  for (const auto& [sbs, h] : mu.from) {
    out[sbs] = u.basis.adjoint() * h;
  }
  return out;
}

double objective(const DrainingProblem& p, const Index& idx, double lambda,
                 const std::vector<std::map<int, CMat>>& prot,
                 const std::vector<CMat>& v, const std::vector<CMat>& q) {
  double total = 0.0;
  for (const auto& c : p.cross) {
    const int to = idx.of.at(c.to_sbs);
    const int from = idx.of.at(c.from_sbs);
    total += (q[to] * c.h * v[from]).squaredNorm();
  }
  for (const auto& channels : prot) {
    for (const auto& [sbs, h] : channels) {
      total += lambda * (h * v[idx.of.at(sbs)]).squaredNorm();
    }
  }
  return total;
}

// Span residual with a magnitude guard: interference that has already been
// driven below the leakage threshold spans nothing.
double guarded_residual(const CMat& des, const CMat& inter) {
  if (inter.norm() <= kLeakEps * std::max(1.0, des.norm())) return 0.0;
  return linalg::orthogonality_residual(des, inter);
}

}  // namespace

CMat build_post_processor(const CMat& desired, const CMat& precoder,
                          const CMat& interference_cov, int streams,
                          bool* degenerate) {
  const int b = static_cast<int>(desired.rows());
  if (streams > b) {
    throw std::invalid_argument("build_post_processor: streams > antennas");
  }
  const CMat effective = desired * precoder;  // B x d
  CMat null_proj = CMat::Identity(b, b);
  if (interference_cov.size() > 0 && interference_cov.norm() > 0.0) {
    null_proj =
        linalg::null_projector(linalg::dominant_direction(interference_cov));
  }
  const CMat clean = null_proj * effective;
  const Subspace clean_span = linalg::orthonormalize(clean);
  if (degenerate != nullptr) *degenerate = clean_span.dim() < streams;

  // Prefer interference-free desired directions; fall back to the raw desired
  // directions, then to an arbitrary completion, to keep rank `streams`.
  CMat stack(b, clean.cols() + effective.cols() + b);
  stack << clean, effective, CMat::Identity(b, b);
  CMat basis(b, streams);
  int have = 0;
  CMat residual_proj = CMat::Identity(b, b);
  for (int c = 0; c < stack.cols() && have < streams; ++c) {
    Eigen::VectorXcd cand = residual_proj * stack.col(c);
    const double n = cand.norm();
    if (n < 1e-9) continue;
    cand /= n;
    basis.col(have++) = cand;
    residual_proj -= cand * cand.adjoint();
  }
  if (have < streams) {
    throw std::runtime_error("build_post_processor: rank completion failed");
  }
  return basis.adjoint();  // streams x B, orthonormal rows
}

namespace {

DrainingSolution run_alternating(const DrainingProblem& p, double lambda,
                                 int max_iters) {
  Index idx;
  const int m = static_cast<int>(p.members.size());
  for (int s = 0; s < m; ++s) {
    const auto& mem = p.members[s];
    if (mem.streams < 1 || mem.streams > mem.desired.cols()) {
      throw std::invalid_argument("solve_draining: bad stream count");
    }
    idx.of[mem.sbs] = s;
  }
  for (const auto& c : p.cross) {
    if (!idx.of.count(c.from_sbs) || !idx.of.count(c.to_sbs)) {
      throw std::invalid_argument(
          "solve_draining: cross link outside coalition");
    }
  }

  std::vector<std::map<int, CMat>> prot;
  prot.reserve(p.mues.size());
  for (const auto& mu : p.mues) prot.push_back(protected_channels(mu));

  // Sweep order: members causing the most interference first.
  std::vector<double> caused(m, 0.0);
  for (const auto& c : p.cross) {
    caused[idx.of.at(c.from_sbs)] += c.h.squaredNorm();
  }
  std::vector<int> order(m);
  for (int s = 0; s < m; ++s) order[s] = s;
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return caused[a] > caused[b]; });

  std::vector<CMat> v(m), q(m);
  for (int s = 0; s < m; ++s) {
    v[s] = matched_precoder(p.members[s].desired, p.members[s].streams);
  }
  auto update_q = [&](int s) {
    const auto& mem = p.members[s];
    const int b = static_cast<int>(mem.desired.rows());
    CMat cov = CMat::Zero(b, b);
    for (const auto& c : p.cross) {
      if (idx.of.at(c.to_sbs) != s) continue;
      const CMat eff = c.h * v[idx.of.at(c.from_sbs)];
      cov += eff * eff.adjoint();
    }
    q[s] = least_eigvecs(cov, mem.streams, (mem.desired * v[s]).adjoint())
               .adjoint();
  };
  for (int s = 0; s < m; ++s) update_q(s);

  DrainingSolution sol;
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it < max_iters; ++it) {
    for (int s : order) {
      const auto& mem = p.members[s];
      const int a = static_cast<int>(mem.desired.cols());
      CMat cov = CMat::Zero(a, a);
      for (const auto& c : p.cross) {
        if (idx.of.at(c.from_sbs) != s) continue;
        const CMat eff = q[idx.of.at(c.to_sbs)] * c.h;
        cov += eff.adjoint() * eff;
      }
      for (const auto& channels : prot) {
        auto it_h = channels.find(mem.sbs);
        if (it_h == channels.end()) continue;
        cov += lambda * it_h->second.adjoint() * it_h->second;
      }
      v[s] = least_eigvecs(cov, mem.streams, mem.desired);
    }
    for (int s : order) update_q(s);

    const double obj = objective(p, idx, lambda, prot, v, q);
    sol.leakage_trace.push_back(obj);
    sol.sweeps = it + 1;
    // Sweep-to-sweep improvement threshold, made relative when the channel
    // norms put the objective far below unit scale.
    const double scale = sol.leakage_trace.front();
    const bool converged = prev - obj < 1e-8 * std::max(1.0, scale);
    prev = obj;
    if (converged) break;
  }

  for (int s = 0; s < m; ++s) {
    sol.precoders[p.members[s].sbs] = v[s];
    sol.post_processors[p.members[s].sbs] = q[s];
  }
  sol.leakage = sol.leakage_trace.empty() ? 0.0 : sol.leakage_trace.back();

  for (const auto& c : p.cross) {
    const int to = idx.of.at(c.to_sbs);
    const auto& mem = p.members[to];
    const CMat des = q[to] * mem.desired * v[to];
    const CMat inter = q[to] * c.h * v[idx.of.at(c.from_sbs)];
    sol.pair_residuals.push_back(guarded_residual(des, inter));
  }
  for (const auto& mu : p.mues) {
    double min_sir = std::numeric_limits<double>::infinity();
    const double sig = mu.signal.norm();
    for (const auto& [sbs, h] : mu.from) {
      const double leak = (h * v[idx.of.at(sbs)]).norm();
      const double sir = leak > 0.0
                             ? (sig / leak) * (sig / leak)
                             : std::numeric_limits<double>::infinity();
      min_sir = std::min(min_sir, sir);
    }
    sol.mue_sir.push_back(min_sir);
  }

  auto [co_ok, cross_ok] = check_draining(sol, p);
  sol.feasible = co_ok && cross_ok;
  return sol;
}

}  // namespace

DrainingSolution solve_draining(const DrainingProblem& p, int max_iters) {
  if (max_iters < 1) throw std::invalid_argument("solve_draining: max_iters");
  if (p.members.empty()) throw std::invalid_argument("solve_draining: empty");

  // Adaptive cross-tier weight: drain co-tier interference alone first, and
  // only when the macrocell margin fails re-solve with the weighted penalty.
  DrainingSolution sol = run_alternating(p, 0.0, max_iters);
  if (p.mues.empty() || check_draining(sol, p).second) return sol;
  return run_alternating(p, p.lambda, max_iters);
}

std::pair<bool, bool> check_draining(const DrainingSolution& sol,
                                     const DrainingProblem& p) {
  Index idx;
  for (int s = 0; s < static_cast<int>(p.members.size()); ++s) {
    idx.of[p.members[s].sbs] = s;
  }
  bool co_ok = true;
  for (const auto& c : p.cross) {
    const auto& mem = p.members[idx.of.at(c.to_sbs)];
    const CMat& qt = sol.post_processors.at(c.to_sbs);
    const CMat des = qt * mem.desired * sol.precoders.at(c.to_sbs);
    const CMat inter = qt * c.h * sol.precoders.at(c.from_sbs);
    if (guarded_residual(des, inter) > kLeakEps) {
      co_ok = false;
      break;
    }
  }
  bool cross_ok = true;
  const double amp_target = std::sqrt(p.delta);
  for (const auto& mu : p.mues) {
    const double sig = mu.signal.norm();
    for (const auto& [sbs, h] : mu.from) {
      const double leak = (h * sol.precoders.at(sbs)).norm();
      if (leak == 0.0) continue;  // exact alignment
      if (sig / leak < amp_target) {
        cross_ok = false;
        break;
      }
    }
    if (!cross_ok) break;
  }
  return {co_ok, cross_ok};
}

}  // namespace drainsim::precoding
