#pragma once

#include <map>
#include <vector>

#include "drainsim/linalg.hpp"

namespace drainsim::precoding {

using linalg::CMat;

/// Absolute leakage threshold on orthogonality residuals.
inline constexpr double kLeakEps = 1e-6;

/// Default cross-tier leakage weight in the alternating minimization.
inline constexpr double kDefaultLambda = 10.0;

/// One coalition member: its desired channel (at its served SUE) and stream
/// count.
struct MemberLink {
  int sbs = 0;
  CMat desired;  // B x A_k, SBS -> own SUE
  int streams = 1;
};

/// Intra-coalition interference channel: from_sbs into the SUE served by
/// to_sbs.
struct CrossLink {
  int from_sbs = 0;
  int to_sbs = 0;
  CMat h;  // B x A_from
};

/// A macrocell user the coalition must protect.
struct MueConstraint {
  int mue = 0;
  std::map<int, CMat> from;  // sbs -> B x A_k channel into this MUE
  CMat signal;               // H_0n * V_n, the MUE's effective desired matrix
};

struct DrainingProblem {
  std::vector<MemberLink> members;
  std::vector<CrossLink> cross;
  std::vector<MueConstraint> mues;
  double delta = 0.0;  // linear SIR target at each protected MUE
  double lambda = kDefaultLambda;
};

struct DrainingSolution {
  std::map<int, CMat> precoders;        // sbs -> A_k x d_k, orthonormal columns
  std::map<int, CMat> post_processors;  // sbs -> d_k x B, orthonormal rows
  std::vector<double> pair_residuals;   // per intra-coalition ordered pair
  std::vector<double> mue_sir;          // per (MUE, member) pair, linear
  double leakage = 0.0;                 // final objective value
  std::vector<double> leakage_trace;    // per sweep, non-increasing
  int sweeps = 0;
  bool feasible = false;
};

/// Antenna-count feasibility of exact alignment:
/// A_k >= sum(mue_streams) + sum(peer_streams) + own_streams.
bool ia_feasible(int a_k, int own_streams, const std::vector<int>& mue_streams,
                 const std::vector<int>& peer_streams);

/// Alternating leakage minimization over the coalition. Precoder steps take
/// the least-significant eigenvectors of the weighted interference covariance;
/// post-processor steps take the least-interfered receive subspace. The
/// objective is non-increasing across sweeps.
DrainingSolution solve_draining(const DrainingProblem& p, int max_iters = 500);

/// (co_tier_ok, cross_tier_ok) per the draining conditions: pairwise
/// orthogonality residuals below kLeakEps, and desired/interference
/// Frobenius-norm ratio of at least sqrt(delta) at each protected MUE.
std::pair<bool, bool> check_draining(const DrainingSolution& sol,
                                     const DrainingProblem& p);

/// Receive filter: rows spanning the best `streams`-dimensional subspace for
/// desired*precoder after projecting out the dominant interference
/// directions. Sets *degenerate when the desired signal is swallowed by the
/// interference subspace.
CMat build_post_processor(const CMat& desired, const CMat& precoder,
                          const CMat& interference_cov, int streams,
                          bool* degenerate = nullptr);

}  // namespace drainsim::precoding
