#pragma once

#include <vector>

#include "drainsim/linalg.hpp"
#include "drainsim/power.hpp"

namespace drainsim::rates {

using linalg::CMat;

struct RateReport {
  double rate = 0.0;  // bits/s/Hz, sum over streams
  std::vector<double> per_stream;
  int dof_used = 0;
};

/// One co-channel interfering transmitter as seen by a receiver.
struct Interferer {
  CMat h;            // B x A channel into the receiver
  CMat v;            // A x d precoder
  double power = 0.0;  // total transmit power, Watts
  int streams = 1;
};

/// Post-processed interference covariance, noise-normalized (gamma form):
/// sum_k (P_k / (d_k sigma^2)) * Q H_k V_k V_k^H H_k^H Q^H.
CMat interference_cov(const std::vector<Interferer>& interferers, const CMat& q,
                      double noise);

/// Parallel-stream rate: per stream d,
/// log2(1 + (gamma_d / divisor) / [e_d ((V^H H^H G H V)^-1 + icov) e_d^H]),
/// gamma_d = P_d / noise. Singular effective Grams are handled by
/// pseudo-inverse with a rank guard: degenerate streams get zero rate.
RateReport rate_link(const CMat& h, const CMat& v, const CMat& q, const CMat& g,
                     const power::PowerAllocation& alloc, const CMat& icov,
                     double noise, int divisor);

/// Macrocell user rate (classical water-filled powers, SBS interference).
RateReport rate_mue(const CMat& h, const CMat& v, const CMat& q, const CMat& g,
                    const power::PowerAllocation& alloc, const CMat& icov,
                    double noise);

/// Small-cell user rate: SBS plus MBS interference covariances.
RateReport rate_sue(const CMat& h, const CMat& v, const CMat& q, const CMat& g,
                    const power::PowerAllocation& alloc, const CMat& icov_sbs,
                    const CMat& icov_mbs, double noise);

/// Cooperative SUE rate: intra-coalition interference already drained, only
/// outside-coalition SBSs and the MBS remain.
RateReport rate_sue_cooperative(const CMat& h, const CMat& v, const CMat& q,
                                const CMat& g,
                                const power::PowerAllocation& alloc,
                                const CMat& icov_outside, const CMat& icov_mbs,
                                double noise);

/// MUE rate under modified water-filling: evaluated over the retained
/// streams only, with power derated by the retained count.
RateReport rate_mue_cooperative(const CMat& h, const CMat& v, const CMat& q,
                                const CMat& g,
                                const power::PowerAllocation& modified_alloc,
                                const CMat& icov, double noise);

/// Per-stream scalar conditions feeding the modified water-filling decision.
std::vector<power::StreamCondition> stream_conditions(
    const CMat& h, const CMat& v, const CMat& g,
    const power::PowerAllocation& alloc, const CMat& icov, double noise);

}  // namespace drainsim::rates
