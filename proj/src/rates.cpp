#include "drainsim/rates.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace drainsim::rates {

CMat interference_cov(const std::vector<Interferer>& interferers, const CMat& q,
                      double noise) {
  const int d = static_cast<int>(q.rows());
  CMat cov = CMat::Zero(d, d);
  for (const auto& in : interferers) {
    if (in.streams < 1) throw std::invalid_argument("interference_cov: streams");
    const CMat eff = q * in.h * in.v;  // d x d_k
    cov += (in.power / (in.streams * noise)) * (eff * eff.adjoint());
  }
  return cov;
}

namespace {

// Diagonal of the (pseudo-)inverse of the effective Gram V^H H^H G H V, with
// degenerate streams flagged. A stream is degenerate when the Gram rank is
// deficient and its diagonal entry is among the weakest.
struct GramInverse {
  std::vector<double> inv_diag;
  std::vector<bool> dead;
};

GramInverse gram_inverse(const CMat& h, const CMat& v, const CMat& g) {
  const CMat eff = g * h * v;            // B x d
  const CMat gram = eff.adjoint() * eff;  // d x d, Hermitian PSD
  const int d = static_cast<int>(gram.rows());

  Eigen::SelfAdjointEigenSolver<CMat> es(gram);
  const auto& ev = es.eigenvalues();
  const double lmax = ev(d - 1);
  GramInverse out;
  out.dead.assign(d, false);
  out.inv_diag.assign(d, 0.0);
  if (lmax <= 0.0) {
    out.dead.assign(d, true);
    return out;
  }
  const double thresh = lmax * linalg::kRankTol;
  int rank = 0;
  for (int i = 0; i < d; ++i) {
    if (ev(i) > thresh) ++rank;
  }
  if (rank < d) {
    // Mark the weakest-diagonal streams dead, one per missing rank.
    std::vector<int> order(d);
    for (int i = 0; i < d; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return gram(a, a).real() < gram(b, b).real();
    });
    for (int i = 0; i < d - rank; ++i) out.dead[order[i]] = true;
  }
  CMat pinv = CMat::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    if (ev(i) > thresh) {
      pinv += es.eigenvectors().col(i) * es.eigenvectors().col(i).adjoint() /
              ev(i);
    }
  }
  for (int i = 0; i < d; ++i) out.inv_diag[i] = pinv(i, i).real();
  return out;
}

}  // namespace

RateReport rate_link(const CMat& h, const CMat& v, const CMat& /*q*/,
                     const CMat& g, const power::PowerAllocation& alloc,
                     const CMat& icov, double noise, int divisor) {
  const int d = static_cast<int>(v.cols());
  if (static_cast<int>(alloc.powers.size()) != d) {
    throw std::invalid_argument("rate_link: allocation length mismatch");
  }
  if (icov.rows() != d || icov.cols() != d) {
    throw std::invalid_argument("rate_link: covariance dimension mismatch");
  }
  if (divisor < 1) throw std::invalid_argument("rate_link: divisor");

  const GramInverse gi = gram_inverse(h, v, g);
  RateReport rep;
  rep.per_stream.assign(d, 0.0);
  for (int s = 0; s < d; ++s) {
    const double p = alloc.powers[s];
    if (p <= 0.0) continue;
    ++rep.dof_used;
    if (gi.dead[s]) continue;
    const double gamma = p / noise;
    const double denom = gi.inv_diag[s] + icov(s, s).real();
    if (denom <= 0.0) continue;
    rep.per_stream[s] = std::log2(1.0 + (gamma / divisor) / denom);
  }
  for (double r : rep.per_stream) rep.rate += r;
  return rep;
}

RateReport rate_mue(const CMat& h, const CMat& v, const CMat& q, const CMat& g,
                    const power::PowerAllocation& alloc, const CMat& icov,
                    double noise) {
  return rate_link(h, v, q, g, alloc, icov, noise,
                   static_cast<int>(alloc.powers.size()));
}

RateReport rate_sue(const CMat& h, const CMat& v, const CMat& q, const CMat& g,
                    const power::PowerAllocation& alloc, const CMat& icov_sbs,
                    const CMat& icov_mbs, double noise) {
  return rate_link(h, v, q, g, alloc, icov_sbs + icov_mbs, noise,
                   static_cast<int>(alloc.powers.size()));
}

RateReport rate_sue_cooperative(const CMat& h, const CMat& v, const CMat& q,
                                const CMat& g,
                                const power::PowerAllocation& alloc,
                                const CMat& icov_outside, const CMat& icov_mbs,
                                double noise) {
  return rate_sue(h, v, q, g, alloc, icov_outside, icov_mbs, noise);
}

RateReport rate_mue_cooperative(const CMat& h, const CMat& v, const CMat& q,
                                const CMat& g,
                                const power::PowerAllocation& modified_alloc,
                                const CMat& icov, double noise) {
  int retained = 0;
  for (double p : modified_alloc.powers) {
    if (p > 0.0) ++retained;
  }
  if (retained == 0) retained = static_cast<int>(modified_alloc.powers.size());
  return rate_link(h, v, q, g, modified_alloc, icov, noise, retained);
}

std::vector<power::StreamCondition> stream_conditions(
    const CMat& h, const CMat& v, const CMat& g,
    const power::PowerAllocation& alloc, const CMat& icov, double noise) {
  const int d = static_cast<int>(v.cols());
  const GramInverse gi = gram_inverse(h, v, g);
  std::vector<power::StreamCondition> conds(d);
  for (int s = 0; s < d; ++s) {
    auto& c = conds[s];
    c.stream = s;
    if (gi.dead[s] || gi.inv_diag[s] <= 0.0) {
      c.gain = 0.0;
      c.interference_plus_noise = noise;
      c.sir = 0.0;
      continue;
    }
    c.gain = 1.0 / gi.inv_diag[s];
    const double i_dd = icov(s, s).real();  // noise-normalized
    c.interference_plus_noise = noise * (1.0 + c.gain * i_dd);
    const double p = alloc.powers[s];
    const double signal = (p / d) * c.gain;
    c.sir = i_dd > 0.0 ? signal / (noise * i_dd) : 1e18;
  }
  return conds;
}

}  // namespace drainsim::rates
