#include "drainsim/power.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace drainsim::power {

double PowerAllocation::total() const {
  return std::accumulate(powers.begin(), powers.end(), 0.0);
}

std::vector<int> PowerAllocation::active() const {
  std::vector<int> idx;
  for (int d = 0; d < static_cast<int>(powers.size()); ++d) {
    if (powers[d] > 0.0) idx.push_back(d);
  }
  return idx;
}

PowerAllocation waterfill(const std::vector<double>& gains, double noise,
                          double budget) {
  if (gains.empty()) throw std::invalid_argument("waterfill: no streams");
  if (budget <= 0.0) throw std::invalid_argument("waterfill: budget <= 0");

  const int n = static_cast<int>(gains.size());
  PowerAllocation out;
  out.powers.assign(n, 0.0);
  out.budget = budget;

  // Inverse gains (water floor levels), positive-gain streams only.
  std::vector<int> order;
  for (int d = 0; d < n; ++d) {
    if (gains[d] < 0.0) throw std::invalid_argument("waterfill: negative gain");
    if (gains[d] > 0.0) order.push_back(d);
  }
  if (order.empty()) {
    out.possible = false;
    return out;
  }
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return noise / gains[a] < noise / gains[b];
  });

  // Largest active set whose common water level clears every floor in it.
  int k = static_cast<int>(order.size());
  double mu = 0.0;
  double floor_sum = 0.0;
  for (int d : order) floor_sum += noise / gains[d];
  while (k > 0) {
    mu = (budget + floor_sum) / k;
    if (mu > noise / gains[order[k - 1]]) break;
    floor_sum -= noise / gains[order[k - 1]];
    --k;
  }
  for (int j = 0; j < k; ++j) {
    const int d = order[j];
    out.powers[d] = mu - noise / gains[d];
  }
  return out;
}

double stream_rate(const std::vector<StreamCondition>& conds,
                   const std::vector<double>& powers, int d_divisor) {
  if (d_divisor < 1) throw std::invalid_argument("stream_rate: bad divisor");
  double rate = 0.0;
  for (std::size_t d = 0; d < conds.size(); ++d) {
    const auto& c = conds[d];
    if (powers[d] <= 0.0 || c.gain <= 0.0) continue;
    rate += std::log2(1.0 + (powers[d] / d_divisor) * c.gain /
                                c.interference_plus_noise);
  }
  return rate;
}

namespace {

// Best allocation over the retained subset; returns (powers over conds
// indexing, rate). Retained count is the Eq.-8 style power derating divisor.
std::pair<std::vector<double>, double> allocate_subset(
    const std::vector<StreamCondition>& conds, const std::vector<int>& retained,
    double budget, SplitMode mode) {
  const int m = static_cast<int>(retained.size());
  std::vector<double> powers(conds.size(), 0.0);
  if (m == 0) return {powers, 0.0};
  if (mode == SplitMode::Uniform) {
    for (int d : retained) powers[d] = budget / m;
  } else {
    std::vector<double> eff(m);
    for (int j = 0; j < m; ++j) {
      const auto& c = conds[retained[j]];
      eff[j] = c.interference_plus_noise > 0.0
                   ? c.gain / c.interference_plus_noise
                   : 0.0;
    }
    PowerAllocation sub = waterfill(eff, 1.0, budget / m);
    if (!sub.possible) {
      for (int d : retained) powers[d] = budget / m;
    } else {
      for (int j = 0; j < m; ++j) powers[retained[j]] = m * sub.powers[j];
    }
  }
  return {powers, stream_rate(conds, powers, m)};
}

}  // namespace

ModifiedResult modified_waterfill(const std::vector<StreamCondition>& conds,
                                  double budget, double delta, int d_n,
                                  SplitMode mode) {
  if (conds.empty()) throw std::invalid_argument("modified_waterfill: empty");
  if (delta <= 0.0) throw std::invalid_argument("modified_waterfill: delta");

  std::vector<int> retained(conds.size());
  std::iota(retained.begin(), retained.end(), 0);

  ModifiedResult res;
  auto [base_powers, base_rate] = allocate_subset(conds, retained, budget, mode);
  res.baseline_rate = base_rate;

  // Release candidates: below the per-stream average threshold delta/d_n,
  // worst SIR first.
  const double threshold = delta / d_n;
  std::vector<int> candidates;
  for (int d = 0; d < static_cast<int>(conds.size()); ++d) {
    if (conds[d].sir < threshold) candidates.push_back(d);
  }
  std::sort(candidates.begin(), candidates.end(),
            [&](int a, int b) { return conds[a].sir < conds[b].sir; });

  std::vector<double> best_powers = base_powers;
  double best_rate = base_rate;
  for (int d : candidates) {
    if (retained.size() <= 1) break;
    std::vector<int> trial = retained;
    trial.erase(std::find(trial.begin(), trial.end(), d));
    auto [powers, rate] = allocate_subset(conds, trial, budget, mode);
    if (rate > best_rate) {
      retained = std::move(trial);
      best_powers = std::move(powers);
      best_rate = rate;
      res.released.push_back(d);
    } else {
      break;  // greedy: stop at first non-improvement
    }
  }
  std::sort(res.released.begin(), res.released.end());

  res.alloc.powers = std::move(best_powers);
  res.alloc.budget = budget;
  res.rate = best_rate;
  return res;
}

}  // namespace drainsim::power
