#pragma once

#include <random>
#include <vector>

#include "oddstop/odds_core.hpp"

namespace oddstop::testing {

// The seven-patient worked example, in treatment order.
inline const std::vector<double> kExampleProbs = {0.35, 0.10, 0.05, 0.30, 0.10, 0.15, 0.25};

// Patients 1 and 4 exchanged.
inline const std::vector<double> kExampleSwapped = {0.30, 0.10, 0.05, 0.35, 0.10, 0.15, 0.25};

// Random profile with n in [1, n_max] and p uniform in [p_lo, p_hi].
inline OddsProfile<double> random_profile(std::mt19937_64& engine, int n_max, double p_lo = 0.01,
                                          double p_hi = 0.9) {
  std::uniform_int_distribution<int> size(1, n_max);
  std::uniform_real_distribution<double> prob(p_lo, p_hi);
  Column<double> p(size(engine));
  for (auto& x : p) x = prob(engine);
  return OddsProfile<double>(std::move(p));
}

}  // namespace oddstop::testing
