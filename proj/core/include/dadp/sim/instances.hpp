#pragma once

#include <cstdint>
#include <utility>

#include "dadp/market_model.hpp"

namespace dadp::sim {

/// Ranges for random instances; coefficients are drawn log-uniformly.
struct InstanceRanges {
  int min_las{2};
  int max_las{6};
  int min_esps{3};
  int max_esps{6};
  std::pair<double, double> alpha{20.0, 100.0};
  std::pair<double, double> beta{0.05, 0.5};
  std::pair<double, double> m{0.05, 0.5};
  std::pair<double, double> n{1.0, 10.0};
  std::pair<double, double> s_max{20.0, 200.0};
};

/// Valid, feasible instance determined entirely by `seed`. Heat instances
/// get random thermal envelopes; draws are repeated until the floors fit.
Scenario random_scenario(std::uint64_t seed, const InstanceRanges& ranges = {},
                         MarketKind kind = MarketKind::power);

/// I identical LAs and J identical ESPs.
Scenario symmetric_scenario(std::size_t las, std::size_t esps, double alpha, double beta,
                            double m, double n, double s_max);

/// max(alpha) / min(alpha).
double alpha_spread(const Scenario& scenario);

}  // namespace dadp::sim
