#include "dadp/sim/instances.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace dadp::sim {

namespace {

double log_uniform(std::mt19937_64& rng, std::pair<double, double> range) {
  std::uniform_real_distribution<double> u(std::log(range.first), std::log(range.second));
  return std::exp(u(rng));
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

ThermalEnvelope random_envelope(std::mt19937_64& rng) {
  ThermalEnvelope env;
  env.resistance = uniform(rng, 1.5, 4.0);  // degC per MW
  env.capacity = uniform(rng, 1.0, 4.0);    // MWh per degC
  env.t_in_min = uniform(rng, 17.0, 19.0);
  env.t_in_max = env.t_in_min + uniform(rng, 3.0, 6.0);
  env.t_in_current = uniform(rng, env.t_in_min, env.t_in_max);
  env.t_out = uniform(rng, -10.0, 5.0);
  env.dt = 1.0;
  return env;
}

}  // namespace

Scenario random_scenario(std::uint64_t seed, const InstanceRanges& r, MarketKind kind) {
  std::mt19937_64 rng(seed);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    Scenario sc;
    sc.market_kind = kind;
    sc.scene_id = "seed-" + std::to_string(seed);
    const int las = std::uniform_int_distribution<int>(r.min_las, r.max_las)(rng);
    const int esps = std::uniform_int_distribution<int>(r.min_esps, r.max_esps)(rng);
    for (int i = 0; i < las; ++i) {
      LoadAggregator la;
      la.id = "LA" + std::to_string(i + 1);
      la.alpha = log_uniform(rng, r.alpha);
      la.beta = log_uniform(rng, r.beta);
      if (kind == MarketKind::heat) la.thermal = random_envelope(rng);
      sc.las.push_back(std::move(la));
    }
    for (int j = 0; j < esps; ++j) {
      EnergyServiceProvider esp;
      esp.id = "ESP" + std::to_string(j + 1);
      esp.m = log_uniform(rng, r.m);
      esp.n = log_uniform(rng, r.n);
      esp.s_max = log_uniform(rng, r.s_max);
      sc.esps.push_back(esp);
    }
    try {
      validate_scenario(sc);
    } catch (const ValidationError&) {
      continue;
    }
    if (total_demand_floor(sc) < total_supply_cap(sc)) return sc;
  }
  throw InfeasibleScenarioError("no feasible instance for seed " + std::to_string(seed));
}

Scenario symmetric_scenario(std::size_t las, std::size_t esps, double alpha, double beta,
                            double m, double n, double s_max) {
  Scenario sc;
  sc.scene_id = "symmetric";
  for (std::size_t i = 0; i < las; ++i) {
    sc.las.push_back({"LA" + std::to_string(i + 1), alpha, beta, 0.0, std::nullopt});
  }
  for (std::size_t j = 0; j < esps; ++j) {
    sc.esps.push_back({"ESP" + std::to_string(j + 1), m, n, s_max});
  }
  return sc;
}

double alpha_spread(const Scenario& sc) {
  const auto [lo, hi] = std::minmax_element(
      sc.las.begin(), sc.las.end(),
      [](const LoadAggregator& a, const LoadAggregator& b) { return a.alpha < b.alpha; });
  return hi->alpha / lo->alpha;
}

}  // namespace dadp::sim
