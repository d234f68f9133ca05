#include "dadp/market_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <string>

namespace dadp {

const char* to_string(MarketKind kind) noexcept {
  return kind == MarketKind::heat ? "heat" : "power";
}

double value(const LoadAggregator& la, double d) {
  if (d < 0.0) throw DomainError("value: negative demand " + std::to_string(d));
  return la.alpha * d - la.beta * d * d;
}

double marginal_value(const LoadAggregator& la, double d) noexcept {
  return la.alpha - 2.0 * la.beta * d;
}

double cost(const EnergyServiceProvider& esp, double s) noexcept {
  return s > 0.0 ? esp.m * s * s + esp.n * s : 0.0;
}

double marginal_cost(const EnergyServiceProvider& esp, double s) noexcept {
  return s > 0.0 ? 2.0 * esp.m * s + esp.n : esp.n;
}

double modified_value(const LoadAggregator& la, double d, double weight, double total_supply) {
  if (weight <= 0.0) throw DomainError("modified_value: weight must be positive");
  if (total_supply <= 0.0) throw DomainError("modified_value: total supply must be positive");
  const double a = la.alpha;
  const double b = la.beta;
  const double d2 = d * d;
  return (a * d - b * d2 - a * d2 / (2.0 * total_supply) + (2.0 * b / 3.0) * d2 * d / total_supply) /
         weight;
}

double modified_marginal_value(const LoadAggregator& la, double d, double weight,
                               double total_supply) noexcept {
  return marginal_value(la, d) * (1.0 - d / total_supply) / weight;
}

namespace {

double cost_coupling(double total_demand, std::size_t esp_count) {
  if (esp_count <= 2) throw DomainError("supply mechanism requires more than two ESPs");
  if (total_demand <= 0.0) throw DomainError("total demand must be positive");
  return static_cast<double>(esp_count - 2) * total_demand;
}

}  // namespace

double modified_cost(const EnergyServiceProvider& esp, double s, double weight, double total_demand,
                     std::size_t esp_count) {
  if (weight <= 0.0) throw DomainError("modified_cost: weight must be positive");
  const double k = cost_coupling(total_demand, esp_count);
  if (s <= 0.0) return 0.0;
  const double s2 = s * s;
  return (esp.m * s2 + esp.n * s + (2.0 * esp.m / 3.0) * s2 * s / k + esp.n * s2 / (2.0 * k)) /
         weight;
}

double modified_marginal_cost(const EnergyServiceProvider& esp, double s, double weight,
                              double total_demand, std::size_t esp_count) noexcept {
  const double k = static_cast<double>(esp_count - 2) * total_demand;
  return marginal_cost(esp, s) * (1.0 + s / k) / weight;
}

HeatBounds heat_demand_bounds(const ThermalEnvelope& env) {
  const double decay = std::exp(-env.dt / env.time_constant());
  const auto power_for = [&](double t_next) {
    return ((t_next - env.t_in_current * decay) / (1.0 - decay) - env.t_out) / env.resistance;
  };
  return {power_for(env.t_in_min), power_for(env.t_in_max)};
}

double demand_floor(const LoadAggregator& la, MarketKind kind) {
  if (kind == MarketKind::heat && la.thermal) {
    const auto bounds = heat_demand_bounds(*la.thermal);
    return std::max({la.d_min, bounds.p_min * la.thermal->dt, 0.0});
  }
  return la.d_min;
}

double demand_cap(const LoadAggregator& la, MarketKind kind) {
  // Past alpha / (2 beta) marginal value turns negative.
  const double satiation = la.alpha / (2.0 * la.beta);
  if (kind == MarketKind::heat && la.thermal) {
    return std::min(satiation, heat_demand_bounds(*la.thermal).p_max * la.thermal->dt);
  }
  return satiation;
}

std::vector<double> demand_allocation(std::span<const double> bids, double total_supply) {
  if (total_supply <= 0.0) throw DomainError("demand_allocation: total supply must be positive");
  double sum = 0.0;
  for (double b : bids) {
    if (b < 0.0) throw DomainError("demand_allocation: negative bid");
    sum += b;
  }
  if (sum <= 0.0) throw DegenerateMarketError("demand_allocation: every bid is zero");
  std::vector<double> out;
  out.reserve(bids.size());
  for (double b : bids) out.push_back(b / sum * total_supply);
  return out;
}

SupplyAllocation supply_allocation(std::span<const double> offers, double total_demand) {
  const std::size_t j_count = offers.size();
  if (j_count <= 2) throw DomainError("supply_allocation: requires more than two ESPs");
  if (total_demand <= 0.0) throw DomainError("supply_allocation: total demand must be positive");
  double sum = 0.0;
  for (double a : offers) {
    if (!(a > 0.0)) throw InvalidOfferError("supply_allocation: offers must be positive");
    sum += a;
  }
  const double jm1 = static_cast<double>(j_count - 1);
  SupplyAllocation out;
  out.price = sum / (jm1 * total_demand);
  out.supplies.reserve(j_count);
  for (double a : offers) out.supplies.push_back(total_demand - a / sum * jm1 * total_demand);

  // Affine in a_j, so a large offer can go negative off-equilibrium.
  if (std::any_of(out.supplies.begin(), out.supplies.end(), [](double s) { return s < 0.0; })) {
    out.clamped = true;
    double positive = 0.0;
    for (double& s : out.supplies) {
      s = std::max(s, 0.0);
      positive += s;
    }
    for (double& s : out.supplies) s *= total_demand / positive;
  }
  return out;
}

void validate_scenario(const Scenario& sc) {
  if (sc.las.size() < 2) {
    throw ValidationError("I > 1", "scenario needs at least two LAs, got " +
                                       std::to_string(sc.las.size()));
  }
  if (sc.esps.size() < 3) {
    throw ValidationError("J > 2", "the market needs more than two ESPs, got " +
                                       std::to_string(sc.esps.size()));
  }
  validate_players(sc);
}

void validate_players(const Scenario& sc) {
  if (sc.las.empty() || sc.esps.empty()) {
    throw ValidationError("I >= 1, J >= 1", "scenario needs at least one LA and one ESP");
  }
  std::set<std::string> ids;
  for (const auto& la : sc.las) {
    if (la.id.empty() || !ids.insert("la:" + la.id).second) {
      throw ValidationError("unique ids", "LA id '" + la.id + "' is empty or repeated");
    }
  }
  for (const auto& esp : sc.esps) {
    if (esp.id.empty() || !ids.insert("esp:" + esp.id).second) {
      throw ValidationError("unique ids", "ESP id '" + esp.id + "' is empty or repeated");
    }
  }
  for (const auto& la : sc.las) {
    const std::string who = "LA '" + la.id + "': ";
    if (!(la.alpha > 0.0)) throw ValidationError("alpha > 0", who + "alpha must be positive");
    if (!(la.beta > 0.0)) throw ValidationError("beta > 0", who + "beta must be positive");
    if (la.d_min < 0.0) throw ValidationError("d_min >= 0", who + "d_min must be nonnegative");
    if (sc.market_kind == MarketKind::heat) {
      if (!la.thermal) {
        throw ValidationError("thermal envelope", who + "heat market LA has no thermal envelope");
      }
      const auto& env = *la.thermal;
      if (!(env.resistance > 0.0) || !(env.capacity > 0.0) || !(env.dt > 0.0)) {
        throw ValidationError("R, C, dt > 0", who + "thermal R, C and dt must be positive");
      }
      if (!(env.t_in_min <= env.t_in_current && env.t_in_current <= env.t_in_max)) {
        throw ValidationError("T_in_min <= T_in_current <= T_in_max",
                              who + "indoor temperature outside its comfort band");
      }
      if (heat_demand_bounds(env).p_max * env.dt <= demand_floor(la, sc.market_kind)) {
        throw ValidationError("P_max > P_min", who + "empty heat demand range");
      }
    }
    const double satiation = la.alpha / (2.0 * la.beta);
    if (demand_floor(la, sc.market_kind) > satiation) {
      throw ValidationError("d <= alpha/(2 beta)",
                            who + "demand floor exceeds the point of zero marginal value");
    }
  }
  for (const auto& esp : sc.esps) {
    const std::string who = "ESP '" + esp.id + "': ";
    if (!(esp.m > 0.0)) throw ValidationError("m > 0", who + "m must be positive");
    if (esp.n < 0.0) throw ValidationError("n >= 0", who + "n must be nonnegative");
    if (!(esp.s_max > 0.0)) throw ValidationError("s_max > 0", who + "s_max must be positive");
  }
}

double total_demand_floor(const Scenario& sc) {
  double sum = 0.0;
  for (const auto& la : sc.las) sum += demand_floor(la, sc.market_kind);
  return sum;
}

double total_demand_cap(const Scenario& sc) {
  double sum = 0.0;
  for (const auto& la : sc.las) sum += demand_cap(la, sc.market_kind);
  return sum;
}

double total_supply_cap(const Scenario& sc) noexcept {
  double sum = 0.0;
  for (const auto& esp : sc.esps) sum += esp.s_max;
  return sum;
}

double social_welfare(const Scenario& sc, std::span<const double> demands,
                      std::span<const double> supplies) {
  double sw = 0.0;
  for (std::size_t i = 0; i < sc.las.size(); ++i) sw += value(sc.las[i], demands[i]);
  for (std::size_t j = 0; j < sc.esps.size(); ++j) sw -= cost(sc.esps[j], supplies[j]);
  return sw;
}

}  // namespace dadp
