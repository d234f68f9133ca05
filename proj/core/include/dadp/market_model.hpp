#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dadp/errors.hpp"

namespace dadp {

enum class MarketKind { power, heat };

const char* to_string(MarketKind kind) noexcept;

/// Building envelope used to derive per-period heat demand bounds.
struct ThermalEnvelope {
  double resistance{};     ///< R, degC per MW
  double capacity{};       ///< C, MWh per degC
  double t_in_min{};       ///< degC
  double t_in_max{};       ///< degC
  double t_in_current{};   ///< degC
  double t_out{};          ///< degC, outdoor temperature of the period
  double dt{1.0};          ///< h, period length

  double time_constant() const noexcept { return resistance * capacity; }
};

/// Demand-side player. Value v(d) = alpha d - beta d^2.
struct LoadAggregator {
  std::string id;
  double alpha{};
  double beta{};
  double d_min{};
  std::optional<ThermalEnvelope> thermal;
};

/// Supply-side player. Cost c(s) = m s^2 + n s for s > 0, else 0.
struct EnergyServiceProvider {
  std::string id;
  double m{};
  double n{};
  double s_max{};
};

struct Scenario {
  MarketKind market_kind{MarketKind::power};
  std::vector<LoadAggregator> las;
  std::vector<EnergyServiceProvider> esps;
  std::string scene_id;
};

// -- player primitives ------------------------------------------------------

double value(const LoadAggregator& la, double d);
double marginal_value(const LoadAggregator& la, double d) noexcept;
double cost(const EnergyServiceProvider& esp, double s) noexcept;
double marginal_cost(const EnergyServiceProvider& esp, double s) noexcept;

/// Price-weighted value integrand, integrated from 0 to d:
///   (1/p) * int_0^d v'(z) (1 - z / total_supply) dz
double modified_value(const LoadAggregator& la, double d, double weight, double total_supply);
/// Derivative of modified_value with respect to d.
double modified_marginal_value(const LoadAggregator& la, double d, double weight,
                               double total_supply) noexcept;

/// Price-weighted cost integrand, integrated from 0 to s:
///   (1/q) * int_0^s c'(z) (1 + z / ((J-2) total_demand)) dz
double modified_cost(const EnergyServiceProvider& esp, double s, double weight,
                     double total_demand, std::size_t esp_count);
double modified_marginal_cost(const EnergyServiceProvider& esp, double s, double weight,
                              double total_demand, std::size_t esp_count) noexcept;

struct HeatBounds {
  double p_min{};  ///< MW
  double p_max{};  ///< MW
};

/// Admissible heating power range that keeps the indoor temperature of the
/// next period inside [t_in_min, t_in_max].
HeatBounds heat_demand_bounds(const ThermalEnvelope& env);

/// Demand floor in MWh. In the heat market this is max(d_min, P_min dt, 0).
double demand_floor(const LoadAggregator& la, MarketKind kind);
/// Demand cap in MWh: the point of zero marginal value alpha / (2 beta), and
/// in the heat market no more than P_max dt.
double demand_cap(const LoadAggregator& la, MarketKind kind);

// -- allocation rules -------------------------------------------------------

/// Proportional share of the total supply: d_i = b_i / sum(b) * total_supply.
std::vector<double> demand_allocation(std::span<const double> bids, double total_supply);

struct SupplyAllocation {
  double price{};                 ///< omega(a) = sum(a) / ((J-1) total_demand)
  std::vector<double> supplies;   ///< s_j, nonnegative
  bool clamped{false};            ///< true when a negative share was redistributed
};

/// Supply-function allocation s_j = D - a_j / sum(a) * (J-1) D.
SupplyAllocation supply_allocation(std::span<const double> offers, double total_demand);

// -- scenario helpers -------------------------------------------------------

/// Throws ValidationError naming the violated constraint.
void validate_scenario(const Scenario& scenario);
/// Player-level checks only; accepts markets of any size (at least one LA and
/// one ESP). Used by the centralized baselines, which need no I > 1, J > 2.
void validate_players(const Scenario& scenario);

double total_demand_floor(const Scenario& scenario);
double total_demand_cap(const Scenario& scenario);
double total_supply_cap(const Scenario& scenario) noexcept;

/// Social welfare sum v(d) - sum c(s).
double social_welfare(const Scenario& scenario, std::span<const double> demands,
                      std::span<const double> supplies);

}  // namespace dadp
