#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dadp/atc_coordinator.hpp"
#include "dadp/market_model.hpp"

namespace dadp {

enum class Mechanism { oracle, dadp, kel, pool, vcg };

const char* to_string(Mechanism mechanism) noexcept;
/// Accepts the lower-case names used on the command line ("dadp", "kel", ...).
std::optional<Mechanism> parse_mechanism(const std::string& name);

struct MechanismReport {
  Mechanism mechanism{Mechanism::oracle};
  double energy{};          ///< MWh traded
  double cost{};            ///< sum of c_j(s_j)
  double value{};           ///< sum of v_i(d_i)
  double sw{};              ///< value - cost
  double budget_surplus{};  ///< payments in - payments out
  std::optional<double> price;  ///< uniform price, where the mechanism has one
  std::vector<double> demands;
  std::vector<double> supplies;
  std::vector<double> la_payments;   ///< paid by each LA
  std::vector<double> esp_payments;  ///< paid by each ESP (negative = received)
  std::vector<std::string> notes;
  std::string error;  ///< non-empty when the mechanism failed; numbers are then unset

  bool ok() const noexcept { return error.empty(); }
};

/// Welfare-maximizing dispatch by the equal-marginal rule, with the price
/// found by bisection on aggregate excess demand.
MechanismReport centralized_optimum(const Scenario& scenario);

/// Same machinery as run_dadp with weights frozen at uniform.
MechanismReport kelly_clearing(const Scenario& scenario, const DadpParams& params = {});

/// Truthful single-price pool. Throws DegenerateMarketError when supply and
/// demand curves never cross at a positive quantity.
MechanismReport pool_clearing(const Scenario& scenario);

/// Optimal allocation with Clarke pivot payments.
MechanismReport vcg_clearing(const Scenario& scenario);

MechanismReport report_from_outcome(const MarketOutcome& outcome, Mechanism mechanism);

/// Runs ORACLE, DADP, KEL, POOL and VCG (or the given subset) on the same
/// scenario. A failing mechanism yields a report with `error` set.
std::vector<MechanismReport> compare_mechanisms(const Scenario& scenario,
                                                const DadpParams& params = {},
                                                std::vector<Mechanism> which = {});

}  // namespace dadp
