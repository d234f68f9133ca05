#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dadp/admm_bidding.hpp"
#include "dadp/market_model.hpp"
#include "dadp/price_control.hpp"
#include "dadp/trace.hpp"

namespace dadp {

struct WeightLoopParams {
  /// Absolute step delta of the weight law. When unset the step is
  /// relaxation / total, which keeps the update scale-free.
  std::optional<double> step;
  double relaxation{1.0};
  double tolerance{1e-4};  ///< stop when ||p' - p||_1 < tolerance
  double floor{kWeightFloor};
  int max_rounds{200};
  int oscillation_window{3};
};

struct AtcParams {
  double chi0{0.0};
  double gamma0{0.1};
  double beta{2.5};                    ///< gamma growth, must lie in (2, 3)
  std::optional<double> eps1;          ///< MWh; default 1e-3 * sum(s_max)
  double eps2{1e-4};
  int max_outer{100};
  std::optional<double> initial_supply_estimate;  ///< default sum(s_max) / 2
  double trust_region{0.5};            ///< max relative change of a target per round
};

struct DadpParams {
  AdmmParams admm;
  WeightLoopParams weights;
  AtcParams atc;
  bool discriminate{true};  ///< false freezes uniform weights (Kelly baseline)
  bool record_trace{true};
  /// Start each outer round from the previous round's consensus state and
  /// price weights instead of from scratch.
  bool warm_start_outer{true};
  /// After a stalled warm run and a stalled cold run, retry once more with
  /// residual-balanced rho.
  bool rescue_adaptive_rho{true};
  /// Residual tolerance of the last ADMM solve of each weight loop, whose
  /// bids are the ones cleared. Keeps cleared quantities inside their bounds.
  double polish_tolerance{1e-9};
  int polish_max_iterations{2000};
};

/// The ETC's first-order picture of one side: marginal value (or cost) of
/// energy at the last total it cleared, with a secant slope.
struct MarginalModel {
  double anchor{};    ///< total at which the side last cleared
  double marginal{};  ///< lambda at the anchor
  double slope{};
  bool valid{false};
  bool measured_slope{false};
};

struct AtcState {
  double chi{0.0};
  double gamma{0.1};
  double beta_growth{2.5};
  int m{1};
  double eps1{};
  double eps2{1e-4};
  double estimated_total_supply{};  ///< target announced to the demand side
  double estimated_total_demand{};  ///< target announced to the supply side
  MarginalModel demand_model;
  MarginalModel supply_model;
  double lower_total{};  ///< smallest admissible clearing total
  double upper_total{};  ///< largest admissible clearing total
  double bracket_lo{};   ///< the optimal total is known to lie in [lo, hi]
  double bracket_hi{};
  double trust_region{0.5};
};

/// Throws InfeasibleScenarioError when the floors cannot be served.
AtcState initial_atc_state(const Scenario& scenario, const AtcParams& params);

/// Aggregate result of one side's converged bidding, as seen by the ETC.
struct SideSummary {
  Side side{Side::demand};
  double total{};     ///< sum of the side's cleared quantities
  double marginal{};  ///< ETC estimate of the side's marginal value / cost
};

/// Folds a side's result into the ETC models and sets the target for the
/// opposite side: after the demand side, estimated_total_demand; after the
/// supply side, estimated_total_supply. Only aggregates are read or written.
AtcState etc_estimate_exchange(const AtcState& state, const SideSummary& summary);

/// chi += 2 gamma^2 (sum s - sum d); gamma *= beta; m += 1.
AtcState update_atc_multipliers(const AtcState& state, double total_supply_prev,
                                double total_demand_prev);

struct RoundSummary {
  double total_supply{};
  double total_demand{};
  double social_welfare{};
};

/// Energy mismatch within eps1 and relative SW change within eps2.
bool atc_converged(const RoundSummary& current, const std::optional<RoundSummary>& previous,
                   const AtcState& state);

/// Marginal value of the demand side recovered from ETC-held data:
/// v'(d_i) = mu_i p_i S / (S - d_i), quantity-weighted over LAs inside their bounds.
double demand_marginal_estimate(std::span<const double> demands, std::span<const double> mu,
                                std::span<const double> weights, double total_supply,
                                std::span<const double> floors, std::span<const double> caps);

/// c'(s_j) = omega_j q_j K / (K + s_j), K = (J-2) D, quantity-weighted over interior ESPs.
double supply_marginal_estimate(std::span<const double> supplies, std::span<const double> omega,
                                std::span<const double> weights, double total_demand,
                                std::span<const double> caps);

struct AtcRoundRecord {
  int m{};
  double estimated_total_supply{};
  double estimated_total_demand{};
  double demand_marginal{};
  double supply_marginal{};
  double chi{};
  double gamma{};
  double social_welfare{};
  int demand_weight_rounds{};
  int supply_weight_rounds{};
};

struct IterationCounts {
  int outer{0};
  int weight_rounds{0};
  int inner{0};
  int max_inner{0};  ///< longest single ADMM run
  int restarts{0};   ///< cold restarts after a warm-started run hit its cap
};

struct MarketOutcome {
  std::string scene_id;
  MarketKind market_kind{MarketKind::power};
  std::vector<std::string> la_ids;
  std::vector<std::string> esp_ids;

  std::vector<double> demands;   ///< d*, cleared from the bids
  std::vector<double> supplies;  ///< s*, cleared from the offers
  std::vector<Bid> bids;
  std::vector<Offer> offers;
  PriceWeights p;
  PriceWeights q;
  std::vector<double> mu;
  std::vector<double> omega;
  double clearing_price_supply{};  ///< omega(a)

  std::vector<double> la_payments;   ///< p_i b_i
  std::vector<double> esp_revenues;  ///< q_j omega(a) s_j

  double total_demand{};
  double total_supply{};
  double total_value{};
  double total_cost{};
  double social_welfare{};
  double budget_surplus{};

  IterationCounts iterations;
  bool converged{false};
  Trace trace;
  std::vector<AtcRoundRecord> atc_history;

  friend bool operator==(const MarketOutcome&, const MarketOutcome&);
};

/// Outer-loop cap hit; carries the last iterate with converged = false.
class DadpNonConvergenceError : public NonConvergenceError {
public:
  DadpNonConvergenceError(const std::string& what, MarketOutcome best)
      : NonConvergenceError(what, best.trace), best_(std::move(best)) {}

  const MarketOutcome& best() const noexcept { return best_; }

private:
  MarketOutcome best_;
};

/// Runs the distributed double auction with in-process players.
MarketOutcome run_dadp(const Scenario& scenario, const DadpParams& params = {});

/// Runs the distributed double auction against arbitrary responders (e.g. the
/// message-bus players). The scenario supplies bounds and evaluation only.
MarketOutcome run_dadp(const Scenario& scenario, const DadpParams& params,
                       DemandResponder& las, SupplyResponder& esps);

/// LA utility recomputed from the public bids: v(b_i / sum(b) S) - p_i b_i.
double la_utility(const LoadAggregator& la, std::span<const double> bids, std::size_t i,
                  double weight, double total_supply);

/// ESP utility recomputed from the public offers:
///   q_j (sum(a) / (J-1) - a_j) - c(D - a_j (J-1) D / sum(a)).
double esp_utility(const EnergyServiceProvider& esp, std::span<const double> offers,
                   std::size_t j, double weight, double total_demand);

}  // namespace dadp
