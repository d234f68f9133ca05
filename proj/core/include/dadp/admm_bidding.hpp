#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dadp/market_model.hpp"
#include "dadp/trace.hpp"

namespace dadp {

struct AdmmParams {
  double rho{1.0};
  double eps_pri{1e-4};
  double eps_dual{1e-4};
  int max_iterations{500};
  /// Residual balancing: every `rho_interval` iterations rho is doubled when
  /// the primal residual exceeds `rho_balance` times the dual one, halved in
  /// the opposite case, and kept within [rho / rho_range, rho * rho_range].
  bool adaptive_rho{false};
  int rho_interval{5};
  double rho_balance{10.0};
  double rho_range{1e3};
};

/// Next penalty under residual balancing; returns `rho` when no change is due.
double balanced_rho(const AdmmParams& params, double rho, double primal_res, double dual_res,
                    int iteration) noexcept;

/// ETC-side consensus state for the demand side. z is the ETC's estimate of
/// each LA's demand, mu the per-LA shadow price.
struct DemandAdmmState {
  std::vector<double> z;
  std::vector<double> mu;
  double rho{1.0};
  int k{0};
  double primal_res{0.0};
  double dual_res{0.0};

  /// z uniform over the total, mu = 0.
  static DemandAdmmState initial(std::size_t players, double total_supply, double rho);
};

/// ETC-side consensus state for the supply side.
struct SupplyAdmmState {
  std::vector<double> x;
  std::vector<double> omega;
  double rho{1.0};
  int k{0};
  double primal_res{0.0};
  double dual_res{0.0};

  static SupplyAdmmState initial(std::size_t players, double total_demand, double rho);
};

struct Bid {
  std::string player;
  double amount{};  ///< b_i = mu_i d_i
};

struct Offer {
  std::string player;
  double amount{};  ///< a_j = omega_j (D - s_j)
};

/// Market signal the ETC sends to one LA in one ADMM iteration.
struct DemandSignal {
  double weight{};        ///< p_i
  double target{};        ///< z_i
  double price{};         ///< mu_i
  double rho{};
  double total_supply{};  ///< estimated sum of supplies
};

struct SupplySignal {
  double weight{};        ///< q_j
  double target{};        ///< x_j
  double price{};         ///< omega_j
  double rho{};
  double total_demand{};  ///< estimated sum of demands
  std::size_t esp_count{};
};

/// Box on a player's own quantity.
struct QuantityBounds {
  double lower{0.0};
  double upper{};
};

/// argmax over d in [max(floor,0), min(S, cap)] of
///   v_hat(d, p) - mu d - rho/2 (d - z)^2.
double la_best_response(const LoadAggregator& la, const DemandSignal& signal, double floor,
                        double cap);
double la_best_response(const LoadAggregator& la, const DemandSignal& signal);

/// argmax over s in [0, min(D, s_max)] of -c_hat(s, q) + omega s - rho/2 (s - x)^2.
double esp_best_response(const EnergyServiceProvider& esp, const SupplySignal& signal);

/// Projects d + mu/rho onto {sum z = total_supply}, then mu += rho (d - z').
DemandAdmmState etc_demand_update(std::span<const double> demands, const DemandAdmmState& state,
                                  double total_supply);

/// Projects s - omega/rho onto {sum x = total_demand}, then omega += rho (x' - s).
SupplyAdmmState etc_supply_update(std::span<const double> supplies, const SupplyAdmmState& state,
                                  double total_demand);

/// What a player hands back to the ETC: its quantity and its public quote.
struct PlayerReply {
  double quantity{};
  double quote{};
};

/// Computes the LAs' replies to one round of ETC signals. The ETC never sees
/// the LA models; it only sees what this interface returns.
class DemandResponder {
public:
  virtual ~DemandResponder() = default;
  virtual std::size_t size() const = 0;
  virtual std::vector<PlayerReply> respond(std::span<const DemandSignal> signals,
                                           const RoundIndex& round) = 0;
};

class SupplyResponder {
public:
  virtual ~SupplyResponder() = default;
  virtual std::size_t size() const = 0;
  virtual std::vector<PlayerReply> respond(std::span<const SupplySignal> signals,
                                           const RoundIndex& round) = 0;
};

/// In-process responder calling la_best_response directly.
class DirectDemandResponder final : public DemandResponder {
public:
  DirectDemandResponder(std::span<const LoadAggregator> las, MarketKind kind);

  std::size_t size() const override { return las_.size(); }
  std::vector<PlayerReply> respond(std::span<const DemandSignal> signals,
                                   const RoundIndex& round) override;

private:
  std::span<const LoadAggregator> las_;
  std::vector<double> floors_;
  std::vector<double> caps_;
};

class DirectSupplyResponder final : public SupplyResponder {
public:
  explicit DirectSupplyResponder(std::span<const EnergyServiceProvider> esps);

  std::size_t size() const override { return esps_.size(); }
  std::vector<PlayerReply> respond(std::span<const SupplySignal> signals,
                                   const RoundIndex& round) override;

private:
  std::span<const EnergyServiceProvider> esps_;
};

struct AdmmResult {
  std::vector<double> quantities;  ///< d or s at the last iteration
  std::vector<double> quotes;      ///< bids b or offers a
  std::vector<double> prices;      ///< mu or omega after the last ETC update
  int iterations{0};
  double primal_res{0.0};
  double dual_res{0.0};
};

/// Demand-side distributed bidding. `state` is used as the warm start and
/// holds the final ETC state on return. Records are appended to `trace` when
/// it is non-null; `round.k` is ignored.
AdmmResult demand_admm_solve(DemandResponder& las, std::span<const double> weights,
                             double total_supply, const AdmmParams& params,
                             DemandAdmmState& state, Trace* trace = nullptr,
                             RoundIndex round = {});

/// Convenience overload: cold start, direct responses.
AdmmResult demand_admm_solve(std::span<const LoadAggregator> las, std::span<const double> weights,
                             double total_supply, const AdmmParams& params,
                             MarketKind kind = MarketKind::power, Trace* trace = nullptr);

AdmmResult supply_admm_solve(SupplyResponder& esps, std::span<const double> weights,
                             double total_demand, const AdmmParams& params,
                             SupplyAdmmState& state, Trace* trace = nullptr,
                             RoundIndex round = {});

AdmmResult supply_admm_solve(std::span<const EnergyServiceProvider> esps,
                             std::span<const double> weights, double total_demand,
                             const AdmmParams& params, Trace* trace = nullptr);

/// Relative distance below which a quantity is treated as sitting on its bound.
inline constexpr double kBoundTolerance = 1e-6;

/// Largest relative violation of the demand-side equilibrium condition
///   (1/p_i) v'(d_i) (1 - d_i/S) = mu
/// over LAs strictly inside their bounds, normalized by |mu|. `mu` is the
/// common shadow price. A player within kBoundTolerance * S of a bound counts
/// as on it and only the one-sided condition is checked.
double demand_stationarity_residual(const Scenario& scenario, std::span<const double> demands,
                                    std::span<const double> weights, double total_supply,
                                    double mu);

/// Same for the supply side:
///   (1/q_j) c'(s_j) (1 + s_j / ((J-2) D)) = nu
double supply_stationarity_residual(const Scenario& scenario, std::span<const double> supplies,
                                    std::span<const double> weights, double total_demand,
                                    double nu);

}  // namespace dadp
