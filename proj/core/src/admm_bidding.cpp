#include "dadp/admm_bidding.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

namespace dadp {

const char* to_string(Phase phase) noexcept {
  return phase == Phase::supply ? "supply" : "demand";
}

namespace {

// Global maximizer on [lo, hi] of a cubic objective whose derivative is
// c2 x^2 + c1 x + c0. Candidates are the endpoints and interior roots.
template <typename Objective>
double maximize_cubic(double c2, double c1, double c0, double lo, double hi, Objective&& f) {
  if (hi <= lo) return lo;
  std::array<double, 4> cand{lo, hi, lo, lo};
  std::size_t count = 2;
  const auto consider = [&](double x) {
    if (x > lo && x < hi && std::isfinite(x)) cand[count++] = x;
  };
  const double scale = std::abs(c1) + std::abs(c0) + 1.0;
  if (std::abs(c2) * (hi - lo + 1.0) > 1e-14 * scale) {
    const double disc = c1 * c1 - 4.0 * c2 * c0;
    if (disc >= 0.0) {
      // Stable quadratic roots.
      const double q = -0.5 * (c1 + std::copysign(std::sqrt(disc), c1));
      if (q != 0.0) consider(c0 / q);
      consider(q / c2);
    }
  } else if (c1 != 0.0) {
    consider(-c0 / c1);
  }
  double best = cand[0];
  double best_val = f(best);
  for (std::size_t i = 1; i < count; ++i) {
    const double v = f(cand[i]);
    if (v > best_val) {
      best_val = v;
      best = cand[i];
    }
  }
  return best;
}

double l1_distance(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a[i] - b[i]);
  return sum;
}

// Euclidean projection of v onto {sum = total}.
void project_onto_total(std::vector<double>& v, double total) {
  const double shift =
      (total - std::accumulate(v.begin(), v.end(), 0.0)) / static_cast<double>(v.size());
  for (double& x : v) x += shift;
}

}  // namespace

DemandAdmmState DemandAdmmState::initial(std::size_t players, double total_supply, double rho) {
  DemandAdmmState s;
  s.z.assign(players, total_supply / static_cast<double>(players));
  s.mu.assign(players, 0.0);
  s.rho = rho;
  return s;
}

SupplyAdmmState SupplyAdmmState::initial(std::size_t players, double total_demand, double rho) {
  SupplyAdmmState s;
  s.x.assign(players, total_demand / static_cast<double>(players));
  s.omega.assign(players, 0.0);
  s.rho = rho;
  return s;
}

double la_best_response(const LoadAggregator& la, const DemandSignal& sig, double floor,
                        double cap) {
  const double total = sig.total_supply;
  const double p = sig.weight;
  const double hi = std::min(total, cap);
  const double lo = std::min(std::max(floor, 0.0), hi);
  // d/dd [v_hat - mu d - rho/2 (d - z)^2]
  //   = (alpha - (alpha/S + 2 beta) d + (2 beta / S) d^2) / p - mu - rho (d - z)
  const double c2 = 2.0 * la.beta / total / p;
  const double c1 = -(la.alpha / total + 2.0 * la.beta) / p - sig.rho;
  const double c0 = la.alpha / p - sig.price + sig.rho * sig.target;
  const auto objective = [&](double d) {
    const double gap = d - sig.target;
    return modified_value(la, d, p, total) - sig.price * d - 0.5 * sig.rho * gap * gap;
  };
  return maximize_cubic(c2, c1, c0, lo, hi, objective);
}

double la_best_response(const LoadAggregator& la, const DemandSignal& sig) {
  return la_best_response(la, sig, la.d_min, std::numeric_limits<double>::infinity());
}

double esp_best_response(const EnergyServiceProvider& esp, const SupplySignal& sig) {
  const double k = static_cast<double>(sig.esp_count - 2) * sig.total_demand;
  const double q = sig.weight;
  const double hi = std::min(sig.total_demand, esp.s_max);
  // d/ds [-c_hat + omega s - rho/2 (s - x)^2]
  //   = -(n + (2m + n/K) s + (2m/K) s^2) / q + omega - rho (s - x)
  const double c2 = -2.0 * esp.m / k / q;
  const double c1 = -(2.0 * esp.m + esp.n / k) / q - sig.rho;
  const double c0 = -esp.n / q + sig.price + sig.rho * sig.target;
  const auto objective = [&](double s) {
    const double gap = s - sig.target;
    return -modified_cost(esp, s, q, sig.total_demand, sig.esp_count) + sig.price * s -
           0.5 * sig.rho * gap * gap;
  };
  return maximize_cubic(c2, c1, c0, 0.0, hi, objective);
}

DemandAdmmState etc_demand_update(std::span<const double> demands, const DemandAdmmState& state,
                                  double total_supply) {
  DemandAdmmState next = state;
  for (std::size_t i = 0; i < demands.size(); ++i) next.z[i] = demands[i] + state.mu[i] / state.rho;
  project_onto_total(next.z, total_supply);
  for (std::size_t i = 0; i < demands.size(); ++i) {
    next.mu[i] = state.mu[i] + state.rho * (demands[i] - next.z[i]);
  }
  next.primal_res = l1_distance(demands, next.z) / total_supply;
  next.dual_res = state.rho * l1_distance(state.z, next.z) / total_supply;
  ++next.k;
  return next;
}

SupplyAdmmState etc_supply_update(std::span<const double> supplies, const SupplyAdmmState& state,
                                  double total_demand) {
  SupplyAdmmState next = state;
  for (std::size_t j = 0; j < supplies.size(); ++j) {
    next.x[j] = supplies[j] - state.omega[j] / state.rho;
  }
  project_onto_total(next.x, total_demand);
  for (std::size_t j = 0; j < supplies.size(); ++j) {
    next.omega[j] = state.omega[j] + state.rho * (next.x[j] - supplies[j]);
  }
  next.primal_res = l1_distance(supplies, next.x) / total_demand;
  next.dual_res = state.rho * l1_distance(state.x, next.x) / total_demand;
  ++next.k;
  return next;
}

double balanced_rho(const AdmmParams& params, double rho, double primal_res, double dual_res,
                    int iteration) noexcept {
  if (!params.adaptive_rho || params.rho_interval <= 0 || iteration % params.rho_interval != 0) {
    return rho;
  }
  double next = rho;
  if (primal_res > params.rho_balance * dual_res) {
    next = 2.0 * rho;
  } else if (dual_res > params.rho_balance * primal_res) {
    next = 0.5 * rho;
  }
  return std::clamp(next, params.rho / params.rho_range, params.rho * params.rho_range);
}

DirectDemandResponder::DirectDemandResponder(std::span<const LoadAggregator> las, MarketKind kind)
    : las_(las) {
  floors_.reserve(las.size());
  caps_.reserve(las.size());
  for (const auto& la : las) {
    floors_.push_back(demand_floor(la, kind));
    caps_.push_back(demand_cap(la, kind));
  }
}

std::vector<PlayerReply> DirectDemandResponder::respond(std::span<const DemandSignal> signals,
                                                        const RoundIndex&) {
  std::vector<PlayerReply> out(signals.size());
  for (std::size_t i = 0; i < signals.size(); ++i) {
    const double d = la_best_response(las_[i], signals[i], floors_[i], caps_[i]);
    out[i] = {d, signals[i].price * d};
  }
  return out;
}

DirectSupplyResponder::DirectSupplyResponder(std::span<const EnergyServiceProvider> esps)
    : esps_(esps) {}

std::vector<PlayerReply> DirectSupplyResponder::respond(std::span<const SupplySignal> signals,
                                                        const RoundIndex&) {
  std::vector<PlayerReply> out(signals.size());
  for (std::size_t j = 0; j < signals.size(); ++j) {
    const double s = esp_best_response(esps_[j], signals[j]);
    out[j] = {s, signals[j].price * (signals[j].total_demand - s)};
  }
  return out;
}

AdmmResult demand_admm_solve(DemandResponder& las, std::span<const double> weights,
                             double total_supply, const AdmmParams& params,
                             DemandAdmmState& state, Trace* trace, RoundIndex round) {
  const std::size_t count = las.size();
  if (state.z.size() != count) state = DemandAdmmState::initial(count, total_supply, params.rho);
  state.rho = params.rho;
  std::vector<DemandSignal> signals(count);
  Trace last;  // records of the latest iteration, kept for error reports
  for (int it = 1; it <= params.max_iterations; ++it) {
    round.k = it;
    for (std::size_t i = 0; i < count; ++i) {
      signals[i] = {weights[i], state.z[i], state.mu[i], state.rho, total_supply};
    }
    const auto replies = las.respond(signals, round);
    std::vector<double> d(count);
    for (std::size_t i = 0; i < count; ++i) d[i] = replies[i].quantity;
    state = etc_demand_update(d, state, total_supply);
    last.clear();
    for (std::size_t i = 0; i < count; ++i) {
      last.push_back({Phase::demand, round.m, round.n, it, i, d[i], state.mu[i], weights[i],
                      state.primal_res, state.dual_res});
    }
    if (trace) trace->insert(trace->end(), last.begin(), last.end());
    if (state.primal_res < params.eps_pri && state.dual_res < params.eps_dual) {
      AdmmResult out;
      out.quantities = std::move(d);
      out.quotes.resize(count);
      for (std::size_t i = 0; i < count; ++i) out.quotes[i] = replies[i].quote;
      out.prices = state.mu;
      out.iterations = it;
      out.primal_res = state.primal_res;
      out.dual_res = state.dual_res;
      return out;
    }
    state.rho = balanced_rho(params, state.rho, state.primal_res, state.dual_res, it);
  }
  throw NonConvergenceError("demand-side ADMM did not converge within " +
                                std::to_string(params.max_iterations) + " iterations",
                            trace ? *trace : last);
}

AdmmResult demand_admm_solve(std::span<const LoadAggregator> las, std::span<const double> weights,
                             double total_supply, const AdmmParams& params, MarketKind kind,
                             Trace* trace) {
  DirectDemandResponder responder(las, kind);
  auto state = DemandAdmmState::initial(las.size(), total_supply, params.rho);
  return demand_admm_solve(responder, weights, total_supply, params, state, trace);
}

AdmmResult supply_admm_solve(SupplyResponder& esps, std::span<const double> weights,
                             double total_demand, const AdmmParams& params,
                             SupplyAdmmState& state, Trace* trace, RoundIndex round) {
  const std::size_t count = esps.size();
  if (state.x.size() != count) state = SupplyAdmmState::initial(count, total_demand, params.rho);
  state.rho = params.rho;
  std::vector<SupplySignal> signals(count);
  Trace last;  // records of the latest iteration, kept for error reports
  for (int it = 1; it <= params.max_iterations; ++it) {
    round.k = it;
    for (std::size_t j = 0; j < count; ++j) {
      signals[j] = {weights[j], state.x[j], state.omega[j], state.rho, total_demand, count};
    }
    const auto replies = esps.respond(signals, round);
    std::vector<double> s(count);
    for (std::size_t j = 0; j < count; ++j) s[j] = replies[j].quantity;
    state = etc_supply_update(s, state, total_demand);
    last.clear();
    for (std::size_t j = 0; j < count; ++j) {
      last.push_back({Phase::supply, round.m, round.n, it, j, s[j], state.omega[j], weights[j],
                      state.primal_res, state.dual_res});
    }
    if (trace) trace->insert(trace->end(), last.begin(), last.end());
    if (state.primal_res < params.eps_pri && state.dual_res < params.eps_dual) {
      AdmmResult out;
      out.quantities = std::move(s);
      out.quotes.resize(count);
      for (std::size_t j = 0; j < count; ++j) out.quotes[j] = replies[j].quote;
      out.prices = state.omega;
      out.iterations = it;
      out.primal_res = state.primal_res;
      out.dual_res = state.dual_res;
      return out;
    }
    state.rho = balanced_rho(params, state.rho, state.primal_res, state.dual_res, it);
  }
  throw NonConvergenceError("supply-side ADMM did not converge within " +
                                std::to_string(params.max_iterations) + " iterations",
                            trace ? *trace : last);
}

AdmmResult supply_admm_solve(std::span<const EnergyServiceProvider> esps,
                             std::span<const double> weights, double total_demand,
                             const AdmmParams& params, Trace* trace) {
  DirectSupplyResponder responder(esps);
  auto state = SupplyAdmmState::initial(esps.size(), total_demand, params.rho);
  return supply_admm_solve(responder, weights, total_demand, params, state, trace);
}

double demand_stationarity_residual(const Scenario& sc, std::span<const double> demands,
                                    std::span<const double> weights, double total_supply,
                                    double mu) {
  double worst = 0.0;
  const double tol = kBoundTolerance * total_supply;
  for (std::size_t i = 0; i < sc.las.size(); ++i) {
    const double lo = demand_floor(sc.las[i], sc.market_kind);
    const double hi = std::min(total_supply, demand_cap(sc.las[i], sc.market_kind));
    const double d = demands[i];
    const double lhs = modified_marginal_value(sc.las[i], d, weights[i], total_supply);
    double violation = 0.0;
    if (d > lo + tol && d < hi - tol) {
      violation = std::abs(lhs - mu);
    } else if (d <= lo + tol) {
      violation = std::max(0.0, lhs - mu);  // at the floor: lhs <= mu
    } else {
      violation = std::max(0.0, mu - lhs);  // at the cap: lhs >= mu
    }
    worst = std::max(worst, violation / std::abs(mu));
  }
  return worst;
}

double supply_stationarity_residual(const Scenario& sc, std::span<const double> supplies,
                                    std::span<const double> weights, double total_demand,
                                    double nu) {
  double worst = 0.0;
  const double tol = kBoundTolerance * total_demand;
  const std::size_t count = sc.esps.size();
  for (std::size_t j = 0; j < count; ++j) {
    const double hi = std::min(total_demand, sc.esps[j].s_max);
    const double s = supplies[j];
    const double lhs = modified_marginal_cost(sc.esps[j], s, weights[j], total_demand, count);
    double violation = 0.0;
    if (s > tol && s < hi - tol) {
      violation = std::abs(lhs - nu);
    } else if (s <= tol) {
      violation = std::max(0.0, nu - lhs);  // idle: lhs >= nu
    } else {
      violation = std::max(0.0, lhs - nu);  // at capacity: lhs <= nu
    }
    worst = std::max(worst, violation / std::abs(nu));
  }
  return worst;
}

}  // namespace dadp
