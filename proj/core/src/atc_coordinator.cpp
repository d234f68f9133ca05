#include "dadp/atc_coordinator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace dadp {

namespace {

constexpr double kBoundSnap = 1e-3;

double sum(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0); }

// Solves the ETC's two-variable model of the penalized exchange problem
//   max  V(D) - C(S) - chi (S - D) - gamma^2 (S - D)^2
// with V' and C' replaced by their secant lines. Returns {D, S}.
std::pair<double, double> solve_joint_model(const MarginalModel& dm, const MarginalModel& sm,
                                            double chi, double gamma) {
  const double g = 2.0 * gamma * gamma;
  const double h_d = std::min(dm.slope, -1e-12);
  const double h_s = std::max(sm.slope, 1e-12);
  const double a11 = h_d - g, a12 = g, a21 = -g, a22 = h_s + g;
  const double r1 = -(dm.marginal - h_d * dm.anchor + chi);
  const double r2 = -(sm.marginal - h_s * sm.anchor + chi);
  const double det = a11 * a22 - a12 * a21;
  return {(r1 * a22 - a12 * r2) / det, (a11 * r2 - a21 * r1) / det};
}

// A target just inside a bound leaves one side with almost every player
// pinned and only a sliver of slack, where consensus prices crawl. On the
// bound itself the pinned allocation is immediately consistent.
double snap_to_bounds(const AtcState& st, double t) {
  const double snap = kBoundSnap * st.upper_total;
  if (st.upper_total - t < snap) t = st.upper_total;
  if (t - st.lower_total < snap) t = st.lower_total;
  return t;
}

// Keeps a proposed target inside the bracket, the trust region around `ref`
// and the admissible totals.
double safeguard(const AtcState& st, double target, double ref) {
  const double lo = std::max({st.bracket_lo, ref * (1.0 - st.trust_region), st.lower_total});
  const double hi = std::min({st.bracket_hi, ref * (1.0 + st.trust_region), st.upper_total});
  if (!std::isfinite(target)) target = 0.5 * (st.bracket_lo + st.bracket_hi);
  double t = lo > hi ? std::clamp(0.5 * (st.bracket_lo + st.bracket_hi), st.lower_total,
                                   st.upper_total)
                     : std::clamp(target, lo, hi);
  return snap_to_bounds(st, t);
}

void refresh_model(MarginalModel& model, double total, double marginal, bool decreasing) {
  if (model.valid && std::abs(total - model.anchor) > 1e-6 * total) {
    const double h = (marginal - model.marginal) / (total - model.anchor);
    if (decreasing ? h < 0.0 : h > 0.0) {
      model.slope = h;
      model.measured_slope = true;
    }
  }
  model.anchor = total;
  model.marginal = marginal;
  if (!model.measured_slope) {
    // Unit elasticity until two points are known.
    model.slope = (decreasing ? -1.0 : 1.0) * std::abs(marginal) / total;
  }
  model.valid = true;
}

}  // namespace

AtcState initial_atc_state(const Scenario& sc, const AtcParams& params) {
  const double floor_total = total_demand_floor(sc);
  const double cap_total = total_demand_cap(sc);
  const double supply_cap = total_supply_cap(sc);
  if (floor_total > supply_cap) {
    throw InfeasibleScenarioError("demand floors " + std::to_string(floor_total) +
                                  " MWh exceed total supply capacity " +
                                  std::to_string(supply_cap) + " MWh");
  }
  AtcState st;
  st.chi = params.chi0;
  st.gamma = params.gamma0;
  st.beta_growth = params.beta;
  st.eps1 = params.eps1.value_or(1e-3 * supply_cap);
  st.eps2 = params.eps2;
  st.trust_region = params.trust_region;

  double lo = std::max(floor_total, 1e-6 * supply_cap);
  double hi = std::min(supply_cap, cap_total);
  if (lo > hi) lo = hi;
  const double margin = 1e-6 * (hi - lo);
  st.lower_total = lo + margin;
  st.upper_total = hi - margin;
  st.bracket_lo = st.lower_total;
  st.bracket_hi = st.upper_total;

  const double start = params.initial_supply_estimate.value_or(0.5 * supply_cap);
  st.estimated_total_supply =
      snap_to_bounds(st, std::clamp(start, st.lower_total, st.upper_total));
  st.estimated_total_demand = st.estimated_total_supply;
  return st;
}

AtcState etc_estimate_exchange(const AtcState& state, const SideSummary& summary) {
  AtcState st = state;
  if (summary.side == Side::demand) {
    refresh_model(st.demand_model, summary.total, summary.marginal, true);
    if (!st.supply_model.valid) {
      st.estimated_total_demand = summary.total;
    } else {
      const auto [d, s] = solve_joint_model(st.demand_model, st.supply_model, st.chi, st.gamma);
      (void)s;
      st.estimated_total_demand = safeguard(st, d, summary.total);
    }
    return st;
  }

  refresh_model(st.supply_model, summary.total, summary.marginal, false);
  if (st.demand_model.valid) {
    const double a = st.demand_model.anchor, b = summary.total;
    if (st.demand_model.marginal > summary.marginal) {
      st.bracket_lo = std::max(st.bracket_lo, std::min(a, b));
    } else {
      st.bracket_hi = std::min(st.bracket_hi, std::max(a, b));
    }
    if (st.bracket_lo > st.bracket_hi) std::swap(st.bracket_lo, st.bracket_hi);
  }
  auto [d, s] = solve_joint_model(st.demand_model, st.supply_model, st.chi, st.gamma);
  (void)d;
  if (!(s > st.bracket_lo && s < st.bracket_hi)) s = 0.5 * (st.bracket_lo + st.bracket_hi);
  st.estimated_total_supply = safeguard(st, s, summary.total);
  return st;
}

AtcState update_atc_multipliers(const AtcState& state, double total_supply_prev,
                                double total_demand_prev) {
  AtcState st = state;
  st.chi += 2.0 * st.gamma * st.gamma * (total_supply_prev - total_demand_prev);
  st.gamma *= st.beta_growth;
  st.m += 1;
  return st;
}

bool atc_converged(const RoundSummary& cur, const std::optional<RoundSummary>& prev,
                   const AtcState& st) {
  if (!prev) return false;
  if (std::abs(cur.total_supply - cur.total_demand) > st.eps1) return false;
  const double change = std::abs(cur.social_welfare - prev->social_welfare);
  const double scale = std::abs(cur.social_welfare);
  if (scale < 1e-12) return change <= st.eps2;
  return change / scale <= st.eps2;
}

double demand_marginal_estimate(std::span<const double> d, std::span<const double> mu,
                                std::span<const double> p, double S,
                                std::span<const double> floors, std::span<const double> caps) {
  // Quantity-weighted so that a player holding a sliver near its floor does
  // not drag the estimate toward its own (lower) marginal value.
  double interior = 0.0, interior_q = 0.0, all = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double upper = std::min(S, caps[i]);
    const double lam = mu[i] * p[i] * S / std::max(S - d[i], 1e-12 * S);
    all += lam;
    if (d[i] > std::max(floors[i], 0.0) + 1e-9 * S && d[i] < upper - 1e-9 * S) {
      interior += d[i] * lam;
      interior_q += d[i];
    }
  }
  if (interior_q > 0.0) return interior / interior_q;
  return all / static_cast<double>(d.size());
}

double supply_marginal_estimate(std::span<const double> s, std::span<const double> omega,
                                std::span<const double> q, double D,
                                std::span<const double> caps) {
  const double k = static_cast<double>(s.size() - 2) * D;
  double interior = 0.0, interior_q = 0.0, all = 0.0;
  for (std::size_t j = 0; j < s.size(); ++j) {
    const double lam = omega[j] * q[j] * k / (k + s[j]);
    all += lam;
    if (s[j] > 1e-9 * D && s[j] < std::min(D, caps[j]) - 1e-9 * D) {
      interior += s[j] * lam;
      interior_q += s[j];
    }
  }
  if (interior_q > 0.0) return interior / interior_q;
  return all / static_cast<double>(s.size());
}

double la_utility(const LoadAggregator& la, std::span<const double> bids, std::size_t i,
                  double weight, double total_supply) {
  const double share = bids[i] / sum(bids);
  return value(la, share * total_supply) - weight * bids[i];
}

double esp_utility(const EnergyServiceProvider& esp, std::span<const double> offers,
                   std::size_t j, double weight, double total_demand) {
  const double total = sum(offers);
  const double jm1 = static_cast<double>(offers.size() - 1);
  const double s = total_demand - offers[j] * jm1 * total_demand / total;
  return weight * (total / jm1 - offers[j]) - cost(esp, s);
}

bool operator==(const MarketOutcome& a, const MarketOutcome& b) {
  const auto same_bids = [](const auto& x, const auto& y) {
    if (x.size() != y.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i].player != y[i].player || x[i].amount != y[i].amount) return false;
    }
    return true;
  };
  const auto same_history = [](const auto& x, const auto& y) {
    if (x.size() != y.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const auto& r = x[i];
      const auto& t = y[i];
      if (r.m != t.m || r.estimated_total_supply != t.estimated_total_supply ||
          r.estimated_total_demand != t.estimated_total_demand ||
          r.demand_marginal != t.demand_marginal || r.supply_marginal != t.supply_marginal ||
          r.chi != t.chi || r.gamma != t.gamma || r.social_welfare != t.social_welfare ||
          r.demand_weight_rounds != t.demand_weight_rounds ||
          r.supply_weight_rounds != t.supply_weight_rounds)
        return false;
    }
    return true;
  };
  return a.scene_id == b.scene_id && a.market_kind == b.market_kind && a.la_ids == b.la_ids &&
         a.esp_ids == b.esp_ids && a.demands == b.demands && a.supplies == b.supplies &&
         same_bids(a.bids, b.bids) && same_bids(a.offers, b.offers) && a.p == b.p &&
         a.q == b.q && a.mu == b.mu && a.omega == b.omega &&
         a.clearing_price_supply == b.clearing_price_supply && a.la_payments == b.la_payments &&
         a.esp_revenues == b.esp_revenues && a.total_demand == b.total_demand &&
         a.total_supply == b.total_supply && a.total_value == b.total_value &&
         a.total_cost == b.total_cost && a.social_welfare == b.social_welfare &&
         a.budget_surplus == b.budget_surplus && a.iterations.outer == b.iterations.outer &&
         a.iterations.weight_rounds == b.iterations.weight_rounds &&
         a.iterations.inner == b.iterations.inner &&
         a.iterations.max_inner == b.iterations.max_inner &&
         a.iterations.restarts == b.iterations.restarts && a.converged == b.converged &&
         a.trace == b.trace && same_history(a.atc_history, b.atc_history);
}

namespace {

struct SideRun {
  AdmmResult admm;
  PriceWeights weights;
  int rounds{0};
  int inner{0};
  int max_inner{0};
  int restarts{0};
};

AdmmParams polish_params(const DadpParams& params) {
  AdmmParams p = params.admm;
  p.eps_pri = std::min(p.eps_pri, params.polish_tolerance);
  p.eps_dual = std::min(p.eps_dual, params.polish_tolerance);
  p.max_iterations = std::max(p.max_iterations, params.polish_max_iterations);
  return p;
}

// Weight loop of one side: ADMM bidding under fixed weights, then a weight
// update, until the weights settle. The loop ends with one more ADMM solve
// under the final weights at polish tolerance.
// What the ETC carries from one outer round to the next for one side.
template <typename State>
struct SideMemory {
  std::optional<State> state;
  std::optional<PriceWeights> weights;
};

template <typename Responder, typename State, typename Solve, typename Update, typename Bracket>
SideRun run_side(Responder& responder, Side side, double total, const DadpParams& params,
                 Trace* trace, RoundIndex start, SideMemory<State>& memory, Solve solve,
                 Update update, Bracket bracket) {
  const int m = start.m;
  SideRun run;
  run.weights = memory.weights && params.discriminate ? *memory.weights
                                                      : uniform_weights(responder.size(), side);
  State state = memory.state ? *memory.state
                             : State::initial(responder.size(), total, params.admm.rho);
  struct Remember {
    SideMemory<State>& memory;
    const SideRun& run;
    const State& state;
    bool enabled;
    ~Remember() {
      if (!enabled) return;
      memory.state = state;
      memory.weights = run.weights;
    }
  } remember{memory, run, state, params.warm_start_outer};
  const auto& wp = params.weights;
  WeightStepController control(wp.step.value_or(wp.relaxation / total), wp.oscillation_window);
  const auto account = [&](const AdmmResult& r) {
    run.inner += r.iterations;
    run.max_inner = std::max(run.max_inner, r.iterations);
  };
  const AdmmParams polish = polish_params(params);
  // Final solve under settled weights: normal tolerance first, then an
  // attempt at polish tolerance. When quantities sit on their bounds the
  // tighter target may be out of reach; the normal result then stands.
  // A warm start can carry prices far past a corner of the feasible set,
  // after which the consensus step walks them back very slowly. One cold
  // restart is allowed. When nearly every player is pinned the fixed penalty
  // itself is too weak, so a last cold attempt balances rho. Abandoned
  // iterations are dropped from the trace.
  const auto solve_with_restart = [&](int n) {
    const std::size_t mark = trace ? trace->size() : 0;
    AdmmParams rescue = params.admm;
    rescue.adaptive_rho = true;
    const int attempts = params.rescue_adaptive_rho && !params.admm.adaptive_rho ? 3 : 2;
    for (int attempt = 1;; ++attempt) {
      const AdmmParams& ap = attempt < 3 ? params.admm : rescue;
      try {
        return solve(responder, run.weights.values, total, ap, state, trace, {m, n, 1});
      } catch (const NonConvergenceError&) {
        if (attempt == attempts) throw;
        run.inner += params.admm.max_iterations;
        ++run.restarts;
        if (trace) trace->resize(mark);
        state = State::initial(responder.size(), total, params.admm.rho);
      }
    }
  };
  const auto final_solve = [&](int n) {
    run.admm = solve_with_restart(n);
    account(run.admm);
    if (polish.eps_pri >= params.admm.eps_pri && polish.eps_dual >= params.admm.eps_dual) return;
    State tight = state;
    Trace extra;
    try {
      AdmmResult r = solve(responder, run.weights.values, total, polish, tight,
                           trace ? &extra : nullptr, {m, n + 1, 1});
      account(r);
      run.admm = std::move(r);
      state = std::move(tight);
      if (trace) trace->insert(trace->end(), extra.begin(), extra.end());
    } catch (const NonConvergenceError&) {
    }
  };
  if (!params.discriminate) {
    final_solve(start.n);
    return run;
  }
  for (int round = 1; round <= wp.max_rounds; ++round) {
    const int n = start.n + round - 1;
    AdmmResult r = solve_with_restart(n);
    account(r);
    const auto br = bracket(run.weights, r.quantities, total);
    PriceWeights next = update(run.weights, r.quantities, total, control.delta(), wp.floor);
    control.observe(br);
    double change = 0.0;
    for (std::size_t i = 0; i < next.size(); ++i) {
      change += std::abs(next.values[i] - run.weights.values[i]);
    }
    run.weights = std::move(next);
    run.rounds = round;
    if (change < wp.tolerance) {
      final_solve(n + 1);
      return run;
    }
  }
  throw NonConvergenceError(std::string(side == Side::demand ? "demand" : "supply") +
                                "-side price weights did not settle within " +
                                std::to_string(wp.max_rounds) + " rounds",
                            trace ? *trace : Trace{});
}

AdmmResult demand_solve(DemandResponder& r, std::span<const double> w, double total,
                        const AdmmParams& p, DemandAdmmState& st, Trace* trace,
                        RoundIndex round) {
  return demand_admm_solve(r, w, total, p, st, trace, round);
}

AdmmResult supply_solve(SupplyResponder& r, std::span<const double> w, double total,
                        const AdmmParams& p, SupplyAdmmState& st, Trace* trace,
                        RoundIndex round) {
  return supply_admm_solve(r, w, total, p, st, trace, round);
}

// Clears the market from the final quotes and fills the outcome record.
MarketOutcome assemble(const Scenario& sc, const SideRun& dem, const SideRun& sup, double s_hat,
                       double d_hat) {
  MarketOutcome out;
  out.scene_id = sc.scene_id;
  out.market_kind = sc.market_kind;
  for (const auto& la : sc.las) out.la_ids.push_back(la.id);
  for (const auto& esp : sc.esps) out.esp_ids.push_back(esp.id);

  const auto& b = dem.admm.quotes;
  const auto& a = sup.admm.quotes;
  if (sum(b) > 0.0) {
    out.demands = demand_allocation(b, s_hat);
  } else {
    out.demands = dem.admm.quantities;
  }
  const bool offers_valid = std::all_of(a.begin(), a.end(), [](double x) { return x > 0.0; });
  if (offers_valid) {
    auto alloc = supply_allocation(a, d_hat);
    out.supplies = std::move(alloc.supplies);
    out.clearing_price_supply = alloc.price;
  } else {
    out.supplies = sup.admm.quantities;
    out.clearing_price_supply = sum(sup.admm.prices) / static_cast<double>(a.size());
  }

  for (std::size_t i = 0; i < b.size(); ++i) out.bids.push_back({sc.las[i].id, b[i]});
  for (std::size_t j = 0; j < a.size(); ++j) out.offers.push_back({sc.esps[j].id, a[j]});
  out.p = dem.weights;
  out.q = sup.weights;
  out.mu = dem.admm.prices;
  out.omega = sup.admm.prices;

  for (std::size_t i = 0; i < b.size(); ++i) out.la_payments.push_back(out.p.values[i] * b[i]);
  for (std::size_t j = 0; j < a.size(); ++j) {
    out.esp_revenues.push_back(out.q.values[j] * out.clearing_price_supply * out.supplies[j]);
  }
  out.total_demand = sum(out.demands);
  out.total_supply = sum(out.supplies);
  for (std::size_t i = 0; i < sc.las.size(); ++i) out.total_value += value(sc.las[i], out.demands[i]);
  for (std::size_t j = 0; j < sc.esps.size(); ++j) out.total_cost += cost(sc.esps[j], out.supplies[j]);
  out.social_welfare = out.total_value - out.total_cost;
  out.budget_surplus = sum(out.la_payments) - sum(out.esp_revenues);
  return out;
}

}  // namespace

MarketOutcome run_dadp(const Scenario& sc, const DadpParams& params, DemandResponder& las,
                       SupplyResponder& esps) {
  validate_scenario(sc);
  AtcState st = initial_atc_state(sc, params.atc);

  std::vector<double> floors, caps, esp_caps;
  for (const auto& la : sc.las) {
    floors.push_back(demand_floor(la, sc.market_kind));
    caps.push_back(demand_cap(la, sc.market_kind));
  }
  for (const auto& esp : sc.esps) esp_caps.push_back(esp.s_max);

  Trace trace;
  Trace* tp = params.record_trace ? &trace : nullptr;
  std::vector<AtcRoundRecord> history;
  IterationCounts counts;
  std::optional<RoundSummary> previous;
  MarketOutcome out;
  SideMemory<DemandAdmmState> demand_memory;
  SideMemory<SupplyAdmmState> supply_memory;

  for (int m = 1; m <= params.atc.max_outer; ++m) {
    const double s_hat = st.estimated_total_supply;
    SideRun dem = run_side<DemandResponder, DemandAdmmState>(
        las, Side::demand, s_hat, params, tp, {m, 1, 1}, demand_memory, demand_solve, update_demand_weights,
        demand_weight_bracket);
    const double lam_d = demand_marginal_estimate(dem.admm.quantities, dem.admm.prices,
                                                  dem.weights.values, s_hat, floors, caps);
    st = etc_estimate_exchange(st, {Side::demand, s_hat, lam_d});
    const double d_hat = st.estimated_total_demand;

    SideRun sup = run_side<SupplyResponder, SupplyAdmmState>(
        esps, Side::supply, d_hat, params, tp, {m, 1, 1}, supply_memory, supply_solve, update_supply_weights,
        supply_weight_bracket);
    const double lam_s = supply_marginal_estimate(sup.admm.quantities, sup.admm.prices,
                                                  sup.weights.values, d_hat, esp_caps);

    counts.outer = m;
    counts.weight_rounds += dem.rounds + sup.rounds;
    counts.inner += dem.inner + sup.inner;
    counts.max_inner = std::max({counts.max_inner, dem.max_inner, sup.max_inner});
    counts.restarts += dem.restarts + sup.restarts;

    out = assemble(sc, dem, sup, s_hat, d_hat);
    history.push_back({m, s_hat, d_hat, lam_d, lam_s, st.chi, st.gamma, out.social_welfare,
                       dem.rounds, sup.rounds});

    const RoundSummary current{out.total_supply, out.total_demand, out.social_welfare};
    if (atc_converged(current, previous, st)) {
      // The demand side cleared at s_hat and the supply side at d_hat, which
      // now agree within eps1. One more supply pass at s_hat makes both sides
      // clear the same total. Its weight rounds continue round m's numbering.
      if (s_hat != d_hat) {
        SideRun last = run_side<SupplyResponder, SupplyAdmmState>(
            esps, Side::supply, s_hat, params, tp, {m, sup.rounds + 3, 1}, supply_memory,
            supply_solve, update_supply_weights, supply_weight_bracket);
        counts.weight_rounds += last.rounds;
        counts.inner += last.inner;
        counts.max_inner = std::max(counts.max_inner, last.max_inner);
        counts.restarts += last.restarts;
        out = assemble(sc, dem, last, s_hat, s_hat);
        history.back().estimated_total_demand = s_hat;
        history.back().social_welfare = out.social_welfare;
      }
      out.converged = true;
      out.iterations = counts;
      out.trace = std::move(trace);
      out.atc_history = std::move(history);
      return out;
    }
    previous = current;
    st = update_atc_multipliers(st, current.total_supply, current.total_demand);
    st = etc_estimate_exchange(st, {Side::supply, d_hat, lam_s});
  }

  out.converged = false;
  out.iterations = counts;
  out.trace = std::move(trace);
  out.atc_history = std::move(history);
  throw DadpNonConvergenceError("outer exchange loop did not converge within " +
                                    std::to_string(params.atc.max_outer) + " rounds",
                                std::move(out));
}

MarketOutcome run_dadp(const Scenario& sc, const DadpParams& params) {
  validate_scenario(sc);
  DirectDemandResponder las(sc.las, sc.market_kind);
  DirectSupplyResponder esps(sc.esps);
  return run_dadp(sc, params, las, esps);
}

}  // namespace dadp
