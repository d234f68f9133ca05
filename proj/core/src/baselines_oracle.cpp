#include "dadp/baselines_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace dadp {

const char* to_string(Mechanism mechanism) noexcept {
  switch (mechanism) {
    case Mechanism::oracle: return "ORACLE";
    case Mechanism::dadp: return "DADP";
    case Mechanism::kel: return "KEL";
    case Mechanism::pool: return "POOL";
    case Mechanism::vcg: return "VCG";
  }
  return "?";
}

std::optional<Mechanism> parse_mechanism(const std::string& name) {
  std::string n = name;
  std::transform(n.begin(), n.end(), n.begin(), [](unsigned char c) { return std::tolower(c); });
  if (n == "oracle") return Mechanism::oracle;
  if (n == "dadp") return Mechanism::dadp;
  if (n == "kel" || n == "kelly") return Mechanism::kel;
  if (n == "pool") return Mechanism::pool;
  if (n == "vcg") return Mechanism::vcg;
  return std::nullopt;
}

namespace {

struct DemandSide {
  const LoadAggregator* la;
  double floor;
  double cap;
};

struct Dispatch {
  std::vector<double> d;
  std::vector<double> s;
  double price{};
  double welfare{};
  bool feasible{true};
};

double demand_at(const DemandSide& x, double lam) {
  return std::clamp((x.la->alpha - lam) / (2.0 * x.la->beta), x.floor, x.cap);
}

double supply_at(const EnergyServiceProvider& e, double lam) {
  return std::clamp((lam - e.n) / (2.0 * e.m), 0.0, e.s_max);
}

double welfare_of(const std::vector<DemandSide>& las, const std::vector<EnergyServiceProvider>& esps,
                  const std::vector<double>& d, const std::vector<double>& s) {
  double w = 0.0;
  for (std::size_t i = 0; i < las.size(); ++i) w += value(*las[i].la, d[i]);
  for (std::size_t j = 0; j < esps.size(); ++j) w -= cost(esps[j], s[j]);
  return w;
}

// Equal-marginal dispatch over arbitrary player subsets. When the floors
// exceed capacity the result is flagged infeasible with demands at their
// floors and every ESP at capacity.
Dispatch dispatch(const std::vector<DemandSide>& las,
                  const std::vector<EnergyServiceProvider>& esps) {
  Dispatch out;
  double floor_total = 0.0, cap_total = 0.0;
  for (const auto& x : las) floor_total += x.floor;
  for (const auto& e : esps) cap_total += e.s_max;
  if (floor_total > cap_total) {
    out.feasible = false;
    for (const auto& x : las) out.d.push_back(x.floor);
    for (const auto& e : esps) out.s.push_back(e.s_max);
    out.welfare = welfare_of(las, esps, out.d, out.s);
    return out;
  }
  const auto excess = [&](double lam) {
    double e = 0.0;
    for (const auto& x : las) e += demand_at(x, lam);
    for (const auto& p : esps) e -= supply_at(p, lam);
    return e;
  };
  double lo = 0.0, hi = 1.0;
  for (const auto& x : las) hi = std::max(hi, x.la->alpha + 1.0);
  for (const auto& e : esps) hi = std::max(hi, e.n + 2.0 * e.m * e.s_max + 1.0);
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (excess(mid) > 0.0 ? lo : hi) = mid;
  }
  out.price = 0.5 * (lo + hi);
  for (const auto& x : las) out.d.push_back(demand_at(x, out.price));
  for (const auto& e : esps) out.s.push_back(supply_at(e, out.price));

  // Remove the bisection residue on a player with slack so the dispatch
  // balances exactly.
  const double gap = std::accumulate(out.d.begin(), out.d.end(), 0.0) -
                     std::accumulate(out.s.begin(), out.s.end(), 0.0);
  if (gap != 0.0) {
    bool fixed = false;
    for (std::size_t j = 0; j < esps.size() && !fixed; ++j) {
      const double t = out.s[j] + gap;
      if (t >= 0.0 && t <= esps[j].s_max) {
        out.s[j] = t;
        fixed = true;
      }
    }
    for (std::size_t i = 0; i < las.size() && !fixed; ++i) {
      const double t = out.d[i] - gap;
      if (t >= las[i].floor && t <= las[i].cap) {
        out.d[i] = t;
        fixed = true;
      }
    }
  }
  out.welfare = welfare_of(las, esps, out.d, out.s);
  return out;
}

std::vector<DemandSide> demand_sides(const Scenario& sc) {
  std::vector<DemandSide> out;
  for (const auto& la : sc.las) {
    out.push_back({&la, demand_floor(la, sc.market_kind), demand_cap(la, sc.market_kind)});
  }
  return out;
}

MechanismReport report_from_dispatch(const Scenario& sc, const Dispatch& x, Mechanism mech) {
  MechanismReport r;
  r.mechanism = mech;
  r.demands = x.d;
  r.supplies = x.s;
  r.energy = std::accumulate(x.d.begin(), x.d.end(), 0.0);
  for (std::size_t i = 0; i < sc.las.size(); ++i) r.value += value(sc.las[i], x.d[i]);
  for (std::size_t j = 0; j < sc.esps.size(); ++j) r.cost += cost(sc.esps[j], x.s[j]);
  r.sw = r.value - r.cost;
  r.price = x.price;
  return r;
}

void require_feasible(const Scenario& sc) {
  validate_players(sc);
  const double floors = total_demand_floor(sc);
  const double caps = total_supply_cap(sc);
  if (floors > caps) {
    throw InfeasibleScenarioError("demand floors " + std::to_string(floors) +
                                  " MWh exceed total supply capacity " + std::to_string(caps) +
                                  " MWh");
  }
}

}  // namespace

MechanismReport centralized_optimum(const Scenario& sc) {
  require_feasible(sc);
  const auto las = demand_sides(sc);
  return report_from_dispatch(sc, dispatch(las, sc.esps), Mechanism::oracle);
}

MechanismReport report_from_outcome(const MarketOutcome& o, Mechanism mech) {
  MechanismReport r;
  r.mechanism = mech;
  r.demands = o.demands;
  r.supplies = o.supplies;
  r.energy = o.total_demand;
  r.value = o.total_value;
  r.cost = o.total_cost;
  r.sw = o.social_welfare;
  r.budget_surplus = o.budget_surplus;
  r.la_payments = o.la_payments;
  for (double rev : o.esp_revenues) r.esp_payments.push_back(-rev);
  return r;
}

MechanismReport kelly_clearing(const Scenario& sc, const DadpParams& params) {
  DadpParams p = params;
  p.discriminate = false;
  return report_from_outcome(run_dadp(sc, p), Mechanism::kel);
}

MechanismReport pool_clearing(const Scenario& sc) {
  require_feasible(sc);
  const auto las = demand_sides(sc);
  // Positive trade needs a floor to serve or some LA valuing the first unit
  // above some ESP's first-unit cost.
  double top_value = 0.0, floor_total = 0.0;
  double bottom_cost = std::numeric_limits<double>::infinity();
  for (const auto& x : las) {
    top_value = std::max(top_value, x.la->alpha);
    floor_total += x.floor;
  }
  for (const auto& e : sc.esps) bottom_cost = std::min(bottom_cost, e.n);
  if (!(floor_total > 0.0 || top_value > bottom_cost)) {
    throw DegenerateMarketError("pool: supply and demand curves do not cross at a positive quantity");
  }
  const Dispatch x = dispatch(las, sc.esps);
  MechanismReport r = report_from_dispatch(sc, x, Mechanism::pool);
  for (double d : x.d) r.la_payments.push_back(x.price * d);
  for (double s : x.s) r.esp_payments.push_back(-x.price * s);
  // Single price on both sides: what comes in goes out.
  r.budget_surplus = 0.0;
  r.notes.push_back("truthful price-taking curves; uniform pricing is efficient here");
  return r;
}

MechanismReport vcg_clearing(const Scenario& sc) {
  require_feasible(sc);
  const auto las = demand_sides(sc);
  const Dispatch full = dispatch(las, sc.esps);
  MechanismReport r = report_from_dispatch(sc, full, Mechanism::vcg);
  r.price.reset();

  for (std::size_t i = 0; i < las.size(); ++i) {
    auto rest = las;
    rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(i));
    const Dispatch without = dispatch(rest, sc.esps);
    if (!without.feasible) {
      r.notes.push_back("residual market without " + sc.las[i].id +
                        " is infeasible; pivot uses floor dispatch");
    }
    const double others_at_opt = full.welfare - value(sc.las[i], full.d[i]);
    r.la_payments.push_back(without.welfare - others_at_opt);
  }
  for (std::size_t j = 0; j < sc.esps.size(); ++j) {
    auto rest = sc.esps;
    rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(j));
    const Dispatch without = dispatch(las, rest);
    if (!without.feasible) {
      r.notes.push_back("residual market without " + sc.esps[j].id +
                        " is infeasible; pivot uses floor dispatch");
    }
    const double others_at_opt = full.welfare + cost(sc.esps[j], full.s[j]);
    r.esp_payments.push_back(without.welfare - others_at_opt);
  }
  r.budget_surplus = std::accumulate(r.la_payments.begin(), r.la_payments.end(), 0.0) +
                     std::accumulate(r.esp_payments.begin(), r.esp_payments.end(), 0.0);
  return r;
}

std::vector<MechanismReport> compare_mechanisms(const Scenario& sc, const DadpParams& params,
                                                std::vector<Mechanism> which) {
  static const std::vector<Mechanism> order{Mechanism::oracle, Mechanism::dadp, Mechanism::kel,
                                            Mechanism::pool, Mechanism::vcg};
  if (which.empty()) which = order;
  std::vector<MechanismReport> out;
  for (Mechanism m : order) {
    if (std::find(which.begin(), which.end(), m) == which.end()) continue;
    try {
      switch (m) {
        case Mechanism::oracle: out.push_back(centralized_optimum(sc)); break;
        case Mechanism::dadp: out.push_back(report_from_outcome(run_dadp(sc, params), m)); break;
        case Mechanism::kel: out.push_back(kelly_clearing(sc, params)); break;
        case Mechanism::pool: out.push_back(pool_clearing(sc)); break;
        case Mechanism::vcg: out.push_back(vcg_clearing(sc)); break;
      }
    } catch (const std::exception& e) {
      MechanismReport failed;
      failed.mechanism = m;
      failed.error = e.what();
      out.push_back(std::move(failed));
    }
  }
  return out;
}

}  // namespace dadp
