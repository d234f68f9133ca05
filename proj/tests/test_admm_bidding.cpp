#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "dadp/admm_bidding.hpp"
#include "oracles.hpp"

using namespace dadp;

namespace {

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

// Equal-modified-marginal split of `total` among LAs, by bisection on the
// common price: each LA solves (1/p) v'(d) (1 - d/S) = mu on its own.
std::vector<double> demand_split_oracle(const std::vector<LoadAggregator>& las,
                                        const std::vector<double>& p, double S) {
  const auto own = [&](std::size_t i, double mu) {
    const double top = std::min(S, las[i].alpha / (2 * las[i].beta));
    const auto g = [&](double d) {
      return (las[i].alpha - 2 * las[i].beta * d) * (1 - d / S) / p[i] - mu;
    };
    if (g(0) <= 0) return 0.0;
    if (g(top) >= 0) return top;
    return oracle::bisect(g, 0, top);
  };
  const auto excess = [&](double mu) {
    double t = 0;
    for (std::size_t i = 0; i < las.size(); ++i) t += own(i, mu);
    return t - S;
  };
  const double mu = oracle::bisect(excess, 1e-9, 1e4);
  std::vector<double> d(las.size());
  for (std::size_t i = 0; i < las.size(); ++i) d[i] = own(i, mu);
  return d;
}

// Same for ESPs: (1/q) c'(s) (1 + s/K) = nu, s in [0, min(D, s_max)].
std::vector<double> supply_split_oracle(const std::vector<EnergyServiceProvider>& esps,
                                        const std::vector<double>& q, double D) {
  const double K = (static_cast<double>(esps.size()) - 2) * D;
  const auto own = [&](std::size_t j, double nu) {
    const double top = std::min(D, esps[j].s_max);
    const auto g = [&](double s) { return (2 * esps[j].m * s + esps[j].n) * (1 + s / K) / q[j] - nu; };
    if (g(0) >= 0) return 0.0;
    if (g(top) <= 0) return top;
    return oracle::bisect(g, 0, top);
  };
  const auto excess = [&](double nu) {
    double t = 0;
    for (std::size_t j = 0; j < esps.size(); ++j) t += own(j, nu);
    return t - D;
  };
  const double nu = oracle::bisect(excess, 0, 1e5);
  std::vector<double> s(esps.size());
  for (std::size_t j = 0; j < esps.size(); ++j) s[j] = own(j, nu);
  return s;
}

std::vector<LoadAggregator> identical_las(std::size_t n) {
  return std::vector<LoadAggregator>(n, LoadAggregator{"LA", 30, 0.2, 0, {}});
}

std::vector<EnergyServiceProvider> identical_esps(std::size_t n) {
  return std::vector<EnergyServiceProvider>(n, EnergyServiceProvider{"ESP", 0.2, 2, 100});
}

}  // namespace

TEST(LaBestResponse, MatchesGridSearch) {
  const LoadAggregator la{"LA", 4, 1, 0, {}};
  const DemandSignal sig{1.0, 1.0, 0.0, 2.0, 4.0};
  const double d = la_best_response(la, sig);
  EXPECT_NEAR(d, 5 - std::sqrt(13.0), 1e-12);
  const double grid = oracle::grid_argmax(
      [](double x) { return oracle::modified_value(4, 1, x, 1, 4) - (x - 1) * (x - 1); }, 0, 4,
      1e-4);
  EXPECT_NEAR(d, grid, 1e-4);
}

TEST(LaBestResponse, HugePriceGivesZero) {
  const LoadAggregator la{"LA", 4, 1, 0, {}};
  EXPECT_DOUBLE_EQ(la_best_response(la, {1.0, 1.0, 1e9, 2.0, 4.0}), 0.0);
}

TEST(LaBestResponse, FloorBinds) {
  const LoadAggregator la{"LA", 4, 1, 0.5, {}};
  EXPECT_DOUBLE_EQ(la_best_response(la, {1.0, 1.0, 1e9, 2.0, 4.0}, 0.5, 4.0), 0.5);
}

TEST(LaBestResponse, LargePenaltyTracksTarget) {
  const LoadAggregator la{"LA", 4, 1, 0, {}};
  EXPECT_NEAR(la_best_response(la, {1.0, 2.5, 3.0, 1e9, 4.0}), 2.5, 1e-6);
  EXPECT_NEAR(la_best_response(la, {1.0, -3.0, 0.0, 1e9, 4.0}), 0.0, 1e-12);
  EXPECT_NEAR(la_best_response(la, {1.0, 9.0, 0.0, 1e9, 4.0}), 4.0, 1e-12);
}

TEST(LaBestResponse, FinerGridMovesArgmaxLessThanStep) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 10; ++t) {
    const double alpha = 5 + 20 * u(rng), beta = 0.2 + u(rng), p = 0.2 + u(rng), S = 5 + 5 * u(rng);
    const double mu = 3 * u(rng), z = S * u(rng), rho = 0.5 + u(rng);
    const auto f = [&](double x) {
      return oracle::modified_value(alpha, beta, x, p, S) - mu * x - 0.5 * rho * (x - z) * (x - z);
    };
    const double coarse = oracle::grid_argmax(f, 0, S, 1e-3);
    const double fine = oracle::grid_argmax(f, 0, S, 5e-4);
    EXPECT_LT(std::abs(coarse - fine), 1e-3);
    const double d = la_best_response({"LA", alpha, beta, 0, {}}, {p, z, mu, rho, S});
    EXPECT_NEAR(d, fine, 5e-4);
  }
}

TEST(EspBestResponse, MatchesGridSearch) {
  const EnergyServiceProvider e{"ESP", 1, 0, 10};
  const SupplySignal sig{1.0, 0.5, 2.0, 2.0, 1.0, 3};
  const double s = esp_best_response(e, sig);
  const double grid = oracle::grid_argmax(
      [](double x) {
        return -(x * x + 2.0 / 3.0 * x * x * x) + 2 * x - (x - 0.5) * (x - 0.5);
      },
      0, 1, 1e-4);
  EXPECT_NEAR(s, grid, 1e-4);
}

TEST(EspBestResponse, NoRevenueNoSupply) {
  const EnergyServiceProvider e{"ESP", 1, 2, 10};
  EXPECT_DOUBLE_EQ(esp_best_response(e, {1.0, 0.0, 0.0, 1.0, 5.0, 3}), 0.0);
}

TEST(EspBestResponse, LargePenaltyTracksTarget) {
  const EnergyServiceProvider e{"ESP", 1, 2, 10};
  EXPECT_NEAR(esp_best_response(e, {1.0, 2.0, 0.0, 1e9, 5.0, 3}), 2.0, 1e-6);
  EXPECT_NEAR(esp_best_response(e, {1.0, 7.0, 0.0, 1e9, 5.0, 3}), 5.0, 1e-12);
}

TEST(EtcDemandUpdate, HandExample) {
  auto st = DemandAdmmState::initial(2, 4.0, 1.0);
  st.mu = {0, 0};
  const auto next = etc_demand_update(std::vector<double>{1, 1}, st, 4.0);
  EXPECT_DOUBLE_EQ(next.z[0], 2.0);
  EXPECT_DOUBLE_EQ(next.z[1], 2.0);
  EXPECT_DOUBLE_EQ(next.mu[0], -1.0);
  EXPECT_DOUBLE_EQ(next.mu[1], -1.0);
  EXPECT_EQ(next.k, st.k + 1);
}

TEST(EtcDemandUpdate, FeasiblePointIsFixed) {
  auto st = DemandAdmmState::initial(3, 6.0, 1.0);
  const std::vector<double> d{1, 2, 3};
  const auto next = etc_demand_update(d, st, 6.0);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_DOUBLE_EQ(next.z[i], d[i]);
    EXPECT_DOUBLE_EQ(next.mu[i], 0.0);
  }
}

TEST(EtcSupplyUpdate, FeasiblePointIsFixed) {
  auto st = SupplyAdmmState::initial(3, 4.0, 1.0);
  const std::vector<double> s{1, 1, 2};
  const auto next = etc_supply_update(s, st, 4.0);
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_DOUBLE_EQ(next.x[j], s[j]);
    EXPECT_DOUBLE_EQ(next.omega[j], 0.0);
  }
}

TEST(EtcUpdates, ProjectionHitsTotalForAnyInput) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-50, 50), pos(0.1, 30);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 2 + t % 6;
    const double total = pos(rng);
    DemandAdmmState ds = DemandAdmmState::initial(n, total, pos(rng));
    SupplyAdmmState ss = SupplyAdmmState::initial(n, total, pos(rng));
    std::vector<double> q(n);
    for (std::size_t i = 0; i < n; ++i) {
      ds.mu[i] = u(rng);
      ss.omega[i] = u(rng);
      q[i] = pos(rng);
    }
    EXPECT_NEAR(sum(etc_demand_update(q, ds, total).z), total, 1e-9 * (1 + total + n * 50));
    EXPECT_NEAR(sum(etc_supply_update(q, ss, total).x), total, 1e-9 * (1 + total + n * 50));
  }
}

TEST(DemandAdmm, SymmetricPlayersSplitEvenly) {
  const auto las = identical_las(4);
  const std::vector<double> p(4, 0.25);
  const auto r = demand_admm_solve(las, p, 40.0, AdmmParams{});
  for (double d : r.quantities) EXPECT_NEAR(d, 10.0, 1e-3);
}

TEST(DemandAdmm, MatchesDirectSolverTwoLas) {
  const std::vector<LoadAggregator> las{{"A", 10, 1, 0, {}}, {"B", 6, 1, 0, {}}};
  const std::vector<double> p{0.5, 0.5};
  const auto r = demand_admm_solve(las, p, 4.0, AdmmParams{});
  const auto expect = demand_split_oracle(las, p, 4.0);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(r.quantities[i], expect[i], 1e-3);
}

TEST(DemandAdmm, StationarityAndAllocationConsistency) {
  Scenario sc;
  sc.las = {{"A", 60, 0.3, 0, {}}, {"B", 40, 0.2, 0, {}}, {"C", 90, 0.5, 0, {}}};
  sc.esps = {{"X", 0.1, 1, 100}, {"Y", 0.1, 1, 100}, {"Z", 0.1, 1, 100}};
  const std::vector<double> p{0.3, 0.4, 0.3};
  const double S = 80.0;
  const AdmmParams params;
  const auto r = demand_admm_solve(sc.las, p, S, params);
  const double mu = sum(r.quotes) / S;
  EXPECT_LT(demand_stationarity_residual(sc, r.quantities, p, S, mu), 1e-4);
  const auto cleared = demand_allocation(r.quotes, S);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(cleared[i], r.quantities[i], params.eps_pri * S);
    // The bid uses the price the LA was sent; the reported price has moved
    // by one consensus step since, which is below rho * eps_pri * S.
    EXPECT_NEAR(r.quotes[i], r.prices[i] * r.quantities[i],
                params.rho * params.eps_pri * S * r.quantities[i]);
  }
}

TEST(DemandAdmm, UnitChangeLeavesAllocationUnchanged) {
  std::vector<LoadAggregator> las{{"A", 60, 0.3, 0, {}}, {"B", 40, 0.2, 0, {}}};
  const std::vector<double> p{0.5, 0.5};
  AdmmParams params;
  const auto dollars = demand_admm_solve(las, p, 50.0, params);
  for (auto& la : las) {
    la.alpha *= 100;
    la.beta *= 100;
  }
  // Dual residuals carry the price unit, so their tolerance scales too.
  params.rho *= 100;
  params.eps_dual *= 100;
  const auto cents = demand_admm_solve(las, p, 50.0, params);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_NEAR(cents.quantities[i], dollars.quantities[i], 1e-9 * 50);
    EXPECT_EQ(cents.iterations, dollars.iterations);
    EXPECT_NEAR(cents.prices[i], 100 * dollars.prices[i], 1e-9 * std::abs(cents.prices[i]));
  }
}

TEST(DemandAdmm, ResidualsEventuallyDecrease) {
  const std::vector<LoadAggregator> las{{"A", 60, 0.3, 0, {}}, {"B", 40, 0.2, 0, {}},
                                        {"C", 90, 0.5, 0, {}}};
  const std::vector<double> p{0.3, 0.4, 0.3};
  Trace trace;
  demand_admm_solve(las, p, 80.0, AdmmParams{}, MarketKind::power, &trace);
  std::vector<double> primal;
  for (std::size_t r = 0; r < trace.size(); r += las.size()) primal.push_back(trace[r].primal_res);
  const std::size_t tail = primal.size() / 2;
  for (std::size_t k = tail + 1; k < primal.size(); ++k) EXPECT_LE(primal[k], primal[k - 1] * (1 + 1e-9));
}

TEST(DemandAdmm, IterationCapThrowsWithTrace) {
  const auto las = identical_las(3);
  AdmmParams params;
  params.max_iterations = 2;
  params.eps_pri = params.eps_dual = 1e-15;
  Trace trace;
  try {
    demand_admm_solve(las, std::vector<double>(3, 1.0 / 3), 30.0, params, MarketKind::power, &trace);
    FAIL() << "expected NonConvergenceError";
  } catch (const NonConvergenceError& e) {
    EXPECT_EQ(e.trace().size(), 6u);
  }
}

TEST(SupplyAdmm, SymmetricPlayersSplitEvenly) {
  const auto esps = identical_esps(4);
  const auto r = supply_admm_solve(esps, std::vector<double>(4, 0.25), 40.0, AdmmParams{});
  for (double s : r.quantities) EXPECT_NEAR(s, 10.0, 1e-3);
}

TEST(SupplyAdmm, MatchesDirectSolverThreeEsps) {
  const std::vector<EnergyServiceProvider> esps{{"A", 1, 0, 10}, {"B", 1, 0, 10}, {"C", 2, 0, 10}};
  const std::vector<double> q(3, 1.0 / 3);
  const auto r = supply_admm_solve(esps, q, 3.0, AdmmParams{});
  const auto expect = supply_split_oracle(esps, q, 3.0);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(r.quantities[j], expect[j], 1e-3);
}

TEST(SupplyAdmm, StationarityAndAllocationConsistency) {
  Scenario sc;
  sc.las = {{"A", 60, 0.3, 0, {}}, {"B", 40, 0.2, 0, {}}};
  sc.esps = {{"X", 0.1, 3, 100}, {"Y", 0.2, 1, 100}, {"Z", 0.3, 2, 100}, {"W", 0.15, 4, 100}};
  const std::vector<double> q{0.3, 0.2, 0.25, 0.25};
  const double D = 60.0;
  const AdmmParams params;
  const auto r = supply_admm_solve(sc.esps, q, D, params);
  const auto cleared = supply_allocation(r.quotes, D);
  EXPECT_LT(supply_stationarity_residual(sc, r.quantities, q, D, cleared.price), 1e-4);
  for (std::size_t j = 0; j < 4; ++j) {
    EXPECT_NEAR(cleared.supplies[j], r.quantities[j], params.eps_pri * D);
    EXPECT_NEAR(r.quotes[j], r.prices[j] * (D - r.quantities[j]),
                params.rho * params.eps_pri * D * (D - r.quantities[j]));
  }
}

TEST(ResidualBalancing, MovesTowardsTheLargerResidual) {
  AdmmParams p;
  p.adaptive_rho = true;
  EXPECT_DOUBLE_EQ(balanced_rho(p, 1.0, 1.0, 0.01, 5), 2.0);
  EXPECT_DOUBLE_EQ(balanced_rho(p, 1.0, 0.01, 1.0, 5), 0.5);
  EXPECT_DOUBLE_EQ(balanced_rho(p, 1.0, 1.0, 0.5, 5), 1.0);
  EXPECT_DOUBLE_EQ(balanced_rho(p, 1.0, 1.0, 0.01, 4), 1.0);
  EXPECT_DOUBLE_EQ(balanced_rho(p, 1000.0, 1.0, 0.01, 5), 1000.0);
  p.adaptive_rho = false;
  EXPECT_DOUBLE_EQ(balanced_rho(p, 1.0, 1.0, 0.01, 5), 1.0);
}
