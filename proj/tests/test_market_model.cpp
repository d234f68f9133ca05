#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "dadp/market_model.hpp"
#include "oracles.hpp"

using namespace dadp;

namespace {

LoadAggregator la(double alpha, double beta, double d_min = 0.0) {
  return {"LA", alpha, beta, d_min, std::nullopt};
}

EnergyServiceProvider esp(double m, double n, double s_max = 100.0) { return {"ESP", m, n, s_max}; }

ThermalEnvelope envelope(double t_min, double t_max, double t_cur, double t_out, double R,
                         double C, double dt) {
  return {R, C, t_min, t_max, t_cur, t_out, dt};
}

Scenario small_power() {
  Scenario sc;
  sc.las = {{"LA1", 10, 1, 0, {}}, {"LA2", 8, 1, 0, {}}};
  sc.esps = {{"ESP1", 1, 1, 10}, {"ESP2", 1, 2, 10}, {"ESP3", 2, 1, 10}};
  return sc;
}

}  // namespace

TEST(Value, HandEvaluations) {
  EXPECT_DOUBLE_EQ(value(la(4, 1), 0.0), 0.0);
  EXPECT_DOUBLE_EQ(value(la(4, 1), 2.0), 4.0);
  EXPECT_DOUBLE_EQ(value(la(10, 1), 5.0), 25.0);
}

TEST(Value, NegativeDemandIsDomainError) {
  EXPECT_THROW(value(la(4, 1), -0.1), DomainError);
}

TEST(Value, StrictlyConcave) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 20.0), w(0.01, 0.99);
  const auto l = la(50, 0.7);
  for (int t = 0; t < 200; ++t) {
    const double a = u(rng), b = u(rng), lam = w(rng);
    if (std::abs(a - b) < 1e-6) continue;
    EXPECT_GT(value(l, lam * a + (1 - lam) * b), lam * value(l, a) + (1 - lam) * value(l, b));
  }
}

TEST(Cost, HandEvaluations) {
  EXPECT_DOUBLE_EQ(cost(esp(1, 2), -3.0), 0.0);
  EXPECT_DOUBLE_EQ(cost(esp(1, 2), 0.0), 0.0);
  EXPECT_DOUBLE_EQ(cost(esp(1, 2), 2.0), 8.0);
}

TEST(Cost, ContinuousAtZeroAndIncreasing) {
  const auto e = esp(0.3, 2.0);
  EXPECT_NEAR(cost(e, 1e-12), 0.0, 1e-10);
  double prev = 0.0;
  for (double s = 0.01; s < 50.0; s += 0.37) {
    EXPECT_GT(cost(e, s), prev);
    prev = cost(e, s);
  }
}

TEST(ModifiedValue, MatchesQuadratureOnExamples) {
  EXPECT_DOUBLE_EQ(modified_value(la(4, 1), 0.0, 1.0, 4.0), 0.0);
  EXPECT_NEAR(modified_value(la(4, 1), 1.0, 1.0, 4.0), 2.666666666666667, 1e-12);
  EXPECT_NEAR(modified_value(la(4, 1), 1.0, 2.0, 4.0), 1.333333333333333, 1e-12);
  EXPECT_NEAR(modified_value(la(4, 1), 1.0, 1.0, 4.0), oracle::modified_value(4, 1, 1, 1, 4), 1e-12);
}

TEST(ModifiedValue, MatchesQuadratureOnRandomDraws) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> a(1, 100), b(0.01, 1), p(0.05, 1), S(1, 200), f(0, 1);
  for (int t = 0; t < 100; ++t) {
    const double alpha = a(rng), beta = b(rng), w = p(rng), total = S(rng);
    const double d = f(rng) * total;
    const double expect = oracle::modified_value(alpha, beta, d, w, total);
    EXPECT_NEAR(modified_value(la(alpha, beta), d, w, total), expect,
                1e-8 * std::max(1.0, std::abs(expect)));
  }
}

TEST(ModifiedValue, RejectsBadWeightAndSupply) {
  EXPECT_THROW(modified_value(la(4, 1), 1, 0.0, 4), DomainError);
  EXPECT_THROW(modified_value(la(4, 1), 1, 1.0, 0.0), DomainError);
}

TEST(ModifiedCost, MatchesQuadratureOnExamples) {
  EXPECT_DOUBLE_EQ(modified_cost(esp(1, 0), 0.0, 1.0, 1.0, 3), 0.0);
  EXPECT_NEAR(modified_cost(esp(1, 0), 1.0, 1.0, 1.0, 3), 1.666666666666667, 1e-12);
  EXPECT_NEAR(modified_cost(esp(1, 0), 1.0, 0.5, 1.0, 3), 3.333333333333333, 1e-12);
}

TEST(ModifiedCost, MatchesQuadratureOnRandomDraws) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> m(0.01, 2), n(0, 10), q(0.05, 1), D(1, 200), f(0, 1);
  std::uniform_int_distribution<int> J(3, 8);
  for (int t = 0; t < 100; ++t) {
    const double mm = m(rng), nn = n(rng), w = q(rng), total = D(rng);
    const int count = J(rng);
    const double s = f(rng) * total;
    const double expect = oracle::modified_cost(mm, nn, s, w, total, count);
    EXPECT_NEAR(modified_cost(esp(mm, nn), s, w, total, static_cast<std::size_t>(count)), expect,
                1e-8 * std::max(1.0, std::abs(expect)));
  }
}

TEST(ModifiedCost, TwoEspsIsDomainError) {
  EXPECT_THROW(modified_cost(esp(1, 0), 1.0, 1.0, 1.0, 2), DomainError);
}

TEST(HeatBounds, PinnedTemperatureIsSteadyState) {
  const auto b = heat_demand_bounds(envelope(20, 20, 20, 0, 1, 3, 1));
  EXPECT_NEAR(b.p_min, 20.0, 1e-9);
  EXPECT_NEAR(b.p_max, 20.0, 1e-9);
}

TEST(HeatBounds, HandEvaluation) {
  const auto b = heat_demand_bounds(envelope(18, 24, 20, 0, 1, 1, 1));
  EXPECT_NEAR(b.p_min, 16.836, 1e-3);
  EXPECT_NEAR(b.p_max, 26.328, 1e-3);
}

TEST(HeatBounds, MatchSimulatedEnvelope) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> R(0.5, 4), C(0.5, 4), tout(-15, 10), dt(0.25, 2);
  for (int t = 0; t < 20; ++t) {
    const auto env = envelope(18, 23, 20.5, tout(rng), R(rng), C(rng), dt(rng));
    const auto b = heat_demand_bounds(env);
    const double lo = oracle::power_for_target(env.t_in_current, env.t_out, env.t_in_min,
                                               env.resistance, env.capacity, env.dt);
    const double hi = oracle::power_for_target(env.t_in_current, env.t_out, env.t_in_max,
                                               env.resistance, env.capacity, env.dt);
    EXPECT_NEAR(b.p_min, lo, 1e-6 * std::max(1.0, std::abs(lo)));
    EXPECT_NEAR(b.p_max, hi, 1e-6 * std::max(1.0, std::abs(hi)));
  }
}

TEST(HeatBounds, WideningTopRaisesOnlyMax) {
  const auto a = heat_demand_bounds(envelope(18, 24, 20, 0, 1, 1, 1));
  const auto b = heat_demand_bounds(envelope(18, 26, 20, 0, 1, 1, 1));
  EXPECT_DOUBLE_EQ(a.p_min, b.p_min);
  EXPECT_GT(b.p_max, a.p_max);
}

TEST(HeatBounds, ColderOutsideRaisesBoth) {
  const auto warm = heat_demand_bounds(envelope(18, 24, 20, 5, 2, 1, 1));
  const auto cold = heat_demand_bounds(envelope(18, 24, 20, -5, 2, 1, 1));
  EXPECT_GT(cold.p_min, warm.p_min);
  EXPECT_GT(cold.p_max, warm.p_max);
}

TEST(HeatBounds, FloorAndCapFollowEnvelope) {
  LoadAggregator l = la(40, 0.2, 1.0);
  l.thermal = envelope(18, 24, 20, 0, 1, 1, 2);
  const auto b = heat_demand_bounds(*l.thermal);
  EXPECT_DOUBLE_EQ(demand_floor(l, MarketKind::heat), std::max(1.0, b.p_min * 2));
  EXPECT_DOUBLE_EQ(demand_cap(l, MarketKind::heat), b.p_max * 2);
  EXPECT_DOUBLE_EQ(demand_floor(l, MarketKind::power), 1.0);
  EXPECT_DOUBLE_EQ(demand_cap(l, MarketKind::power), 40 / (2 * 0.2));
}

TEST(DemandAllocation, Examples) {
  EXPECT_EQ(demand_allocation(std::vector<double>{1, 1, 1}, 9), (std::vector<double>{3, 3, 3}));
  EXPECT_EQ(demand_allocation(std::vector<double>{1, 1, 2}, 8), (std::vector<double>{2, 2, 4}));
  EXPECT_EQ(demand_allocation(std::vector<double>{5, 0}, 7), (std::vector<double>{7, 0}));
}

TEST(DemandAllocation, ZeroBidsAreDegenerate) {
  EXPECT_THROW(demand_allocation(std::vector<double>{0, 0}, 7), DegenerateMarketError);
}

TEST(DemandAllocation, ConservesEnergy) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> b(0, 100);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> bids(2 + t % 5);
    for (auto& x : bids) x = b(rng);
    const double S = 1 + b(rng);
    const auto d = demand_allocation(bids, S);
    EXPECT_NEAR(std::accumulate(d.begin(), d.end(), 0.0), S, 1e-9 * S);
  }
}

TEST(SupplyAllocation, Examples) {
  const auto sym = supply_allocation(std::vector<double>{2, 2, 2}, 1);
  EXPECT_DOUBLE_EQ(sym.price, 3.0);
  for (double s : sym.supplies) EXPECT_NEAR(s, 1.0 / 3.0, 1e-15);

  const auto r = supply_allocation(std::vector<double>{1, 2, 3}, 6);
  EXPECT_DOUBLE_EQ(r.price, 0.5);
  EXPECT_NEAR(r.supplies[0], 4.0, 1e-12);
  EXPECT_NEAR(r.supplies[1], 2.0, 1e-12);
  EXPECT_NEAR(r.supplies[2], 0.0, 1e-12);
}

TEST(SupplyAllocation, RejectsBadOffersAndTwoEsps) {
  EXPECT_THROW(supply_allocation(std::vector<double>{1, 0, 3}, 6), InvalidOfferError);
  EXPECT_THROW(supply_allocation(std::vector<double>{1, 2}, 6), DomainError);
}

TEST(SupplyAllocation, ConservesEnergyAndIsAntiMonotone) {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> a(0.1, 10);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> offers(3 + t % 4);
    for (auto& x : offers) x = a(rng);
    const double D = 1 + 10 * a(rng);
    const auto r = supply_allocation(offers, D);
    EXPECT_NEAR(std::accumulate(r.supplies.begin(), r.supplies.end(), 0.0), D, 1e-9 * D);
    for (double s : r.supplies) EXPECT_GE(s, 0.0);
    auto raised = offers;
    raised[0] *= 1.2;
    EXPECT_LE(supply_allocation(raised, D).supplies[0], r.supplies[0] + 1e-12);
  }
}

TEST(Validation, SmallestLegalInstance) {
  EXPECT_NO_THROW(validate_scenario(small_power()));
}

TEST(Validation, TwoEspsNamesConstraint) {
  auto sc = small_power();
  sc.esps.pop_back();
  try {
    validate_scenario(sc);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.constraint(), "J > 2");
  }
}

TEST(Validation, OneLaNamesConstraint) {
  auto sc = small_power();
  sc.las.pop_back();
  try {
    validate_scenario(sc);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.constraint(), "I > 1");
  }
}

TEST(Validation, HeatLaWithoutEnvelopeIsNamed) {
  auto sc = small_power();
  sc.market_kind = MarketKind::heat;
  try {
    validate_scenario(sc);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.constraint(), "thermal envelope");
    EXPECT_NE(std::string(e.what()).find("LA1"), std::string::npos);
  }
}

TEST(Validation, DuplicateIds) {
  auto sc = small_power();
  sc.esps[1].id = "ESP1";
  EXPECT_THROW(validate_scenario(sc), ValidationError);
}

TEST(SocialWelfare, MatchesPrimitives) {
  const auto sc = small_power();
  const std::vector<double> d{3, 2}, s{2, 2, 1};
  const double expect = value(sc.las[0], 3) + value(sc.las[1], 2) - cost(sc.esps[0], 2) -
                        cost(sc.esps[1], 2) - cost(sc.esps[2], 1);
  EXPECT_DOUBLE_EQ(social_welfare(sc, d, s), expect);
}
