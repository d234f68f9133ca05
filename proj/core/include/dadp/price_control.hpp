#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace dadp {

enum class Side { demand, supply };

/// Discriminatory price weights for one market side. Private to the ETC and
/// the player each entry belongs to.
struct PriceWeights {
  std::vector<double> values;
  Side side{Side::demand};

  std::size_t size() const noexcept { return values.size(); }
  friend bool operator==(const PriceWeights&, const PriceWeights&) = default;
};

inline constexpr double kWeightFloor = 1e-8;

double l1_norm(std::span<const double> v) noexcept;

PriceWeights uniform_weights(std::size_t count, Side side);

/// Scales the weights to unit L1 norm.
PriceWeights normalized(PriceWeights weights);

/// Bracket of the demand-side weight law,
///   (S - d) / (I - 1) - p S / ||p||_1.
std::vector<double> demand_weight_bracket(const PriceWeights& p, std::span<const double> demands,
                                          double total_supply);

/// Bracket of the supply-side weight law,
///   ((J - 2) D + s) / (J - 1)^2 - q D / ||q||_1.
std::vector<double> supply_weight_bracket(const PriceWeights& q, std::span<const double> supplies,
                                          double total_demand);

/// p' = normalize(max(p + delta * bracket, floor)).
PriceWeights update_demand_weights(const PriceWeights& p, std::span<const double> demands,
                                   double total_supply, double delta,
                                   double floor = kWeightFloor);

PriceWeights update_supply_weights(const PriceWeights& q, std::span<const double> supplies,
                                   double total_demand, double delta,
                                   double floor = kWeightFloor);

/// Distance of the weights from the fixed point of their update law:
///   demand: p_i / ||p||_1 - (S - d_i) / ((I - 1) S)
///   supply: q_j / ||q||_1 - ((J - 2) D + s_j) / ((J - 1)^2 D)
/// `total_opposite` is S for the demand side and D for the supply side.
std::vector<double> weight_fixed_point_residual(const PriceWeights& weights,
                                                std::span<const double> allocation,
                                                double total_opposite);

/// Step-size control for the weight loop: halves delta once some component
/// of the update bracket has flipped sign on `window` consecutive rounds.
class WeightStepController {
public:
  explicit WeightStepController(double delta, int window = 3) : delta_(delta), window_(window) {}

  double delta() const noexcept { return delta_; }
  int halvings() const noexcept { return halvings_; }

  /// Feed the bracket of the round just taken. Returns true if delta halved.
  bool observe(std::span<const double> bracket);

private:
  double delta_;
  int window_;
  int halvings_{0};
  std::vector<std::vector<int>> history_;
};

}  // namespace dadp
