#include "dadp/price_control.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dadp {

double l1_norm(std::span<const double> v) noexcept {
  double sum = 0.0;
  for (double x : v) sum += std::abs(x);
  return sum;
}

PriceWeights uniform_weights(std::size_t count, Side side) {
  return {std::vector<double>(count, 1.0 / static_cast<double>(count)), side};
}

PriceWeights normalized(PriceWeights weights) {
  const double norm = l1_norm(weights.values);
  for (double& w : weights.values) w /= norm;
  return weights;
}

std::vector<double> demand_weight_bracket(const PriceWeights& p, std::span<const double> demands,
                                          double total_supply) {
  const double players_less_one = static_cast<double>(p.size() - 1);
  const double norm = l1_norm(p.values);
  std::vector<double> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    out[i] = (total_supply - demands[i]) / players_less_one - p.values[i] * total_supply / norm;
  }
  return out;
}

std::vector<double> supply_weight_bracket(const PriceWeights& q, std::span<const double> supplies,
                                          double total_demand) {
  const double j = static_cast<double>(q.size());
  const double norm = l1_norm(q.values);
  std::vector<double> out(q.size());
  for (std::size_t k = 0; k < q.size(); ++k) {
    out[k] = ((j - 2.0) * total_demand + supplies[k]) / ((j - 1.0) * (j - 1.0)) -
             q.values[k] * total_demand / norm;
  }
  return out;
}

namespace {

PriceWeights step(const PriceWeights& w, std::span<const double> bracket, double delta,
                  double floor) {
  PriceWeights next = w;
  for (std::size_t i = 0; i < w.size(); ++i) {
    next.values[i] = std::max(w.values[i] + delta * bracket[i], floor);
  }
  return normalized(std::move(next));
}

}  // namespace

PriceWeights update_demand_weights(const PriceWeights& p, std::span<const double> demands,
                                   double total_supply, double delta, double floor) {
  return step(p, demand_weight_bracket(p, demands, total_supply), delta, floor);
}

PriceWeights update_supply_weights(const PriceWeights& q, std::span<const double> supplies,
                                   double total_demand, double delta, double floor) {
  return step(q, supply_weight_bracket(q, supplies, total_demand), delta, floor);
}

std::vector<double> weight_fixed_point_residual(const PriceWeights& w,
                                                std::span<const double> allocation,
                                                double total_opposite) {
  const double count = static_cast<double>(w.size());
  const double norm = l1_norm(w.values);
  std::vector<double> out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double share = w.values[i] / norm;
    if (w.side == Side::demand) {
      out[i] = share - (total_opposite - allocation[i]) / ((count - 1.0) * total_opposite);
    } else {
      out[i] = share - ((count - 2.0) * total_opposite + allocation[i]) /
                           ((count - 1.0) * (count - 1.0) * total_opposite);
    }
  }
  return out;
}

bool WeightStepController::observe(std::span<const double> bracket) {
  std::vector<int> signs(bracket.size());
  for (std::size_t i = 0; i < bracket.size(); ++i) {
    signs[i] = (bracket[i] > 0.0) - (bracket[i] < 0.0);
  }
  history_.push_back(std::move(signs));
  if (static_cast<int>(history_.size()) > window_) history_.erase(history_.begin());
  if (static_cast<int>(history_.size()) < window_) return false;

  for (std::size_t i = 0; i < bracket.size(); ++i) {
    bool alternating = true;
    for (std::size_t r = 1; r < history_.size() && alternating; ++r) {
      alternating = history_[r][i] * history_[r - 1][i] < 0;
    }
    if (alternating) {
      delta_ *= 0.5;
      ++halvings_;
      history_.clear();
      return true;
    }
  }
  return false;
}

}  // namespace dadp
