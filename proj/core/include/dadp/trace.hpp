#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "dadp/errors.hpp"

namespace dadp {

enum class Phase { demand, supply };

const char* to_string(Phase phase) noexcept;

/// Position of an iterate inside the three nested loops: outer ATC round m,
/// weight round n, ADMM iteration k.
struct RoundIndex {
  int m{1};
  int n{1};
  int k{1};

  friend bool operator==(const RoundIndex&, const RoundIndex&) = default;
};

/// One row of the per-iteration trace; one record per player per iteration.
struct TraceRecord {
  Phase phase{Phase::demand};
  int m{};
  int n{};
  int k{};
  std::size_t player{};
  double quantity{};      ///< d_i or s_j computed at iteration k
  double shadow_price{};  ///< mu_i or omega_j after the ETC update
  double weight{};        ///< p_i or q_j in force during the iteration
  double primal_res{};
  double dual_res{};

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

using Trace = std::vector<TraceRecord>;

/// An iteration cap was hit. Carries whatever trace had been recorded.
class NonConvergenceError : public MarketError {
public:
  NonConvergenceError(const std::string& what, Trace trace)
      : MarketError(what), trace_(std::move(trace)) {}

  const Trace& trace() const noexcept { return trace_; }

private:
  Trace trace_;
};

}  // namespace dadp
