#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dadp/atc_coordinator.hpp"
#include "dadp/sim/message_bus.hpp"

namespace dadp::sim {

struct SceneResult {
  std::string scene_id;
  std::optional<MarketOutcome> outcome;
  std::string error;  ///< set when the scene failed validation or did not converge
};

/// One player in one scene: the data behind the per-scene bid, demand and
/// weight plots.
struct SeriesPoint {
  std::string scene_id;
  Role role{Role::la};
  std::string player_id;
  double quote{};     ///< bid b_i or offer a_j
  double quantity{};  ///< d_i or s_j
  double weight{};    ///< p_i or q_j
};

struct SweepReport {
  std::vector<SceneResult> scenes;
  std::vector<SeriesPoint> series;

  std::size_t failures() const;
};

/// Runs every scene independently; a failing scene is recorded and the
/// sweep moves on.
SweepReport run_scene_sweep(const std::vector<Scenario>& scenes, const DadpParams& params = {});

}  // namespace dadp::sim
