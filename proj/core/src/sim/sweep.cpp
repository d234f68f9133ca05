#include "dadp/sim/sweep.hpp"

#include <algorithm>

namespace dadp::sim {

std::size_t SweepReport::failures() const {
  return static_cast<std::size_t>(std::count_if(
      scenes.begin(), scenes.end(), [](const SceneResult& r) { return !r.outcome; }));
}

SweepReport run_scene_sweep(const std::vector<Scenario>& scenes, const DadpParams& params) {
  SweepReport report;
  for (const auto& sc : scenes) {
    SceneResult result;
    result.scene_id = sc.scene_id;
    try {
      result.outcome = run_dadp(sc, params);
    } catch (const std::exception& e) {
      result.error = e.what();
    }
    if (result.outcome) {
      const auto& o = *result.outcome;
      for (std::size_t i = 0; i < o.la_ids.size(); ++i) {
        report.series.push_back({sc.scene_id, Role::la, o.la_ids[i], o.bids[i].amount,
                                 o.demands[i], o.p.values[i]});
      }
      for (std::size_t j = 0; j < o.esp_ids.size(); ++j) {
        report.series.push_back({sc.scene_id, Role::esp, o.esp_ids[j], o.offers[j].amount,
                                 o.supplies[j], o.q.values[j]});
      }
    }
    report.scenes.push_back(std::move(result));
  }
  return report;
}

}  // namespace dadp::sim
