#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dadp/atc_coordinator.hpp"
#include "dadp/errors.hpp"
#include "dadp/market_model.hpp"

namespace dadp::sim {

/// Malformed scenario text. `line` is 1-based, 0 when unknown; `field` is a
/// path such as "las[1].alpha".
class ScenarioParseError : public MarketError {
public:
  ScenarioParseError(std::string source, int line, std::string field, const std::string& msg);

  int line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

private:
  int line_;
  std::string field_;
};

struct LoadedScenario {
  Scenario scenario;
  DadpParams params;
};

struct LoadedSweep {
  std::vector<Scenario> scenes;
  DadpParams params;
};

/// Parses and validates a scenario document. Throws ScenarioParseError on
/// syntax or type problems and ValidationError on model invariants.
LoadedScenario parse_scenario(const std::string& text, const std::string& source = "<string>");
LoadedScenario load_scenario(const std::filesystem::path& path);

/// A sweep file shares "market" and "algorithm" with a scenario and lists
/// its scenes under "scenes", each with its own "id", "las" and "esps".
LoadedSweep parse_sweep(const std::string& text, const std::string& source = "<string>");
LoadedSweep load_sweep(const std::filesystem::path& path);

/// Inverse of parse_scenario (algorithm section included).
std::string scenario_to_json(const Scenario& scenario, const DadpParams& params = {});

std::string read_text_file(const std::filesystem::path& path);

}  // namespace dadp::sim
