#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dadp/atc_coordinator.hpp"
#include "dadp/baselines_oracle.hpp"
#include "dadp/sim/message_bus.hpp"
#include "dadp/sim/sweep.hpp"

namespace dadp::sim {

class OutputError : public MarketError {
public:
  using MarketError::MarketError;
};

/// Shortest decimal text that parses back to the same double.
std::string format_double(double x);
/// Throws MarketError when `text` is not entirely a number.
double parse_double(const std::string& text);

inline constexpr const char* kTraceHeader =
    "phase,m,n,k,player_id,quantity,shadow_price,weight,primal_res,dual_res";
inline constexpr const char* kComparisonHeader = "mechanism,energy,cost,value,sw,budget_surplus";

void write_trace_csv(std::ostream& out, const Trace& trace, const std::vector<std::string>& la_ids,
                     const std::vector<std::string>& esp_ids);
/// Inverse of write_trace_csv; player ids are mapped back to indices.
Trace read_trace_csv(std::istream& in, const std::vector<std::string>& la_ids,
                     const std::vector<std::string>& esp_ids);

void write_comparison_csv(std::ostream& out, const std::vector<MechanismReport>& reports);

/// Outcome as JSON, without the per-iteration trace.
std::string outcome_to_json(const MarketOutcome& outcome);
std::string comparison_to_json(const std::vector<MechanismReport>& reports);
std::string sweep_to_json(const SweepReport& report);
void write_sweep_series_csv(std::ostream& out, const SweepReport& report);

struct RunArtifacts {
  std::optional<MarketOutcome> outcome;
  std::vector<MechanismReport> comparison;
  std::vector<Message> log;
  std::vector<AuditViolation> violations;
};

/// Writes outcome.json and trace.csv (with an outcome), comparison.csv (with
/// reports), messages.jsonl (with a log) and audit.log (always; empty when
/// clean) into `dir`, creating it if needed.
void emit_outputs(const RunArtifacts& artifacts, const std::filesystem::path& dir);

}  // namespace dadp::sim
