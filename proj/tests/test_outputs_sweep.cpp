#include <algorithm>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <gtest/gtest.h>

#include "dadp/sim/bus_participants.hpp"
#include "dadp/sim/instances.hpp"
#include "dadp/sim/outputs.hpp"
#include "dadp/sim/scenario_io.hpp"
#include "dadp/sim/sweep.hpp"

using namespace dadp;
using namespace dadp::sim;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("dadp_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

std::size_t line_count(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  std::string line;
  while (std::getline(in, line)) ++n;
  return n;
}

std::vector<Scenario> join_scenes() {
  return load_sweep(std::filesystem::path(DADP_SOURCE_DIR) / "scenarios" / "sweep_join.json").scenes;
}

double share(const MarketOutcome& o, const std::string& id) {
  const auto it = std::find(o.la_ids.begin(), o.la_ids.end(), id);
  return o.demands[static_cast<std::size_t>(it - o.la_ids.begin())] / o.total_demand;
}

}  // namespace

TEST(Numbers, ShortestRoundTrip) {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0, 1e-4}) {
    EXPECT_EQ(parse_double(format_double(x)), x);
  }
  EXPECT_EQ(format_double(0.5), "0.5");
  EXPECT_THROW(parse_double("1.5x"), MarketError);
  EXPECT_THROW(parse_double(""), MarketError);
}

TEST(TraceCsv, RoundTripIsExact) {
  const auto o = run_dadp(random_scenario(8));
  ASSERT_FALSE(o.trace.empty());
  std::stringstream ss;
  write_trace_csv(ss, o.trace, o.la_ids, o.esp_ids);
  std::string header;
  std::getline(std::stringstream(ss.str()), header);
  EXPECT_EQ(header, kTraceHeader);
  EXPECT_EQ(read_trace_csv(ss, o.la_ids, o.esp_ids), o.trace);
}

TEST(TraceCsv, UnknownPlayerIsRejected) {
  std::stringstream ss(std::string(kTraceHeader) + "\ndemand,1,1,1,ghost,1,1,1,0,0\n");
  EXPECT_THROW(read_trace_csv(ss, {"LA1"}, {"E1"}), MarketError);
}

TEST(ComparisonCsv, OneRowPerMechanism) {
  DadpParams p;
  p.record_trace = false;
  const auto reports = compare_mechanisms(random_scenario(9), p);
  std::stringstream ss;
  write_comparison_csv(ss, reports);
  std::string line;
  std::getline(ss, line);
  EXPECT_EQ(line, kComparisonHeader);
  std::size_t rows = 0;
  while (std::getline(ss, line)) {
    ++rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 5);
  }
  EXPECT_EQ(rows, reports.size());
}

TEST(EmitOutputs, WritesEveryArtifact) {
  const auto dir = temp_dir("emit");
  const auto run = run_dadp_on_bus(random_scenario(10));
  RunArtifacts a;
  a.outcome = run.outcome;
  a.log = run.log;
  a.violations = run.violations;
  DadpParams p;
  p.record_trace = false;
  a.comparison = compare_mechanisms(random_scenario(10), p);
  emit_outputs(a, dir);
  for (const char* f : {"outcome.json", "trace.csv", "comparison.csv", "messages.jsonl", "audit.log"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
  EXPECT_EQ(std::filesystem::file_size(dir / "audit.log"), 0u);
  EXPECT_EQ(line_count(dir / "trace.csv"), run.outcome.trace.size() + 1);
  EXPECT_EQ(line_count(dir / "messages.jsonl"), run.log.size());
  EXPECT_EQ(line_count(dir / "comparison.csv"), a.comparison.size() + 1);
  std::ifstream log(dir / "messages.jsonl");
  EXPECT_EQ(read_log_jsonl(log), run.log);
  std::filesystem::remove_all(dir);
}

TEST(EmitOutputs, AuditLogOnlyWhenNothingElse) {
  const auto dir = temp_dir("audit_only");
  emit_outputs({}, dir);
  EXPECT_TRUE(std::filesystem::exists(dir / "audit.log"));
  EXPECT_FALSE(std::filesystem::exists(dir / "outcome.json"));
  std::filesystem::remove_all(dir);
}

TEST(Sweep, JoiningLasDiluteIncumbents) {
  DadpParams p;
  p.record_trace = false;
  const auto scenes = join_scenes();
  ASSERT_EQ(scenes.size(), 4u);
  const auto report = run_scene_sweep(scenes, p);
  ASSERT_EQ(report.failures(), 0u);
  for (std::size_t s = 1; s < report.scenes.size(); ++s) {
    const auto& before = *report.scenes[s - 1].outcome;
    const auto& after = *report.scenes[s].outcome;
    for (const auto& id : before.la_ids) {
      EXPECT_LT(share(after, id), share(before, id)) << id << " in " << report.scenes[s].scene_id;
    }
  }
}

TEST(Sweep, HighestValueNewcomerTakesTheLargestShare) {
  DadpParams p;
  p.record_trace = false;
  const auto report = run_scene_sweep(join_scenes(), p);
  const auto& last = *report.scenes.back().outcome;
  const auto top = std::max_element(last.demands.begin(), last.demands.end()) - last.demands.begin();
  EXPECT_EQ(last.la_ids[static_cast<std::size_t>(top)], "LA5");
}

TEST(Sweep, SeriesCoversEveryPlayer) {
  DadpParams p;
  p.record_trace = false;
  const auto scenes = join_scenes();
  const auto report = run_scene_sweep(scenes, p);
  std::size_t expected = 0;
  for (const auto& sc : scenes) expected += sc.las.size() + sc.esps.size();
  EXPECT_EQ(report.series.size(), expected);
  std::stringstream ss;
  write_sweep_series_csv(ss, report);
  std::size_t lines = 0;
  std::string line;
  while (std::getline(ss, line)) ++lines;
  EXPECT_EQ(lines, expected + 1);
}

TEST(Sweep, FailingSceneIsRecordedAndSkipped) {
  auto scenes = join_scenes();
  scenes[1].esps.resize(2);
  DadpParams p;
  p.record_trace = false;
  const auto report = run_scene_sweep(scenes, p);
  ASSERT_EQ(report.scenes.size(), 4u);
  EXPECT_EQ(report.failures(), 1u);
  EXPECT_FALSE(report.scenes[1].outcome.has_value());
  EXPECT_NE(report.scenes[1].error.find("J > 2"), std::string::npos);
  EXPECT_TRUE(report.scenes[2].outcome.has_value());
  EXPECT_NE(sweep_to_json(report).find("J > 2"), std::string::npos);
}

TEST(Determinism, SameSeedSameBytes) {
  const auto sc = random_scenario(12);
  const auto a = run_dadp(sc);
  const auto b = run_dadp(sc);
  EXPECT_EQ(a, b);
  EXPECT_EQ(outcome_to_json(a), outcome_to_json(b));
  std::stringstream ta, tb;
  write_trace_csv(ta, a.trace, a.la_ids, a.esp_ids);
  write_trace_csv(tb, b.trace, b.la_ids, b.esp_ids);
  EXPECT_EQ(ta.str(), tb.str());
}

TEST(Instances, SeedDeterminesScenario) {
  const auto a = random_scenario(77), b = random_scenario(77), c = random_scenario(78);
  EXPECT_EQ(scenario_to_json(a), scenario_to_json(b));
  EXPECT_NE(scenario_to_json(a), scenario_to_json(c));
  EXPECT_NO_THROW(validate_scenario(a));
}
