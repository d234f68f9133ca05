// dadp: run, compare and audit the distributed double auction from the shell.
//
// Exit codes: 0 converged and clean, 1 bad input, 2 no convergence,
// 3 audit violations.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "dadp/baselines_oracle.hpp"
#include "dadp/sim/bus_participants.hpp"
#include "dadp/sim/instances.hpp"
#include "dadp/sim/message_bus.hpp"
#include "dadp/sim/outputs.hpp"
#include "dadp/sim/scenario_io.hpp"
#include "dadp/sim/sweep.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kBadInput = 1;
constexpr int kNoConvergence = 2;
constexpr int kAuditViolation = 3;

using namespace dadp;
using namespace dadp::sim;

struct Source {
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::string market;
};

LoadedScenario load(const Source& src) {
  LoadedScenario loaded;
  if (!src.scenario.empty()) {
    loaded = load_scenario(src.scenario);
    if (!src.market.empty()) {
      loaded.scenario.market_kind = src.market == "heat" ? MarketKind::heat : MarketKind::power;
      validate_scenario(loaded.scenario);
    }
  } else if (src.seed) {
    const auto kind = src.market == "heat" ? MarketKind::heat : MarketKind::power;
    loaded.scenario = random_scenario(*src.seed, {}, kind);
  } else {
    throw MarketError("give --scenario <file> or --seed <u64>");
  }
  return loaded;
}

void add_source(CLI::App* cmd, Source& src) {
  cmd->add_option("--scenario", src.scenario, "scenario file (JSON)");
  cmd->add_option("--seed", src.seed, "generate a random instance from this seed");
  cmd->add_option("--market", src.market, "override market kind")
      ->check(CLI::IsMember({"power", "heat"}));
}

void print_outcome(const MarketOutcome& o) {
  std::printf("%-8s %-6s sw=%.6g value=%.6g cost=%.6g energy=%.6g/%.6g surplus=%.6g\n",
              o.converged ? "ok" : "NOCONV", to_string(o.market_kind), o.social_welfare,
              o.total_value, o.total_cost, o.total_demand, o.total_supply, o.budget_surplus);
  std::printf("rounds: outer=%d weight=%d inner=%d (longest %d)\n", o.iterations.outer,
              o.iterations.weight_rounds, o.iterations.inner, o.iterations.max_inner);
  for (std::size_t i = 0; i < o.la_ids.size(); ++i) {
    std::printf("  %-10s d=%10.4f b=%12.4f p=%.6f\n", o.la_ids[i].c_str(), o.demands[i],
                o.bids[i].amount, o.p.values[i]);
  }
  for (std::size_t j = 0; j < o.esp_ids.size(); ++j) {
    std::printf("  %-10s s=%10.4f a=%12.4f q=%.6f\n", o.esp_ids[j].c_str(), o.supplies[j],
                o.offers[j].amount, o.q.values[j]);
  }
}

int cmd_run(const Source& src, const std::string& out_dir) {
  const auto loaded = load(src);
  BusRun run;
  try {
    run = run_dadp_on_bus(loaded.scenario, loaded.params);
  } catch (const NonConvergenceError& e) {
    std::fprintf(stderr, "dadp: %s\n", e.what());
    return kNoConvergence;
  }
  print_outcome(run.outcome);
  for (const auto& v : run.violations) std::printf("audit: %s\n", format_violation(v).c_str());
  if (!out_dir.empty()) {
    RunArtifacts a;
    a.outcome = run.outcome;
    a.log = run.log;
    a.violations = run.violations;
    emit_outputs(a, out_dir);
  }
  if (!run.violations.empty()) return kAuditViolation;
  return run.outcome.converged ? kOk : kNoConvergence;
}

int cmd_sweep(const std::string& scenes_file, const std::string& out_dir) {
  const auto sweep = load_sweep(scenes_file);
  const auto report = run_scene_sweep(sweep.scenes, sweep.params);
  for (const auto& s : report.scenes) {
    if (s.outcome) {
      std::printf("%-8s sw=%.6g energy=%.6g outer=%d\n", s.scene_id.c_str(),
                  s.outcome->social_welfare, s.outcome->total_demand,
                  s.outcome->iterations.outer);
    } else {
      std::printf("%-8s FAILED %s\n", s.scene_id.c_str(), s.error.c_str());
    }
  }
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream(std::filesystem::path(out_dir) / "sweep.json") << sweep_to_json(report);
    std::ofstream series(std::filesystem::path(out_dir) / "series.csv");
    write_sweep_series_csv(series, report);
  }
  return report.failures() == 0 ? kOk : kNoConvergence;
}

int cmd_compare(const Source& src, const std::string& mechanisms, const std::string& out_dir) {
  const auto loaded = load(src);
  std::vector<Mechanism> which;
  std::stringstream ss(mechanisms);
  std::string name;
  while (std::getline(ss, name, ',')) {
    if (name.empty()) continue;
    const auto m = parse_mechanism(name);
    if (!m) throw MarketError("unknown mechanism '" + name + "'");
    which.push_back(*m);
  }
  auto params = loaded.params;
  params.record_trace = false;
  const auto reports = compare_mechanisms(loaded.scenario, params, which);
  std::printf("%-8s %12s %12s %12s %12s %14s\n", "mech", "energy", "cost", "value", "sw",
              "budget");
  bool failed = false;
  for (const auto& r : reports) {
    if (!r.ok()) {
      std::printf("%-8s error: %s\n", to_string(r.mechanism), r.error.c_str());
      failed = true;
      continue;
    }
    std::printf("%-8s %12.4f %12.4f %12.4f %12.4f %14.4f\n", to_string(r.mechanism), r.energy,
                r.cost, r.value, r.sw, r.budget_surplus);
  }
  if (!out_dir.empty()) {
    RunArtifacts a;
    a.comparison = reports;
    emit_outputs(a, out_dir);
    std::ofstream(std::filesystem::path(out_dir) / "comparison.json")
        << comparison_to_json(reports);
  }
  return failed ? kNoConvergence : kOk;
}

int cmd_audit(const std::string& log_file) {
  std::ifstream in(log_file);
  if (!in) throw MarketError("cannot open " + log_file);
  const auto log = read_log_jsonl(in);
  const auto violations = audit(log);
  for (const auto& v : violations) std::printf("%s\n", format_violation(v).c_str());
  std::printf("%zu messages, %zu violations\n", log.size(), violations.size());
  return violations.empty() ? kOk : kAuditViolation;
}

int cmd_generate(const Source& src, const std::string& out_file) {
  const auto loaded = load(src);
  const std::string text = scenario_to_json(loaded.scenario, loaded.params);
  if (out_file.empty() || out_file == "-") {
    std::cout << text;
  } else {
    std::ofstream out(out_file);
    out << text;
    if (!out) {
      std::fprintf(stderr, "error: cannot write %s\n", out_file.c_str());
      return kBadInput;
    }
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"distributed double auction with discriminatory pricing"};
  app.require_subcommand(1);

  Source run_src, cmp_src, gen_src;
  std::string run_out, sweep_file, sweep_out, cmp_mech = "dadp,kel,pool,vcg", cmp_out, log_file,
                                              gen_out;

  auto* run = app.add_subcommand("run", "clear one market over the message bus");
  add_source(run, run_src);
  run->add_option("--out", run_out, "write outcome.json, trace.csv, messages.jsonl, audit.log");

  auto* sweep = app.add_subcommand("sweep", "run every scene of a sweep file");
  sweep->add_option("--scenes", sweep_file, "sweep file (JSON)")->required();
  sweep->add_option("--out", sweep_out, "write sweep.json and series.csv");

  auto* cmp = app.add_subcommand("compare", "compare mechanisms on one scenario");
  add_source(cmp, cmp_src);
  cmp->add_option("--mechanisms", cmp_mech, "comma-separated: oracle,dadp,kel,pool,vcg");
  cmp->add_option("--out", cmp_out, "write comparison.csv and comparison.json");

  auto* aud = app.add_subcommand("audit", "check a message log for information leaks");
  aud->add_option("--log", log_file, "messages.jsonl")->required();

  auto* gen = app.add_subcommand("generate", "print a random scenario file");
  add_source(gen, gen_src);
  gen->add_option("--out", gen_out, "output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kBadInput;
  }

  try {
    if (*run) return cmd_run(run_src, run_out);
    if (*sweep) return cmd_sweep(sweep_file, sweep_out);
    if (*cmp) return cmd_compare(cmp_src, cmp_mech, cmp_out);
    if (*aud) return cmd_audit(log_file);
    if (*gen) return cmd_generate(gen_src, gen_out);
  } catch (const NonConvergenceError& e) {
    std::fprintf(stderr, "dadp: %s\n", e.what());
    return kNoConvergence;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "dadp: %s\n", e.what());
    return kBadInput;
  }
  return kBadInput;
}
