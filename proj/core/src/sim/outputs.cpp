#include "dadp/sim/outputs.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "json.hpp"

namespace dadp::sim {

using nlohmann::json;

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& text) {
  if (text == "nan") return std::nan("");
  if (text == "inf") return INFINITY;
  if (text == "-inf") return -INFINITY;
  double x = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), x);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw MarketError("not a number: '" + text + "'");
  }
  return x;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

int parse_int(const std::string& text) {
  int x = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), x);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw MarketError("not an integer: '" + text + "'");
  }
  return x;
}

// nlohmann writes non-finite doubles as null; keep them readable instead.
json number(double x) {
  if (std::isfinite(x)) return x;
  return format_double(x);
}

json numbers(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(number(x));
  return a;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw OutputError("cannot write " + path.string());
  return out;
}

void close_checked(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw OutputError("write failed: " + path.string());
}

}  // namespace

void write_trace_csv(std::ostream& out, const Trace& trace, const std::vector<std::string>& la_ids,
                     const std::vector<std::string>& esp_ids) {
  out << kTraceHeader << '\n';
  for (const auto& r : trace) {
    const auto& ids = r.phase == Phase::demand ? la_ids : esp_ids;
    out << to_string(r.phase) << ',' << r.m << ',' << r.n << ',' << r.k << ','
        << ids.at(r.player) << ',' << format_double(r.quantity) << ','
        << format_double(r.shadow_price) << ',' << format_double(r.weight) << ','
        << format_double(r.primal_res) << ',' << format_double(r.dual_res) << '\n';
  }
}

Trace read_trace_csv(std::istream& in, const std::vector<std::string>& la_ids,
                     const std::vector<std::string>& esp_ids) {
  const auto index_of = [](const std::vector<std::string>& ids, const std::string& id) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] == id) return i;
    }
    throw MarketError("unknown player id '" + id + "'");
  };
  Trace trace;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1) {
      if (line != kTraceHeader) throw MarketError("trace.csv: unexpected header");
      continue;
    }
    if (line.empty()) continue;
    try {
      const auto c = split_csv(line);
      if (c.size() != 10) throw MarketError("expected 10 columns");
      TraceRecord r;
      if (c[0] == "demand") {
        r.phase = Phase::demand;
      } else if (c[0] == "supply") {
        r.phase = Phase::supply;
      } else {
        throw MarketError("bad phase '" + c[0] + "'");
      }
      r.m = parse_int(c[1]);
      r.n = parse_int(c[2]);
      r.k = parse_int(c[3]);
      r.player = index_of(r.phase == Phase::demand ? la_ids : esp_ids, c[4]);
      r.quantity = parse_double(c[5]);
      r.shadow_price = parse_double(c[6]);
      r.weight = parse_double(c[7]);
      r.primal_res = parse_double(c[8]);
      r.dual_res = parse_double(c[9]);
      trace.push_back(r);
    } catch (const MarketError& e) {
      throw MarketError("trace.csv line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return trace;
}

void write_comparison_csv(std::ostream& out, const std::vector<MechanismReport>& reports) {
  out << kComparisonHeader << '\n';
  for (const auto& r : reports) {
    out << to_string(r.mechanism);
    if (r.ok()) {
      out << ',' << format_double(r.energy) << ',' << format_double(r.cost) << ','
          << format_double(r.value) << ',' << format_double(r.sw) << ','
          << format_double(r.budget_surplus);
    } else {
      out << ",nan,nan,nan,nan,nan";
    }
    out << '\n';
  }
}

std::string outcome_to_json(const MarketOutcome& o) {
  json las = json::array();
  for (std::size_t i = 0; i < o.la_ids.size(); ++i) {
    las.push_back({{"id", o.la_ids[i]},
                   {"demand", number(o.demands[i])},
                   {"bid", number(o.bids[i].amount)},
                   {"weight", number(o.p.values[i])},
                   {"shadow_price", number(o.mu[i])},
                   {"payment", number(o.la_payments[i])}});
  }
  json esps = json::array();
  for (std::size_t j = 0; j < o.esp_ids.size(); ++j) {
    esps.push_back({{"id", o.esp_ids[j]},
                    {"supply", number(o.supplies[j])},
                    {"offer", number(o.offers[j].amount)},
                    {"weight", number(o.q.values[j])},
                    {"shadow_price", number(o.omega[j])},
                    {"revenue", number(o.esp_revenues[j])}});
  }
  json rounds = json::array();
  for (const auto& h : o.atc_history) {
    rounds.push_back({{"m", h.m},
                      {"estimated_total_supply", number(h.estimated_total_supply)},
                      {"estimated_total_demand", number(h.estimated_total_demand)},
                      {"demand_marginal", number(h.demand_marginal)},
                      {"supply_marginal", number(h.supply_marginal)},
                      {"chi", number(h.chi)},
                      {"gamma", number(h.gamma)},
                      {"sw", number(h.social_welfare)},
                      {"demand_weight_rounds", h.demand_weight_rounds},
                      {"supply_weight_rounds", h.supply_weight_rounds}});
  }
  json j = {{"scene_id", o.scene_id},
            {"market", to_string(o.market_kind)},
            {"converged", o.converged},
            {"total_demand", number(o.total_demand)},
            {"total_supply", number(o.total_supply)},
            {"value", number(o.total_value)},
            {"cost", number(o.total_cost)},
            {"sw", number(o.social_welfare)},
            {"budget_surplus", number(o.budget_surplus)},
            {"supply_clearing_price", number(o.clearing_price_supply)},
            {"iterations",
             {{"outer", o.iterations.outer},
              {"weight_rounds", o.iterations.weight_rounds},
              {"inner", o.iterations.inner},
              {"max_inner", o.iterations.max_inner},
              {"restarts", o.iterations.restarts}}},
            {"las", std::move(las)},
            {"esps", std::move(esps)},
            {"rounds", std::move(rounds)}};
  return j.dump(2) + "\n";
}

std::string comparison_to_json(const std::vector<MechanismReport>& reports) {
  json a = json::array();
  for (const auto& r : reports) {
    json j = {{"mechanism", to_string(r.mechanism)}};
    if (!r.ok()) {
      j["error"] = r.error;
    } else {
      j["energy"] = number(r.energy);
      j["cost"] = number(r.cost);
      j["value"] = number(r.value);
      j["sw"] = number(r.sw);
      j["budget_surplus"] = number(r.budget_surplus);
      if (r.price) j["price"] = number(*r.price);
      j["demands"] = numbers(r.demands);
      j["supplies"] = numbers(r.supplies);
      j["la_payments"] = numbers(r.la_payments);
      j["esp_payments"] = numbers(r.esp_payments);
      if (!r.notes.empty()) j["notes"] = r.notes;
    }
    a.push_back(std::move(j));
  }
  return a.dump(2) + "\n";
}

std::string sweep_to_json(const SweepReport& report) {
  json scenes = json::array();
  for (const auto& s : report.scenes) {
    json j = {{"scene_id", s.scene_id}, {"ok", s.outcome.has_value()}};
    if (s.outcome) {
      j["outcome"] = json::parse(outcome_to_json(*s.outcome));
    } else {
      j["error"] = s.error;
    }
    scenes.push_back(std::move(j));
  }
  return json{{"scenes", std::move(scenes)}}.dump(2) + "\n";
}

void write_sweep_series_csv(std::ostream& out, const SweepReport& report) {
  out << "scene_id,role,player_id,quote,quantity,weight\n";
  for (const auto& p : report.series) {
    out << p.scene_id << ',' << to_string(p.role) << ',' << p.player_id << ','
        << format_double(p.quote) << ',' << format_double(p.quantity) << ','
        << format_double(p.weight) << '\n';
  }
}

void emit_outputs(const RunArtifacts& a, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw OutputError("cannot create " + dir.string() + ": " + ec.message());

  if (a.outcome) {
    const auto p = dir / "outcome.json";
    auto out = open_out(p);
    out << outcome_to_json(*a.outcome);
    close_checked(out, p);

    const auto t = dir / "trace.csv";
    auto tout = open_out(t);
    write_trace_csv(tout, a.outcome->trace, a.outcome->la_ids, a.outcome->esp_ids);
    close_checked(tout, t);
  }
  if (!a.comparison.empty()) {
    const auto p = dir / "comparison.csv";
    auto out = open_out(p);
    write_comparison_csv(out, a.comparison);
    close_checked(out, p);
  }
  if (!a.log.empty()) {
    const auto p = dir / "messages.jsonl";
    auto out = open_out(p);
    write_log_jsonl(out, a.log);
    close_checked(out, p);
  }
  const auto p = dir / "audit.log";
  auto out = open_out(p);
  for (const auto& v : a.violations) out << format_violation(v) << '\n';
  close_checked(out, p);
}

}  // namespace dadp::sim
