#include "dadp/sim/scenario_io.hpp"

#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "json.hpp"

namespace dadp::sim {

using nlohmann::json;

ScenarioParseError::ScenarioParseError(std::string source, int line, std::string field,
                                       const std::string& msg)
    : MarketError(source + (line > 0 ? ":" + std::to_string(line) : std::string()) +
                  (field.empty() ? std::string() : ": " + field) + ": " + msg),
      line_(line),
      field_(std::move(field)) {}

namespace {

// Forward iterator over text that tracks the line of the last character read.
class LineCountingIterator {
public:
  using iterator_category = std::forward_iterator_tag;
  using value_type = char;
  using difference_type = std::ptrdiff_t;
  using pointer = const char*;
  using reference = const char&;

  LineCountingIterator() = default;
  LineCountingIterator(const char* p, int* line) : p_(p), line_(line) {}

  reference operator*() const { return *p_; }
  LineCountingIterator& operator++() {
    if (*p_ == '\n') ++*line_;
    ++p_;
    return *this;
  }
  LineCountingIterator operator++(int) {
    auto tmp = *this;
    ++*this;
    return tmp;
  }
  friend bool operator==(const LineCountingIterator& a, const LineCountingIterator& b) {
    return a.p_ == b.p_;
  }

private:
  const char* p_{nullptr};
  int* line_{nullptr};
};

// SAX pass recording the line on which every value starts.
class LineRecorder {
public:
  explicit LineRecorder(const int* line) : line_(line) {}

  std::map<std::string, int> lines;

  bool null() { return scalar(); }
  bool boolean(bool) { return scalar(); }
  bool number_integer(json::number_integer_t) { return scalar(); }
  bool number_unsigned(json::number_unsigned_t) { return scalar(); }
  bool number_float(json::number_float_t, const std::string&) { return scalar(); }
  bool string(std::string&) { return scalar(); }
  bool binary(json::binary_t&) { return scalar(); }
  bool start_object(std::size_t) {
    record();
    stack_.push_back({false, 0, {}});
    return true;
  }
  bool end_object() {
    stack_.pop_back();
    advance();
    return true;
  }
  bool start_array(std::size_t) {
    record();
    stack_.push_back({true, 0, {}});
    return true;
  }
  bool end_array() {
    stack_.pop_back();
    advance();
    return true;
  }
  bool key(std::string& k) {
    stack_.back().key = k;
    return true;
  }
  bool parse_error(std::size_t, const std::string&, const nlohmann::detail::exception&) {
    return false;
  }

private:
  struct Frame {
    bool array;
    std::size_t index;
    std::string key;
  };

  void record() {
    std::string path;
    for (const auto& f : stack_) {
      if (f.array) {
        path += "[" + std::to_string(f.index) + "]";
      } else {
        if (!path.empty()) path += ".";
        path += f.key;
      }
    }
    lines.emplace(path, *line_);
  }

  // Array elements are numbered once they are complete.
  void advance() {
    if (!stack_.empty() && stack_.back().array) ++stack_.back().index;
  }

  bool scalar() {
    record();
    advance();
    return true;
  }

  const int* line_;
  std::vector<Frame> stack_;
};

class Document {
public:
  Document(const std::string& text, std::string source) : source_(std::move(source)) {
    try {
      root_ = json::parse(text);
    } catch (const json::parse_error& e) {
      int line = 1;
      for (std::size_t i = 0; i < e.byte && i < text.size(); ++i) {
        if (text[i] == '\n') ++line;
      }
      throw ScenarioParseError(source_, line, "", e.what());
    }
    int line = 1;
    LineRecorder rec(&line);
    LineCountingIterator first(text.data(), &line), last(text.data() + text.size(), &line);
    json::sax_parse(first, last, &rec);
    lines_ = std::move(rec.lines);
  }

  const json& root() const { return root_; }

  [[noreturn]] void fail(const std::string& path, const std::string& msg) const {
    throw ScenarioParseError(source_, line_of(path), path, msg);
  }

  int line_of(std::string path) const {
    while (true) {
      auto it = lines_.find(path);
      if (it != lines_.end()) return it->second;
      const auto cut = path.find_last_of(".[");
      if (cut == std::string::npos) return 0;
      path.resize(cut);
    }
  }

  const json& object(const json& parent, const std::string& key, const std::string& path) const {
    if (!parent.contains(key)) fail(path, "missing section");
    const json& v = parent.at(key);
    if (!v.is_object()) fail(path, "expected an object");
    return v;
  }

  const json& array(const json& parent, const std::string& key, const std::string& path) const {
    if (!parent.contains(key)) fail(path, "missing list");
    const json& v = parent.at(key);
    if (!v.is_array()) fail(path, "expected a list");
    return v;
  }

  double number(const json& obj, const std::string& key, const std::string& path) const {
    if (!obj.contains(key)) fail(path, "missing number");
    return as_number(obj.at(key), path);
  }

  double number_or(const json& obj, const std::string& key, const std::string& path,
                   double fallback) const {
    if (!obj.contains(key)) return fallback;
    return as_number(obj.at(key), path);
  }

  std::optional<double> optional_number(const json& obj, const std::string& key,
                                        const std::string& path) const {
    if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
    return as_number(obj.at(key), path);
  }

  int integer_or(const json& obj, const std::string& key, const std::string& path,
                 int fallback) const {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number_integer()) fail(path, "expected an integer");
    return v.get<int>();
  }

  bool boolean_or(const json& obj, const std::string& key, const std::string& path,
                  bool fallback) const {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_boolean()) fail(path, "expected true or false");
    return v.get<bool>();
  }

  std::string string(const json& obj, const std::string& key, const std::string& path) const {
    if (!obj.contains(key)) fail(path, "missing string");
    const json& v = obj.at(key);
    if (!v.is_string()) fail(path, "expected a string");
    return v.get<std::string>();
  }

private:
  double as_number(const json& v, const std::string& path) const {
    if (!v.is_number()) fail(path, "expected a number");
    return v.get<double>();
  }

  std::string source_;
  json root_;
  std::map<std::string, int> lines_;
};

MarketKind parse_kind(const Document& doc, const json& market, const std::string& path) {
  const std::string kind = market.contains("kind") ? doc.string(market, "kind", path) : "power";
  if (kind == "power" || kind == "electricity") return MarketKind::power;
  if (kind == "heat") return MarketKind::heat;
  doc.fail(path, "market kind must be \"power\" or \"heat\", got \"" + kind + "\"");
}

std::vector<LoadAggregator> parse_las(const Document& doc, const json& parent,
                                      const std::string& prefix) {
  std::vector<LoadAggregator> out;
  const std::string base = prefix + "las";
  const json& list = doc.array(parent, "las", base);
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string p = base + "[" + std::to_string(i) + "]";
    const json& o = list[i];
    if (!o.is_object()) doc.fail(p, "expected an object");
    LoadAggregator la;
    la.id = o.contains("id") ? doc.string(o, "id", p + ".id") : "LA" + std::to_string(i + 1);
    la.alpha = doc.number(o, "alpha", p + ".alpha");
    la.beta = doc.number(o, "beta", p + ".beta");
    la.d_min = doc.number_or(o, "d_min", p + ".d_min", 0.0);
    if (o.contains("thermal") && !o.at("thermal").is_null()) {
      const std::string tp = p + ".thermal";
      const json& t = doc.object(o, "thermal", tp);
      ThermalEnvelope env;
      env.resistance = doc.number(t, "resistance", tp + ".resistance");
      env.capacity = doc.number(t, "capacity", tp + ".capacity");
      env.t_in_min = doc.number(t, "t_in_min", tp + ".t_in_min");
      env.t_in_max = doc.number(t, "t_in_max", tp + ".t_in_max");
      env.t_in_current = doc.number(t, "t_in_current", tp + ".t_in_current");
      env.t_out = doc.number(t, "t_out", tp + ".t_out");
      env.dt = doc.number_or(t, "dt", tp + ".dt", 1.0);
      la.thermal = env;
    }
    out.push_back(std::move(la));
  }
  return out;
}

std::vector<EnergyServiceProvider> parse_esps(const Document& doc, const json& parent,
                                              const std::string& prefix) {
  std::vector<EnergyServiceProvider> out;
  const std::string base = prefix + "esps";
  const json& list = doc.array(parent, "esps", base);
  for (std::size_t j = 0; j < list.size(); ++j) {
    const std::string p = base + "[" + std::to_string(j) + "]";
    const json& o = list[j];
    if (!o.is_object()) doc.fail(p, "expected an object");
    EnergyServiceProvider esp;
    esp.id = o.contains("id") ? doc.string(o, "id", p + ".id") : "ESP" + std::to_string(j + 1);
    esp.m = doc.number(o, "m", p + ".m");
    esp.n = doc.number(o, "n", p + ".n");
    esp.s_max = doc.number(o, "s_max", p + ".s_max");
    out.push_back(std::move(esp));
  }
  return out;
}

DadpParams parse_params(const Document& doc) {
  DadpParams p;
  if (!doc.root().contains("algorithm")) return p;
  const json& a = doc.object(doc.root(), "algorithm", "algorithm");
  const auto path = [](const char* key) { return std::string("algorithm.") + key; };
  p.admm.rho = doc.number_or(a, "rho", path("rho"), p.admm.rho);
  p.admm.eps_pri = doc.number_or(a, "eps_pri", path("eps_pri"), p.admm.eps_pri);
  p.admm.eps_dual = doc.number_or(a, "eps_dual", path("eps_dual"), p.admm.eps_dual);
  p.admm.max_iterations = doc.integer_or(a, "max_inner", path("max_inner"), p.admm.max_iterations);
  p.weights.step = doc.optional_number(a, "weight_step", path("weight_step"));
  p.weights.relaxation =
      doc.number_or(a, "weight_relaxation", path("weight_relaxation"), p.weights.relaxation);
  p.weights.tolerance =
      doc.number_or(a, "weight_tolerance", path("weight_tolerance"), p.weights.tolerance);
  p.weights.floor = doc.number_or(a, "weight_floor", path("weight_floor"), p.weights.floor);
  p.weights.max_rounds =
      doc.integer_or(a, "max_weight_rounds", path("max_weight_rounds"), p.weights.max_rounds);
  p.weights.oscillation_window = doc.integer_or(a, "oscillation_window",
                                                path("oscillation_window"),
                                                p.weights.oscillation_window);
  p.atc.chi0 = doc.number_or(a, "chi0", path("chi0"), p.atc.chi0);
  p.atc.gamma0 = doc.number_or(a, "gamma0", path("gamma0"), p.atc.gamma0);
  p.atc.beta = doc.number_or(a, "beta", path("beta"), p.atc.beta);
  p.atc.eps1 = doc.optional_number(a, "eps1", path("eps1"));
  p.atc.eps2 = doc.number_or(a, "eps2", path("eps2"), p.atc.eps2);
  p.atc.max_outer = doc.integer_or(a, "max_outer", path("max_outer"), p.atc.max_outer);
  p.atc.initial_supply_estimate =
      doc.optional_number(a, "initial_supply_estimate", path("initial_supply_estimate"));
  p.atc.trust_region = doc.number_or(a, "trust_region", path("trust_region"), p.atc.trust_region);
  p.polish_tolerance =
      doc.number_or(a, "polish_tolerance", path("polish_tolerance"), p.polish_tolerance);
  p.record_trace = doc.boolean_or(a, "record_trace", path("record_trace"), p.record_trace);
  p.admm.adaptive_rho = doc.boolean_or(a, "adaptive_rho", path("adaptive_rho"), p.admm.adaptive_rho);
  p.warm_start_outer =
      doc.boolean_or(a, "warm_start_outer", path("warm_start_outer"), p.warm_start_outer);
  p.rescue_adaptive_rho =
      doc.boolean_or(a, "rescue_adaptive_rho", path("rescue_adaptive_rho"), p.rescue_adaptive_rho);

  if (!(p.admm.rho > 0.0)) doc.fail(path("rho"), "rho must be positive");
  if (!(p.admm.eps_pri > 0.0)) doc.fail(path("eps_pri"), "must be positive");
  if (!(p.admm.eps_dual > 0.0)) doc.fail(path("eps_dual"), "must be positive");
  if (p.admm.max_iterations < 1) doc.fail(path("max_inner"), "must be at least 1");
  if (p.weights.step && !(*p.weights.step > 0.0)) doc.fail(path("weight_step"), "must be positive");
  if (!(p.weights.relaxation > 0.0)) doc.fail(path("weight_relaxation"), "must be positive");
  if (!(p.atc.gamma0 > 0.0)) doc.fail(path("gamma0"), "must be positive");
  if (!(p.atc.beta > 2.0 && p.atc.beta < 3.0)) doc.fail(path("beta"), "must lie in (2, 3)");
  if (p.atc.max_outer < 1) doc.fail(path("max_outer"), "must be at least 1");
  return p;
}

Scenario build(const Document& doc, const json& players, const std::string& prefix,
               MarketKind kind, std::string scene_id) {
  Scenario sc;
  sc.market_kind = kind;
  sc.scene_id = std::move(scene_id);
  sc.las = parse_las(doc, players, prefix);
  sc.esps = parse_esps(doc, players, prefix);
  validate_scenario(sc);
  return sc;
}

}  // namespace

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MarketError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

LoadedScenario parse_scenario(const std::string& text, const std::string& source) {
  Document doc(text, source);
  if (!doc.root().is_object()) doc.fail("", "top level must be an object");
  MarketKind kind = MarketKind::power;
  std::string scene_id;
  if (doc.root().contains("market")) {
    const json& market = doc.object(doc.root(), "market", "market");
    kind = parse_kind(doc, market, "market.kind");
    if (market.contains("scene_id")) scene_id = doc.string(market, "scene_id", "market.scene_id");
  }
  LoadedScenario out;
  out.params = parse_params(doc);
  out.scenario = build(doc, doc.root(), "", kind, scene_id);
  return out;
}

LoadedScenario load_scenario(const std::filesystem::path& path) {
  return parse_scenario(read_text_file(path), path.string());
}

LoadedSweep parse_sweep(const std::string& text, const std::string& source) {
  Document doc(text, source);
  if (!doc.root().is_object()) doc.fail("", "top level must be an object");
  MarketKind kind = MarketKind::power;
  if (doc.root().contains("market")) {
    kind = parse_kind(doc, doc.object(doc.root(), "market", "market"), "market.kind");
  }
  LoadedSweep out;
  out.params = parse_params(doc);
  const json& scenes = doc.array(doc.root(), "scenes", "scenes");
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    const std::string p = "scenes[" + std::to_string(s) + "]";
    if (!scenes[s].is_object()) doc.fail(p, "expected an object");
    const std::string id = scenes[s].contains("id") ? doc.string(scenes[s], "id", p + ".id")
                                                    : "S" + std::to_string(s + 1);
    // Per-scene validation is deferred to the sweep, which records failures.
    Scenario sc;
    sc.market_kind = kind;
    sc.scene_id = id;
    sc.las = parse_las(doc, scenes[s], p + ".");
    sc.esps = parse_esps(doc, scenes[s], p + ".");
    out.scenes.push_back(std::move(sc));
  }
  return out;
}

LoadedSweep load_sweep(const std::filesystem::path& path) {
  return parse_sweep(read_text_file(path), path.string());
}

std::string scenario_to_json(const Scenario& sc, const DadpParams& p) {
  json las = json::array();
  for (const auto& la : sc.las) {
    json o = {{"id", la.id}, {"alpha", la.alpha}, {"beta", la.beta}, {"d_min", la.d_min}};
    if (la.thermal) {
      const auto& t = *la.thermal;
      o["thermal"] = {{"resistance", t.resistance}, {"capacity", t.capacity},
                      {"t_in_min", t.t_in_min},     {"t_in_max", t.t_in_max},
                      {"t_in_current", t.t_in_current}, {"t_out", t.t_out},
                      {"dt", t.dt}};
    }
    las.push_back(std::move(o));
  }
  json esps = json::array();
  for (const auto& e : sc.esps) {
    esps.push_back({{"id", e.id}, {"m", e.m}, {"n", e.n}, {"s_max", e.s_max}});
  }
  json algo = {{"rho", p.admm.rho},
               {"eps_pri", p.admm.eps_pri},
               {"eps_dual", p.admm.eps_dual},
               {"max_inner", p.admm.max_iterations},
               {"weight_relaxation", p.weights.relaxation},
               {"weight_tolerance", p.weights.tolerance},
               {"weight_floor", p.weights.floor},
               {"max_weight_rounds", p.weights.max_rounds},
               {"oscillation_window", p.weights.oscillation_window},
               {"chi0", p.atc.chi0},
               {"gamma0", p.atc.gamma0},
               {"beta", p.atc.beta},
               {"eps2", p.atc.eps2},
               {"max_outer", p.atc.max_outer},
               {"trust_region", p.atc.trust_region},
               {"polish_tolerance", p.polish_tolerance},
               {"record_trace", p.record_trace},
               {"adaptive_rho", p.admm.adaptive_rho},
               {"warm_start_outer", p.warm_start_outer},
               {"rescue_adaptive_rho", p.rescue_adaptive_rho}};
  if (p.weights.step) algo["weight_step"] = *p.weights.step;
  if (p.atc.eps1) algo["eps1"] = *p.atc.eps1;
  if (p.atc.initial_supply_estimate) algo["initial_supply_estimate"] = *p.atc.initial_supply_estimate;
  json doc = {{"market", {{"kind", to_string(sc.market_kind)}, {"scene_id", sc.scene_id}}},
              {"las", std::move(las)},
              {"esps", std::move(esps)},
              {"algorithm", std::move(algo)}};
  return doc.dump(2) + "\n";
}

}  // namespace dadp::sim
