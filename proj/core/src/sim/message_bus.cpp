#include "dadp/sim/message_bus.hpp"

#include <istream>
#include <ostream>

#include "json.hpp"

namespace dadp::sim {

using nlohmann::json;

const char* to_string(Role role) noexcept {
  switch (role) {
    case Role::etc: return "etc";
    case Role::la: return "la";
    case Role::esp: return "esp";
  }
  return "?";
}

std::string Endpoint::str() const {
  if (role == Role::etc) return "etc";
  return std::string(to_string(role)) + ":" + id;
}

Endpoint Endpoint::parse(const std::string& text) {
  if (text == "etc") return Endpoint::etc();
  const auto colon = text.find(':');
  if (colon != std::string::npos) {
    const std::string role = text.substr(0, colon);
    if (role == "la") return Endpoint::la(text.substr(colon + 1));
    if (role == "esp") return Endpoint::esp(text.substr(colon + 1));
  }
  throw MarketError("bad endpoint '" + text + "'");
}

const char* to_string(InfoClass info) noexcept {
  switch (info) {
    case InfoClass::private_info: return "private";
    case InfoClass::semi_public: return "semi_public";
    case InfoClass::public_info: return "public";
  }
  return "?";
}

namespace {

constexpr FieldKind kAllKinds[] = {
    FieldKind::weight,      FieldKind::shadow_price, FieldKind::target,
    FieldKind::quantity,    FieldKind::bid,          FieldKind::offer,
    FieldKind::total_supply_estimate, FieldKind::total_demand_estimate,
    FieldKind::penalty,     FieldKind::esp_count,    FieldKind::coefficient};

}  // namespace

const char* to_string(FieldKind kind) noexcept {
  switch (kind) {
    case FieldKind::weight: return "weight";
    case FieldKind::shadow_price: return "shadow_price";
    case FieldKind::target: return "target";
    case FieldKind::quantity: return "quantity";
    case FieldKind::bid: return "bid";
    case FieldKind::offer: return "offer";
    case FieldKind::total_supply_estimate: return "total_supply_estimate";
    case FieldKind::total_demand_estimate: return "total_demand_estimate";
    case FieldKind::penalty: return "penalty";
    case FieldKind::esp_count: return "esp_count";
    case FieldKind::coefficient: return "coefficient";
  }
  return "?";
}

std::optional<InfoClass> parse_info_class(const std::string& text) {
  for (auto c : {InfoClass::private_info, InfoClass::semi_public, InfoClass::public_info}) {
    if (text == to_string(c)) return c;
  }
  return std::nullopt;
}

std::optional<FieldKind> parse_field_kind(const std::string& text) {
  for (auto k : kAllKinds) {
    if (text == to_string(k)) return k;
  }
  return std::nullopt;
}

InfoClass info_class_of(FieldKind kind) noexcept {
  switch (kind) {
    case FieldKind::bid:
    case FieldKind::offer:
    case FieldKind::penalty:
    case FieldKind::esp_count:
      return InfoClass::public_info;
    case FieldKind::total_supply_estimate:
    case FieldKind::total_demand_estimate:
      return InfoClass::semi_public;
    default:
      return InfoClass::private_info;
  }
}

Field Field::make(FieldKind kind, std::string name, Endpoint owner, double value) {
  return {kind, std::move(name), std::move(owner), value, info_class_of(kind)};
}

MessageBus::MessageBus(const std::vector<std::string>& la_ids,
                       const std::vector<std::string>& esp_ids) {
  inbox_[Endpoint::etc()];
  for (const auto& id : la_ids) inbox_[Endpoint::la(id)];
  for (const auto& id : esp_ids) inbox_[Endpoint::esp(id)];
}

bool MessageBus::has_channel(const Endpoint& a, const Endpoint& b) const {
  if (!inbox_.contains(a) || !inbox_.contains(b)) return false;
  return (a.role == Role::etc) != (b.role == Role::etc);
}

std::uint64_t MessageBus::route(Message msg) {
  if (!has_channel(msg.from, msg.to)) {
    throw RoutingError("no channel " + msg.from.str() + " -> " + msg.to.str());
  }
  msg.id = next_id_++;
  for (const auto& f : msg.fields) {
    if (f.info == InfoClass::public_info) bulletin_.push_back({msg.id, msg.from, f});
  }
  log_.push_back(msg);
  inbox_[msg.to].push_back(std::move(msg));
  return log_.back().id;
}

std::vector<Message> MessageBus::take_inbox(const Endpoint& who) {
  auto it = inbox_.find(who);
  if (it == inbox_.end()) throw RoutingError("unknown endpoint " + who.str());
  std::vector<Message> out;
  out.swap(it->second);
  return out;
}

std::size_t MessageBus::pending(const Endpoint& who) const {
  auto it = inbox_.find(who);
  return it == inbox_.end() ? 0 : it->second.size();
}

const char* to_string(AuditRule rule) noexcept {
  switch (rule) {
    case AuditRule::foreign_private: return "a";
    case AuditRule::coefficient_leak: return "b";
    case AuditRule::cross_side_quantity: return "c";
  }
  return "?";
}

std::vector<AuditViolation> audit(const std::vector<Message>& log) {
  std::vector<AuditViolation> out;
  for (const auto& msg : log) {
    for (const auto& f : msg.fields) {
      const std::string label = f.name + "@" + f.owner.str();
      if (f.kind == FieldKind::coefficient) {
        out.push_back({msg.id, label, AuditRule::coefficient_leak,
                       "player model coefficients are known to their owner only", msg.round});
        continue;
      }
      const bool crosses =
          f.kind == FieldKind::quantity &&
          ((f.owner.role == Role::la && msg.to.role == Role::esp) ||
           (f.owner.role == Role::esp && msg.to.role == Role::la));
      if (crosses) {
        out.push_back({msg.id, label, AuditRule::cross_side_quantity,
                       msg.to.role == Role::esp ? "supply side may only see total demand"
                                                : "demand side may only see total supply",
                       msg.round});
        continue;
      }
      if (f.info == InfoClass::private_info && !(msg.to == f.owner) &&
          msg.to.role != Role::etc) {
        out.push_back({msg.id, label, AuditRule::foreign_private,
                       "private to " + f.owner.str() + " and the ETC", msg.round});
      }
    }
  }
  return out;
}

std::string format_violation(const AuditViolation& v) {
  return "message=" + std::to_string(v.message_id) + " field=" + v.field +
         " rule=" + to_string(v.rule) + " m=" + std::to_string(v.round.m) +
         " n=" + std::to_string(v.round.n) + " k=" + std::to_string(v.round.k) +
         " breach=\"" + v.breached + "\"";
}

void write_log_jsonl(std::ostream& out, const std::vector<Message>& log) {
  for (const auto& msg : log) {
    json fields = json::array();
    for (const auto& f : msg.fields) {
      fields.push_back({{"kind", to_string(f.kind)},
                        {"name", f.name},
                        {"owner", f.owner.str()},
                        {"value", f.value},
                        {"class", to_string(f.info)}});
    }
    json j = {{"id", msg.id},
              {"from", msg.from.str()},
              {"to", msg.to.str()},
              {"phase", to_string(msg.phase)},
              {"m", msg.round.m},
              {"n", msg.round.n},
              {"k", msg.round.k},
              {"fields", std::move(fields)}};
    out << j.dump() << '\n';
  }
}

std::vector<Message> read_log_jsonl(std::istream& in) {
  std::vector<Message> log;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      Message msg;
      msg.id = j.at("id").get<std::uint64_t>();
      msg.from = Endpoint::parse(j.at("from").get<std::string>());
      msg.to = Endpoint::parse(j.at("to").get<std::string>());
      msg.phase = j.at("phase").get<std::string>() == "supply" ? Phase::supply : Phase::demand;
      msg.round = {j.at("m").get<int>(), j.at("n").get<int>(), j.at("k").get<int>()};
      for (const auto& jf : j.at("fields")) {
        const auto kind = parse_field_kind(jf.at("kind").get<std::string>());
        const auto info = parse_info_class(jf.at("class").get<std::string>());
        if (!kind) throw MarketError("unknown field kind '" + jf.at("kind").get<std::string>() + "'");
        if (!info) throw MarketError("unknown class '" + jf.at("class").get<std::string>() + "'");
        msg.fields.push_back({*kind, jf.at("name").get<std::string>(),
                              Endpoint::parse(jf.at("owner").get<std::string>()),
                              jf.at("value").get<double>(), *info});
      }
      log.push_back(std::move(msg));
    } catch (const json::exception& e) {
      throw MarketError("log line " + std::to_string(lineno) + ": " + e.what());
    } catch (const MarketError& e) {
      throw MarketError("log line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return log;
}

}  // namespace dadp::sim

namespace dadp::sim {

std::vector<SeededFault> seeded_faults(const std::vector<std::string>& la_ids,
                                       const std::vector<std::string>& esp_ids) {
  if (la_ids.size() < 2 || esp_ids.size() < 2) {
    throw MarketError("seeded faults need at least two LAs and two ESPs");
  }
  const auto la1 = Endpoint::la(la_ids[0]), la2 = Endpoint::la(la_ids[1]);
  const auto esp1 = Endpoint::esp(esp_ids[0]), esp2 = Endpoint::esp(esp_ids[1]);
  const auto etc = Endpoint::etc();
  const RoundIndex r{1, 1, 1};
  const auto one = [&](Endpoint from, Endpoint to, Phase phase, Field f, AuditRule rule) {
    return SeededFault{Message{0, std::move(from), std::move(to), phase, r, {std::move(f)}}, rule};
  };
  using K = FieldKind;
  const auto a = AuditRule::foreign_private;
  return {
      one(etc, la2, Phase::demand, Field::make(K::weight, "p", la1, 0.5), a),
      one(etc, esp2, Phase::supply, Field::make(K::weight, "q", esp1, 0.3), a),
      one(etc, la2, Phase::demand, Field::make(K::shadow_price, "mu", la1, 4.0), a),
      one(etc, esp2, Phase::supply, Field::make(K::shadow_price, "omega", esp1, 6.0), a),
      one(etc, la2, Phase::demand, Field::make(K::target, "z", la1, 2.0), a),
      one(etc, esp2, Phase::supply, Field::make(K::target, "x", esp1, 3.0), a),
      one(la1, etc, Phase::demand, Field::make(K::coefficient, "alpha", la1, 10.0),
          AuditRule::coefficient_leak),
      one(esp1, etc, Phase::supply, Field::make(K::coefficient, "m", esp1, 1.0),
          AuditRule::coefficient_leak),
      one(etc, esp1, Phase::supply, Field::make(K::quantity, "d", la1, 2.0),
          AuditRule::cross_side_quantity),
      one(etc, la1, Phase::demand, Field::make(K::quantity, "s", esp1, 2.0),
          AuditRule::cross_side_quantity),
  };
}

}  // namespace dadp::sim
