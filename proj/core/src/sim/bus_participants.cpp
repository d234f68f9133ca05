#include "dadp/sim/bus_participants.hpp"

#include <map>

namespace dadp::sim {

namespace {

bool changed(const std::optional<double>& last, double now) { return !last || *last != now; }

}  // namespace

LaAgent::LaAgent(LoadAggregator la, MarketKind kind)
    : la_(std::move(la)), floor_(demand_floor(la_, kind)), cap_(demand_cap(la_, kind)) {}

void LaAgent::step(MessageBus& bus) {
  std::optional<double> target, price;
  RoundIndex round;
  for (const auto& msg : bus.take_inbox(endpoint())) {
    for (const auto& f : msg.fields) {
      switch (f.kind) {
        case FieldKind::penalty: rho_ = f.value; break;
        case FieldKind::weight: weight_ = f.value; break;
        case FieldKind::total_supply_estimate: total_supply_ = f.value; break;
        case FieldKind::target: target = f.value; break;
        case FieldKind::shadow_price: price = f.value; break;
        default: break;
      }
    }
    round = msg.round;
  }
  if (!target || !price) return;
  if (!rho_ || !weight_ || !total_supply_) {
    throw MarketError(endpoint().str() + " got a signal before its market parameters");
  }
  const DemandSignal sig{*weight_, *target, *price, *rho_, *total_supply_};
  const double d = la_best_response(la_, sig, floor_, cap_);
  Message reply{0, endpoint(), Endpoint::etc(), Phase::demand, round,
                {Field::make(FieldKind::bid, "b", endpoint(), *price * d),
                 Field::make(FieldKind::quantity, "d", endpoint(), d)}};
  bus.route(std::move(reply));
}

EspAgent::EspAgent(EnergyServiceProvider esp) : esp_(std::move(esp)) {}

void EspAgent::step(MessageBus& bus) {
  std::optional<double> target, price;
  RoundIndex round;
  for (const auto& msg : bus.take_inbox(endpoint())) {
    for (const auto& f : msg.fields) {
      switch (f.kind) {
        case FieldKind::penalty: rho_ = f.value; break;
        case FieldKind::weight: weight_ = f.value; break;
        case FieldKind::total_demand_estimate: total_demand_ = f.value; break;
        case FieldKind::esp_count: esp_count_ = f.value; break;
        case FieldKind::target: target = f.value; break;
        case FieldKind::shadow_price: price = f.value; break;
        default: break;
      }
    }
    round = msg.round;
  }
  if (!target || !price) return;
  if (!rho_ || !weight_ || !total_demand_ || !esp_count_) {
    throw MarketError(endpoint().str() + " got a signal before its market parameters");
  }
  const SupplySignal sig{*weight_, *target, *price, *rho_, *total_demand_,
                         static_cast<std::size_t>(*esp_count_)};
  const double s = esp_best_response(esp_, sig);
  Message reply{0, endpoint(), Endpoint::etc(), Phase::supply, round,
                {Field::make(FieldKind::offer, "a", endpoint(), *price * (*total_demand_ - s)),
                 Field::make(FieldKind::quantity, "s", endpoint(), s)}};
  bus.route(std::move(reply));
}

namespace {

// Collects one (quote, quantity) reply per player from the ETC inbox.
std::vector<PlayerReply> collect(MessageBus& bus, const std::map<Endpoint, std::size_t>& index,
                                 FieldKind quote_kind) {
  std::vector<std::optional<PlayerReply>> got(index.size());
  for (const auto& msg : bus.take_inbox(Endpoint::etc())) {
    auto it = index.find(msg.from);
    if (it == index.end()) continue;
    PlayerReply r;
    for (const auto& f : msg.fields) {
      if (f.kind == quote_kind) r.quote = f.value;
      if (f.kind == FieldKind::quantity) r.quantity = f.value;
    }
    got[it->second] = r;
  }
  std::vector<PlayerReply> out;
  for (std::size_t i = 0; i < got.size(); ++i) {
    if (!got[i]) throw MarketError("no reply from player " + std::to_string(i));
    out.push_back(*got[i]);
  }
  return out;
}

}  // namespace

BusDemandResponder::BusDemandResponder(MessageBus& bus, std::vector<LaAgent>& agents)
    : bus_(bus), agents_(agents), sent_(agents.size()) {}

std::vector<PlayerReply> BusDemandResponder::respond(std::span<const DemandSignal> signals,
                                                     const RoundIndex& round) {
  const auto etc = Endpoint::etc();
  std::map<Endpoint, std::size_t> index;
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    const auto to = agents_[i].endpoint();
    index[to] = i;
    const auto& sig = signals[i];
    auto& sent = sent_[i];
    std::vector<Field> params;
    if (changed(sent.rho, sig.rho)) params.push_back(Field::make(FieldKind::penalty, "rho", etc, sig.rho));
    if (changed(sent.total, sig.total_supply)) {
      params.push_back(Field::make(FieldKind::total_supply_estimate, "sum_s", etc, sig.total_supply));
    }
    if (changed(sent.weight, sig.weight)) params.push_back(Field::make(FieldKind::weight, "p", to, sig.weight));
    if (!params.empty()) bus_.route({0, etc, to, Phase::demand, round, std::move(params)});
    sent = {sig.rho, sig.weight, sig.total_supply};
    bus_.route({0, etc, to, Phase::demand, round,
                {Field::make(FieldKind::target, "z", to, sig.target),
                 Field::make(FieldKind::shadow_price, "mu", to, sig.price)}});
  }
  for (auto& a : agents_) a.step(bus_);
  return collect(bus_, index, FieldKind::bid);
}

BusSupplyResponder::BusSupplyResponder(MessageBus& bus, std::vector<EspAgent>& agents)
    : bus_(bus), agents_(agents), sent_(agents.size()) {}

std::vector<PlayerReply> BusSupplyResponder::respond(std::span<const SupplySignal> signals,
                                                     const RoundIndex& round) {
  const auto etc = Endpoint::etc();
  std::map<Endpoint, std::size_t> index;
  for (std::size_t j = 0; j < agents_.size(); ++j) {
    const auto to = agents_[j].endpoint();
    index[to] = j;
    const auto& sig = signals[j];
    const double count = static_cast<double>(sig.esp_count);
    auto& sent = sent_[j];
    std::vector<Field> params;
    if (changed(sent.rho, sig.rho)) params.push_back(Field::make(FieldKind::penalty, "rho", etc, sig.rho));
    if (changed(sent.count, count)) params.push_back(Field::make(FieldKind::esp_count, "J", etc, count));
    if (changed(sent.total, sig.total_demand)) {
      params.push_back(Field::make(FieldKind::total_demand_estimate, "sum_d", etc, sig.total_demand));
    }
    if (changed(sent.weight, sig.weight)) params.push_back(Field::make(FieldKind::weight, "q", to, sig.weight));
    if (!params.empty()) bus_.route({0, etc, to, Phase::supply, round, std::move(params)});
    sent = {sig.rho, sig.weight, sig.total_demand, count};
    bus_.route({0, etc, to, Phase::supply, round,
                {Field::make(FieldKind::target, "x", to, sig.target),
                 Field::make(FieldKind::shadow_price, "omega", to, sig.price)}});
  }
  for (auto& a : agents_) a.step(bus_);
  return collect(bus_, index, FieldKind::offer);
}

BusRun run_dadp_on_bus(const Scenario& scenario, const DadpParams& params) {
  validate_scenario(scenario);
  std::vector<std::string> la_ids, esp_ids;
  std::vector<LaAgent> las;
  std::vector<EspAgent> esps;
  for (const auto& la : scenario.las) {
    la_ids.push_back(la.id);
    las.emplace_back(la, scenario.market_kind);
  }
  for (const auto& esp : scenario.esps) {
    esp_ids.push_back(esp.id);
    esps.emplace_back(esp);
  }
  MessageBus bus(la_ids, esp_ids);
  BusDemandResponder demand(bus, las);
  BusSupplyResponder supply(bus, esps);

  BusRun run;
  try {
    run.outcome = run_dadp(scenario, params, demand, supply);
  } catch (const DadpNonConvergenceError& e) {
    run.outcome = e.best();
  }
  run.log = bus.log();
  run.bulletin = bus.bulletin();
  run.violations = audit(run.log);
  return run;
}

}  // namespace dadp::sim
