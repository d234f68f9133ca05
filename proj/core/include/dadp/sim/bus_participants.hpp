#pragma once

#include <optional>
#include <vector>

#include "dadp/admm_bidding.hpp"
#include "dadp/atc_coordinator.hpp"
#include "dadp/sim/message_bus.hpp"

namespace dadp::sim {

/// An LA node. Its value model never leaves this object; it acts only on
/// what arrives in its inbox.
class LaAgent {
public:
  LaAgent(LoadAggregator la, MarketKind kind);

  const std::string& id() const noexcept { return la_.id; }
  Endpoint endpoint() const { return Endpoint::la(la_.id); }

  /// Drains the inbox and answers the latest market signal, if any, with
  /// its bid (public) and demand (private, to the ETC).
  void step(MessageBus& bus);

private:
  LoadAggregator la_;
  double floor_;
  double cap_;
  std::optional<double> rho_, weight_, total_supply_;
};

class EspAgent {
public:
  explicit EspAgent(EnergyServiceProvider esp);

  const std::string& id() const noexcept { return esp_.id; }
  Endpoint endpoint() const { return Endpoint::esp(esp_.id); }

  void step(MessageBus& bus);

private:
  EnergyServiceProvider esp_;
  std::optional<double> rho_, weight_, total_demand_, esp_count_;
};

/// ETC side of the demand phase over the bus. Sends only what changed since
/// the last message to each LA, then the per-iteration (z_i, mu_i) signal.
class BusDemandResponder final : public DemandResponder {
public:
  BusDemandResponder(MessageBus& bus, std::vector<LaAgent>& agents);

  std::size_t size() const override { return agents_.size(); }
  std::vector<PlayerReply> respond(std::span<const DemandSignal> signals,
                                   const RoundIndex& round) override;

private:
  struct Sent {
    std::optional<double> rho, weight, total;
  };
  MessageBus& bus_;
  std::vector<LaAgent>& agents_;
  std::vector<Sent> sent_;
};

class BusSupplyResponder final : public SupplyResponder {
public:
  BusSupplyResponder(MessageBus& bus, std::vector<EspAgent>& agents);

  std::size_t size() const override { return agents_.size(); }
  std::vector<PlayerReply> respond(std::span<const SupplySignal> signals,
                                   const RoundIndex& round) override;

private:
  struct Sent {
    std::optional<double> rho, weight, total, count;
  };
  MessageBus& bus_;
  std::vector<EspAgent>& agents_;
  std::vector<Sent> sent_;
};

struct BusRun {
  MarketOutcome outcome;
  std::vector<Message> log;
  std::vector<BulletinEntry> bulletin;
  std::vector<AuditViolation> violations;
};

/// run_dadp with every ETC/player exchange routed through a MessageBus and
/// audited afterwards. When the outer loop hits its cap the last iterate is
/// returned with outcome.converged = false; inner failures propagate.
BusRun run_dadp_on_bus(const Scenario& scenario, const DadpParams& params = {});

}  // namespace dadp::sim
