#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dadp/errors.hpp"
#include "dadp/trace.hpp"

namespace dadp::sim {

enum class Role { etc, la, esp };

struct Endpoint {
  Role role{Role::etc};
  std::string id;  ///< empty for the ETC

  static Endpoint etc() { return {Role::etc, {}}; }
  static Endpoint la(std::string id) { return {Role::la, std::move(id)}; }
  static Endpoint esp(std::string id) { return {Role::esp, std::move(id)}; }

  /// "etc", "la:<id>" or "esp:<id>".
  std::string str() const;
  static Endpoint parse(const std::string& text);

  friend bool operator==(const Endpoint&, const Endpoint&) = default;
  friend auto operator<=>(const Endpoint&, const Endpoint&) = default;
};

enum class InfoClass { private_info, semi_public, public_info };

enum class FieldKind {
  weight,        ///< p_i or q_j
  shadow_price,  ///< mu_i or omega_j
  target,        ///< z_i or x_j
  quantity,      ///< d_i or s_j
  bid,           ///< b_i
  offer,         ///< a_j
  total_supply_estimate,
  total_demand_estimate,
  penalty,       ///< rho
  esp_count,
  coefficient,   ///< alpha, beta, m, n
};

const char* to_string(Role role) noexcept;
const char* to_string(InfoClass info) noexcept;
const char* to_string(FieldKind kind) noexcept;
std::optional<InfoClass> parse_info_class(const std::string& text);
std::optional<FieldKind> parse_field_kind(const std::string& text);

/// The information class a field kind belongs to.
InfoClass info_class_of(FieldKind kind) noexcept;

struct Field {
  FieldKind kind{FieldKind::weight};
  std::string name;  ///< e.g. "p", "mu", "alpha"
  Endpoint owner;    ///< whose information this is; the ETC for aggregates
  double value{};
  InfoClass info{InfoClass::private_info};

  /// Field tagged with the class of its kind.
  static Field make(FieldKind kind, std::string name, Endpoint owner, double value);

  friend bool operator==(const Field&, const Field&) = default;
};

struct Message {
  std::uint64_t id{};  ///< assigned by the bus
  Endpoint from;
  Endpoint to;
  Phase phase{Phase::demand};
  RoundIndex round;
  std::vector<Field> fields;

  friend bool operator==(const Message&, const Message&) = default;
};

class RoutingError : public MarketError {
public:
  using MarketError::MarketError;
};

struct BulletinEntry {
  std::uint64_t message_id{};
  Endpoint from;
  Field field;

  friend bool operator==(const BulletinEntry&, const BulletinEntry&) = default;
};

/// Star topology around the ETC: one private channel per player, nothing
/// else. Keeps an append-only log of every routed message.
class MessageBus {
public:
  MessageBus(const std::vector<std::string>& la_ids, const std::vector<std::string>& esp_ids);

  bool has_channel(const Endpoint& a, const Endpoint& b) const;

  /// Delivers, logs and mirrors public fields. Returns the message id.
  std::uint64_t route(Message msg);

  /// Removes and returns everything waiting for `who`.
  std::vector<Message> take_inbox(const Endpoint& who);
  std::size_t pending(const Endpoint& who) const;

  const std::vector<Message>& log() const noexcept { return log_; }
  const std::vector<BulletinEntry>& bulletin() const noexcept { return bulletin_; }

private:
  std::map<Endpoint, std::vector<Message>> inbox_;
  std::vector<Message> log_;
  std::vector<BulletinEntry> bulletin_;
  std::uint64_t next_id_{1};
};

enum class AuditRule {
  foreign_private,     ///< (a) private field of X delivered to neither X nor the ETC
  coefficient_leak,    ///< (b) value or cost coefficient in any message
  cross_side_quantity  ///< (c) d_i reaching an ESP, or s_j reaching an LA
};

const char* to_string(AuditRule rule) noexcept;

struct AuditViolation {
  std::uint64_t message_id{};
  std::string field;  ///< field name with owner, e.g. "p@la:LA1"
  AuditRule rule{AuditRule::foreign_private};
  std::string breached;  ///< the known-information set that was exceeded
  RoundIndex round;

  friend bool operator==(const AuditViolation&, const AuditViolation&) = default;
};

/// Post-hoc information-flow check. Each field yields at most one violation;
/// rules are tried in the order (b), (c), (a).
std::vector<AuditViolation> audit(const std::vector<Message>& log);

std::string format_violation(const AuditViolation& v);

/// One JSON object per line.
void write_log_jsonl(std::ostream& out, const std::vector<Message>& log);
/// Throws MarketError with the offending line number on malformed input.
std::vector<Message> read_log_jsonl(std::istream& in);

}  // namespace dadp::sim

namespace dadp::sim {

struct SeededFault {
  Message message;
  AuditRule expected{AuditRule::foreign_private};
};

/// Ten deliberately leaky messages over legal channels: six private fields
/// forwarded to the wrong player, two coefficient leaks, two cross-side
/// quantities. Needs at least two LAs and two ESPs.
std::vector<SeededFault> seeded_faults(const std::vector<std::string>& la_ids,
                                       const std::vector<std::string>& esp_ids);

}  // namespace dadp::sim
