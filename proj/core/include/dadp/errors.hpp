#pragma once

#include <stdexcept>
#include <string>

namespace dadp {

/// Base of every error raised by the market engine.
class MarketError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the domain of a model function.
class DomainError : public MarketError {
public:
  using MarketError::MarketError;
};

/// Allocation is undefined (e.g. every bid is zero).
class DegenerateMarketError : public MarketError {
public:
  using MarketError::MarketError;
};

/// A supply offer violates a_j > 0.
class InvalidOfferError : public MarketError {
public:
  using MarketError::MarketError;
};

/// The floors cannot be met by the supply caps.
class InfeasibleScenarioError : public MarketError {
public:
  using MarketError::MarketError;
};

/// A scenario breaks a model invariant; `constraint` names the rule.
class ValidationError : public MarketError {
public:
  ValidationError(std::string constraint, const std::string& what)
      : MarketError("constraint '" + constraint + "' violated: " + what),
        constraint_(std::move(constraint)) {}

  const std::string& constraint() const noexcept { return constraint_; }

private:
  std::string constraint_;
};

}  // namespace dadp
