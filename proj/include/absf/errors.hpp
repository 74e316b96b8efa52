#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace absf {

// Inputs outside a function's mathematical domain throw std::domain_error.
// The two types below cover the remaining failure classes.

/// A computation whose cost is exponential in its input was asked for
/// without a cap (state space too large, power set too large).
class ResourceError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Proportional-fair objective is unbounded below: some group has no
/// positive throughput in any state (and no history to lean on).
class InfeasibleError : public std::runtime_error {
public:
  InfeasibleError(std::size_t group, const std::string& what)
      : std::runtime_error(what), group_(group) {}

  std::size_t group() const noexcept { return group_; }

private:
  std::size_t group_;
};

}  // namespace absf
