#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace fmim {

/// Raised when a caller breaks an operation's documented preconditions.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Raised when the federated protocol cannot make progress (e.g. no
/// eligible clients in a round).
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed on-disk data (checkpoint, image container, CSV).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Broken internal invariant (e.g. a cycle in an autograd graph).
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline void require(bool condition, const char* message) {
  if (!condition) throw ContractViolation(message);
}

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractViolation(message);
}

/// round-half-up(ratio * count), robust to representation error in ratio.
inline std::size_t round_half_up(double ratio, std::size_t count) {
  const double exact = ratio * static_cast<double>(count);
  return static_cast<std::size_t>(exact + 0.5 + 1e-9);
}

}  // namespace fmim
