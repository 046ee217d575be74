#pragma once

#include <stdexcept>
#include <string>

namespace sam {

// Raised when a caller breaks a documented precondition (shape mismatch,
// out-of-range slot, out-of-order journal revert, ...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Raised for malformed external input: config files, checkpoints, CLI flags.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const char* what) {
  if (!condition) throw ContractError(what);
}

inline void require(bool condition, const std::string& what) {
  if (!condition) throw ContractError(what);
}

}  // namespace sam
