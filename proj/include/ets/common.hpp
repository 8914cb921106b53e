#pragma once

#include <stdexcept>
#include <string>

namespace ets {

// Scalar used by the production pipeline (trainer, CLI, scoring).
// The numeric core is templated so tests can instantiate double.
using Real = float;

// Structured error: every failure carries a machine-readable kind
// ("dataset-layout", "config", "checksum", "shape", "single-class", ...)
// plus a human message. The CLI prints "error[kind]: message".
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

[[noreturn]] inline void fail(const std::string& kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace ets
