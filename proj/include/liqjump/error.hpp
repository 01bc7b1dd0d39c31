#pragma once

#include <stdexcept>
#include <string>

namespace liqjump {

// Failure classes map one-to-one onto CLI exit codes (see tools/liqjump.cpp).
enum class ErrorKind {
  config = 2,   // invalid configuration or arguments
  io = 3,       // unreadable input, unwritable output
  data = 4,     // malformed or insufficient data
  numeric = 5,  // degenerate numerics (zero variance, failed fits)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace liqjump
