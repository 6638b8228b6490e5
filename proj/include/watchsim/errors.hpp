#pragma once

#include <stdexcept>
#include <string>

namespace watchsim {

// Bad inputs: malformed files, schema violations, out-of-range config.
// The CLI maps these to exit code 1; everything else exits 2.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : ValidationError {
  ParseError(const std::string& what, std::size_t line)
      : ValidationError(what + " (line " + std::to_string(line) + ")"),
        line_number(line) {}
  std::size_t line_number;
};

// External-policy bridge failures with the failure class preserved.
struct ProtocolError : std::runtime_error {
  enum class Kind { timeout, malformed, out_of_range, transport };
  ProtocolError(Kind k, const std::string& what)
      : std::runtime_error(what), kind(k) {}
  Kind kind;
};

}  // namespace watchsim
