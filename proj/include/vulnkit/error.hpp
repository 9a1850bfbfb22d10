// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vulnkit {

enum class ErrorKind {
  SyntaxError,
  UndefinedLabel,
  UndefinedCallee,
  MissingEntry,
  InvalidEntry,
  UnknownTarget,
  UnknownStrategy,
  SolverBudgetExceeded,
  TargetUnreachable,
  ArityMismatch,
  EmptyInput,
  NoSeeds,
  UnknownMode,
  UnknownVulnerability,
  Underdetermined,
  SingularDesign,
  Io,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Every failure surfaced by the library. `line()` is nonzero only for
/// parser diagnostics.
class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& message, int line = 0)
      : std::runtime_error(message), kind_(kind), line_(line) {}

  ErrorKind kind() const noexcept { return kind_; }
  int line() const noexcept { return line_; }

private:
  ErrorKind kind_;
  int line_;
};

} // namespace vulnkit
