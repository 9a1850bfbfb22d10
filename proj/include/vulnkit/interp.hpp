// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string_view>
#include <vector>

#include "vulnkit/ir.hpp"

namespace vulnkit {

using Bytes = std::vector<std::uint8_t>;

enum class ViolationKind : std::uint8_t { AssertFail, OutOfBounds, DivByZero };
enum class OutcomeKind : std::uint8_t { NormalExit, Violation, BudgetExhausted };

std::string_view to_string(ViolationKind kind) noexcept;
std::string_view to_string(OutcomeKind kind) noexcept;
std::optional<ViolationKind> parse_violation_kind(std::string_view text) noexcept;

struct Violation {
  ViolationKind kind = ViolationKind::AssertFail;
  Location where;
  auto operator<=>(const Violation&) const = default;
};

/// Intra-procedural block transition observed during execution.
struct Edge {
  FunctionId function = 0;
  int from_block = 0;
  int to_block = 0;
  auto operator<=>(const Edge&) const = default;
};

struct Outcome {
  OutcomeKind kind = OutcomeKind::NormalExit;
  std::optional<Violation> violation;
  std::vector<Location> trace; // executed instructions in order; empty unless recorded
  std::set<FunctionId> covered_functions;
  std::set<Edge> covered_edges; // empty unless recorded
  std::uint64_t steps = 0;

  bool operator==(const Outcome&) const = default;
};

struct RunOptions {
  std::uint64_t step_budget = 1000;
  bool record_trace = true;
  bool record_edges = false;
};

/// Concrete argument for direct function execution: one value for an int
/// parameter, the full contents for a buffer parameter.
struct ConcreteArg {
  bool is_buffer = false;
  std::vector<std::int64_t> values;
};

/// Runs the program entry on `input`. The entry buffer is filled from the
/// input, zero-padded when shorter and truncated when longer.
Outcome run_concrete(const Program& p, std::span<const std::uint8_t> input, std::uint64_t step_budget);
Outcome run_concrete(const Program& p, std::span<const std::uint8_t> input, const RunOptions& opts);

/// Runs `function` as if called with `args`; this is the replay path for
/// isolation harnesses.
Outcome run_function(const Program& p, FunctionId function, std::span<const ConcreteArg> args,
                     const RunOptions& opts);

/// Length of the entry buffer, or 0 when the entry takes no input.
std::size_t entry_input_length(const Program& p);

} // namespace vulnkit
