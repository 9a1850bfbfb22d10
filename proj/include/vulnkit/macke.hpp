// SPDX-License-Identifier: Apache-2.0
//
// Compositional analysis: every function is explored in isolation, then
// findings are propagated up the call graph by replacing a vulnerable
// callee with a check against its exploits and steering the caller's
// exploration toward it.
#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vulnkit/interp.hpp"
#include "vulnkit/ir.hpp"
#include "vulnkit/solver.hpp"
#include "vulnkit/symex.hpp"

namespace vulnkit {

struct HarnessConfig {
  std::size_t buf_len = 8; // for unsized buffer parameters
};

/// Isolated entry for one function: parameters become unconstrained atoms.
struct Harness {
  FunctionId function = 0;
  std::string name;   // synthetic entry function name
  EntrySpec entry;    // what the explorer runs
  std::string source; // the same harness as IR text, calling the function
};

Harness isolate_function(const Program& p, const std::string& f, const HarnessConfig& cfg = {});

/// `p` plus the harness source, with the harness as entry.
Program harness_program(const Program& p, const Harness& h);

struct ExploitArg {
  std::string name;
  bool is_buffer = false;
  std::vector<std::int64_t> values;
  std::vector<bool> constrained; // per value; empty means all constrained
  auto operator<=>(const ExploitArg&) const = default;
};

/// Concrete arguments for one function that trigger a violation.
struct Exploit {
  std::vector<ExploitArg> args;
  auto operator<=>(const Exploit&) const = default;
};

Exploit exploit_from_model(const EntrySpec& entry, std::span<const std::int64_t> model,
                           const std::vector<bool>& constrained);
std::vector<ConcreteArg> exploit_args(const Exploit& e);

struct VulnRecord {
  std::string id; // "Kind@function:instr/foundIn"
  ViolationKind kind = ViolationKind::AssertFail;
  Location root;
  FunctionId found_in = 0;
  bool derived = false; // found by propagation rather than by isolation
  std::vector<Exploit> exploits;
  bool confirmed_from_entry = false;
  std::optional<Bytes> entry_input; // replayed confirmation input

  Violation violation() const { return {kind, root}; }
};

struct ErrorChain {
  Violation root;
  std::vector<FunctionId> functions; // outermost caller first; last holds the root
  std::size_t length() const { return functions.size(); }
};

struct MackeOptions {
  std::uint64_t budget_states = 200;  // per function in phase 1
  std::uint64_t phase2_states = 0;    // per link; 0 means budget_states
  std::uint64_t max_steps = 10000;    // per path
  std::size_t buf_len = 8;
  unsigned threads = 0; // phase 1 workers; 0 picks the hardware concurrency
  SolverConfig solver;
};

struct MackeReport {
  std::vector<VulnRecord> records; // sorted by (root, kind, found_in)
  std::vector<ErrorChain> chains;  // one per root, sorted by root
  std::uint64_t phase1_states = 0;
  std::uint64_t phase2_states = 0;

  const VulnRecord* find(const std::string& id) const;
  /// Longest chain for a root violation, or nullptr.
  const ErrorChain* chain_for(const Violation& root) const;
};

std::string record_id(const Program& p, const Violation& v, FunctionId found_in);

/// One coverage-guided exploration per isolated function. The result does
/// not depend on the order or concurrency of the per-function runs.
std::vector<VulnRecord> run_phase1(const Program& p, const MackeOptions& opts, std::uint64_t* states_used = nullptr);

/// Replaces the body of `v` with assertions that fail exactly when the
/// parameters match one of the exploits on their constrained positions.
/// Throws ArityMismatch.
Program replace_with_exploit_check(const Program& p, const std::string& v, const std::vector<Exploit>& exploits);

/// Propagates phase-1 findings to callers and sets confirmedFromEntry.
MackeReport run_phase2(const Program& p, std::vector<VulnRecord> phase1, const MackeOptions& opts);

/// Both phases.
MackeReport run_macke(const Program& p, const MackeOptions& opts = {});

} // namespace vulnkit
