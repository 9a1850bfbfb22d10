// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vulnkit/expr.hpp"

namespace vulnkit {

/// Symbolic input with a finite inclusive domain.
struct Atom {
  std::string name;
  std::int64_t lo = 0;
  std::int64_t hi = 255;
};

struct SolverConfig {
  std::size_t max_atoms = 4;                  // per independent constraint group
  std::uint64_t max_assignments = 1ULL << 24; // residual space per group after narrowing
};

struct SolveResult {
  bool sat = false;
  std::vector<std::int64_t> model; // one value per atom when sat
};

/// Exact decision procedure for finite-domain constraints. Intervals are
/// first narrowed from atom-vs-constant comparisons; constraints are then
/// split into groups sharing no atoms and each group is enumerated in
/// lexicographic order, so a Sat answer carries the lexicographically
/// smallest model (atoms in declaration order). Throws SolverBudgetExceeded
/// when a group has more than `max_atoms` atoms or its residual space
/// exceeds `max_assignments`.
SolveResult solve_path_condition(std::span<const Constraint> pc, std::span<const Atom> atoms,
                                 const SolverConfig& cfg = {});

/// Satisfiability of `base ∧ extra`, assuming `base` alone is satisfiable:
/// only the constraints connected to `extra` through shared atoms are
/// re-checked.
bool is_feasible(std::span<const Constraint> base, const Constraint& extra, std::span<const Atom> atoms,
                 const SolverConfig& cfg = {});

} // namespace vulnkit
