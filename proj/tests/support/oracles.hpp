// SPDX-License-Identifier: Apache-2.0
//
// Brute-force reference implementations the tests compare against. None of
// them shares code with the library beyond the parsed Program and the
// concrete interpreter.
#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vulnkit/graphs.hpp"
#include "vulnkit/interp.hpp"
#include "vulnkit/ir.hpp"
#include "vulnkit/solver.hpp"
#include "vulnkit/symex.hpp"

namespace oracle {

using vulnkit::FunctionId;
using vulnkit::InstrIndex;
using vulnkit::Program;

using Frame = std::pair<FunctionId, InstrIndex>; // caller frames hold their resume point
using Stack = std::vector<Frame>;

struct Step {
  std::vector<Stack> next;
  bool returns_from_bottom = false; // the instruction is a ret of the only frame
};

/// Guard-insensitive successors of a stack in the expanded instruction graph.
Step successors(const Program& p, const Stack& s, std::size_t max_depth);

/// Shortest instruction count from `start` until the top frame sits at the
/// entry of `target`, never returning out of the bottom frame.
std::optional<std::uint64_t> shortest_to_target(const Program& p, const Stack& start, FunctionId target,
                                                std::size_t extra_depth = 8);

/// Shortest instruction count until the ret of the frame (f, i) completes.
std::optional<std::uint64_t> shortest_to_return(const Program& p, FunctionId f, InstrIndex i,
                                                std::size_t extra_depth = 8);

/// Stacks reachable from the entry in the expanded graph with at most
/// `max_stack` frames.
std::vector<Stack> reachable_stacks(const Program& p, std::size_t max_stack);

vulnkit::ExecState state_at(const Stack& s);

/// Every violation some entry input triggers; inputs enumerate all byte
/// strings of the entry buffer length (which must be at most 2).
std::set<vulnkit::Violation> violations_over_all_inputs(const Program& p, std::uint64_t step_budget = 10000);

/// Smallest entry input that triggers `v`, if any.
std::optional<vulnkit::Bytes> first_input_triggering(const Program& p, const vulnkit::Violation& v,
                                                     std::uint64_t step_budget = 10000);

/// Enumerates assignments of the referenced atoms in lexicographic order.
vulnkit::SolveResult brute_force_solve(std::span<const vulnkit::Constraint> pc, std::span<const vulnkit::Atom> atoms);

/// Betweenness by enumerating every shortest path between every ordered pair.
std::vector<double> brute_force_betweenness(const vulnkit::CallGraph& cg);

/// Functions from which `target` is reachable along call edges.
std::set<FunctionId> can_reach(const Program& p, FunctionId target);

std::string fixture_path(const std::string& name);
Program load_fixture(const std::string& name);
std::vector<std::string> fixture_names();

} // namespace oracle
