// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <compare>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "vulnkit/ir.hpp"

namespace vulnkit {

/// Instruction count in N ∪ {∞}. Addition saturates at infinity.
class Distance {
public:
  constexpr Distance() = default;
  constexpr explicit Distance(std::uint64_t v) : v_(v) {}

  static constexpr Distance infinity() { return Distance(kInf); }

  constexpr bool finite() const { return v_ != kInf; }
  constexpr std::uint64_t value() const { return v_; }

  friend constexpr Distance operator+(Distance a, Distance b) {
    if (!a.finite() || !b.finite()) return infinity();
    return Distance(a.v_ + b.v_);
  }
  friend constexpr Distance operator+(Distance a, std::uint64_t b) { return a + Distance(b); }
  friend constexpr auto operator<=>(Distance, Distance) = default;

private:
  static constexpr std::uint64_t kInf = std::numeric_limits<std::uint64_t>::max();
  std::uint64_t v_ = kInf;
};

std::string to_string(Distance d);

struct Cfg {
  FunctionId function = 0;
  std::vector<std::string> nodes;     // block labels
  std::set<std::pair<int, int>> edges; // block index pairs
};

/// Block graph induced by terminators and fallthrough.
Cfg build_cfg(const Function& f);

struct CallGraph {
  std::vector<std::string> nodes;
  std::map<std::pair<FunctionId, FunctionId>, std::vector<Location>> edges; // caller->callee: call sites

  std::vector<FunctionId> callees(FunctionId f) const;
  std::vector<FunctionId> callers(FunctionId f) const;
  bool has_edge(FunctionId from, FunctionId to) const { return edges.count({from, to}) != 0; }
};

CallGraph build_call_graph(const Program& p);

/// Breadth-first call depth from the entry; nullopt for unreachable functions.
std::vector<std::optional<std::size_t>> call_depths(const Program& p, const CallGraph& cg);

struct ReturnTables {
  std::vector<std::vector<Distance>> to_return; // [function][instr]
  std::vector<Distance> complete;               // to_return[f][0]
};

struct DistanceTables {
  FunctionId target = 0;
  std::vector<std::vector<Distance>> to_target; // [function][instr]
  ReturnTables returns;

  Distance direct(Location at) const {
    return to_target[static_cast<std::size_t>(at.function)][static_cast<std::size_t>(at.instr)];
  }
  Distance to_return(Location at) const {
    return returns.to_return[static_cast<std::size_t>(at.function)][static_cast<std::size_t>(at.instr)];
  }
};

/// Minimum instruction executions until the current frame's ret completes.
/// A call costs 1 plus the callee's full minimal completion.
ReturnTables distance_to_return(const Program& p);

/// Minimum instruction executions until control sits at the entry of
/// `target`, never returning out of the current frame. Throws UnknownTarget.
DistanceTables target_distances(const Program& p, const std::string& target);
DistanceTables target_distances(const Program& p, FunctionId target, ReturnTables returns);

} // namespace vulnkit
