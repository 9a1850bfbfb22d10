// SPDX-License-Identifier: Apache-2.0

#include "vulnkit/graphs.hpp"

#include <algorithm>
#include <deque>

namespace vulnkit {

std::string to_string(Distance d) { return d.finite() ? std::to_string(d.value()) : std::string("inf"); }

Cfg build_cfg(const Function& f) {
  Cfg g;
  for (const auto& b : f.blocks) g.nodes.push_back(b.label);
  for (std::size_t b = 0; b < f.blocks.size(); ++b) {
    const Block& blk = f.blocks[b];
    const int from = static_cast<int>(b);
    if (blk.begin == blk.end) { // empty block falls through
      g.edges.insert({from, from + 1});
      continue;
    }
    const Instr& last = f.code[static_cast<std::size_t>(blk.end - 1)];
    if (const auto* br = std::get_if<instr::Br>(&last)) {
      g.edges.insert({from, br->on_true});
      g.edges.insert({from, br->on_false});
    } else if (const auto* j = std::get_if<instr::Jmp>(&last)) {
      g.edges.insert({from, j->target});
    } else if (!std::holds_alternative<instr::Ret>(last)) {
      g.edges.insert({from, from + 1});
    }
  }
  return g;
}

std::vector<FunctionId> CallGraph::callees(FunctionId f) const {
  std::vector<FunctionId> out;
  for (const auto& [e, sites] : edges)
    if (e.first == f) out.push_back(e.second);
  return out;
}

std::vector<FunctionId> CallGraph::callers(FunctionId f) const {
  std::vector<FunctionId> out;
  for (const auto& [e, sites] : edges)
    if (e.second == f) out.push_back(e.first);
  return out;
}

CallGraph build_call_graph(const Program& p) {
  CallGraph cg;
  for (std::size_t fi = 0; fi < p.functions.size(); ++fi) {
    const Function& f = p.functions[fi];
    cg.nodes.push_back(f.name);
    for (std::size_t i = 0; i < f.code.size(); ++i)
      if (const auto* c = std::get_if<instr::Call>(&f.code[i]))
        cg.edges[{static_cast<FunctionId>(fi), c->callee}].push_back(
            {static_cast<FunctionId>(fi), static_cast<InstrIndex>(i)});
  }
  return cg;
}

std::vector<std::optional<std::size_t>> call_depths(const Program& p, const CallGraph& cg) {
  std::vector<std::optional<std::size_t>> depth(p.functions.size());
  const FunctionId entry = p.entry_id();
  depth[static_cast<std::size_t>(entry)] = 0;
  std::deque<FunctionId> q{entry};
  while (!q.empty()) {
    const FunctionId f = q.front();
    q.pop_front();
    for (FunctionId g : cg.callees(f)) {
      auto& d = depth[static_cast<std::size_t>(g)];
      if (!d) {
        d = *depth[static_cast<std::size_t>(f)] + 1;
        q.push_back(g);
      }
    }
  }
  return depth;
}

namespace {

// Value of the instruction at `i` given the current estimates. `exit` is
// what a ret contributes, `call` combines the callee with the continuation.
template <class CallRule>
Distance relax(const Function& f, const std::vector<Distance>& row, std::size_t i, Distance ret_value,
               CallRule&& call_rule) {
  const Instr& in = f.code[i];
  const auto at_block = [&](int b) { return row[static_cast<std::size_t>(f.block_start(b))]; };
  if (const auto* br = std::get_if<instr::Br>(&in)) return std::min(at_block(br->on_true), at_block(br->on_false)) + 1;
  if (const auto* j = std::get_if<instr::Jmp>(&in)) return at_block(j->target) + 1;
  if (std::holds_alternative<instr::Ret>(in)) return ret_value;
  if (const auto* c = std::get_if<instr::Call>(&in)) return call_rule(c->callee, row[i + 1]);
  return row[i + 1] + 1;
}

} // namespace

ReturnTables distance_to_return(const Program& p) {
  ReturnTables t;
  t.complete.assign(p.functions.size(), Distance::infinity());
  for (const auto& f : p.functions) t.to_return.emplace_back(f.code.size(), Distance::infinity());

  // Global fixed point: each round relaxes every function to its own local
  // fixed point under the current callee completion costs. Values only
  // decrease, so iteration terminates at the least solution.
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t fi = 0; fi < p.functions.size(); ++fi) {
      const Function& f = p.functions[fi];
      auto& row = t.to_return[fi];
      bool local = true;
      while (local) {
        local = false;
        for (std::size_t i = f.code.size(); i-- > 0;) {
          const Distance v = relax(f, row, i, Distance(1), [&](FunctionId callee, Distance after) {
            return t.complete[static_cast<std::size_t>(callee)] + after + 1;
          });
          if (v < row[i]) {
            row[i] = v;
            local = true;
          }
        }
      }
      if (row[0] < t.complete[fi]) {
        t.complete[fi] = row[0];
        changed = true;
      }
    }
  }
  return t;
}

DistanceTables target_distances(const Program& p, FunctionId target, ReturnTables returns) {
  DistanceTables t;
  t.target = target;
  t.returns = std::move(returns);
  for (const auto& f : p.functions) t.to_target.emplace_back(f.code.size(), Distance::infinity());
  t.to_target[static_cast<std::size_t>(target)][0] = Distance(0);

  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t fi = 0; fi < p.functions.size(); ++fi) {
      const Function& f = p.functions[fi];
      auto& row = t.to_target[fi];
      bool local = true;
      while (local) {
        local = false;
        for (std::size_t i = f.code.size(); i-- > 0;) {
          if (static_cast<FunctionId>(fi) == target && i == 0) continue;
          const Distance v = relax(f, row, i, Distance::infinity(), [&](FunctionId callee, Distance after) {
            const Distance descend = t.to_target[static_cast<std::size_t>(callee)][0] + 1;
            const Distance skip = t.returns.complete[static_cast<std::size_t>(callee)] + after + 1;
            return std::min(descend, skip);
          });
          if (v < row[i]) {
            row[i] = v;
            local = true;
            changed = true;
          }
        }
      }
    }
  }
  return t;
}

DistanceTables target_distances(const Program& p, const std::string& target) {
  const FunctionId id = p.id_of(target);
  return target_distances(p, id, distance_to_return(p));
}

} // namespace vulnkit
