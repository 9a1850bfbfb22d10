// SPDX-License-Identifier: Apache-2.0

#include "vulnkit/solver.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "vulnkit/error.hpp"

namespace vulnkit {

namespace {

using Int = std::int64_t;
constexpr Int kMin = std::numeric_limits<Int>::min();
constexpr Int kMax = std::numeric_limits<Int>::max();

struct Interval {
  Int lo, hi;
  bool empty() const { return lo > hi; }
};

BinOp negate(BinOp op) {
  switch (op) {
  case BinOp::Eq: return BinOp::Ne;
  case BinOp::Ne: return BinOp::Eq;
  case BinOp::Lt: return BinOp::Ge;
  case BinOp::Le: return BinOp::Gt;
  case BinOp::Gt: return BinOp::Le;
  case BinOp::Ge: return BinOp::Lt;
  default: return op;
  }
}

BinOp mirror(BinOp op) {
  switch (op) {
  case BinOp::Lt: return BinOp::Gt;
  case BinOp::Le: return BinOp::Ge;
  case BinOp::Gt: return BinOp::Lt;
  case BinOp::Ge: return BinOp::Le;
  default: return op;
  }
}

// Tightens `iv` for `atom op c`; returns whether anything changed.
bool narrow(Interval& iv, BinOp op, Int c) {
  const Interval before = iv;
  switch (op) {
  case BinOp::Eq:
    iv.lo = std::max(iv.lo, c);
    iv.hi = std::min(iv.hi, c);
    break;
  case BinOp::Ne:
    if (iv.lo == c && c != kMax) iv.lo = c + 1;
    else if (iv.lo == c) iv.hi = kMin;
    if (iv.hi == c && c != kMin) iv.hi = c - 1;
    break;
  case BinOp::Lt:
    if (c == kMin) iv.hi = kMin, iv.lo = kMax;
    else iv.hi = std::min(iv.hi, c - 1);
    break;
  case BinOp::Le: iv.hi = std::min(iv.hi, c); break;
  case BinOp::Gt:
    if (c == kMax) iv.lo = kMax, iv.hi = kMin;
    else iv.lo = std::max(iv.lo, c + 1);
    break;
  case BinOp::Ge: iv.lo = std::max(iv.lo, c); break;
  default: break;
  }
  return iv.lo != before.lo || iv.hi != before.hi;
}

// Recognises `atom op const` (either operand order, either polarity) and
// bare-atom truth tests.
bool simple_bound(const Constraint& c, std::size_t& atom, BinOp& op, Int& k) {
  const Expr& e = *c.expr;
  if (e.kind == Expr::Kind::Atom) {
    atom = static_cast<std::size_t>(e.value);
    op = c.expect_true ? BinOp::Ne : BinOp::Eq;
    k = 0;
    return true;
  }
  if (e.kind != Expr::Kind::Bin || !is_comparison(e.op)) return false;
  BinOp o = e.op;
  if (e.lhs->kind == Expr::Kind::Atom && e.rhs->kind == Expr::Kind::Const) {
    atom = static_cast<std::size_t>(e.lhs->value);
    k = e.rhs->value;
  } else if (e.lhs->kind == Expr::Kind::Const && e.rhs->kind == Expr::Kind::Atom) {
    atom = static_cast<std::size_t>(e.rhs->value);
    k = e.lhs->value;
    o = mirror(o);
  } else {
    return false;
  }
  op = c.expect_true ? o : negate(o);
  return true;
}

struct Prepared {
  std::vector<const Constraint*> constraints;
  std::vector<std::vector<std::size_t>> atoms_of; // per constraint, sorted
};

Prepared prepare(std::span<const Constraint> pc, std::size_t natoms) {
  Prepared p;
  for (const auto& c : pc) {
    std::vector<bool> used(natoms, false);
    collect_atoms(*c.expr, used);
    std::vector<std::size_t> list;
    for (std::size_t i = 0; i < used.size(); ++i)
      if (used[i]) list.push_back(i);
    p.constraints.push_back(&c);
    p.atoms_of.push_back(std::move(list));
  }
  return p;
}

class GroupSearch {
public:
  GroupSearch(const std::vector<std::size_t>& atoms, const std::vector<const Constraint*>& cons,
              const std::vector<std::vector<std::size_t>>& cons_atoms, const std::vector<Interval>& dom,
              std::vector<Int>& model)
      : atoms_(atoms), dom_(dom), model_(model), ready_(atoms.size()) {
    for (std::size_t c = 0; c < cons.size(); ++c) {
      // Position of the constraint's highest atom in the group order: the
      // constraint can be checked once that atom has a value.
      std::size_t level = 0;
      for (std::size_t a : cons_atoms[c]) {
        auto it = std::find(atoms_.begin(), atoms_.end(), a);
        level = std::max(level, static_cast<std::size_t>(it - atoms_.begin()));
      }
      ready_[level].push_back(cons[c]);
    }
  }

  bool run() { return assign(0); }

private:
  bool assign(std::size_t level) {
    if (level == atoms_.size()) return true;
    const std::size_t a = atoms_[level];
    const Interval iv = dom_[a];
    for (Int v = iv.lo;; ++v) {
      model_[a] = v;
      bool ok = true;
      for (const Constraint* c : ready_[level]) {
        if (!c->holds(model_)) {
          ok = false;
          break;
        }
      }
      if (ok && assign(level + 1)) return true;
      if (v == iv.hi) break;
    }
    return false;
  }

  const std::vector<std::size_t>& atoms_;
  const std::vector<Interval>& dom_;
  std::vector<Int>& model_;
  std::vector<std::vector<const Constraint*>> ready_;
};

SolveResult solve_prepared(const Prepared& prep, std::span<const Atom> atoms, const SolverConfig& cfg) {
  const std::size_t n = atoms.size();
  SolveResult res;
  std::vector<Interval> dom(n);
  for (std::size_t i = 0; i < n; ++i) dom[i] = {atoms[i].lo, atoms[i].hi};

  std::vector<Int> model(n);
  for (std::size_t i = 0; i < n; ++i) model[i] = atoms[i].lo;

  // Ground constraints decide immediately.
  for (std::size_t c = 0; c < prep.constraints.size(); ++c)
    if (prep.atoms_of[c].empty() && !prep.constraints[c]->holds(model)) return res;

  // Interval narrowing to a fixed point.
  bool changed = true;
  while (changed) {
    changed = false;
    for (const Constraint* c : prep.constraints) {
      std::size_t a = 0;
      BinOp op{};
      Int k = 0;
      if (simple_bound(*c, a, op, k) && a < n && narrow(dom[a], op, k)) {
        if (dom[a].empty()) return res;
        changed = true;
      }
    }
  }

  // Independent groups via union-find over shared atoms.
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::vector<bool> constrained(n, false);
  for (const auto& list : prep.atoms_of) {
    for (std::size_t a : list) constrained[a] = true;
    for (std::size_t k = 1; k < list.size(); ++k) parent[find(list[k])] = find(list[0]);
  }

  for (std::size_t root = 0; root < n; ++root) {
    if (!constrained[root] || find(root) != root) continue;
    std::vector<std::size_t> group;
    for (std::size_t a = 0; a < n; ++a)
      if (constrained[a] && find(a) == root) group.push_back(a);
    if (group.size() > cfg.max_atoms)
      throw Error(ErrorKind::SolverBudgetExceeded,
                  "constraint group has " + std::to_string(group.size()) + " atoms (limit " +
                      std::to_string(cfg.max_atoms) + ")");
    long double space = 1;
    for (std::size_t a : group) space *= static_cast<long double>(dom[a].hi) - static_cast<long double>(dom[a].lo) + 1;
    if (space > static_cast<long double>(cfg.max_assignments))
      throw Error(ErrorKind::SolverBudgetExceeded, "residual search space exceeds the assignment cap");

    std::vector<const Constraint*> cons;
    std::vector<std::vector<std::size_t>> cons_atoms;
    for (std::size_t c = 0; c < prep.constraints.size(); ++c) {
      if (prep.atoms_of[c].empty() || find(prep.atoms_of[c][0]) != root) continue;
      cons.push_back(prep.constraints[c]);
      cons_atoms.push_back(prep.atoms_of[c]);
    }
    if (!GroupSearch(group, cons, cons_atoms, dom, model).run()) return res;
  }
  res.sat = true;
  res.model = std::move(model);
  return res;
}

} // namespace

SolveResult solve_path_condition(std::span<const Constraint> pc, std::span<const Atom> atoms,
                                 const SolverConfig& cfg) {
  return solve_prepared(prepare(pc, atoms.size()), atoms, cfg);
}

bool is_feasible(std::span<const Constraint> base, const Constraint& extra, std::span<const Atom> atoms,
                 const SolverConfig& cfg) {
  const std::size_t n = atoms.size();
  Prepared all = prepare(base, n);
  std::vector<bool> used(n, false);
  collect_atoms(*extra.expr, used);

  Prepared sub;
  sub.constraints.push_back(&extra);
  {
    std::vector<std::size_t> list;
    for (std::size_t i = 0; i < n; ++i)
      if (used[i]) list.push_back(i);
    sub.atoms_of.push_back(std::move(list));
  }
  std::vector<bool> taken(all.constraints.size(), false);
  bool grew = true;
  while (grew) {
    grew = false;
    for (std::size_t c = 0; c < all.constraints.size(); ++c) {
      if (taken[c]) continue;
      const bool touches = std::any_of(all.atoms_of[c].begin(), all.atoms_of[c].end(),
                                       [&](std::size_t a) { return used[a]; });
      if (!touches) continue;
      taken[c] = true;
      grew = true;
      for (std::size_t a : all.atoms_of[c]) used[a] = true;
      sub.constraints.push_back(all.constraints[c]);
      sub.atoms_of.push_back(all.atoms_of[c]);
    }
  }
  return solve_prepared(sub, atoms, cfg).sat;
}

} // namespace vulnkit
