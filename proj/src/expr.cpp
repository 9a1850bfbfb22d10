// SPDX-License-Identifier: Apache-2.0

#include "vulnkit/expr.hpp"

namespace vulnkit {

ExprRef make_const(std::int64_t v) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::Const;
  e->value = v;
  return e;
}

ExprRef make_atom(std::size_t index) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::Atom;
  e->value = static_cast<std::int64_t>(index);
  return e;
}

ExprRef make_bin(BinOp op, ExprRef lhs, ExprRef rhs) {
  if (lhs->kind == Expr::Kind::Const && rhs->kind == Expr::Kind::Const)
    if (auto v = apply_binop(op, lhs->value, rhs->value)) return make_const(*v);
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::Bin;
  e->op = op;
  e->lhs = std::move(lhs);
  e->rhs = std::move(rhs);
  return e;
}

std::int64_t evaluate(const Expr& e, std::span<const std::int64_t> assignment) {
  switch (e.kind) {
  case Expr::Kind::Const: return e.value;
  case Expr::Kind::Atom: return assignment[static_cast<std::size_t>(e.value)];
  case Expr::Kind::Bin:
    return apply_binop(e.op, evaluate(*e.lhs, assignment), evaluate(*e.rhs, assignment)).value_or(0);
  }
  return 0;
}

void collect_atoms(const Expr& e, std::vector<bool>& used) {
  switch (e.kind) {
  case Expr::Kind::Const: return;
  case Expr::Kind::Atom: {
    const auto i = static_cast<std::size_t>(e.value);
    if (i >= used.size()) used.resize(i + 1, false);
    used[i] = true;
    return;
  }
  case Expr::Kind::Bin:
    collect_atoms(*e.lhs, used);
    collect_atoms(*e.rhs, used);
    return;
  }
}

std::string to_string(const Expr& e, std::span<const std::string> atom_names) {
  switch (e.kind) {
  case Expr::Kind::Const: return std::to_string(e.value);
  case Expr::Kind::Atom: {
    const auto i = static_cast<std::size_t>(e.value);
    return i < atom_names.size() ? atom_names[i] : "a" + std::to_string(i);
  }
  case Expr::Kind::Bin:
    return "(" + std::string(to_string(e.op)) + " " + to_string(*e.lhs, atom_names) + " " +
           to_string(*e.rhs, atom_names) + ")";
  }
  return "?";
}

Value::Value(ExprRef e) {
  if (e->kind == Expr::Kind::Const)
    constant_ = e->value;
  else
    expr_ = std::move(e);
}

Value combine(BinOp op, const Value& lhs, const Value& rhs) {
  if (!lhs.symbolic() && !rhs.symbolic())
    if (auto v = apply_binop(op, lhs.constant(), rhs.constant())) return Value(*v);
  return Value(make_bin(op, lhs.as_expr(), rhs.as_expr()));
}

} // namespace vulnkit
