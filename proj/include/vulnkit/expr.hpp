// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "vulnkit/ir.hpp"

namespace vulnkit {

struct Expr;
using ExprRef = std::shared_ptr<const Expr>;

/// Immutable expression tree over solver atoms. Subtrees are shared.
struct Expr {
  enum class Kind : std::uint8_t { Const, Atom, Bin };
  Kind kind = Kind::Const;
  std::int64_t value = 0; // constant value or atom index
  BinOp op = BinOp::Add;
  ExprRef lhs;
  ExprRef rhs;
};

ExprRef make_const(std::int64_t v);
ExprRef make_atom(std::size_t index);
/// Folds when both sides are constant and the operation is defined.
ExprRef make_bin(BinOp op, ExprRef lhs, ExprRef rhs);

/// Total evaluation: division by zero evaluates to 0. Path conditions always
/// carry an explicit non-zero constraint ahead of any division they guard.
std::int64_t evaluate(const Expr& e, std::span<const std::int64_t> assignment);

/// Marks every atom index referenced by `e`.
void collect_atoms(const Expr& e, std::vector<bool>& used);

std::string to_string(const Expr& e, std::span<const std::string> atom_names = {});

/// Concrete or symbolic 64-bit value held in a symbolic store.
class Value {
public:
  Value() = default;
  explicit Value(std::int64_t c) : constant_(c) {}
  explicit Value(ExprRef e);

  bool symbolic() const { return expr_ != nullptr; }
  std::int64_t constant() const { return constant_; }
  const ExprRef& expr() const { return expr_; }
  ExprRef as_expr() const { return expr_ ? expr_ : make_const(constant_); }

private:
  std::int64_t constant_ = 0;
  ExprRef expr_;
};

Value combine(BinOp op, const Value& lhs, const Value& rhs);

/// `(expr != 0) == expect_true`.
struct Constraint {
  ExprRef expr;
  bool expect_true = true;

  bool holds(std::span<const std::int64_t> assignment) const {
    return (evaluate(*expr, assignment) != 0) == expect_true;
  }
  Constraint negated() const { return {expr, !expect_true}; }
};

} // namespace vulnkit
