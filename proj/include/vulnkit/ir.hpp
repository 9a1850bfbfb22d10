// SPDX-License-Identifier: Apache-2.0
//
// The minimal imperative IR every analysis runs on: functions made of
// labelled blocks over a flat instruction vector, 64-bit wrapping integers
// and fixed-length integer buffers passed by reference.
#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace vulnkit {

enum class BinOp : std::uint8_t { Add, Sub, Mul, Div, Mod, Eq, Ne, Lt, Le, Gt, Ge };

std::string_view to_string(BinOp op) noexcept;
std::optional<BinOp> parse_binop(std::string_view text) noexcept;
bool is_comparison(BinOp op) noexcept;

/// Wrapping two's-complement semantics shared by the concrete interpreter and
/// the symbolic evaluator. Returns nullopt for division or modulo by zero.
std::optional<std::int64_t> apply_binop(BinOp op, std::int64_t lhs, std::int64_t rhs) noexcept;

using FunctionId = int;
using InstrIndex = int;

/// An instruction operand. `Var` indexes the enclosing function's integer
/// slots, `Buf` its buffer slots (only legal as a call argument), `Imm` is a
/// literal.
struct Operand {
  enum class Kind : std::uint8_t { Var, Imm, Buf };
  Kind kind = Kind::Imm;
  std::int64_t value = 0;

  static Operand var(int slot) { return {Kind::Var, slot}; }
  static Operand imm(std::int64_t v) { return {Kind::Imm, v}; }
  static Operand buf(int slot) { return {Kind::Buf, slot}; }

  bool operator==(const Operand&) const = default;
};

/// Branch or assertion condition: either a single operand tested against
/// zero, or an inline binary operation `(op lhs rhs)`.
struct Cond {
  std::optional<BinOp> op;
  Operand lhs;
  Operand rhs;

  bool operator==(const Cond&) const = default;
};

namespace instr {
struct Const {
  int dst;
  std::int64_t value;
  bool operator==(const Const&) const = default;
};
struct Bin {
  int dst;
  BinOp op;
  Operand lhs, rhs;
  bool operator==(const Bin&) const = default;
};
struct Load {
  int dst;
  int buf;
  Operand index;
  bool operator==(const Load&) const = default;
};
struct Store {
  int buf;
  Operand index;
  Operand value;
  bool operator==(const Store&) const = default;
};
struct Br {
  Cond cond;
  int on_true;  // block index
  int on_false; // block index
  bool operator==(const Br&) const = default;
};
struct Jmp {
  int target; // block index
  bool operator==(const Jmp&) const = default;
};
struct Call {
  FunctionId callee;
  std::vector<Operand> args;
  std::optional<int> dst;
  bool operator==(const Call&) const = default;
};
struct Ret {
  std::optional<Operand> value;
  bool operator==(const Ret&) const = default;
};
struct Assert {
  Cond cond;
  bool operator==(const Assert&) const = default;
};
} // namespace instr

using Instr = std::variant<instr::Const, instr::Bin, instr::Load, instr::Store, instr::Br,
                           instr::Jmp, instr::Call, instr::Ret, instr::Assert>;

bool is_terminator(const Instr& in) noexcept;

enum class ParamKind : std::uint8_t { Int, Buf };

struct Param {
  std::string name;
  ParamKind kind = ParamKind::Int;
  std::size_t length = 0; // buffers only; 0 means "unsized"
  int slot = 0;           // index into int_slots or buf_slots
  bool operator==(const Param&) const = default;
};

struct BufferSlot {
  std::string name;
  std::size_t length = 0;
  bool is_param = false;
  bool operator==(const BufferSlot&) const = default;
};

/// A labelled range [begin, end) of the function's flat instruction vector.
struct Block {
  std::string label;
  InstrIndex begin = 0;
  InstrIndex end = 0;
  bool operator==(const Block&) const = default;
};

struct Function {
  std::string name;
  std::vector<Param> params;
  std::vector<std::string> int_slots; // int params first, then locals in order of definition
  std::vector<BufferSlot> buf_slots;  // buffer params first, then local buffers
  std::vector<Block> blocks;          // blocks[0] is the entry block
  std::vector<Instr> code;
  std::vector<int> block_of; // instruction index -> block index

  InstrIndex block_start(int block) const { return blocks[block].begin; }
  std::size_t size() const { return code.size(); }
  bool returns_value() const;
  std::optional<int> find_block(std::string_view label) const;

  bool operator==(const Function& o) const {
    return name == o.name && params == o.params && int_slots == o.int_slots &&
           buf_slots == o.buf_slots && blocks == o.blocks && code == o.code;
  }
};

/// A parsed, validated program. Immutable after construction and safe to
/// share between threads.
struct Program {
  std::vector<Function> functions; // declaration order
  std::string entry = "main";

  std::optional<FunctionId> find(std::string_view name) const;
  FunctionId id_of(std::string_view name) const; // throws UnknownTarget
  const Function& function(FunctionId id) const { return functions[static_cast<std::size_t>(id)]; }
  const Function& function(std::string_view name) const { return function(id_of(name)); }
  FunctionId entry_id() const { return id_of(entry); }
  std::size_t instruction_count() const;

  bool operator==(const Program& o) const { return functions == o.functions && entry == o.entry; }
};

/// Program point: an instruction inside a function.
struct Location {
  FunctionId function = 0;
  InstrIndex instr = 0;
  auto operator<=>(const Location&) const = default;
};

/// Parses textual IR. Throws Error with kind SyntaxError, UndefinedLabel,
/// UndefinedCallee, MissingEntry or InvalidEntry.
Program parse_program(std::string_view text, std::string entry = "main");

/// Canonical text form; `parse_program(print_program(p)) == p`.
std::string print_program(const Program& p);
std::string print_instr(const Function& f, const Program& p, const Instr& in);

/// Re-derives block_of and checks every structural invariant. Used by
/// builders that assemble functions programmatically.
void validate_program(Program& p);

} // namespace vulnkit
