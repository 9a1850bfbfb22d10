// SPDX-License-Identifier: Apache-2.0

#include "vulnkit/interp.hpp"

#include <algorithm>

#include "vulnkit/error.hpp"

namespace vulnkit {

std::string_view to_string(ViolationKind kind) noexcept {
  switch (kind) {
  case ViolationKind::AssertFail: return "AssertFail";
  case ViolationKind::OutOfBounds: return "OutOfBounds";
  case ViolationKind::DivByZero: return "DivByZero";
  }
  return "?";
}

std::string_view to_string(OutcomeKind kind) noexcept {
  switch (kind) {
  case OutcomeKind::NormalExit: return "NormalExit";
  case OutcomeKind::Violation: return "Violation";
  case OutcomeKind::BudgetExhausted: return "BudgetExhausted";
  }
  return "?";
}

std::optional<ViolationKind> parse_violation_kind(std::string_view text) noexcept {
  for (auto k : {ViolationKind::AssertFail, ViolationKind::OutOfBounds, ViolationKind::DivByZero})
    if (to_string(k) == text) return k;
  return std::nullopt;
}

std::size_t entry_input_length(const Program& p) {
  const Function& f = p.function(p.entry_id());
  return f.params.empty() ? 0 : f.params[0].length;
}

namespace {

struct Frame {
  FunctionId function;
  InstrIndex pc;
  std::vector<std::int64_t> ints;
  std::vector<std::size_t> bufs; // memory object per buffer slot
  std::optional<int> ret_dst;    // caller slot receiving the return value
};

class Machine {
public:
  Machine(const Program& p, const RunOptions& opts) : p_(p), opts_(opts) {}

  Outcome run(FunctionId fn, std::span<const ConcreteArg> args) {
    const Function& f = p_.function(fn);
    Frame frame = make_frame(fn);
    for (std::size_t k = 0; k < f.params.size(); ++k) {
      const Param& prm = f.params[k];
      const ConcreteArg* a = k < args.size() ? &args[k] : nullptr;
      if (prm.kind == ParamKind::Int) {
        frame.ints[static_cast<std::size_t>(prm.slot)] = (a && !a->values.empty()) ? a->values[0] : 0;
      } else {
        std::vector<std::int64_t> contents = a ? a->values : std::vector<std::int64_t>{};
        if (prm.length) contents.resize(prm.length, 0);
        if (contents.empty()) contents.resize(1, 0);
        memory_.push_back(std::move(contents));
        frame.bufs[static_cast<std::size_t>(prm.slot)] = memory_.size() - 1;
      }
    }
    stack_.push_back(std::move(frame));
    out_.covered_functions.insert(fn);

    while (!stack_.empty()) {
      if (out_.steps >= opts_.step_budget) {
        out_.kind = OutcomeKind::BudgetExhausted;
        return std::move(out_);
      }
      if (!step()) return std::move(out_);
    }
    out_.kind = OutcomeKind::NormalExit;
    return std::move(out_);
  }

private:
  Frame make_frame(FunctionId fn) {
    const Function& f = p_.function(fn);
    Frame fr{fn, 0, std::vector<std::int64_t>(f.int_slots.size(), 0), std::vector<std::size_t>(f.buf_slots.size(), 0),
             std::nullopt};
    for (std::size_t s = 0; s < f.buf_slots.size(); ++s) {
      if (f.buf_slots[s].is_param) continue;
      memory_.emplace_back(f.buf_slots[s].length, 0);
      fr.bufs[s] = memory_.size() - 1;
    }
    return fr;
  }

  std::int64_t value(const Frame& fr, const Operand& o) const {
    return o.kind == Operand::Kind::Imm ? o.value : fr.ints[static_cast<std::size_t>(o.value)];
  }

  std::int64_t cond(const Frame& fr, const Cond& c) const {
    if (!c.op) return value(fr, c.lhs);
    return apply_binop(*c.op, value(fr, c.lhs), value(fr, c.rhs)).value_or(0); // no div in conditions
  }

  bool violate(ViolationKind kind, Location at) {
    out_.kind = OutcomeKind::Violation;
    out_.violation = Violation{kind, at};
    return false;
  }

  void jump(Frame& fr, int block) {
    const Function& f = p_.function(fr.function);
    if (opts_.record_edges)
      out_.covered_edges.insert({fr.function, f.block_of[static_cast<std::size_t>(fr.pc)], block});
    fr.pc = f.block_start(block);
  }

  void advance(Frame& fr) {
    const Function& f = p_.function(fr.function);
    const auto from = f.block_of[static_cast<std::size_t>(fr.pc)];
    ++fr.pc;
    const auto to = f.block_of[static_cast<std::size_t>(fr.pc)];
    if (opts_.record_edges && from != to) out_.covered_edges.insert({fr.function, from, to});
  }

  // Executes one instruction; returns false when execution stopped on a
  // violation.
  bool step() {
    Frame& fr = stack_.back();
    const Function& f = p_.function(fr.function);
    const Location here{fr.function, fr.pc};
    const Instr& in = f.code[static_cast<std::size_t>(fr.pc)];
    ++out_.steps;
    if (opts_.record_trace) out_.trace.push_back(here);

    if (const auto* c = std::get_if<instr::Const>(&in)) {
      fr.ints[static_cast<std::size_t>(c->dst)] = c->value;
      advance(fr);
    } else if (const auto* b = std::get_if<instr::Bin>(&in)) {
      auto r = apply_binop(b->op, value(fr, b->lhs), value(fr, b->rhs));
      if (!r) return violate(ViolationKind::DivByZero, here);
      fr.ints[static_cast<std::size_t>(b->dst)] = *r;
      advance(fr);
    } else if (const auto* l = std::get_if<instr::Load>(&in)) {
      auto& mem = memory_[fr.bufs[static_cast<std::size_t>(l->buf)]];
      const std::int64_t idx = value(fr, l->index);
      if (idx < 0 || static_cast<std::uint64_t>(idx) >= mem.size()) return violate(ViolationKind::OutOfBounds, here);
      fr.ints[static_cast<std::size_t>(l->dst)] = mem[static_cast<std::size_t>(idx)];
      advance(fr);
    } else if (const auto* s = std::get_if<instr::Store>(&in)) {
      auto& mem = memory_[fr.bufs[static_cast<std::size_t>(s->buf)]];
      const std::int64_t idx = value(fr, s->index);
      if (idx < 0 || static_cast<std::uint64_t>(idx) >= mem.size()) return violate(ViolationKind::OutOfBounds, here);
      mem[static_cast<std::size_t>(idx)] = value(fr, s->value);
      advance(fr);
    } else if (const auto* br = std::get_if<instr::Br>(&in)) {
      jump(fr, cond(fr, br->cond) != 0 ? br->on_true : br->on_false);
    } else if (const auto* j = std::get_if<instr::Jmp>(&in)) {
      jump(fr, j->target);
    } else if (const auto* call = std::get_if<instr::Call>(&in)) {
      const Function& callee = p_.function(call->callee);
      Frame next = make_frame(call->callee);
      for (std::size_t k = 0; k < callee.params.size(); ++k) {
        const Param& prm = callee.params[k];
        if (prm.kind == ParamKind::Int)
          next.ints[static_cast<std::size_t>(prm.slot)] = value(fr, call->args[k]);
        else
          next.bufs[static_cast<std::size_t>(prm.slot)] = fr.bufs[static_cast<std::size_t>(call->args[k].value)];
      }
      next.ret_dst = call->dst;
      advance(fr); // resume point
      out_.covered_functions.insert(call->callee);
      stack_.push_back(std::move(next));
    } else if (const auto* r = std::get_if<instr::Ret>(&in)) {
      const std::int64_t rv = r->value ? value(fr, *r->value) : 0;
      const auto dst = fr.ret_dst;
      stack_.pop_back();
      if (!stack_.empty() && dst) stack_.back().ints[static_cast<std::size_t>(*dst)] = rv;
    } else if (const auto* a = std::get_if<instr::Assert>(&in)) {
      if (cond(fr, a->cond) == 0) return violate(ViolationKind::AssertFail, here);
      advance(fr);
    }
    return true;
  }

  const Program& p_;
  const RunOptions& opts_;
  std::vector<Frame> stack_;
  std::vector<std::vector<std::int64_t>> memory_;
  Outcome out_;
};

} // namespace

Outcome run_function(const Program& p, FunctionId function, std::span<const ConcreteArg> args,
                     const RunOptions& opts) {
  return Machine(p, opts).run(function, args);
}

Outcome run_concrete(const Program& p, std::span<const std::uint8_t> input, const RunOptions& opts) {
  const FunctionId entry = p.entry_id();
  std::vector<ConcreteArg> args;
  if (!p.function(entry).params.empty()) {
    ConcreteArg a{true, {}};
    const std::size_t n = std::min(input.size(), entry_input_length(p));
    a.values.assign(input.begin(), input.begin() + static_cast<std::ptrdiff_t>(n));
    args.push_back(std::move(a));
  }
  return run_function(p, entry, args, opts);
}

Outcome run_concrete(const Program& p, std::span<const std::uint8_t> input, std::uint64_t step_budget) {
  RunOptions opts;
  opts.step_budget = step_budget;
  return run_concrete(p, input, opts);
}

} // namespace vulnkit
