// SPDX-License-Identifier: Apache-2.0

#include "vulnkit/symex.hpp"

#include <chrono>
#include <deque>
#include <random>

#include "vulnkit/error.hpp"
#include "vulnkit/munch.hpp"
#include "vulnkit/sonar.hpp"

namespace vulnkit {

// ---------------------------------------------------------------------------
// Entry specifications

EntrySpec isolated_entry_spec(const Program& p, FunctionId f, std::size_t default_buf_len) {
  EntrySpec entry;
  entry.function = f;
  for (const Param& prm : p.function(f).params) {
    ArgLayout a;
    a.name = prm.name;
    a.first_atom = entry.atoms.size();
    if (prm.kind == ParamKind::Int) {
      a.is_buffer = false;
      a.length = 1;
      entry.atoms.push_back({prm.name, 0, 255});
    } else {
      a.is_buffer = true;
      a.length = prm.length ? prm.length : default_buf_len;
      for (std::size_t k = 0; k < a.length; ++k)
        entry.atoms.push_back({prm.name + "[" + std::to_string(k) + "]", 0, 255});
    }
    entry.args.push_back(std::move(a));
  }
  return entry;
}

EntrySpec program_entry_spec(const Program& p) {
  EntrySpec entry = isolated_entry_spec(p, p.entry_id(), entry_input_length(p));
  entry.program_entry = true;
  return entry;
}

std::vector<ConcreteArg> concrete_args(const EntrySpec& entry, std::span<const std::int64_t> model) {
  std::vector<ConcreteArg> out;
  for (const auto& a : entry.args) {
    ConcreteArg c{a.is_buffer, {}};
    for (std::size_t k = 0; k < a.length; ++k) c.values.push_back(model[a.first_atom + k]);
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<std::uint8_t> input_bytes(const EntrySpec& entry, std::span<const std::int64_t> model) {
  std::vector<std::uint8_t> out;
  for (const auto& a : entry.args)
    if (a.is_buffer)
      for (std::size_t k = 0; k < a.length; ++k) out.push_back(static_cast<std::uint8_t>(model[a.first_atom + k]));
  return out;
}

Outcome replay(const Program& p, const EntrySpec& entry, std::span<const std::int64_t> model, const RunOptions& opts) {
  const auto args = concrete_args(entry, model);
  return run_function(p, entry.function, args, opts);
}

// ---------------------------------------------------------------------------
// Single-step semantics

namespace {

SymFrame make_frame(const Program& p, FunctionId fn, std::vector<std::vector<Value>>& memory) {
  const Function& f = p.function(fn);
  SymFrame fr;
  fr.function = fn;
  fr.ints.assign(f.int_slots.size(), Value(0));
  fr.bufs.assign(f.buf_slots.size(), 0);
  for (std::size_t s = 0; s < f.buf_slots.size(); ++s) {
    if (f.buf_slots[s].is_param) continue;
    memory.emplace_back(f.buf_slots[s].length, Value(0));
    fr.bufs[s] = memory.size() - 1;
  }
  return fr;
}

} // namespace

ExecState initial_state(const Program& p, const EntrySpec& entry) {
  ExecState s;
  SymFrame fr = make_frame(p, entry.function, s.memory);
  const Function& f = p.function(entry.function);
  for (std::size_t k = 0; k < f.params.size(); ++k) {
    const Param& prm = f.params[k];
    const ArgLayout& a = entry.args[k];
    if (prm.kind == ParamKind::Int) {
      fr.ints[static_cast<std::size_t>(prm.slot)] = Value(make_atom(a.first_atom));
    } else {
      std::vector<Value> contents;
      for (std::size_t i = 0; i < a.length; ++i) contents.emplace_back(make_atom(a.first_atom + i));
      s.memory.push_back(std::move(contents));
      fr.bufs[static_cast<std::size_t>(prm.slot)] = s.memory.size() - 1;
    }
  }
  s.frames.push_back(std::move(fr));
  return s;
}

namespace {

constexpr std::size_t kMaxIndexCases = 16;

class Stepper {
public:
  explicit Stepper(const StepContext& ctx) : ctx_(ctx), p_(ctx.program) {}

  std::vector<ExecState> run(ExecState s) {
    const SymFrame& fr = s.frames.back();
    here_ = {fr.function, fr.pc};
    const Instr& in = p_.function(fr.function).code[static_cast<std::size_t>(fr.pc)];
    ++s.steps;
    s.frames.back().cached_future.reset();

    if (const auto* c = std::get_if<instr::Const>(&in)) {
      top(s).ints[static_cast<std::size_t>(c->dst)] = Value(c->value);
      advance(s);
      emit(std::move(s));
    } else if (const auto* b = std::get_if<instr::Bin>(&in)) {
      bin(std::move(s), *b);
    } else if (const auto* l = std::get_if<instr::Load>(&in)) {
      memory_op(std::move(s), l->buf, l->index, [l](ExecState& st, std::size_t idx) {
        SymFrame& f = st.frames.back();
        f.ints[static_cast<std::size_t>(l->dst)] = st.memory[f.bufs[static_cast<std::size_t>(l->buf)]][idx];
      });
    } else if (const auto* st = std::get_if<instr::Store>(&in)) {
      memory_op(std::move(s), st->buf, st->index, [this, st](ExecState& state, std::size_t idx) {
        SymFrame& f = state.frames.back();
        state.memory[f.bufs[static_cast<std::size_t>(st->buf)]][idx] = value(f, st->value);
      });
    } else if (const auto* br = std::get_if<instr::Br>(&in)) {
      branch(std::move(s), *br);
    } else if (const auto* j = std::get_if<instr::Jmp>(&in)) {
      jump(s, j->target);
      emit(std::move(s));
    } else if (const auto* call = std::get_if<instr::Call>(&in)) {
      do_call(std::move(s), *call);
    } else if (const auto* r = std::get_if<instr::Ret>(&in)) {
      do_ret(std::move(s), *r);
    } else if (const auto* a = std::get_if<instr::Assert>(&in)) {
      do_assert(std::move(s), *a);
    }
    return std::move(out_);
  }

private:
  static SymFrame& top(ExecState& s) { return s.frames.back(); }

  Value value(const SymFrame& fr, const Operand& o) const {
    if (o.kind == Operand::Kind::Imm) return Value(o.value);
    return fr.ints[static_cast<std::size_t>(o.value)];
  }

  Value cond(const SymFrame& fr, const Cond& c) const {
    if (!c.op) return value(fr, c.lhs);
    return combine(*c.op, value(fr, c.lhs), value(fr, c.rhs));
  }

  bool feasible(const ExecState& s, const Constraint& c) const {
    return is_feasible(s.path, c, ctx_.atoms, ctx_.solver);
  }

  void advance(ExecState& s) const { ++top(s).pc; }

  void jump(ExecState& s, int block) const {
    SymFrame& fr = top(s);
    fr.pc = p_.function(fr.function).block_start(block);
  }

  void emit(ExecState s) {
    if (s.status == StateStatus::Active && s.steps >= ctx_.max_steps) {
      s.status = StateStatus::Terminated;
      s.end = OutcomeKind::BudgetExhausted;
    }
    out_.push_back(std::move(s));
  }

  void violate(ExecState s, ViolationKind kind) {
    s.status = StateStatus::Terminated;
    s.end = OutcomeKind::Violation;
    s.violation = Violation{kind, here_};
    out_.push_back(std::move(s));
  }

  static ExecState with(const ExecState& s, Constraint c) {
    ExecState child = s;
    child.path.push_back(std::move(c));
    return child;
  }

  void bin(ExecState s, const instr::Bin& b) {
    const SymFrame& fr = top(s);
    const Value lhs = value(fr, b.lhs);
    const Value rhs = value(fr, b.rhs);
    const bool divides = b.op == BinOp::Div || b.op == BinOp::Mod;
    auto finish = [&](ExecState st) {
      top(st).ints[static_cast<std::size_t>(b.dst)] = combine(b.op, lhs, rhs);
      advance(st);
      emit(std::move(st));
    };
    if (!divides || !rhs.symbolic()) {
      if (divides && rhs.constant() == 0) return violate(std::move(s), ViolationKind::DivByZero);
      return finish(std::move(s));
    }
    const Constraint zero{rhs.expr(), false};
    const Constraint nonzero{rhs.expr(), true};
    const bool can_fail = feasible(s, zero);
    const bool can_pass = feasible(s, nonzero);
    if (can_pass) finish(with(s, nonzero));
    if (can_fail) violate(with(s, zero), ViolationKind::DivByZero);
  }

  template <class Apply> void memory_op(ExecState s, int buf, const Operand& index, Apply&& apply) {
    const SymFrame& fr = top(s);
    const Value idx = value(fr, index);
    const std::size_t len = s.memory[fr.bufs[static_cast<std::size_t>(buf)]].size();
    if (!idx.symbolic()) {
      const std::int64_t i = idx.constant();
      if (i < 0 || static_cast<std::uint64_t>(i) >= len) return violate(std::move(s), ViolationKind::OutOfBounds);
      apply(s, static_cast<std::size_t>(i));
      advance(s);
      return emit(std::move(s));
    }
    // Symbolic index: one out-of-bounds child if feasible, and a case split
    // over every feasible in-bounds index.
    const ExprRef& e = idx.expr();
    const auto len64 = static_cast<std::int64_t>(len);
    const Constraint oob{make_bin(BinOp::Add, make_bin(BinOp::Lt, e, make_const(0)),
                                 make_bin(BinOp::Ge, e, make_const(len64))),
                         true};
    std::vector<std::size_t> cases;
    for (std::size_t k = 0; k < len; ++k) {
      const Constraint at{make_bin(BinOp::Eq, e, make_const(static_cast<std::int64_t>(k))), true};
      if (feasible(s, at)) cases.push_back(k);
    }
    if (cases.size() > kMaxIndexCases)
      throw Error(ErrorKind::SolverBudgetExceeded,
                  "symbolic buffer index has " + std::to_string(cases.size()) + " feasible values");
    for (std::size_t k : cases) {
      ExecState child = with(s, {make_bin(BinOp::Eq, e, make_const(static_cast<std::int64_t>(k))), true});
      apply(child, k);
      advance(child);
      emit(std::move(child));
    }
    if (feasible(s, oob)) violate(with(s, oob), ViolationKind::OutOfBounds);
  }

  void branch(ExecState s, const instr::Br& br) {
    const Value c = cond(top(s), br.cond);
    if (!c.symbolic()) {
      jump(s, c.constant() != 0 ? br.on_true : br.on_false);
      return emit(std::move(s));
    }
    const Constraint t{c.expr(), true};
    const Constraint f{c.expr(), false};
    const bool take_true = feasible(s, t);
    const bool take_false = feasible(s, f);
    if (take_true && take_false) {
      ExecState yes = with(s, t);
      jump(yes, br.on_true);
      emit(std::move(yes));
      s.path.push_back(f);
      jump(s, br.on_false);
      emit(std::move(s));
    } else if (take_true) {
      s.path.push_back(t);
      jump(s, br.on_true);
      emit(std::move(s));
    } else if (take_false) {
      s.path.push_back(f);
      jump(s, br.on_false);
      emit(std::move(s));
    }
  }

  void do_call(ExecState s, const instr::Call& call) {
    SymFrame next = make_frame(p_, call.callee, s.memory);
    const SymFrame& caller = top(s);
    const Function& callee = p_.function(call.callee);
    for (std::size_t k = 0; k < callee.params.size(); ++k) {
      const Param& prm = callee.params[k];
      if (prm.kind == ParamKind::Int)
        next.ints[static_cast<std::size_t>(prm.slot)] = value(caller, call.args[k]);
      else
        next.bufs[static_cast<std::size_t>(prm.slot)] = caller.bufs[static_cast<std::size_t>(call.args[k].value)];
    }
    next.ret_dst = call.dst;
    advance(s);
    s.frames.push_back(std::move(next));
    emit(std::move(s));
  }

  void do_ret(ExecState s, const instr::Ret& r) {
    const Value rv = r.value ? value(top(s), *r.value) : Value(0);
    const auto dst = top(s).ret_dst;
    s.frames.pop_back();
    if (s.frames.empty()) {
      s.status = StateStatus::Terminated;
      s.end = OutcomeKind::NormalExit;
      out_.push_back(std::move(s));
      return;
    }
    top(s).cached_future.reset();
    if (dst) top(s).ints[static_cast<std::size_t>(*dst)] = rv;
    emit(std::move(s));
  }

  void do_assert(ExecState s, const instr::Assert& a) {
    const Value c = cond(top(s), a.cond);
    if (!c.symbolic()) {
      if (c.constant() == 0) return violate(std::move(s), ViolationKind::AssertFail);
      advance(s);
      return emit(std::move(s));
    }
    const Constraint pass{c.expr(), true};
    const Constraint fail{c.expr(), false};
    const bool can_pass = feasible(s, pass);
    const bool can_fail = feasible(s, fail);
    if (can_pass) {
      ExecState ok = with(s, pass);
      advance(ok);
      emit(std::move(ok));
    }
    if (can_fail) violate(with(s, fail), ViolationKind::AssertFail);
  }

  const StepContext& ctx_;
  const Program& p_;
  Location here_;
  std::vector<ExecState> out_;
};

} // namespace

std::vector<ExecState> step_state(ExecState s, const StepContext& ctx) { return Stepper(ctx).run(std::move(s)); }

// ---------------------------------------------------------------------------
// Strategies

std::string_view to_string(Strategy s) noexcept {
  switch (s) {
  case Strategy::Dfs: return "dfs";
  case Strategy::Bfs: return "bfs";
  case Strategy::Random: return "random";
  case Strategy::Coverage: return "coverage";
  case Strategy::Sonar: return "sonar";
  }
  return "?";
}

Strategy parse_strategy(std::string_view s) {
  for (auto k : {Strategy::Dfs, Strategy::Bfs, Strategy::Random, Strategy::Coverage, Strategy::Sonar})
    if (to_string(k) == s) return k;
  throw Error(ErrorKind::UnknownStrategy, "unknown strategy '" + std::string(s) + "'");
}

std::string_view to_string(Combiner c) noexcept { return c == Combiner::Min ? "min" : "max"; }

Combiner parse_combiner(std::string_view s) {
  if (s == "min") return Combiner::Min;
  if (s == "max") return Combiner::Max;
  throw Error(ErrorKind::UnknownStrategy, "unknown combiner '" + std::string(s) + "'");
}

CoverageTracker::CoverageTracker(const Program& p) {
  for (const auto& f : p.functions) instrs_.emplace_back(f.code.size(), false);
}

void CoverageTracker::mark(Location at, std::uint64_t now) {
  auto&& bit = instrs_[static_cast<std::size_t>(at.function)][static_cast<std::size_t>(at.instr)];
  if (bit) return;
  bit = true;
  if (functions_.insert(at.function).second) timeline_.push_back({now, at.function});
}

StatePtr CoverageSearcher::push(StatePtr s) {
  const std::uint64_t seq = seq_++;
  if (cov_.covered(s->location()))
    stale_.emplace(seq, std::move(s));
  else
    fresh_.emplace(seq, std::move(s));
  return nullptr;
}

StatePtr CoverageSearcher::pop() {
  while (!fresh_.empty()) {
    auto it = fresh_.begin();
    if (!cov_.covered(it->second->location())) {
      StatePtr s = std::move(it->second);
      fresh_.erase(it);
      return s;
    }
    stale_.emplace(it->first, std::move(it->second));
    fresh_.erase(it);
  }
  auto it = stale_.begin();
  StatePtr s = std::move(it->second);
  stale_.erase(it);
  return s;
}

namespace {

class DfsSearcher : public Searcher {
public:
  StatePtr push(StatePtr s) override {
    stack_.push_back(std::move(s));
    return nullptr;
  }
  StatePtr pop() override {
    StatePtr s = std::move(stack_.back());
    stack_.pop_back();
    return s;
  }
  bool empty() const override { return stack_.empty(); }
  std::size_t size() const override { return stack_.size(); }

private:
  std::vector<StatePtr> stack_;
};

class BfsSearcher : public Searcher {
public:
  StatePtr push(StatePtr s) override {
    queue_.push_back(std::move(s));
    return nullptr;
  }
  StatePtr pop() override {
    StatePtr s = std::move(queue_.front());
    queue_.pop_front();
    return s;
  }
  bool empty() const override { return queue_.empty(); }
  std::size_t size() const override { return queue_.size(); }

private:
  std::deque<StatePtr> queue_;
};

class RandomSearcher : public Searcher {
public:
  explicit RandomSearcher(std::uint64_t seed) : rng_(seed) {}
  StatePtr push(StatePtr s) override {
    states_.push_back(std::move(s));
    return nullptr;
  }
  StatePtr pop() override {
    const std::size_t i = static_cast<std::size_t>(rng_() % states_.size());
    std::swap(states_[i], states_.back());
    StatePtr s = std::move(states_.back());
    states_.pop_back();
    return s;
  }
  bool empty() const override { return states_.empty(); }
  std::size_t size() const override { return states_.size(); }

private:
  std::mt19937_64 rng_;
  std::vector<StatePtr> states_;
};

} // namespace

std::unique_ptr<Searcher> make_searcher(const Program& p, const ExploreOptions& opts, const CoverageTracker& cov) {
  switch (opts.strategy) {
  case Strategy::Dfs: return std::make_unique<DfsSearcher>();
  case Strategy::Bfs: return std::make_unique<BfsSearcher>();
  case Strategy::Random: return std::make_unique<RandomSearcher>(opts.seed);
  case Strategy::Coverage: return std::make_unique<CoverageSearcher>(cov);
  case Strategy::Sonar:
    if (!opts.target) throw Error(ErrorKind::UnknownTarget, "sonar strategy needs a target");
    return std::make_unique<SonarSearcher>(target_distances(p, *opts.target), opts.combiner, cov);
  }
  throw Error(ErrorKind::UnknownStrategy, "unknown strategy");
}

// ---------------------------------------------------------------------------
// Exploration driver

ExplorationReport explore(const Program& p, const EntrySpec& entry, const ExploreOptions& opts) {
  using Clock = std::chrono::steady_clock;
  const auto started = Clock::now();

  std::optional<FunctionId> watched;
  if (opts.target) watched = p.id_of(*opts.target);

  ExplorationReport rep;
  rep.strategy = opts.strategy;
  rep.target = opts.target;
  rep.seed = opts.seed;
  rep.budget = opts.budget;
  rep.atoms = entry.atoms;

  CoverageTracker cov(p);
  auto searcher = make_searcher(p, opts, cov);
  const StepContext ctx{p, entry.atoms, opts.solver, opts.budget.max_steps};
  std::uint64_t next_id = 1;
  std::set<Violation> seen;

  const auto at_target = [&](const ExecState& s) {
    return watched && s.location() == Location{*watched, 0};
  };
  const auto enqueue = [&](StatePtr s) {
    if (at_target(*s) && !rep.target_reached_at) rep.target_reached_at = rep.states_explored;
    if (StatePtr back = searcher->push(std::move(s))) {
      back->status = StateStatus::Pruned;
      ++rep.states_pruned;
      if (opts.on_prune) opts.on_prune(*back);
      return false;
    }
    return true;
  };
  const auto record = [&](const ExecState& s) {
    SolveResult model;
    try {
      model = solve_path_condition(s.path, entry.atoms, opts.solver);
    } catch (const Error&) {
      ++rep.solver_failures;
      return;
    }
    if (!model.sat) return; // unreachable: paths are kept satisfiable
    rep.test_inputs.push_back({s.end, model.model});
    if (s.end != OutcomeKind::Violation || !seen.insert(*s.violation).second) return;
    FoundViolation v{*s.violation, model.model, std::vector<bool>(entry.atoms.size(), false), rep.states_explored};
    for (const auto& c : s.path) collect_atoms(*c.expr, v.constrained);
    v.constrained.resize(entry.atoms.size(), false);
    rep.violations.push_back(std::move(v));
  };

  auto init = std::make_unique<ExecState>(initial_state(p, entry));
  init->id = next_id++;
  if (!enqueue(std::move(init)) && opts.strategy == Strategy::Sonar)
    throw Error(ErrorKind::TargetUnreachable, "target '" + *opts.target + "' is unreachable from the entry");

  while (!searcher->empty()) {
    if (rep.states_explored >= opts.budget.max_states) {
      rep.budget_exhausted = true;
      break;
    }
    if (opts.budget.wall_millis &&
        Clock::now() - started >= std::chrono::milliseconds(opts.budget.wall_millis)) {
      rep.budget_exhausted = true;
      break;
    }
    if (opts.saturation_window && rep.states_explored >= opts.saturation_window &&
        detect_saturation(cov.timeline(), rep.states_explored, SaturationPolicy{opts.saturation_window})) {
      rep.saturated = true;
      break;
    }
    StatePtr s = searcher->pop();
    if (opts.on_select) opts.on_select(*s);
    cov.mark(s->location(), rep.states_explored);
    ++rep.states_explored;
    const std::uint64_t id = s->id;

    std::vector<ExecState> children;
    try {
      children = step_state(std::move(*s), ctx);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::SolverBudgetExceeded) throw;
      ++rep.solver_failures;
      continue;
    }
    bool first = true;
    for (auto& child : children) {
      if (!first) {
        child.parent = id;
        child.id = next_id++;
      }
      first = false;
      if (child.status == StateStatus::Terminated) {
        record(child);
        continue;
      }
      enqueue(std::make_unique<ExecState>(std::move(child)));
    }
  }

  rep.covered_functions = cov.functions();
  rep.function_timeline = cov.timeline();
  return rep;
}

} // namespace vulnkit
