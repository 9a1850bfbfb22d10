// SPDX-License-Identifier: Apache-2.0
//
// Symbolic execution over the IR: forking states with path conditions,
// a pluggable searcher interface and a budgeted exploration driver.
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vulnkit/expr.hpp"
#include "vulnkit/graphs.hpp"
#include "vulnkit/interp.hpp"
#include "vulnkit/ir.hpp"
#include "vulnkit/solver.hpp"

namespace vulnkit {

struct ArgLayout {
  std::string name;
  bool is_buffer = false;
  std::size_t length = 1; // 1 for ints
  std::size_t first_atom = 0;
};

/// Starting point of an exploration: a function whose parameters are bound
/// to fresh atoms. For the program entry the atoms are the input bytes.
struct EntrySpec {
  FunctionId function = 0;
  std::vector<ArgLayout> args;
  std::vector<Atom> atoms;
  bool program_entry = false;
};

/// Entry function with its buffer parameter as atoms `input[0]`, ...
EntrySpec program_entry_spec(const Program& p);

/// Function `f` with every int parameter an atom in [0,255] and every buffer
/// parameter `len` atoms, where `len` is the declared length or
/// `default_buf_len` when the parameter is unsized.
EntrySpec isolated_entry_spec(const Program& p, FunctionId f, std::size_t default_buf_len = 8);

std::vector<ConcreteArg> concrete_args(const EntrySpec& entry, std::span<const std::int64_t> model);

/// Input bytes for a program-entry model (buffer atoms in order).
std::vector<std::uint8_t> input_bytes(const EntrySpec& entry, std::span<const std::int64_t> model);

/// Concrete replay of a model through the same entry.
Outcome replay(const Program& p, const EntrySpec& entry, std::span<const std::int64_t> model,
               const RunOptions& opts = {});

struct SymFrame {
  FunctionId function = 0;
  InstrIndex pc = 0; // next instruction; for caller frames, the resume point
  std::vector<Value> ints;
  std::vector<std::size_t> bufs; // memory object per buffer slot
  std::optional<int> ret_dst;
  // Sonar caches this frame's future distance while it is an ancestor.
  std::optional<Distance> cached_future;
};

enum class StateStatus : std::uint8_t { Active, Terminated, Pruned };

struct ExecState {
  std::uint64_t id = 0;
  std::uint64_t parent = 0;
  std::vector<SymFrame> frames;
  std::vector<std::vector<Value>> memory;
  std::vector<Constraint> path;
  std::uint64_t steps = 0;
  StateStatus status = StateStatus::Active;
  OutcomeKind end = OutcomeKind::NormalExit; // meaningful once Terminated
  std::optional<Violation> violation;
  bool reached_target = false; // sticky; inherited by forks

  Location location() const { return {frames.back().function, frames.back().pc}; }
};

ExecState initial_state(const Program& p, const EntrySpec& entry);

struct StepContext {
  const Program& program;
  std::span<const Atom> atoms;
  SolverConfig solver;
  std::uint64_t max_steps = 10000; // per path
};

/// Executes one instruction of an Active state. Symbolic branches,
/// assertions, divisors and buffer indices fork into feasible children;
/// children that end (return from the outermost frame, violate, or hit the
/// per-path step limit) come back Terminated. Throws SolverBudgetExceeded.
std::vector<ExecState> step_state(ExecState s, const StepContext& ctx);

enum class Strategy : std::uint8_t { Dfs, Bfs, Random, Coverage, Sonar };
std::string_view to_string(Strategy s) noexcept;
Strategy parse_strategy(std::string_view s); // throws UnknownStrategy

/// How sonar merges the direct and the return-to-ancestor routes.
enum class Combiner : std::uint8_t { Min, Max };
std::string_view to_string(Combiner c) noexcept;
Combiner parse_combiner(std::string_view s);

struct ExploreBudget {
  std::uint64_t max_states = 1000; // state selections
  std::uint64_t max_steps = 10000; // instructions per path
  std::uint64_t wall_millis = 0;   // 0: unlimited
};

struct ExploreOptions {
  Strategy strategy = Strategy::Coverage;
  std::optional<std::string> target; // required for sonar; otherwise only observed
  std::uint64_t seed = 0;
  ExploreBudget budget;
  Combiner combiner = Combiner::Min;
  SolverConfig solver;
  std::uint64_t saturation_window = 0; // states without new function coverage; 0 disables
  std::function<void(const ExecState&)> on_prune;
  std::function<void(const ExecState&)> on_select;
};

struct CoverageEvent {
  std::uint64_t index = 0;
  FunctionId function = 0;
  bool operator==(const CoverageEvent&) const = default;
};

/// Instruction and function coverage shared between the driver and the
/// coverage-guided searchers. Coverage only grows.
class CoverageTracker {
public:
  explicit CoverageTracker(const Program& p);
  bool covered(Location at) const {
    return instrs_[static_cast<std::size_t>(at.function)][static_cast<std::size_t>(at.instr)];
  }
  void mark(Location at, std::uint64_t now);
  const std::set<FunctionId>& functions() const { return functions_; }
  const std::vector<CoverageEvent>& timeline() const { return timeline_; }

private:
  std::vector<std::vector<bool>> instrs_;
  std::set<FunctionId> functions_;
  std::vector<CoverageEvent> timeline_;
};

using StatePtr = std::unique_ptr<ExecState>;

class Searcher {
public:
  virtual ~Searcher() = default;
  /// Takes ownership; hands the state back when it is pruned instead.
  virtual StatePtr push(StatePtr s) = 0;
  virtual StatePtr pop() = 0;
  virtual bool empty() const = 0;
  virtual std::size_t size() const = 0;
};

std::unique_ptr<Searcher> make_searcher(const Program& p, const ExploreOptions& opts, const CoverageTracker& cov);

/// Prefers states whose next instruction is still uncovered, FIFO among ties.
class CoverageSearcher : public Searcher {
public:
  explicit CoverageSearcher(const CoverageTracker& cov) : cov_(cov) {}
  StatePtr push(StatePtr s) override;
  StatePtr pop() override;
  bool empty() const override { return fresh_.empty() && stale_.empty(); }
  std::size_t size() const override { return fresh_.size() + stale_.size(); }

private:
  const CoverageTracker& cov_;
  std::uint64_t seq_ = 0;
  std::map<std::uint64_t, StatePtr> fresh_; // next instruction uncovered at push time
  std::map<std::uint64_t, StatePtr> stale_; // next instruction covered (permanently)
};

struct FoundViolation {
  Violation violation;
  std::vector<std::int64_t> model;
  std::vector<bool> constrained; // atoms referenced by the path condition
  std::uint64_t found_at = 0;    // states explored when found
};

struct TestInput {
  OutcomeKind end = OutcomeKind::NormalExit;
  std::vector<std::int64_t> model;
};

struct ExplorationReport {
  Strategy strategy = Strategy::Coverage;
  std::optional<std::string> target;
  std::uint64_t seed = 0;
  ExploreBudget budget;
  std::vector<Atom> atoms;
  std::uint64_t states_explored = 0;
  std::uint64_t states_pruned = 0;
  std::uint64_t solver_failures = 0;
  bool budget_exhausted = false;
  bool saturated = false;
  std::optional<std::uint64_t> target_reached_at; // states explored when a state first sat at target entry
  std::vector<FoundViolation> violations;          // unique by (kind, location)
  std::set<FunctionId> covered_functions;
  std::vector<CoverageEvent> function_timeline;
  std::vector<TestInput> test_inputs; // one per terminated path
};

/// Explores from `entry` until the queue empties or a budget runs out.
/// Throws UnknownTarget for a missing sonar target and TargetUnreachable
/// when sonar prunes the initial state.
ExplorationReport explore(const Program& p, const EntrySpec& entry, const ExploreOptions& opts);

} // namespace vulnkit
