// SPDX-License-Identifier: Apache-2.0
//
// Hybrid fuzzing / symbolic execution scheduling driven by function-coverage
// saturation.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vulnkit/fuzz.hpp"
#include "vulnkit/symex.hpp"

namespace vulnkit {

struct SaturationPolicy {
  std::uint64_t window = 1000; // executions or states; must be > 0
};

/// True iff no timeline entry lies in (now - window, now]. An empty
/// timeline is saturated.
bool detect_saturation(std::span<const CoverageEvent> timeline, std::uint64_t now, SaturationPolicy policy);

/// Uncovered functions by ascending call depth from the entry, then by name;
/// functions unreachable from the entry come last.
std::vector<FunctionId> order_targets(const Program& p, const std::set<FunctionId>& covered);

enum class HybridMode : std::uint8_t { FS, SF };
std::string_view to_string(HybridMode m) noexcept;
HybridMode parse_mode(std::string_view s); // throws UnknownMode

struct HybridBudgets {
  std::uint64_t fuzz_execs = 10000;
  std::uint64_t symex_states = 2000;     // total over all symbolic phases
  std::uint64_t per_target_states = 500; // FS: cap for one sonar run
  std::uint64_t window = 1000;
  std::uint64_t max_steps = 10000; // per symbolic path
  std::uint64_t step_budget = 1000; // per concrete execution
};

struct HybridOptions {
  HybridBudgets budgets;
  std::uint64_t havoc_seed = 0;
  std::uint64_t seed = 0;
  SolverConfig solver;
};

enum class PhaseTool : std::uint8_t { Fuzz, Symex, Sonar };
std::string_view to_string(PhaseTool t) noexcept;

struct HybridPhase {
  PhaseTool tool = PhaseTool::Fuzz;
  std::optional<std::string> target; // sonar phases
  std::uint64_t budget = 0;
  std::uint64_t budget_used = 0;
  std::set<FunctionId> coverage_delta;
  bool saturated = false;
  bool target_unreachable = false;
  std::uint64_t seeds_emitted = 0; // SF symex phase
};

struct HybridViolation {
  Violation violation;
  Bytes input;
  PhaseTool tool = PhaseTool::Fuzz;
};

struct DepthCoverage {
  std::size_t covered = 0;
  std::size_t total = 0;
};

struct HybridReport {
  HybridMode mode = HybridMode::FS;
  std::vector<HybridPhase> phases;
  std::set<FunctionId> final_covered;
  std::map<std::size_t, DepthCoverage> coverage_by_depth;
  DepthCoverage unreachable;
  std::vector<HybridViolation> violations; // unique by violation, first finder kept
};

inline constexpr std::size_t kMaxSymexSeeds = 64;

/// Distinct terminated-path inputs, lexicographically smallest first, at
/// most `kMaxSymexSeeds`.
std::vector<Bytes> seeds_from_paths(const EntrySpec& entry, const ExplorationReport& rep);

/// FS: fuzz until budget or saturation, then one sonar run per uncovered
/// target. SF: coverage-guided symex until budget or saturation, then fuzz
/// from the path inputs. Throws NoSeeds for FS without seeds.
HybridReport run_hybrid(const Program& p, HybridMode mode, std::span<const Bytes> seeds,
                        const HybridOptions& opts = {});

} // namespace vulnkit
