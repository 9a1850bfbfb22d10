// SPDX-License-Identifier: Apache-2.0
//
// Seedable greybox mutation fuzzer over concrete execution.
#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <string_view>
#include <vector>

#include "vulnkit/interp.hpp"
#include "vulnkit/ir.hpp"
#include "vulnkit/symex.hpp"

namespace vulnkit {


enum class MutationStage : std::uint8_t { Bitflip, Arith, Havoc };
std::string_view to_string(MutationStage s) noexcept;

inline constexpr std::size_t kArithRange = 35;
inline constexpr std::size_t kMaxInputLength = 64;

/// Number of distinct deterministic mutations of an input of `len` bytes.
std::size_t stage_size(MutationStage s, std::size_t len);

/// bitflip: index i flips bit i%8 of byte i/8.
/// arith: index = byte*70 + k; k < 35 adds k+1, otherwise subtracts k-34.
/// havoc: 1 to 8 random operations drawn from (havoc_seed, index).
/// Throws EmptyInput.
Bytes mutate_input(std::span<const std::uint8_t> input, MutationStage stage, std::uint64_t index,
                   std::uint64_t havoc_seed = 0);

class CoverageMap {
public:
  /// Merges one execution; returns whether it added an edge or a function.
  bool merge(const Outcome& o, std::uint64_t exec_index, std::set<FunctionId>* new_functions = nullptr,
             std::set<Edge>* new_edges = nullptr);
  void add_functions(const std::set<FunctionId>& fns, std::uint64_t exec_index);

  const std::set<FunctionId>& functions() const { return functions_; }
  const std::set<Edge>& edges() const { return edges_; }
  const std::vector<CoverageEvent>& timeline() const { return timeline_; }

private:
  std::set<FunctionId> functions_;
  std::set<Edge> edges_;
  std::vector<CoverageEvent> timeline_;
};

struct CorpusEntry {
  Bytes input;
  std::uint64_t discovered_at = 0; // exec index
  std::set<FunctionId> new_functions;
  std::set<Edge> new_edges;
};

struct Crash {
  Bytes input;
  Outcome outcome;
  std::uint64_t found_at = 0;
};

struct FuzzBudget {
  std::uint64_t max_execs = 10000;
  std::uint64_t wall_millis = 0; // 0: unlimited
};

struct FuzzOptions {
  FuzzBudget budget;
  std::uint64_t havoc_seed = 0;
  std::uint64_t havoc_rounds = 64;      // havoc mutations per corpus visit
  std::uint64_t step_budget = 1000;     // per execution
  std::uint64_t saturation_window = 0;  // executions without a new function; 0 disables
};

struct FuzzReport {
  std::vector<CorpusEntry> corpus;
  CoverageMap coverage;
  std::vector<Crash> crashes; // unique by violation
  std::uint64_t execs = 0;
  bool saturated = false;
  bool budget_exhausted = false;
};

/// Input length the fuzzer normalises seeds to: the entry buffer length, or
/// one byte when the entry takes no input.
std::size_t fuzz_input_length(const Program& p);

/// Round-robin over the corpus: each entry gets its bitflip and arith stages
/// once, then `havoc_rounds` havoc mutations per visit. Seeds run first.
/// Throws NoSeeds.
FuzzReport fuzz_loop(const Program& p, std::span<const Bytes> seeds, const FuzzOptions& opts);

} // namespace vulnkit
