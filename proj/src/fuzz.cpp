// SPDX-License-Identifier: Apache-2.0

#include "vulnkit/fuzz.hpp"

#include <algorithm>
#include <chrono>
#include <random>

#include "vulnkit/error.hpp"
#include "vulnkit/munch.hpp"

namespace vulnkit {

std::string_view to_string(MutationStage s) noexcept {
  switch (s) {
  case MutationStage::Bitflip: return "bitflip";
  case MutationStage::Arith: return "arith";
  case MutationStage::Havoc: return "havoc";
  }
  return "?";
}

std::size_t stage_size(MutationStage s, std::size_t len) {
  switch (s) {
  case MutationStage::Bitflip: return len * 8;
  case MutationStage::Arith: return len * 2 * kArithRange;
  case MutationStage::Havoc: return 0;
  }
  return 0;
}

namespace {

void arith(Bytes& b, std::size_t pos, std::size_t k) {
  const int delta = k < kArithRange ? static_cast<int>(k + 1) : -static_cast<int>(k - kArithRange + 1);
  b[pos] = static_cast<std::uint8_t>(b[pos] + delta);
}

void havoc(Bytes& b, std::mt19937_64& rng) {
  const auto below = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };
  const std::size_t ops = 1 + below(8);
  for (std::size_t i = 0; i < ops; ++i) {
    switch (below(5)) {
    case 0: b[below(b.size())] ^= static_cast<std::uint8_t>(1u << below(8)); break;
    case 1: arith(b, below(b.size()), below(2 * kArithRange)); break;
    case 2: b[below(b.size())] = static_cast<std::uint8_t>(below(256)); break;
    case 3: {
      if (b.size() >= kMaxInputLength) break;
      const std::size_t from = below(b.size());
      const std::size_t len = 1 + below(b.size() - from);
      Bytes chunk(b.begin() + static_cast<std::ptrdiff_t>(from), b.begin() + static_cast<std::ptrdiff_t>(from + len));
      b.insert(b.end(), chunk.begin(), chunk.end());
      if (b.size() > kMaxInputLength) b.resize(kMaxInputLength);
      break;
    }
    default:
      if (b.size() > 1) b.resize(1 + below(b.size() - 1));
      break;
    }
  }
}

} // namespace

Bytes mutate_input(std::span<const std::uint8_t> input, MutationStage stage, std::uint64_t index,
                   std::uint64_t havoc_seed) {
  if (input.empty()) throw Error(ErrorKind::EmptyInput, "cannot mutate an empty input");
  Bytes out(input.begin(), input.end());
  switch (stage) {
  case MutationStage::Bitflip:
    index %= stage_size(stage, out.size());
    out[index / 8] ^= static_cast<std::uint8_t>(1u << (index % 8));
    break;
  case MutationStage::Arith:
    index %= stage_size(stage, out.size());
    arith(out, index / (2 * kArithRange), index % (2 * kArithRange));
    break;
  case MutationStage::Havoc: {
    std::seed_seq seq{static_cast<std::uint32_t>(havoc_seed), static_cast<std::uint32_t>(havoc_seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    std::mt19937_64 rng(seq);
    havoc(out, rng);
    break;
  }
  }
  return out;
}

bool CoverageMap::merge(const Outcome& o, std::uint64_t exec_index, std::set<FunctionId>* new_functions,
                        std::set<Edge>* new_edges) {
  bool grew = false;
  for (FunctionId f : o.covered_functions) {
    if (!functions_.insert(f).second) continue;
    timeline_.push_back({exec_index, f});
    if (new_functions) new_functions->insert(f);
    grew = true;
  }
  for (const Edge& e : o.covered_edges) {
    if (!edges_.insert(e).second) continue;
    if (new_edges) new_edges->insert(e);
    grew = true;
  }
  return grew;
}

void CoverageMap::add_functions(const std::set<FunctionId>& fns, std::uint64_t exec_index) {
  for (FunctionId f : fns)
    if (functions_.insert(f).second) timeline_.push_back({exec_index, f});
}

std::size_t fuzz_input_length(const Program& p) { return std::max<std::size_t>(entry_input_length(p), 1); }

namespace {

class Fuzzer {
public:
  Fuzzer(const Program& p, const FuzzOptions& opts) : p_(p), opts_(opts), started_(Clock::now()) {
    run_.step_budget = opts.step_budget;
    run_.record_trace = false;
    run_.record_edges = true;
  }

  FuzzReport run(std::span<const Bytes> seeds) {
    const std::size_t len = fuzz_input_length(p_);
    for (const Bytes& s : seeds) {
      Bytes in = s;
      in.resize(len, 0);
      if (!execute(std::move(in))) return finish();
    }
    for (std::size_t i = 0; !rep_.corpus.empty(); i = (i + 1) % rep_.corpus.size()) {
      if (i >= done_.size()) done_.resize(rep_.corpus.size(), false);
      if (!done_[i]) {
        done_[i] = true;
        for (auto stage : {MutationStage::Bitflip, MutationStage::Arith}) {
          const Bytes base = rep_.corpus[i].input;
          for (std::size_t k = 0, n = stage_size(stage, base.size()); k < n; ++k)
            if (!execute(mutate_input(base, stage, k))) return finish();
        }
      }
      const Bytes base = rep_.corpus[i].input;
      for (std::uint64_t r = 0; r < opts_.havoc_rounds; ++r)
        if (!execute(mutate_input(base, MutationStage::Havoc, havoc_index_++, opts_.havoc_seed))) return finish();
    }
    return finish();
  }

private:
  using Clock = std::chrono::steady_clock;

  bool should_stop() {
    if (rep_.execs >= opts_.budget.max_execs) {
      rep_.budget_exhausted = true;
      return true;
    }
    if (opts_.budget.wall_millis && Clock::now() - started_ >= std::chrono::milliseconds(opts_.budget.wall_millis)) {
      rep_.budget_exhausted = true;
      return true;
    }
    if (opts_.saturation_window && rep_.execs >= opts_.saturation_window &&
        detect_saturation(rep_.coverage.timeline(), rep_.execs, SaturationPolicy{opts_.saturation_window})) {
      rep_.saturated = true;
      return true;
    }
    return false;
  }

  // Runs one input; false once a budget stops the loop.
  bool execute(Bytes in) {
    if (should_stop()) return false;
    const std::uint64_t index = rep_.execs++;
    Outcome o = run_concrete(p_, in, run_);
    CorpusEntry entry{in, index, {}, {}};
    if (rep_.coverage.merge(o, index, &entry.new_functions, &entry.new_edges)) rep_.corpus.push_back(std::move(entry));
    if (o.kind == OutcomeKind::Violation && crashed_.insert(*o.violation).second)
      rep_.crashes.push_back({std::move(in), std::move(o), index});
    return true;
  }

  FuzzReport finish() { return std::move(rep_); }

  const Program& p_;
  const FuzzOptions& opts_;
  RunOptions run_;
  Clock::time_point started_;
  FuzzReport rep_;
  std::vector<bool> done_;
  std::set<Violation> crashed_;
  std::uint64_t havoc_index_ = 0;
};

} // namespace

FuzzReport fuzz_loop(const Program& p, std::span<const Bytes> seeds, const FuzzOptions& opts) {
  if (seeds.empty()) throw Error(ErrorKind::NoSeeds, "fuzzing needs at least one seed");
  return Fuzzer(p, opts).run(seeds);
}

} // namespace vulnkit
