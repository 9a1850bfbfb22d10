// SPDX-License-Identifier: Apache-2.0

#include "vulnkit/munch.hpp"

#include <algorithm>
#include <tuple>

#include "vulnkit/error.hpp"
#include "vulnkit/graphs.hpp"
#include "vulnkit/sonar.hpp"

namespace vulnkit {

bool detect_saturation(std::span<const CoverageEvent> timeline, std::uint64_t now, SaturationPolicy policy) {
  // (now - window, now] without underflow: index > now - window.
  return std::none_of(timeline.begin(), timeline.end(), [&](const CoverageEvent& e) {
    return e.index <= now && e.index + policy.window > now;
  });
}

std::vector<FunctionId> order_targets(const Program& p, const std::set<FunctionId>& covered) {
  const auto depths = call_depths(p, build_call_graph(p));
  std::vector<FunctionId> out;
  for (FunctionId f = 0; f < static_cast<FunctionId>(p.functions.size()); ++f)
    if (!covered.count(f)) out.push_back(f);
  const auto key = [&](FunctionId f) {
    const auto& d = depths[static_cast<std::size_t>(f)];
    return std::tuple(!d.has_value(), d.value_or(0), std::string_view(p.function(f).name));
  };
  std::sort(out.begin(), out.end(), [&](FunctionId a, FunctionId b) { return key(a) < key(b); });
  return out;
}

std::string_view to_string(HybridMode m) noexcept { return m == HybridMode::FS ? "fs" : "sf"; }

HybridMode parse_mode(std::string_view s) {
  if (s == "fs" || s == "FS") return HybridMode::FS;
  if (s == "sf" || s == "SF") return HybridMode::SF;
  throw Error(ErrorKind::UnknownMode, "unknown mode '" + std::string(s) + "'");
}

std::string_view to_string(PhaseTool t) noexcept {
  switch (t) {
  case PhaseTool::Fuzz: return "fuzz";
  case PhaseTool::Symex: return "symex";
  case PhaseTool::Sonar: return "sonar";
  }
  return "?";
}

std::vector<Bytes> seeds_from_paths(const EntrySpec& entry, const ExplorationReport& rep) {
  std::set<Bytes> distinct;
  for (const auto& t : rep.test_inputs) distinct.insert(input_bytes(entry, t.model));
  std::vector<Bytes> out(distinct.begin(), distinct.end());
  if (out.size() > kMaxSymexSeeds) out.resize(kMaxSymexSeeds);
  return out;
}

namespace {

class Hybrid {
public:
  Hybrid(const Program& p, const HybridOptions& opts) : p_(p), opts_(opts), entry_(program_entry_spec(p)) {
    rep_.mode = HybridMode::FS;
  }

  HybridReport fs(std::span<const Bytes> seeds) {
    if (seeds.empty()) throw Error(ErrorKind::NoSeeds, "FS mode needs at least one seed");
    rep_.mode = HybridMode::FS;
    fuzz(seeds);
    std::uint64_t remaining = opts_.budgets.symex_states;
    for (FunctionId t : order_targets(p_, covered_)) {
      if (remaining == 0) break;
      if (covered_.count(t)) continue; // reached by an earlier sonar run
      const std::uint64_t budget = std::min(remaining, opts_.budgets.per_target_states);
      HybridPhase ph{PhaseTool::Sonar, p_.function(t).name, budget, 0, {}, false, false, 0};
      try {
        const auto r = sonar_explore(p_, entry_, p_.function(t).name, symex_options(budget));
        ph.budget_used = r.states_explored;
        absorb(r, ph);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::TargetUnreachable) throw;
        ph.target_unreachable = true;
      }
      remaining -= ph.budget_used;
      rep_.phases.push_back(std::move(ph));
    }
    return finish();
  }

  HybridReport sf(std::span<const Bytes> user_seeds) {
    rep_.mode = HybridMode::SF;
    ExploreOptions o = symex_options(opts_.budgets.symex_states);
    o.strategy = Strategy::Coverage;
    o.saturation_window = opts_.budgets.window;
    const auto r = explore(p_, entry_, o);
    HybridPhase ph{PhaseTool::Symex, std::nullopt, opts_.budgets.symex_states, r.states_explored, {}, r.saturated,
                   false, 0};
    absorb(r, ph);
    std::vector<Bytes> seeds = seeds_from_paths(entry_, r);
    ph.seeds_emitted = seeds.size();
    rep_.phases.push_back(std::move(ph));
    if (seeds.empty()) seeds.assign(user_seeds.begin(), user_seeds.end());
    if (seeds.empty()) seeds.push_back(Bytes(fuzz_input_length(p_), 0));
    fuzz(seeds);
    return finish();
  }

private:
  ExploreOptions symex_options(std::uint64_t states) const {
    ExploreOptions o;
    o.seed = opts_.seed;
    o.solver = opts_.solver;
    o.budget.max_states = states;
    o.budget.max_steps = opts_.budgets.max_steps;
    return o;
  }

  void fuzz(std::span<const Bytes> seeds) {
    FuzzOptions fo;
    fo.budget.max_execs = opts_.budgets.fuzz_execs;
    fo.havoc_seed = opts_.havoc_seed;
    fo.step_budget = opts_.budgets.step_budget;
    fo.saturation_window = opts_.budgets.window;
    const FuzzReport r = fuzz_loop(p_, seeds, fo);
    HybridPhase ph{PhaseTool::Fuzz, std::nullopt, opts_.budgets.fuzz_execs, r.execs, {}, r.saturated, false, 0};
    for (FunctionId f : r.coverage.functions())
      if (covered_.insert(f).second) ph.coverage_delta.insert(f);
    for (const Crash& c : r.crashes) add_violation(*c.outcome.violation, c.input, PhaseTool::Fuzz);
    rep_.phases.push_back(std::move(ph));
  }

  void absorb(const ExplorationReport& r, HybridPhase& ph) {
    for (FunctionId f : r.covered_functions)
      if (covered_.insert(f).second) ph.coverage_delta.insert(f);
    for (const auto& v : r.violations) add_violation(v.violation, input_bytes(entry_, v.model), ph.tool);
  }

  void add_violation(const Violation& v, Bytes input, PhaseTool tool) {
    if (seen_.insert(v).second) rep_.violations.push_back({v, std::move(input), tool});
  }

  HybridReport finish() {
    rep_.final_covered = covered_;
    const auto depths = call_depths(p_, build_call_graph(p_));
    for (FunctionId f = 0; f < static_cast<FunctionId>(p_.functions.size()); ++f) {
      const auto& d = depths[static_cast<std::size_t>(f)];
      DepthCoverage& bucket = d ? rep_.coverage_by_depth[*d] : rep_.unreachable;
      ++bucket.total;
      if (covered_.count(f)) ++bucket.covered;
    }
    std::sort(rep_.violations.begin(), rep_.violations.end(),
              [](const HybridViolation& a, const HybridViolation& b) { return a.violation < b.violation; });
    return std::move(rep_);
  }

  const Program& p_;
  const HybridOptions& opts_;
  EntrySpec entry_;
  HybridReport rep_;
  std::set<FunctionId> covered_;
  std::set<Violation> seen_;
};

} // namespace

HybridReport run_hybrid(const Program& p, HybridMode mode, std::span<const Bytes> seeds, const HybridOptions& opts) {
  Hybrid h(p, opts);
  return mode == HybridMode::FS ? h.fs(seeds) : h.sf(seeds);
}

} // namespace vulnkit
