// SPDX-License-Identifier: Apache-2.0
//
// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails. Thresholds and time limits are fixed
// here and are not configurable.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "vulnkit/error.hpp"
#include "vulnkit/fuzz.hpp"
#include "vulnkit/macke.hpp"
#include "vulnkit/munch.hpp"
#include "vulnkit/report.hpp"
#include "vulnkit/severity.hpp"
#include "vulnkit/sonar.hpp"

using namespace vulnkit;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
};

// Accumulates failures; the first few are kept for the summary line.
class Check {
public:
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    ++failures_;
    if (failures_ <= 3) notes_ += (notes_.empty() ? "" : "; ") + what;
  }
  Verdict verdict(std::string detail) const {
    if (failures_) detail += ", " + std::to_string(failures_) + " failures: " + notes_;
    return {failures_ == 0, detail};
  }

private:
  std::size_t failures_ = 0;
  std::string notes_;
};

std::string name_of(const Program& p, FunctionId f) { return p.function(f).name; }

oracle::Stack stack_of(const ExecState& s) {
  oracle::Stack st;
  for (const auto& f : s.frames) st.emplace_back(f.function, f.pc);
  return st;
}

std::set<Violation> roots(const std::vector<VulnRecord>& records) {
  std::set<Violation> out;
  for (const auto& r : records) out.insert(r.violation());
  return out;
}

// Every fixture: each reachable stack of depth <= 4 against each target.
Verdict distance_oracle() {
  Check c;
  std::size_t pairs = 0;
  for (const auto& name : oracle::fixture_names()) {
    const Program p = oracle::load_fixture(name);
    c.expect(p.instruction_count() <= 200, name + " exceeds 200 instructions");
    const auto stacks = oracle::reachable_stacks(p, 4);
    const ReturnTables rt = distance_to_return(p);
    for (FunctionId t = 0; t < static_cast<FunctionId>(p.functions.size()); ++t) {
      const DistanceTables dt = target_distances(p, t, rt);
      for (const auto& s : stacks) {
        ++pairs;
        const auto want = oracle::shortest_to_target(p, s, t);
        const Distance got = min_future_distance(oracle::state_at(s), dt, Combiner::Min);
        c.expect(got.finite() == want.has_value() && (!want || got.value() == *want),
                 name + " target " + name_of(p, t) + " got " + to_string(got));
      }
    }
  }
  return c.verdict(std::to_string(pairs) + " (stack, target) pairs compared");
}

Verdict prune_soundness() {
  Check c;
  std::size_t runs = 0, pruned = 0;
  for (const auto& name : oracle::fixture_names()) {
    const Program p = oracle::load_fixture(name);
    std::vector<EntrySpec> entries{program_entry_spec(p)};
    for (FunctionId f = 0; f < static_cast<FunctionId>(p.functions.size()); ++f)
      entries.push_back(isolated_entry_spec(p, f));
    for (const auto& entry : entries) {
      for (FunctionId t = 0; t < static_cast<FunctionId>(p.functions.size()); ++t) {
        ExploreOptions o;
        o.budget.max_states = 2000;
        o.on_prune = [&](const ExecState& s) {
          ++pruned;
          c.expect(!oracle::shortest_to_target(p, stack_of(s), t).has_value(),
                   name + ": pruned state can reach " + name_of(p, t));
        };
        ++runs;
        try {
          sonar_explore(p, entry, name_of(p, t), o);
        } catch (const Error& e) {
          c.expect(e.kind() == ErrorKind::TargetUnreachable, e.what());
        }
      }
    }
  }
  return c.verdict(std::to_string(pruned) + " pruned states over " + std::to_string(runs) + " sonar runs confirmed");
}

Verdict sonar_efficiency() {
  const Program p = oracle::load_fixture("deep10");
  ExploreOptions o;
  o.budget.max_states = 200000;
  const auto sonar = sonar_explore(p, program_entry_spec(p), "target", o);
  o.strategy = Strategy::Bfs;
  o.target = "target";
  const auto bfs = explore(p, program_entry_spec(p), o);
  Check c;
  c.expect(sonar.target_reached_at.has_value() && *sonar.target_reached_at <= 35, "sonar over 35 states");
  c.expect(!bfs.target_reached_at || *bfs.target_reached_at >= 512, "bfs under 512 states");
  const auto show = [](const std::optional<std::uint64_t>& v) { return v ? std::to_string(*v) : std::string("never"); };
  return c.verdict("sonar reached target after " + show(sonar.target_reached_at) + " states (<= 35), bfs after " +
                   show(bfs.target_reached_at) + " (>= 512)");
}

Verdict solver_exactness() {
  // Path conditions of every state selected while exploring each fixture
  // from its entry and from every isolated function, plus each condition
  // with its last constraint negated so unsatisfiable cases appear too.
  std::map<std::string, std::pair<std::vector<Constraint>, std::vector<Atom>>> corpus;
  for (const auto& name : oracle::fixture_names()) {
    const Program p = oracle::load_fixture(name);
    std::vector<EntrySpec> entries{program_entry_spec(p)};
    for (FunctionId f = 0; f < static_cast<FunctionId>(p.functions.size()); ++f)
      entries.push_back(isolated_entry_spec(p, f));
    for (const auto& entry : entries) {
      std::vector<std::string> names;
      for (const auto& a : entry.atoms) names.push_back(a.name);
      const auto add = [&](const std::vector<Constraint>& pc) {
        std::vector<bool> used(entry.atoms.size(), false);
        for (const auto& k : pc) collect_atoms(*k.expr, used);
        std::size_t n = 0;
        for (std::size_t i = 0; i < used.size(); ++i)
          if (used[i]) {
            ++n;
            if (entry.atoms[i].hi - entry.atoms[i].lo + 1 > 256) return;
          }
        if (n > 2) return;
        std::string key = std::to_string(entry.atoms.size()) + "|";
        for (const auto& k : pc) key += (k.expect_true ? "+" : "-") + to_string(*k.expr, names) + ";";
        corpus.emplace(key, std::make_pair(pc, entry.atoms));
      };
      ExploreOptions o;
      o.budget.max_states = 2000;
      o.on_select = [&](const ExecState& s) {
        add(s.path);
        if (s.path.empty()) return;
        auto flipped = s.path;
        flipped.back() = flipped.back().negated();
        add(flipped);
      };
      explore(p, entry, o);
    }
  }
  Check c;
  std::size_t sat = 0;
  for (const auto& [key, item] : corpus) {
    const auto& [pc, atoms] = item;
    const SolveResult want = oracle::brute_force_solve(pc, atoms);
    SolveResult got;
    try {
      got = solve_path_condition(pc, atoms);
    } catch (const Error& e) {
      c.expect(false, key + ": " + e.what());
      continue;
    }
    c.expect(got.sat == want.sat, key + ": sat mismatch");
    if (!got.sat || !want.sat) continue;
    ++sat;
    c.expect(got.model == want.model, key + ": model is not the lexicographic minimum");
    for (const auto& k : pc) c.expect(k.holds(got.model), key + ": model violates a constraint");
  }
  return c.verdict(std::to_string(corpus.size()) + " distinct path conditions (" + std::to_string(sat) + " sat, " +
                   std::to_string(corpus.size() - sat) + " unsat) match brute force");
}

Verdict compositional_gain() {
  Check c;
  std::ostringstream detail;
  for (const std::string name : {"p1", "chain4", "arith", "guarded_deep_a", "guarded_deep_b"}) {
    const Program p = oracle::load_fixture(name);
    MackeOptions mo;
    mo.budget_states = 200;
    const auto phase1 = roots(run_phase1(p, mo));

    ExploreOptions o;
    o.budget.max_states = mo.budget_states * p.functions.size();
    std::set<Violation> entry_only;
    for (const auto& v : explore(p, program_entry_spec(p), o).violations) entry_only.insert(v.violation);

    const bool superset = std::includes(phase1.begin(), phase1.end(), entry_only.begin(), entry_only.end());
    const bool strict = superset && phase1.size() > entry_only.size();
    c.expect(superset, name + ": phase 1 misses an entry-only finding");
    if (name.rfind("guarded_deep", 0) == 0) c.expect(strict, name + ": not a strict superset");
    detail << name << " " << phase1.size() << "/" << entry_only.size() << " ";
  }
  return c.verdict("roots phase1/entry-only: " + detail.str());
}

Verdict confirmation() {
  Check c;
  std::size_t records = 0, confirmed = 0;
  for (const auto& name : oracle::fixture_names()) {
    const Program p = oracle::load_fixture(name);
    if (entry_input_length(p) == 0 || entry_input_length(p) > 2) continue;
    const auto truth = oracle::violations_over_all_inputs(p);
    for (const auto& rec : run_macke(p).records) {
      ++records;
      c.expect(rec.confirmed_from_entry == (truth.count(rec.violation()) == 1), name + " " + rec.id + ": flag mismatch");
      if (!rec.confirmed_from_entry) continue;
      ++confirmed;
      if (!rec.entry_input) {
        c.expect(false, rec.id + ": confirmed without an input");
        continue;
      }
      const Outcome o = run_concrete(p, *rec.entry_input, 10000);
      c.expect(o.violation && *o.violation == rec.violation(), rec.id + ": entry input does not replay");
    }
  }
  return c.verdict(std::to_string(records) + " records on <= 2-byte programs, " + std::to_string(confirmed) +
                   " confirmed, all flags match brute force");
}

Verdict error_chains() {
  Check c;
  const Program chain = oracle::load_fixture("chain4");
  const MackeReport r = run_macke(chain);
  std::size_t longest = 0;
  for (const auto& rec : r.records) longest = std::max(longest, compute_impact_factors(chain, r, rec.id).longest_chain);
  c.expect(longest == 4, "chain4 longestChain is " + std::to_string(longest));

  const Program guarded = oracle::load_fixture("p1g");
  const MackeReport g = run_macke(guarded);
  std::size_t glen = 0;
  bool any_confirmed = false;
  for (const auto& rec : g.records) {
    any_confirmed |= rec.confirmed_from_entry;
    glen = std::max(glen, compute_impact_factors(guarded, g, rec.id).longest_chain);
  }
  c.expect(!g.records.empty() && !any_confirmed, "p1g record confirmed from entry");
  c.expect(glen == 2, "p1g chain length is " + std::to_string(glen));
  return c.verdict("chain4 longestChain " + std::to_string(longest) + ", p1g chain " + std::to_string(glen) +
                   (any_confirmed ? " confirmed" : " unconfirmed"));
}

Verdict hybrid_coverage() {
  Check c;
  bool strict_somewhere = false;
  std::ostringstream detail;
  for (const std::string name : {"shallow_branchy", "deep_loop_parse"}) {
    const Program p = oracle::load_fixture(name);
    const std::vector<Bytes> seeds{Bytes(fuzz_input_length(p), 0)};
    HybridOptions ho; // 10k executions, 2k states
    FuzzOptions fo;
    fo.budget.max_execs = ho.budgets.fuzz_execs;
    const auto fuzz = fuzz_loop(p, seeds, fo).coverage.functions();
    ExploreOptions eo;
    eo.budget.max_states = ho.budgets.symex_states;
    const auto symex = explore(p, program_entry_spec(p), eo).covered_functions;
    const auto fs = run_hybrid(p, HybridMode::FS, seeds, ho).final_covered;

    const bool over_fuzz = std::includes(fs.begin(), fs.end(), fuzz.begin(), fuzz.end());
    const bool over_symex = std::includes(fs.begin(), fs.end(), symex.begin(), symex.end());
    c.expect(over_fuzz, name + ": FS misses fuzz-only coverage");
    c.expect(over_symex, name + ": FS misses symex-only coverage");
    strict_somewhere |= over_fuzz && over_symex && fs.size() > fuzz.size() && fs.size() > symex.size();
    detail << name << " fs/fuzz/symex " << fs.size() << "/" << fuzz.size() << "/" << symex.size() << " ";
  }
  c.expect(strict_somewhere, "no fixture with strictly more coverage");
  return c.verdict(detail.str());
}

Verdict severity_regression() {
  // Two-level balanced design: each feature takes its low or high value in
  // exactly half of the rows, independently shuffled per column.
  constexpr std::uint64_t kSeed = 42;
  constexpr std::size_t kRows = 50;
  constexpr double kSigma = 0.1;
  const Features truth{0.15, 0.1, 2.0, -0.2, 0.35, 0.05, 1.5};
  constexpr double kIntercept = 1.0;
  const std::array<std::pair<double, double>, kFeatureCount> levels{
      {{0, 6}, {0, 6}, {0, 1}, {1, 8}, {1, 6}, {1, 10}, {0, 1}}};

  std::mt19937_64 rng(kSeed);
  std::vector<TrainingRow> rows(kRows);
  for (std::size_t j = 0; j < kFeatureCount; ++j) {
    std::vector<int> high(kRows, 0);
    std::fill(high.begin(), high.begin() + kRows / 2, 1);
    std::shuffle(high.begin(), high.end(), rng);
    for (std::size_t i = 0; i < kRows; ++i) rows[i].x[j] = high[i] ? levels[j].second : levels[j].first;
  }
  std::normal_distribution<double> noise(0.0, kSigma);
  for (auto& r : rows) {
    r.score = kIntercept;
    for (std::size_t j = 0; j < kFeatureCount; ++j) r.score += truth[j] * r.x[j];
    r.score += noise(rng);
  }

  Check c;
  const SeverityModel m = train_model(rows);
  double worst = 0;
  for (std::size_t j = 0; j < kFeatureCount; ++j) {
    const double err = std::abs(m.weights[j] - truth[j]);
    worst = std::max(worst, err);
    c.expect(err <= 0.05, std::string(kFeatureNames[j]) + " off by " + std::to_string(err));
  }
  for (const auto& r : rows) {
    const double s = predict_score(m, r.x);
    c.expect(s >= 0.0 && s <= 10.0, "prediction out of range");
  }
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  for (int i = 0; i < 1000; ++i) {
    Features x;
    for (auto& v : x) v = u(rng);
    const double s = predict_score(m, x);
    c.expect(s >= 0.0 && s <= 10.0, "prediction out of range");
  }
  std::size_t graphs = 0;
  for (const auto& name : oracle::fixture_names()) {
    const CallGraph cg = build_call_graph(oracle::load_fixture(name));
    if (cg.nodes.size() > 8) continue;
    ++graphs;
    const auto got = betweenness(cg);
    const auto want = oracle::brute_force_betweenness(cg);
    for (std::size_t i = 0; i < want.size(); ++i)
      c.expect(std::abs(got[i] - want[i]) <= 1e-12, name + ": betweenness of " + cg.nodes[i]);
  }
  std::ostringstream d;
  d << "seed " << kSeed << ", max weight error " << worst << " (<= 0.05), betweenness exact on " << graphs
    << " fixture graphs";
  return c.verdict(d.str());
}

std::optional<std::string> capture(const std::string& cmd) {
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return std::nullopt;
  std::string out;
  std::array<char, 4096> buf;
  while (std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe)) out.append(buf.data(), n);
  if (::pclose(pipe) != 0) return std::nullopt;
  return out;
}

Verdict determinism() {
  const std::string cli = VULNKIT_CLI_PATH;
  const auto fx = [](const std::string& n) { return oracle::fixture_path(n); };
  const std::vector<std::string> cmds{
      "parse --program " + fx("p1"),
      "graph --program " + fx("deep_loop_parse") + " --target d6",
      "symex --program " + fx("deep10") + " --strategy random --seed 17 --max-states 3000",
      "symex --program " + fx("shallow_branchy") + " --strategy dfs",
      "sonar --program " + fx("deep10") + " --target target --combiner max",
      "fuzz --program " + fx("shallow_branchy") + " --havoc-seed 5",
      "macke --program " + fx("guarded_deep_b") + " --threads 0",
      "macke --program " + fx("chain4") + " --threads 3",
      "munch --program " + fx("deep_loop_parse") + " --mode fs",
      "munch --program " + fx("shallow_branchy") + " --mode sf --seed 2",
  };
  Check c;
  for (const auto& cmd : cmds) {
    const auto a = capture(cli + " " + cmd);
    const auto b = capture(cli + " " + cmd);
    if (!a || !b) {
      c.expect(false, cmd + ": command failed");
      continue;
    }
    const std::string sa = dump_report(strip_volatile(Json::parse(*a)));
    const std::string sb = dump_report(strip_volatile(Json::parse(*b)));
    c.expect(sa == sb, cmd + ": reports differ");
  }
  return c.verdict(std::to_string(cmds.size()) + " command pairs byte-identical after stripping");
}

struct Criterion {
  int number;
  std::string name;
  double limit_seconds; // 0: no limit
  std::function<Verdict()> run;
};

} // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "distance oracle", 10, distance_oracle},
      {2, "prune soundness", 30, prune_soundness},
      {3, "sonar efficiency", 5, sonar_efficiency},
      {4, "solver exactness", 60, solver_exactness},
      {5, "compositional gain", 60, compositional_gain},
      {6, "confirmation correctness", 120, confirmation},
      {7, "error chains", 0, error_chains},
      {8, "hybrid coverage", 60, hybrid_coverage},
      {9, "severity regression", 5, severity_regression},
      {10, "determinism", 0, determinism},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = cr.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (cr.limit_seconds > 0 && secs >= cr.limit_seconds) {
      v.pass = false;
      v.detail += ", exceeded time limit";
    }
    std::ostringstream line;
    line.setf(std::ios::fixed);
    line.precision(2);
    line << (v.pass ? "PASS" : "FAIL") << "  " << cr.number << ". " << cr.name << ": " << v.detail << " [" << secs << " s";
    if (cr.limit_seconds > 0) line << " of " << cr.limit_seconds << " s";
    line << "]";
    std::cout << line.str() << std::endl;
    failed += !v.pass;
  }
  std::cout << (failed ? std::to_string(failed) + " criteria failed" : std::string("all criteria passed")) << std::endl;
  return failed ? 1 : 0;
}
