// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "vulnkit/error.hpp"
#include "vulnkit/sonar.hpp"

using namespace vulnkit;

namespace {

ExploreOptions budget(std::uint64_t states) {
  ExploreOptions o;
  o.budget.max_states = states;
  return o;
}

} // namespace

TEST(Combine, InfinityDefers) {
  const Distance inf = Distance::infinity();
  for (auto c : {Combiner::Min, Combiner::Max}) {
    EXPECT_EQ(combine_routes(inf, Distance(3), c), Distance(3));
    EXPECT_EQ(combine_routes(Distance(3), inf, c), Distance(3));
    EXPECT_FALSE(combine_routes(inf, inf, c).finite());
  }
  EXPECT_EQ(combine_routes(Distance(2), Distance(5), Combiner::Min), Distance(2));
  EXPECT_EQ(combine_routes(Distance(2), Distance(5), Combiner::Max), Distance(5));
  EXPECT_EQ(parse_combiner("max"), Combiner::Max);
  EXPECT_THROW(parse_combiner("avg"), Error);
}

TEST(FutureDistance, Examples) {
  const Program p1 = oracle::load_fixture("p1");
  const DistanceTables t1 = target_distances(p1, "target");
  EXPECT_EQ(min_future_distance(oracle::state_at({{0, 0}}), t1), Distance(5));
  EXPECT_EQ(min_future_distance(oracle::state_at({{0, 3}, {1, 2}, {2, 0}}), t1), Distance(0));

  // util entry with main resuming before `call target`.
  const Program p2 = oracle::load_fixture("p2");
  const DistanceTables t2 = target_distances(p2, "target");
  EXPECT_EQ(min_future_distance(oracle::state_at({{0, 1}, {p2.id_of("util"), 0}}), t2), Distance(2));
}

TEST(FutureDistance, CachedMatchesUncached) {
  const Program p = oracle::load_fixture("deep10");
  const DistanceTables t = target_distances(p, "target");
  for (const auto& stack : oracle::reachable_stacks(p, 4)) {
    ExecState s = oracle::state_at(stack);
    const Distance plain = min_future_distance(s, t);
    EXPECT_EQ(min_future_distance_cached(s, t), plain);
    EXPECT_EQ(min_future_distance_cached(s, t), plain);
  }
}

TEST(FutureDistanceProperty, MatchesBfsOverExpandedStates) {
  for (const auto& name : oracle::fixture_names()) {
    const Program p = oracle::load_fixture(name);
    const auto stacks = oracle::reachable_stacks(p, 4);
    for (FunctionId t = 0; t < static_cast<FunctionId>(p.functions.size()); ++t) {
      const DistanceTables dt = target_distances(p, t, distance_to_return(p));
      for (const auto& s : stacks) {
        const auto want = oracle::shortest_to_target(p, s, t);
        const Distance got = min_future_distance(oracle::state_at(s), dt);
        EXPECT_EQ(got.finite(), want.has_value()) << name;
        if (want && got.finite()) {
          EXPECT_EQ(got.value(), *want) << name;
        }
      }
    }
  }
}

TEST(FutureDistanceProperty, ZeroAtTarget) {
  for (const auto& name : oracle::fixture_names()) {
    const Program p = oracle::load_fixture(name);
    for (FunctionId t = 0; t < static_cast<FunctionId>(p.functions.size()); ++t) {
      const DistanceTables dt = target_distances(p, t, distance_to_return(p));
      for (auto s : oracle::reachable_stacks(p, 3)) {
        s.back() = {t, 0};
        EXPECT_EQ(min_future_distance(oracle::state_at(s), dt), Distance(0));
      }
    }
  }
}

TEST(SonarExplore, P1) {
  const Program p = oracle::load_fixture("p1");
  std::vector<oracle::Stack> pruned;
  ExploreOptions o = budget(1000);
  o.on_prune = [&](const ExecState& s) {
    oracle::Stack st;
    for (const auto& f : s.frames) st.emplace_back(f.function, f.pc);
    pruned.push_back(st);
  };
  const ExplorationReport r = sonar_explore(p, program_entry_spec(p), "target", o);
  ASSERT_TRUE(r.target_reached_at.has_value());
  ASSERT_EQ(r.violations.size(), 1u);
  EXPECT_EQ(r.violations[0].violation.where.function, p.id_of("target"));
  EXPECT_EQ(r.states_pruned, pruned.size());
  ASSERT_FALSE(pruned.empty());
  const int l2 = *p.function("main").find_block("L2");
  for (const auto& s : pruned) {
    ASSERT_EQ(s.size(), 1u);
    EXPECT_EQ(p.function("main").block_of[static_cast<std::size_t>(s[0].second)], l2);
  }
}

TEST(SonarExplore, EntryAsTargetIsUnguided) {
  const Program p = oracle::load_fixture("p1");
  const ExplorationReport r = sonar_explore(p, program_entry_spec(p), "main", budget(1000));
  EXPECT_EQ(r.states_pruned, 0u);
  EXPECT_EQ(r.target_reached_at, 0u);
  ExploreOptions cov = budget(1000);
  const ExplorationReport c = explore(p, program_entry_spec(p), cov);
  EXPECT_EQ(r.states_explored, c.states_explored);
  EXPECT_EQ(r.covered_functions, c.covered_functions);
}

TEST(SonarExplore, UnreachableTarget) {
  const Program p = parse_program(R"(fn main(input: buf[2])
entry:
  x = load input 0
  ret

fn mid(a: int)
entry:
  call target(a)
  ret

fn target(c: int)
entry:
  assert (ne c 7)
  ret
)");
  try {
    sonar_explore(p, program_entry_spec(p), "target", budget(100));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::TargetUnreachable);
  }
}

TEST(SonarProperty, PrunedStatesCannotReachTarget) {
  for (const auto& name : oracle::fixture_names()) {
    const Program p = oracle::load_fixture(name);
    for (const auto& f : p.functions) {
      const FunctionId t = p.id_of(f.name);
      std::size_t checked = 0;
      ExploreOptions o = budget(2000);
      o.on_prune = [&](const ExecState& s) {
        oracle::Stack st;
        for (const auto& fr : s.frames) st.emplace_back(fr.function, fr.pc);
        EXPECT_FALSE(oracle::shortest_to_target(p, st, t).has_value()) << name << " -> " << f.name;
        ++checked;
      };
      try {
        const ExplorationReport r = sonar_explore(p, program_entry_spec(p), f.name, o);
        EXPECT_EQ(checked, r.states_pruned);
      } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::TargetUnreachable);
        EXPECT_FALSE(oracle::shortest_to_target(p, {{p.entry_id(), 0}}, t).has_value());
      }
    }
  }
}

TEST(SonarProperty, ReachedStatesFollowCoverageOrder) {
  // Once states have reached the target, sonar hands them out in exactly the
  // order the coverage searcher would.
  const Program p = oracle::load_fixture("p1");
  const EntrySpec entry = program_entry_spec(p);
  CoverageTracker cov(p);
  SonarSearcher sonar(target_distances(p, "target"), Combiner::Min, cov);
  CoverageSearcher plain(cov);

  const StepContext ctx{p, entry.atoms, {}, 1000};
  std::vector<ExecState> reached;
  std::vector<ExecState> work{initial_state(p, entry)};
  while (!work.empty()) {
    ExecState s = work.back();
    work.pop_back();
    if (s.location() == Location{p.id_of("target"), 0}) s.reached_target = true;
    if (s.reached_target) reached.push_back(s);
    for (auto& k : step_state(s, ctx))
      if (k.status == StateStatus::Active) work.push_back(std::move(k));
  }
  ASSERT_GE(reached.size(), 3u);
  std::uint64_t id = 100;
  for (auto& s : reached) s.id = id++;

  // Mark part of the code covered so fresh and stale queues both matter.
  cov.mark(reached[1].location(), 0);
  std::vector<std::uint64_t> a, b;
  for (const auto& s : reached) {
    EXPECT_EQ(sonar.push(std::make_unique<ExecState>(s)), nullptr);
    EXPECT_EQ(plain.push(std::make_unique<ExecState>(s)), nullptr);
  }
  // An unreached state in the queue never overtakes reached ones.
  ExecState other = initial_state(p, entry);
  other.id = 1;
  sonar.push(std::make_unique<ExecState>(other));
  for (std::size_t i = 0; i < reached.size(); ++i) {
    a.push_back(sonar.pop()->id);
    b.push_back(plain.pop()->id);
  }
  EXPECT_EQ(a, b);
  EXPECT_EQ(sonar.pop()->id, 1u);
  EXPECT_TRUE(sonar.empty());
}
