// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "vulnkit/error.hpp"
#include "vulnkit/macke.hpp"
#include "vulnkit/report.hpp"

using namespace vulnkit;

namespace {

const std::vector<std::string> kCorpus{"p1", "p1g", "chain4", "arith", "guarded_deep_a", "guarded_deep_b"};

Exploit int_exploit(const std::string& name, std::int64_t v) { return Exploit{{ExploitArg{name, false, {v}, {}}}}; }

std::vector<std::string> chain_names(const Program& p, const ErrorChain& c) {
  std::vector<std::string> out;
  for (FunctionId f : c.functions) out.push_back(p.function(f).name);
  return out;
}

bool fails_with(const Program& p, const std::string& fn, std::vector<ConcreteArg> args) {
  const Outcome o = run_function(p, p.id_of(fn), args, {.step_budget = 1000, .record_trace = false});
  return o.kind == OutcomeKind::Violation;
}

} // namespace

TEST(Isolate, Examples) {
  const Program p = oracle::load_fixture("p1");
  const Harness mid = isolate_function(p, "mid");
  ASSERT_EQ(mid.entry.atoms.size(), 1u);
  EXPECT_EQ(mid.entry.atoms[0].name, "a");
  EXPECT_EQ(mid.entry.atoms[0].hi, 255);
  EXPECT_NE(mid.source.find("call mid(a)"), std::string::npos);

  const Harness main = isolate_function(p, "main");
  EXPECT_EQ(main.entry.atoms.size(), 2u);

  const Program z = parse_program("fn main()\nentry:\n  call f()\n  ret\n\nfn f()\nentry:\n  ret\n");
  const Harness hf = isolate_function(z, "f");
  EXPECT_TRUE(hf.entry.atoms.empty());
  EXPECT_NE(hf.source.find("call f()"), std::string::npos);
}

TEST(Isolate, UnsizedBufferUsesConfiguredLength) {
  const Program p = parse_program(R"(fn main(input: buf[4])
entry:
  call g(input)
  ret

fn g(b: buf)
entry:
  x = load b 5
  ret
)");
  EXPECT_EQ(isolate_function(p, "g").entry.atoms.size(), 8u);
  EXPECT_EQ(isolate_function(p, "g", {3}).entry.atoms.size(), 3u);
}

TEST(Isolate, HarnessProgramRunsTheFunction) {
  const Program p = oracle::load_fixture("p1");
  const Harness h = isolate_function(p, "mid");
  const Program hp = harness_program(p, h);
  EXPECT_EQ(hp.entry, h.name);
  EXPECT_EQ(run_concrete(hp, Bytes{6}, 100).kind, OutcomeKind::Violation);
  EXPECT_EQ(run_concrete(hp, Bytes{5}, 100).kind, OutcomeKind::NormalExit);
}

TEST(ReplaceWithCheck, SingleExploitMirrorsOriginal) {
  const Program p = oracle::load_fixture("p1");
  const Program q = replace_with_exploit_check(p, "target", {int_exploit("c", 7)});
  const std::string text = print_program(q);
  EXPECT_NE(text.find("assert (ne c 7)"), std::string::npos);
  EXPECT_EQ(q.function("main"), p.function("main"));
  EXPECT_EQ(q.function("mid"), p.function("mid"));
  for (std::int64_t c = 0; c < 256; ++c)
    EXPECT_EQ(fails_with(q, "target", {{false, {c}}}), c == 7);
}

TEST(ReplaceWithCheck, TwoExploits) {
  const Program p = oracle::load_fixture("p1");
  const Program q = replace_with_exploit_check(p, "target", {int_exploit("c", 7), int_exploit("c", 9)});
  for (std::int64_t c = 0; c < 256; ++c) EXPECT_EQ(fails_with(q, "target", {{false, {c}}}), c == 7 || c == 9);
}

TEST(ReplaceWithCheck, BufferExploitComparesElementwise) {
  const Program p = parse_program(R"(fn main(input: buf[2])
entry:
  call f(input)
  ret

fn f(b: buf[2])
entry:
  ret
)");
  const Exploit e{{ExploitArg{"b", true, {1, 2}, {}}}};
  const Program q = replace_with_exploit_check(p, "f", {e});
  for (std::int64_t a = 0; a < 256; ++a)
    for (std::int64_t b = 0; b < 256; ++b)
      ASSERT_EQ(fails_with(q, "f", {{true, {a, b}}}), a == 1 && b == 2);
}

TEST(ReplaceWithCheck, UnconstrainedValuesAreIgnored) {
  const Program p = parse_program(R"(fn main(input: buf[2])
entry:
  call f(input)
  ret

fn f(b: buf[2])
entry:
  ret
)");
  const Exploit e{{ExploitArg{"b", true, {1, 2}, {true, false}}}};
  const Program q = replace_with_exploit_check(p, "f", {e});
  EXPECT_TRUE(fails_with(q, "f", {{true, {1, 200}}}));
  EXPECT_FALSE(fails_with(q, "f", {{true, {2, 2}}}));
}

TEST(ReplaceWithCheck, ValueReturningFunctionReturnsZero) {
  const Program p = oracle::load_fixture("guarded_deep_b");
  const Program q = replace_with_exploit_check(p, "table", {int_exploit("i", 4)});
  EXPECT_TRUE(q.function("table").returns_value());
}

TEST(ReplaceWithCheck, ArityMismatch) {
  const Program p = oracle::load_fixture("arith");
  try {
    replace_with_exploit_check(p, "divide", {int_exploit("n", 1)});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ArityMismatch);
  }
}

TEST(Phase1, P1RecordsPerHarness) {
  const Program p = oracle::load_fixture("p1");
  MackeOptions o;
  o.threads = 2;
  const auto records = run_phase1(p, o);
  ASSERT_EQ(records.size(), 3u);
  std::map<std::string, std::int64_t> first_value;
  for (const auto& r : records) {
    EXPECT_EQ(r.root, (Location{p.id_of("target"), 0}));
    ASSERT_FALSE(r.exploits.empty());
    first_value[p.function(r.found_in).name] = r.exploits[0].args[0].values[0];
  }
  EXPECT_EQ(first_value, (std::map<std::string, std::int64_t>{{"main", 6}, {"mid", 6}, {"target", 7}}));
}

TEST(Phase1, CleanProgramHasNoRecords) {
  const Program p = oracle::load_fixture("p2");
  EXPECT_TRUE(run_phase1(p, {}).empty());
  const MackeReport r = run_phase2(p, {}, {});
  EXPECT_TRUE(r.chains.empty());
}

TEST(Phase2, P1Chain) {
  const Program p = oracle::load_fixture("p1");
  const MackeReport r = run_macke(p);
  ASSERT_EQ(r.chains.size(), 1u);
  EXPECT_EQ(chain_names(p, r.chains[0]), (std::vector<std::string>{"main", "mid", "target"}));
  for (const auto& rec : r.records) EXPECT_TRUE(rec.confirmed_from_entry) << rec.id;
}

TEST(Phase2, GuardedVariant) {
  const Program p = oracle::load_fixture("p1g");
  const MackeReport r = run_macke(p);
  ASSERT_EQ(r.chains.size(), 1u);
  EXPECT_EQ(chain_names(p, r.chains[0]), (std::vector<std::string>{"mid", "target"}));
  for (const auto& rec : r.records) EXPECT_FALSE(rec.confirmed_from_entry) << rec.id;
}

TEST(Phase2, FourDeepChain) {
  const Program p = oracle::load_fixture("chain4");
  const MackeReport r = run_macke(p);
  ASSERT_EQ(r.chains.size(), 1u);
  EXPECT_EQ(chain_names(p, r.chains[0]), (std::vector<std::string>{"main", "a", "b", "c"}));
}

TEST(MackeProperty, IndependentOfThreadCount) {
  for (const auto& name : kCorpus) {
    const Program p = oracle::load_fixture(name);
    std::string first;
    for (unsigned threads : {1u, 2u, 5u, 16u}) {
      MackeOptions o;
      o.threads = threads;
      const std::string text = dump_report(macke_json(p, run_macke(p, o)));
      if (first.empty()) first = text;
      EXPECT_EQ(text, first) << name << " threads=" << threads;
    }
  }
}

TEST(MackeProperty, ChainsFollowCallEdges) {
  for (const auto& name : kCorpus) {
    const Program p = oracle::load_fixture(name);
    const CallGraph cg = build_call_graph(p);
    const MackeReport r = run_macke(p);
    for (const auto& c : r.chains) {
      ASSERT_FALSE(c.functions.empty());
      EXPECT_EQ(c.functions.back(), c.root.where.function) << name;
      for (std::size_t i = 1; i < c.functions.size(); ++i)
        EXPECT_TRUE(cg.has_edge(c.functions[i - 1], c.functions[i])) << name;
      std::set<FunctionId> distinct(c.functions.begin(), c.functions.end());
      EXPECT_EQ(distinct.size(), c.functions.size()) << name;
    }
  }
}

TEST(MackeProperty, ExploitsReplayThroughTheirFunction) {
  for (const auto& name : kCorpus) {
    const Program p = oracle::load_fixture(name);
    for (const auto& rec : run_macke(p).records) {
      for (const auto& e : rec.exploits) {
        const Outcome o = run_function(p, rec.found_in, exploit_args(e), {.step_budget = 10000, .record_trace = false});
        ASSERT_TRUE(o.violation) << rec.id;
        EXPECT_EQ(*o.violation, rec.violation()) << rec.id;
      }
    }
  }
}

TEST(MackeProperty, ConfirmationMatchesBruteForce) {
  for (const auto& name : kCorpus) {
    const Program p = oracle::load_fixture(name);
    const auto truth = oracle::violations_over_all_inputs(p);
    for (const auto& rec : run_macke(p).records) {
      EXPECT_EQ(rec.confirmed_from_entry, truth.count(rec.violation()) == 1) << rec.id;
      if (!rec.confirmed_from_entry) continue;
      ASSERT_TRUE(rec.entry_input) << rec.id;
      const Outcome o = run_concrete(p, *rec.entry_input, 10000);
      ASSERT_TRUE(o.violation) << rec.id;
      EXPECT_EQ(*o.violation, rec.violation()) << rec.id;
    }
  }
}
