// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "vulnkit/error.hpp"
#include "vulnkit/interp.hpp"
#include "vulnkit/ir.hpp"

using namespace vulnkit;

namespace {

ErrorKind parse_error(std::string_view text) {
  try {
    parse_program(text);
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "parse succeeded";
  return ErrorKind::Io;
}

} // namespace

TEST(Parse, P1HasThreeFunctions) {
  const Program p = oracle::load_fixture("p1");
  ASSERT_EQ(p.functions.size(), 3u);
  EXPECT_EQ(p.functions[0].name, "main");
  EXPECT_EQ(p.functions[1].name, "mid");
  EXPECT_EQ(p.functions[2].name, "target");
  EXPECT_EQ(entry_input_length(p), 2u);
}

TEST(Parse, Errors) {
  EXPECT_EQ(parse_error(""), ErrorKind::MissingEntry);
  EXPECT_EQ(parse_error("fn main()\nentry:\n  c = const 1\n  br c L9 L1\nL1:\n  ret\n"), ErrorKind::UndefinedLabel);
  EXPECT_EQ(parse_error("fn main()\nentry:\n  call nowhere()\n  ret\n"), ErrorKind::UndefinedCallee);
  EXPECT_EQ(parse_error("fn main()\nentry:\n  x = frob 1 2\n  ret\n"), ErrorKind::SyntaxError);
  EXPECT_EQ(parse_error("fn main(a: int, b: int)\nentry:\n  ret\n"), ErrorKind::InvalidEntry);
}

TEST(Parse, SyntaxErrorCarriesLine) {
  try {
    parse_program("fn main()\nentry:\n  ret\n  ret ret\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SyntaxError);
    EXPECT_EQ(e.line(), 4);
  }
}

TEST(Parse, RoundTripAllFixtures) {
  for (const auto& name : oracle::fixture_names()) {
    const Program p = oracle::load_fixture(name);
    const std::string text = print_program(p);
    const Program q = parse_program(text);
    EXPECT_EQ(p, q) << name;
    EXPECT_EQ(print_program(q), text) << name;
  }
}

TEST(Run, P1Examples) {
  const Program p = oracle::load_fixture("p1");
  const Bytes six{6};
  const Outcome a = run_concrete(p, six, 1000);
  ASSERT_EQ(a.kind, OutcomeKind::Violation);
  EXPECT_EQ(a.violation->kind, ViolationKind::AssertFail);
  EXPECT_EQ(a.violation->where.function, p.id_of("target"));

  const Bytes nine{9};
  const Outcome b = run_concrete(p, nine, 1000);
  EXPECT_EQ(b.kind, OutcomeKind::NormalExit);
  EXPECT_EQ(b.covered_functions.size(), 3u);
}

TEST(Run, P1SingleByteOracle) {
  // Only byte 6 reaches the assertion with c == 7.
  const Program p = oracle::load_fixture("p1");
  for (int v = 0; v < 256; ++v) {
    const Bytes in{static_cast<std::uint8_t>(v)};
    const Outcome o = run_concrete(p, in, 1000);
    EXPECT_EQ(o.kind == OutcomeKind::Violation, v == 6) << v;
    EXPECT_EQ(o.covered_functions.size(), v > 5 ? 3u : 1u) << v;
  }
}

TEST(Run, InfiniteLoopExhaustsBudget) {
  const Program p = oracle::load_fixture("loop");
  const Outcome o = run_concrete(p, Bytes{}, 1000);
  EXPECT_EQ(o.kind, OutcomeKind::BudgetExhausted);
  EXPECT_EQ(o.trace.size(), 1000u);
}

TEST(Run, ArithmeticEdges) {
  const Program p = parse_program(R"(fn main(input: buf[1])
entry:
  a = const 9223372036854775807
  b = add a 1
  c = lt b 0
  assert (eq c 1)
  d = sub 0 7
  e = div d 2
  assert (eq e -3)
  f = mod d 2
  assert (eq f -1)
  g = load input 0
  h = div 5 g
  ret
)");
  const Outcome zero = run_concrete(p, Bytes{0}, 100);
  ASSERT_EQ(zero.kind, OutcomeKind::Violation);
  EXPECT_EQ(zero.violation->kind, ViolationKind::DivByZero);
  EXPECT_EQ(run_concrete(p, Bytes{1}, 100).kind, OutcomeKind::NormalExit);
}

TEST(Run, InputIsPaddedAndTruncated) {
  const Program p = oracle::load_fixture("p1");
  EXPECT_EQ(run_concrete(p, Bytes{}, 1000).covered_functions.size(), 1u);
  EXPECT_EQ(run_concrete(p, Bytes{6, 0, 0, 0, 9}, 1000).kind, OutcomeKind::Violation);
}

TEST(RunProperty, DeterministicWithViolationLastInTrace) {
  std::mt19937_64 rng(7);
  for (const auto& name : oracle::fixture_names()) {
    const Program p = oracle::load_fixture(name);
    const std::size_t len = entry_input_length(p);
    for (int round = 0; round < 200; ++round) {
      Bytes in(len);
      for (auto& b : in) b = static_cast<std::uint8_t>(rng() % 256);
      const std::uint64_t budget = 1 + rng() % 400;
      const Outcome a = run_concrete(p, in, budget);
      const Outcome b = run_concrete(p, in, budget);
      EXPECT_EQ(a, b) << name;
      EXPECT_LE(a.trace.size(), budget) << name;
      if (a.violation) {
        ASSERT_FALSE(a.trace.empty());
        EXPECT_EQ(a.trace.back(), a.violation->where) << name;
      }
    }
  }
}
