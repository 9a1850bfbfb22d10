// SPDX-License-Identifier: Apache-2.0
//
// Distance-guided search toward a single target function.
#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <utility>

#include "vulnkit/graphs.hpp"
#include "vulnkit/symex.hpp"

namespace vulnkit {

/// Merges the direct and via-ancestor routes. An infinite operand defers to
/// the other one, so the result is infinite only when both are.
Distance combine_routes(Distance direct, Distance via_ancestor, Combiner c);

/// Minimum remaining instruction count until control sits at the target
/// entry, evaluated innermost-out along the call stack.
Distance min_future_distance(const ExecState& s, const DistanceTables& t, Combiner c = Combiner::Min);

/// Same value; memoises ancestor frames in `SymFrame::cached_future`.
Distance min_future_distance_cached(ExecState& s, const DistanceTables& t, Combiner c = Combiner::Min);

/// Orders states by (distance, enqueue order) and hands back states at
/// infinite distance as pruned. States that have sat at the target entry,
/// and their descendants, are scheduled by an inner coverage searcher which
/// takes priority once it holds anything.
class SonarSearcher : public Searcher {
public:
  SonarSearcher(DistanceTables tables, Combiner combiner, const CoverageTracker& cov)
      : tables_(std::move(tables)), combiner_(combiner), after_(cov) {}

  StatePtr push(StatePtr s) override;
  StatePtr pop() override;
  bool empty() const override { return guided_.empty() && after_.empty(); }
  std::size_t size() const override { return guided_.size() + after_.size(); }

  const DistanceTables& tables() const { return tables_; }

private:
  struct Entry {
    Distance distance;
    std::uint64_t seq;
    mutable StatePtr state;
    bool operator<(const Entry& o) const { return std::pair(distance, seq) < std::pair(o.distance, o.seq); }
  };

  DistanceTables tables_;
  Combiner combiner_;
  std::uint64_t seq_ = 0;
  std::set<Entry> guided_;
  CoverageSearcher after_;
};

/// `explore` with the sonar strategy toward `target`.
ExplorationReport sonar_explore(const Program& p, const EntrySpec& entry, const std::string& target,
                                ExploreOptions opts = {});

} // namespace vulnkit
