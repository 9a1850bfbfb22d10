// SPDX-License-Identifier: Apache-2.0

#include "vulnkit/sonar.hpp"

#include <algorithm>

namespace vulnkit {

Distance combine_routes(Distance direct, Distance via_ancestor, Combiner c) {
  if (!direct.finite()) return via_ancestor;
  if (!via_ancestor.finite()) return direct;
  return c == Combiner::Min ? std::min(direct, via_ancestor) : std::max(direct, via_ancestor);
}

namespace {

Distance frame_distance(const SymFrame& fr, Distance below, bool outermost, const DistanceTables& t, Combiner c) {
  const Location at{fr.function, fr.pc};
  if (outermost) return t.direct(at);
  return combine_routes(t.direct(at), t.to_return(at) + below, c);
}

} // namespace

Distance min_future_distance(const ExecState& s, const DistanceTables& t, Combiner c) {
  Distance d = Distance::infinity();
  for (std::size_t j = 0; j < s.frames.size(); ++j) d = frame_distance(s.frames[j], d, j == 0, t, c);
  return d;
}

Distance min_future_distance_cached(ExecState& s, const DistanceTables& t, Combiner c) {
  Distance d = Distance::infinity();
  for (std::size_t j = 0; j < s.frames.size(); ++j) {
    SymFrame& fr = s.frames[j];
    if (!fr.cached_future) fr.cached_future = frame_distance(fr, d, j == 0, t, c);
    d = *fr.cached_future;
  }
  return d;
}

StatePtr SonarSearcher::push(StatePtr s) {
  if (!s->reached_target && s->location() == Location{tables_.target, 0}) s->reached_target = true;
  if (s->reached_target) return after_.push(std::move(s));
  const Distance d = min_future_distance_cached(*s, tables_, combiner_);
  if (!d.finite()) return s;
  guided_.insert(Entry{d, seq_++, std::move(s)});
  return nullptr;
}

StatePtr SonarSearcher::pop() {
  if (!after_.empty()) return after_.pop();
  auto node = guided_.extract(guided_.begin());
  return std::move(node.value().state);
}

ExplorationReport sonar_explore(const Program& p, const EntrySpec& entry, const std::string& target,
                                ExploreOptions opts) {
  opts.strategy = Strategy::Sonar;
  opts.target = target;
  return explore(p, entry, opts);
}

} // namespace vulnkit
