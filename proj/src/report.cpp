// SPDX-License-Identifier: Apache-2.0

#include "vulnkit/report.hpp"

#include <algorithm>
#include <cstdio>

namespace vulnkit {

namespace {

const std::string& fname(const Program& p, FunctionId f) { return p.function(f).name; }

Json function_names(const Program& p, const std::set<FunctionId>& fns) {
  std::vector<std::string> names;
  for (FunctionId f : fns) names.push_back(fname(p, f));
  std::sort(names.begin(), names.end());
  return names;
}

Json timeline_json(const Program& p, const std::vector<CoverageEvent>& t) {
  Json out = Json::array();
  for (const auto& e : t) out.push_back({{"index", e.index}, {"function", fname(p, e.function)}});
  return out;
}

Json bytes_json(const Bytes& b) { return hex_bytes(b); }

} // namespace

Json location_json(const Program& p, Location at) { return {{"function", fname(p, at.function)}, {"instr", at.instr}}; }

Json violation_json(const Program& p, const Violation& v) {
  return {{"kind", std::string(to_string(v.kind))}, {"location", location_json(p, v.where)}};
}

Json distance_json(Distance d) { return d.finite() ? Json(d.value()) : Json(nullptr); }

std::string hex_bytes(const Bytes& b) {
  std::string s;
  char buf[3];
  for (auto x : b) {
    std::snprintf(buf, sizeof buf, "%02x", x);
    s += buf;
  }
  return s;
}

Json program_json(const Program& p) {
  Json fns = Json::array();
  for (const auto& f : p.functions) {
    Json params = Json::array();
    for (const auto& prm : f.params) {
      Json j = {{"name", prm.name}, {"kind", prm.kind == ParamKind::Int ? "int" : "buf"}};
      if (prm.kind == ParamKind::Buf) j["length"] = prm.length;
      params.push_back(j);
    }
    Json blocks = Json::array();
    for (const auto& b : f.blocks) blocks.push_back(b.label);
    fns.push_back({{"name", f.name}, {"params", params}, {"blocks", blocks}, {"instructions", f.code.size()}});
  }
  return {{"entry", p.entry},
          {"functions", fns},
          {"instructionCount", p.instruction_count()},
          {"text", print_program(p)}};
}

Json graph_json(const Program& p, const std::string* target) {
  const CallGraph cg = build_call_graph(p);
  Json edges = Json::array();
  for (const auto& [edge, sites] : cg.edges) {
    Json at = Json::array();
    for (const auto& s : sites) at.push_back(s.instr);
    edges.push_back({{"caller", fname(p, edge.first)}, {"callee", fname(p, edge.second)}, {"sites", at}});
  }
  Json cfgs = Json::object();
  for (const auto& f : p.functions) {
    const Cfg cfg = build_cfg(f);
    Json e = Json::array();
    for (const auto& [a, b] : cfg.edges) e.push_back({cfg.nodes[static_cast<std::size_t>(a)], cfg.nodes[static_cast<std::size_t>(b)]});
    cfgs[f.name] = {{"nodes", cfg.nodes}, {"edges", e}};
  }
  const auto depths = call_depths(p, cg);
  Json depth = Json::object();
  for (FunctionId f = 0; f < static_cast<FunctionId>(p.functions.size()); ++f) {
    const auto& d = depths[static_cast<std::size_t>(f)];
    depth[fname(p, f)] = d ? Json(*d) : Json(nullptr);
  }

  const ReturnTables rt = distance_to_return(p);
  Json to_return = Json::object();
  Json complete = Json::object();
  for (FunctionId f = 0; f < static_cast<FunctionId>(p.functions.size()); ++f) {
    Json row = Json::array();
    for (auto d : rt.to_return[static_cast<std::size_t>(f)]) row.push_back(distance_json(d));
    to_return[fname(p, f)] = row;
    complete[fname(p, f)] = distance_json(rt.complete[static_cast<std::size_t>(f)]);
  }
  Json out = {{"callGraph", {{"nodes", cg.nodes}, {"edges", edges}}},
              {"cfgs", cfgs},
              {"callDepth", depth},
              {"dToReturn", to_return},
              {"dComplete", complete}};
  if (target) {
    const DistanceTables t = target_distances(p, p.id_of(*target), rt);
    Json to_target = Json::object();
    for (FunctionId f = 0; f < static_cast<FunctionId>(p.functions.size()); ++f) {
      Json row = Json::array();
      for (auto d : t.to_target[static_cast<std::size_t>(f)]) row.push_back(distance_json(d));
      to_target[fname(p, f)] = row;
    }
    out["target"] = *target;
    out["dToTarget"] = to_target;
  }
  return out;
}

Json exploration_json(const Program& p, const ExplorationReport& r) {
  std::vector<std::string> names;
  for (const auto& a : r.atoms) names.push_back(a.name);

  std::vector<const FoundViolation*> found;
  for (const auto& v : r.violations) found.push_back(&v);
  std::sort(found.begin(), found.end(), [](auto* a, auto* b) { return a->violation < b->violation; });
  Json violations = Json::array();
  for (const auto* v : found) {
    Json j = violation_json(p, v->violation);
    j["model"] = v->model;
    Json constrained = Json::array();
    for (std::size_t i = 0; i < v->constrained.size() && i < names.size(); ++i)
      if (v->constrained[i]) constrained.push_back(names[i]);
    j["constrained"] = constrained;
    j["foundAt"] = v->found_at;
    violations.push_back(j);
  }
  Json tests = Json::array();
  for (const auto& t : r.test_inputs) tests.push_back({{"end", std::string(to_string(t.end))}, {"model", t.model}});

  return {{"strategy", std::string(to_string(r.strategy))},
          {"target", r.target ? Json(*r.target) : Json(nullptr)},
          {"seed", r.seed},
          {"budget", {{"maxStates", r.budget.max_states}, {"maxSteps", r.budget.max_steps},
                      {"wallMillis", r.budget.wall_millis}}},
          {"atoms", names},
          {"statesExplored", r.states_explored},
          {"statesPruned", r.states_pruned},
          {"solverFailures", r.solver_failures},
          {"budgetExhausted", r.budget_exhausted},
          {"saturated", r.saturated},
          {"targetReachedAt", r.target_reached_at ? Json(*r.target_reached_at) : Json(nullptr)},
          {"violations", violations},
          {"coveredFunctions", function_names(p, r.covered_functions)},
          {"functionTimeline", timeline_json(p, r.function_timeline)},
          {"testInputs", tests}};
}

Json fuzz_json(const Program& p, const FuzzReport& r) {
  const auto edge_json = [&](const Edge& e) {
    const Function& f = p.function(e.function);
    return Json{{"function", f.name},
                {"from", f.blocks[static_cast<std::size_t>(e.from_block)].label},
                {"to", f.blocks[static_cast<std::size_t>(e.to_block)].label}};
  };
  Json corpus = Json::array();
  for (const auto& c : r.corpus)
    corpus.push_back({{"input", bytes_json(c.input)},
                      {"discoveredAt", c.discovered_at},
                      {"newFunctions", function_names(p, c.new_functions)},
                      {"newEdges", c.new_edges.size()}});
  Json edges = Json::array();
  for (const auto& e : r.coverage.edges()) edges.push_back(edge_json(e));
  Json crashes = Json::array();
  for (const auto& c : r.crashes) {
    Json j = violation_json(p, *c.outcome.violation);
    j["input"] = bytes_json(c.input);
    j["foundAt"] = c.found_at;
    crashes.push_back(j);
  }
  return {{"execs", r.execs},
          {"saturated", r.saturated},
          {"budgetExhausted", r.budget_exhausted},
          {"corpus", corpus},
          {"coverage", {{"functions", function_names(p, r.coverage.functions())},
                        {"edges", edges},
                        {"timeline", timeline_json(p, r.coverage.timeline())}}},
          {"crashes", crashes}};
}

Json macke_json(const Program& p, const MackeReport& r) {
  Json records = Json::array();
  for (const auto& rec : r.records) {
    Json exploits = Json::array();
    for (const auto& e : rec.exploits) {
      Json args = Json::array();
      for (const auto& a : e.args) {
        Json constrained = Json::array();
        for (std::size_t i = 0; i < a.values.size(); ++i)
          if (a.constrained.empty() || a.constrained[i]) constrained.push_back(i);
        args.push_back({{"name", a.name}, {"isBuffer", a.is_buffer}, {"values", a.values}, {"constrained", constrained}});
      }
      exploits.push_back({{"args", args}});
    }
    records.push_back({{"id", rec.id},
                       {"kind", std::string(to_string(rec.kind))},
                       {"root", location_json(p, rec.root)},
                       {"foundIn", fname(p, rec.found_in)},
                       {"derived", rec.derived},
                       {"exploits", exploits},
                       {"confirmedFromEntry", rec.confirmed_from_entry},
                       {"entryInput", rec.entry_input ? Json(hex_bytes(*rec.entry_input)) : Json(nullptr)}});
  }
  Json chains = Json::array();
  for (const auto& c : r.chains) {
    std::vector<std::string> fns;
    for (FunctionId f : c.functions) fns.push_back(fname(p, f));
    chains.push_back({{"root", violation_json(p, c.root)}, {"functions", fns}, {"length", c.length()}});
  }
  return {{"records", records},
          {"chains", chains},
          {"phase1States", r.phase1_states},
          {"phase2States", r.phase2_states}};
}

Json hybrid_json(const Program& p, const HybridReport& r) {
  Json phases = Json::array();
  for (const auto& ph : r.phases) {
    Json j = {{"tool", std::string(to_string(ph.tool))},
              {"budget", ph.budget},
              {"budgetUsed", ph.budget_used},
              {"coverageDelta", function_names(p, ph.coverage_delta)},
              {"saturated", ph.saturated}};
    if (ph.target) j["target"] = *ph.target;
    if (ph.tool == PhaseTool::Sonar) j["targetUnreachable"] = ph.target_unreachable;
    if (ph.tool == PhaseTool::Symex) j["seedsEmitted"] = ph.seeds_emitted;
    phases.push_back(j);
  }
  Json depth = Json::object();
  for (const auto& [d, c] : r.coverage_by_depth)
    depth[std::to_string(d)] = {{"covered", c.covered}, {"total", c.total}};
  if (r.unreachable.total) depth["unreachable"] = {{"covered", r.unreachable.covered}, {"total", r.unreachable.total}};
  Json violations = Json::array();
  for (const auto& v : r.violations) {
    Json j = violation_json(p, v.violation);
    j["input"] = bytes_json(v.input);
    j["tool"] = std::string(to_string(v.tool));
    violations.push_back(j);
  }
  return {{"mode", std::string(to_string(r.mode))},
          {"phases", phases},
          {"finalCoveredFunctions", function_names(p, r.final_covered)},
          {"coverageByDepth", depth},
          {"violations", violations}};
}

Json impact_json(const ImpactVector& v) {
  return {{"degreeIn", v.degree_in},         {"degreeOut", v.degree_out},       {"betweenness", v.betweenness},
          {"entryDistance", v.entry_distance}, {"longestChain", v.longest_chain}, {"exploitCount", v.exploit_count},
          {"reachableFromEntry", v.reachable_from_entry ? 1 : 0}};
}

ImpactVector impact_from_json(const Json& j) {
  ImpactVector v;
  v.degree_in = j.at("degreeIn");
  v.degree_out = j.at("degreeOut");
  v.betweenness = j.at("betweenness");
  v.entry_distance = j.at("entryDistance");
  v.longest_chain = j.at("longestChain");
  v.exploit_count = j.at("exploitCount");
  v.reachable_from_entry = j.at("reachableFromEntry").get<int>() != 0;
  return v;
}

Json strip_volatile(Json report) {
  report.erase("elapsedMillis");
  report.erase("toolVersion");
  return report;
}

std::string dump_report(const Json& j) { return j.dump(2) + "\n"; }

} // namespace vulnkit
