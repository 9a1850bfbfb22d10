// SPDX-License-Identifier: Apache-2.0

#include "vulnkit/macke.hpp"

#include <algorithm>
#include <atomic>
#include <deque>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "vulnkit/error.hpp"
#include "vulnkit/graphs.hpp"
#include "vulnkit/sonar.hpp"

namespace vulnkit {

Harness isolate_function(const Program& p, const std::string& f, const HarnessConfig& cfg) {
  Harness h;
  h.function = p.id_of(f);
  h.name = "__harness_" + f;
  h.entry = isolated_entry_spec(p, h.function, cfg.buf_len);

  std::ostringstream src;
  if (h.entry.atoms.empty())
    src << "fn " << h.name << "()\n";
  else
    src << "fn " << h.name << "(__in: buf[" << h.entry.atoms.size() << "])\n";
  for (const auto& a : h.entry.args)
    if (a.is_buffer) src << "  buf " << a.name << "[" << a.length << "]\n";
  src << "entry:\n";
  std::vector<std::string> args;
  for (const auto& a : h.entry.args) {
    if (!a.is_buffer) {
      src << "  " << a.name << " = load __in " << a.first_atom << "\n";
    } else {
      for (std::size_t k = 0; k < a.length; ++k) {
        src << "  __v" << a.first_atom + k << " = load __in " << a.first_atom + k << "\n";
        src << "  store " << a.name << " " << k << " __v" << a.first_atom + k << "\n";
      }
    }
    args.push_back(a.name);
  }
  src << "  call " << f << "(";
  for (std::size_t k = 0; k < args.size(); ++k) src << (k ? ", " : "") << args[k];
  src << ")\n  ret\n";
  h.source = src.str();
  return h;
}

Program harness_program(const Program& p, const Harness& h) {
  return parse_program(print_program(p) + "\n" + h.source, h.name);
}

Exploit exploit_from_model(const EntrySpec& entry, std::span<const std::int64_t> model,
                           const std::vector<bool>& constrained) {
  Exploit e;
  for (const auto& a : entry.args) {
    ExploitArg arg{a.name, a.is_buffer, {}, {}};
    for (std::size_t k = 0; k < a.length; ++k) {
      const std::size_t atom = a.first_atom + k;
      arg.values.push_back(model[atom]);
      arg.constrained.push_back(atom < constrained.size() && constrained[atom]);
    }
    e.args.push_back(std::move(arg));
  }
  return e;
}

std::vector<ConcreteArg> exploit_args(const Exploit& e) {
  std::vector<ConcreteArg> out;
  for (const auto& a : e.args) out.push_back({a.is_buffer, a.values});
  return out;
}

std::string record_id(const Program& p, const Violation& v, FunctionId found_in) {
  return std::string(to_string(v.kind)) + "@" + p.function(v.where.function).name + ":" +
         std::to_string(v.where.instr) + "/" + p.function(found_in).name;
}

const VulnRecord* MackeReport::find(const std::string& id) const {
  for (const auto& r : records)
    if (r.id == id) return &r;
  return nullptr;
}

const ErrorChain* MackeReport::chain_for(const Violation& root) const {
  const ErrorChain* best = nullptr;
  for (const auto& c : chains)
    if (c.root == root && (!best || c.length() > best->length())) best = &c;
  return best;
}

namespace {

bool record_less(const VulnRecord& a, const VulnRecord& b) {
  return std::tie(a.root, a.kind, a.found_in) < std::tie(b.root, b.kind, b.found_in);
}

void add_exploit(std::vector<Exploit>& list, Exploit e) {
  if (std::find(list.begin(), list.end(), e) == list.end()) list.push_back(std::move(e));
}

std::vector<VulnRecord> analyze_isolated(const Program& p, FunctionId f, const MackeOptions& opts,
                                         std::uint64_t& states) {
  const EntrySpec entry = isolated_entry_spec(p, f, opts.buf_len);
  ExploreOptions eo;
  eo.strategy = Strategy::Coverage;
  eo.budget.max_states = opts.budget_states;
  eo.budget.max_steps = opts.max_steps;
  eo.solver = opts.solver;
  const ExplorationReport rep = explore(p, entry, eo);
  states = rep.states_explored;
  std::vector<VulnRecord> out;
  for (const auto& v : rep.violations) {
    VulnRecord r;
    r.kind = v.violation.kind;
    r.root = v.violation.where;
    r.found_in = f;
    r.id = record_id(p, v.violation, f);
    r.exploits.push_back(exploit_from_model(entry, v.model, v.constrained));
    out.push_back(std::move(r));
  }
  return out;
}

} // namespace

std::vector<VulnRecord> run_phase1(const Program& p, const MackeOptions& opts, std::uint64_t* states_used) {
  const std::size_t n = p.functions.size();
  std::vector<std::vector<VulnRecord>> per_function(n);
  std::vector<std::uint64_t> states(n, 0);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;

  auto worker = [&] {
    for (std::size_t f = next++; f < n; f = next++) {
      try {
        per_function[f] = analyze_isolated(p, static_cast<FunctionId>(f), opts, states[f]);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  unsigned workers = opts.threads ? opts.threads : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(n, 1)));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < workers; ++i) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<VulnRecord> out;
  for (auto& list : per_function)
    for (auto& r : list) out.push_back(std::move(r));
  std::sort(out.begin(), out.end(), record_less);
  if (states_used) {
    *states_used = 0;
    for (auto s : states) *states_used += s;
  }
  return out;
}

Program replace_with_exploit_check(const Program& p, const std::string& v, const std::vector<Exploit>& exploits) {
  Program q = p;
  Function& f = q.functions[static_cast<std::size_t>(q.id_of(v))];

  for (const Exploit& e : exploits) {
    bool ok = e.args.size() == f.params.size();
    for (std::size_t k = 0; ok && k < e.args.size(); ++k) {
      const Param& prm = f.params[k];
      const ExploitArg& a = e.args[k];
      if (prm.kind == ParamKind::Int)
        ok = !a.is_buffer && a.values.size() == 1;
      else
        ok = a.is_buffer && (prm.length == 0 || a.values.size() == prm.length);
      ok = ok && (a.constrained.empty() || a.constrained.size() == a.values.size());
    }
    if (!ok) throw Error(ErrorKind::ArityMismatch, "exploit does not match the parameters of '" + v + "'");
  }

  std::size_t int_params = 0;
  std::size_t buf_params = 0;
  for (const Param& prm : f.params) (prm.kind == ParamKind::Int ? int_params : buf_params)++;
  f.int_slots.resize(int_params);
  f.buf_slots.resize(buf_params);
  f.code.clear();

  const auto temp = [&f] {
    f.int_slots.push_back("__chk" + std::to_string(f.int_slots.size()));
    return static_cast<int>(f.int_slots.size() - 1);
  };

  for (const Exploit& e : exploits) {
    std::vector<std::pair<Operand, std::int64_t>> conjuncts;
    for (std::size_t k = 0; k < e.args.size(); ++k) {
      const Param& prm = f.params[k];
      const ExploitArg& a = e.args[k];
      for (std::size_t i = 0; i < a.values.size(); ++i) {
        if (!a.constrained.empty() && !a.constrained[i]) continue;
        if (prm.kind == ParamKind::Int) {
          conjuncts.emplace_back(Operand::var(prm.slot), a.values[i]);
        } else {
          const int t = temp();
          f.code.emplace_back(instr::Load{t, prm.slot, Operand::imm(static_cast<std::int64_t>(i))});
          conjuncts.emplace_back(Operand::var(t), a.values[i]);
        }
      }
    }
    if (conjuncts.empty()) {
      f.code.emplace_back(instr::Assert{Cond{std::nullopt, Operand::imm(0), Operand::imm(0)}});
    } else if (conjuncts.size() == 1) {
      const auto& [lhs, value] = conjuncts.front();
      f.code.emplace_back(instr::Assert{Cond{BinOp::Ne, lhs, Operand::imm(value)}});
    } else {
      const int m = temp();
      f.code.emplace_back(instr::Bin{m, BinOp::Eq, conjuncts[0].first, Operand::imm(conjuncts[0].second)});
      for (std::size_t i = 1; i < conjuncts.size(); ++i) {
        const int t = temp();
        f.code.emplace_back(instr::Bin{t, BinOp::Eq, conjuncts[i].first, Operand::imm(conjuncts[i].second)});
        f.code.emplace_back(instr::Bin{m, BinOp::Mul, Operand::var(m), Operand::var(t)});
      }
      f.code.emplace_back(instr::Assert{Cond{BinOp::Eq, Operand::var(m), Operand::imm(0)}});
    }
  }
  const bool returns = p.function(v).returns_value();
  f.code.emplace_back(instr::Ret{returns ? std::optional(Operand::imm(0)) : std::nullopt});
  f.blocks = {Block{"entry", 0, static_cast<InstrIndex>(f.code.size())}};
  validate_program(q);
  return q;
}

namespace {

struct Link {
  FunctionId function;
  std::vector<Exploit> exploits;
  std::vector<FunctionId> chain;
};

class Propagator {
public:
  Propagator(const Program& p, const MackeOptions& opts, MackeReport& rep)
      : p_(p), opts_(opts), rep_(rep), cg_(build_call_graph(p)) {}

  void propagate(const Violation& root) {
    const FunctionId v = root.where.function;
    std::vector<FunctionId> best{v};
    const VulnRecord* start = record(root, v);
    if (start) {
      std::deque<Link> work{{v, start->exploits, {v}}};
      std::set<FunctionId> reached{v};
      std::set<std::pair<FunctionId, FunctionId>> tried;
      while (!work.empty()) {
        Link link = std::move(work.front());
        work.pop_front();
        const Program summarized = replace_with_exploit_check(p_, p_.function(link.function).name, link.exploits);
        for (FunctionId f : cg_.callers(link.function)) {
          if (reached.count(f) || !tried.insert({f, link.function}).second) continue;
          if (std::find(link.chain.begin(), link.chain.end(), f) != link.chain.end()) continue;
          auto derived = derive(summarized, f, link.function);
          if (derived.empty()) continue;
          reached.insert(f);
          VulnRecord& r = record_or_create(root, f);
          for (const auto& e : derived) add_exploit(r.exploits, e);
          std::vector<FunctionId> chain{f};
          chain.insert(chain.end(), link.chain.begin(), link.chain.end());
          if (chain.size() > best.size()) best = chain;
          work.push_back({f, std::move(derived), std::move(chain)});
        }
      }
    }
    rep_.chains.push_back({root, std::move(best)});
  }

  void confirm(const Violation& root) {
    const FunctionId entry = p_.entry_id();
    const VulnRecord* at_entry = record(root, entry);
    if (!at_entry) return;
    RunOptions ro;
    ro.step_budget = opts_.max_steps;
    ro.record_trace = false;
    for (const Exploit& e : at_entry->exploits) {
      const auto args = exploit_args(e);
      const Outcome o = run_function(p_, entry, args, ro);
      if (o.kind != OutcomeKind::Violation || *o.violation != root) continue;
      Bytes input;
      for (const auto& a : args)
        for (auto x : a.values) input.push_back(static_cast<std::uint8_t>(x));
      for (auto& r : rep_.records) {
        if (r.violation() != root) continue;
        r.confirmed_from_entry = true;
        r.entry_input = input;
      }
      return;
    }
  }

private:
  const VulnRecord* record(const Violation& root, FunctionId found_in) const {
    for (const auto& r : rep_.records)
      if (r.violation() == root && r.found_in == found_in) return &r;
    return nullptr;
  }

  VulnRecord& record_or_create(const Violation& root, FunctionId found_in) {
    for (auto& r : rep_.records)
      if (r.violation() == root && r.found_in == found_in) return r;
    VulnRecord r;
    r.kind = root.kind;
    r.root = root.where;
    r.found_in = found_in;
    r.derived = true;
    r.id = record_id(p_, root, found_in);
    rep_.records.push_back(std::move(r));
    return rep_.records.back();
  }

  // Exploits of `caller` that reach a failing check in the summarized callee.
  std::vector<Exploit> derive(const Program& summarized, FunctionId caller, FunctionId callee) {
    const EntrySpec entry = isolated_entry_spec(summarized, caller, opts_.buf_len);
    ExploreOptions eo;
    eo.budget.max_states = opts_.phase2_states ? opts_.phase2_states : opts_.budget_states;
    eo.budget.max_steps = opts_.max_steps;
    eo.solver = opts_.solver;
    std::vector<Exploit> out;
    ExplorationReport rep;
    try {
      rep = sonar_explore(summarized, entry, summarized.function(callee).name, eo);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::TargetUnreachable) throw;
      return out;
    }
    rep_.phase2_states += rep.states_explored;
    for (const auto& v : rep.violations)
      if (v.violation.kind == ViolationKind::AssertFail && v.violation.where.function == callee)
        add_exploit(out, exploit_from_model(entry, v.model, v.constrained));
    return out;
  }

  const Program& p_;
  const MackeOptions& opts_;
  MackeReport& rep_;
  CallGraph cg_;
};

} // namespace

MackeReport run_phase2(const Program& p, std::vector<VulnRecord> phase1, const MackeOptions& opts) {
  MackeReport rep;
  rep.records = std::move(phase1);
  std::set<Violation> roots;
  for (const auto& r : rep.records) roots.insert(r.violation());

  Propagator prop(p, opts, rep);
  for (const auto& root : roots) prop.propagate(root);
  for (const auto& root : roots) prop.confirm(root);
  std::sort(rep.records.begin(), rep.records.end(), record_less);
  return rep;
}

MackeReport run_macke(const Program& p, const MackeOptions& opts) {
  std::uint64_t states = 0;
  auto phase1 = run_phase1(p, opts, &states);
  MackeReport rep = run_phase2(p, std::move(phase1), opts);
  rep.phase1_states = states;
  return rep;
}

} // namespace vulnkit
