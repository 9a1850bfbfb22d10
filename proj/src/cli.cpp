// SPDX-License-Identifier: Apache-2.0

#include "vulnkit/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "vulnkit/error.hpp"
#include "vulnkit/fuzz.hpp"
#include "vulnkit/macke.hpp"
#include "vulnkit/munch.hpp"
#include "vulnkit/report.hpp"
#include "vulnkit/severity.hpp"
#include "vulnkit/sonar.hpp"

namespace vulnkit {

namespace {

namespace fs = std::filesystem;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read '" + path + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
}

// Flat `key = value` lines; `#` starts a comment.
std::map<std::string, std::string> read_config(const std::string& path) {
  std::map<std::string, std::string> out;
  std::istringstream in(read_file(path));
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(" \t\r"));
      s.erase(s.find_last_not_of(" \t\r") + 1);
      return s;
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorKind::SyntaxError, path + ":" + std::to_string(number) + ": expected 'key = value'", number);
    std::string key = trim(line.substr(0, eq));
    std::replace(key.begin(), key.end(), '_', '-');
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

// Removes `--config FILE` and appends config entries for every key the
// selected subcommand understands and that is not already given as a flag.
std::vector<std::string> apply_config(std::vector<std::string> args, CLI::App& app) {
  std::optional<std::string> config;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i + 2));
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      config = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (!config) return args;
  CLI::App* sub = &app;
  for (const auto& a : args) {
    if (a.rfind('-', 0) == 0) break;
    CLI::App* next = sub->get_subcommand_no_throw(a);
    if (!next) break;
    sub = next;
  }
  for (const auto& [key, value] : read_config(*config)) {
    const std::string flag = "--" + key;
    if (sub == &app || !sub->get_option_no_throw(flag)) continue;
    const bool given = std::any_of(args.begin(), args.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
    if (!given) args.push_back(flag + "=" + value);
  }
  return args;
}

struct Options {
  std::string program;
  std::string out;
  std::string strategy = "coverage";
  std::string target;
  std::string combiner = "min";
  std::uint64_t max_states = 1000;
  std::uint64_t max_steps = 10000;
  std::uint64_t wall_millis = 0;
  std::uint64_t seed = 0;
  std::size_t max_atoms = 4;
  std::string seed_dir;
  std::uint64_t max_execs = 10000;
  std::uint64_t havoc_seed = 0;
  std::uint64_t havoc_rounds = 64;
  std::uint64_t step_budget = 1000;
  std::uint64_t window = 0;
  std::uint64_t budget_states = 200;
  std::uint64_t phase2_states = 0;
  std::size_t buf_len = 8;
  unsigned threads = 0;
  std::string mode;
  std::uint64_t fuzz_execs = 10000;
  std::uint64_t symex_states = 2000;
  std::uint64_t per_target_states = 500;
  std::string data;
  std::string model;
  std::string model_out;
  std::string report;
  std::string in;
  bool strip = false;
};

Program load_program(const std::string& path) { return parse_program(read_file(path)); }

std::vector<Bytes> load_seeds(const std::string& dir, const Program& p) {
  if (dir.empty()) return {Bytes(fuzz_input_length(p), 0)};
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw Error(ErrorKind::Io, "seed directory '" + dir + "' not found");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<Bytes> seeds;
  for (const auto& f : files) {
    const std::string s = read_file(f.string());
    seeds.emplace_back(s.begin(), s.end());
  }
  if (seeds.empty()) throw Error(ErrorKind::NoSeeds, "seed directory '" + dir + "' is empty");
  return seeds;
}

ExploreOptions explore_options(const Options& o) {
  ExploreOptions eo;
  eo.strategy = parse_strategy(o.strategy);
  if (!o.target.empty()) eo.target = o.target;
  eo.seed = o.seed;
  eo.budget = {o.max_states, o.max_steps, o.wall_millis};
  eo.combiner = parse_combiner(o.combiner);
  eo.solver.max_atoms = o.max_atoms;
  eo.saturation_window = o.window;
  return eo;
}

Json args_json(const CLI::App* sub) {
  Json args = Json::object();
  for (const CLI::App* app = sub; app; app = app->get_subcommands().empty() ? nullptr : app->get_subcommands()[0]) {
    for (const CLI::Option* opt : app->get_options()) {
      if (opt->count() == 0 || opt->get_name() == "--help") continue;
      const auto& res = opt->results();
      args[opt->get_name().substr(2)] = res.size() == 1 ? Json(res[0]) : Json(res);
    }
  }
  return args;
}

Json run(const std::string& cmd, const CLI::App& app, const Options& o) {
  if (cmd == "parse") return program_json(load_program(o.program));
  if (cmd == "graph") {
    const Program p = load_program(o.program);
    return graph_json(p, o.target.empty() ? nullptr : &o.target);
  }
  if (cmd == "symex" || cmd == "sonar") {
    ExploreOptions eo = explore_options(o);
    const Program p = load_program(o.program);
    if (cmd == "sonar") {
      if (o.target.empty()) throw CLI::RequiredError("--target");
      eo.strategy = Strategy::Sonar;
    }
    Json j = exploration_json(p, explore(p, program_entry_spec(p), eo));
    if (eo.strategy == Strategy::Sonar) j["combiner"] = std::string(to_string(eo.combiner));
    return j;
  }
  if (cmd == "fuzz") {
    const Program p = load_program(o.program);
    FuzzOptions fo;
    fo.budget = {o.max_execs, o.wall_millis};
    fo.havoc_seed = o.havoc_seed;
    fo.havoc_rounds = o.havoc_rounds;
    fo.step_budget = o.step_budget;
    fo.saturation_window = o.window;
    const auto seeds = load_seeds(o.seed_dir, p);
    return fuzz_json(p, fuzz_loop(p, seeds, fo));
  }
  if (cmd == "macke") {
    const Program p = load_program(o.program);
    MackeOptions mo;
    mo.budget_states = o.budget_states;
    mo.phase2_states = o.phase2_states;
    mo.max_steps = o.max_steps;
    mo.buf_len = o.buf_len;
    mo.threads = o.threads;
    mo.solver.max_atoms = o.max_atoms;
    const MackeReport r = run_macke(p, mo);
    Json j = macke_json(p, r);
    Json impacts = Json::object();
    for (const auto& rec : r.records) impacts[rec.id] = impact_json(compute_impact_factors(p, r, rec.id));
    j["impactVectors"] = impacts;
    return j;
  }
  if (cmd == "munch") {
    const HybridMode mode = parse_mode(o.mode);
    const Program p = load_program(o.program);
    HybridOptions ho;
    ho.budgets = {o.fuzz_execs, o.symex_states, o.per_target_states, o.window ? o.window : 1000, o.max_steps,
                  o.step_budget};
    ho.havoc_seed = o.havoc_seed;
    ho.seed = o.seed;
    ho.solver.max_atoms = o.max_atoms;
    std::vector<Bytes> seeds;
    if (!o.seed_dir.empty() || mode == HybridMode::FS) seeds = load_seeds(o.seed_dir, p);
    return hybrid_json(p, run_hybrid(p, mode, seeds, ho));
  }
  if (cmd == "severity") {
    const CLI::App* sub = app.get_subcommand("severity");
    if (sub->got_subcommand("train")) {
      std::istringstream in(read_file(o.data));
      const SeverityModel m = train_model(read_dataset(in));
      const std::string text = model_to_json(m);
      if (!o.model_out.empty()) write_file(o.model_out, text);
      return {{"model", Json::parse(text)}};
    }
    const SeverityModel m = model_from_json(read_file(o.model));
    Json report;
    try {
      report = Json::parse(read_file(o.report));
    } catch (const Json::exception& e) {
      throw Error(ErrorKind::SyntaxError, "malformed report '" + o.report + "': " + e.what());
    }
    const Json* vectors = nullptr;
    if (report.contains("result") && report["result"].contains("impactVectors"))
      vectors = &report["result"]["impactVectors"];
    else if (report.contains("impactVectors"))
      vectors = &report["impactVectors"];
    if (!vectors) throw Error(ErrorKind::SyntaxError, "report '" + o.report + "' has no impactVectors");
    Json preds = Json::array();
    for (const auto& [id, v] : vectors->items()) {
      const ImpactVector iv = impact_from_json(v);
      preds.push_back({{"id", id}, {"score", predict_score(m, iv)}, {"raw", raw_score(m, iv.features())}});
    }
    return {{"predictions", preds}};
  }
  throw CLI::CallForHelp();
}

int exit_code(ErrorKind k) {
  switch (k) {
  case ErrorKind::UnknownStrategy:
  case ErrorKind::UnknownMode: return 2;
  default: return 1;
  }
}

} // namespace

int execute_command(std::span<const std::string> raw_args, std::ostream& out, std::ostream& err) {
  const auto started = std::chrono::steady_clock::now();
  Options o;
  CLI::App app{"Vulnerability analysis over a minimal IR", "vulnkit"};
  app.require_subcommand(1, 1);
  app.add_option("--config", "Flat key=value file providing flag defaults");

  const auto program = [&](CLI::App* s) { s->add_option("--program", o.program, "IR source file")->required(); };
  const auto output = [&](CLI::App* s) { s->add_option("--out", o.out, "Report file (default: stdout)"); };
  const auto explore_flags = [&](CLI::App* s) {
    s->add_option("--max-states", o.max_states, "State selections");
    s->add_option("--max-steps", o.max_steps, "Instructions per path");
    s->add_option("--wall-millis", o.wall_millis, "Wall-clock limit, 0 for none");
    s->add_option("--seed", o.seed, "Random strategy seed");
    s->add_option("--max-atoms", o.max_atoms, "Solver atoms per constraint group");
    s->add_option("--window", o.window, "Saturation window in states, 0 disables");
  };

  auto* parse = app.add_subcommand("parse", "Parse and echo a program");
  program(parse);
  output(parse);

  auto* graph = app.add_subcommand("graph", "Call graph, CFGs and distance tables");
  program(graph);
  graph->add_option("--target", o.target, "Target function for dToTarget");
  output(graph);

  auto* symex = app.add_subcommand("symex", "Symbolic exploration from the entry");
  program(symex);
  symex->add_option("--strategy", o.strategy, "dfs|bfs|random|coverage|sonar");
  symex->add_option("--target", o.target, "Target function");
  symex->add_option("--combiner", o.combiner, "min|max (sonar)");
  explore_flags(symex);
  output(symex);

  auto* sonar = app.add_subcommand("sonar", "Distance-guided exploration toward a target");
  program(sonar);
  sonar->add_option("--target", o.target, "Target function")->required();
  sonar->add_option("--combiner", o.combiner, "min|max");
  explore_flags(sonar);
  output(sonar);

  auto* fuzz = app.add_subcommand("fuzz", "Greybox mutation fuzzing");
  program(fuzz);
  fuzz->add_option("--seed-dir", o.seed_dir, "Directory of raw seed files");
  fuzz->add_option("--max-execs", o.max_execs, "Executions");
  fuzz->add_option("--havoc-seed", o.havoc_seed, "Havoc RNG seed");
  fuzz->add_option("--havoc-rounds", o.havoc_rounds, "Havoc mutations per corpus visit");
  fuzz->add_option("--step-budget", o.step_budget, "Instructions per execution");
  fuzz->add_option("--wall-millis", o.wall_millis, "Wall-clock limit, 0 for none");
  fuzz->add_option("--window", o.window, "Saturation window in executions, 0 disables");
  output(fuzz);

  auto* macke = app.add_subcommand("macke", "Compositional analysis with error chains");
  program(macke);
  macke->add_option("--budget-states", o.budget_states, "Phase-1 states per function");
  macke->add_option("--phase2-states", o.phase2_states, "Phase-2 states per link, 0 for --budget-states");
  macke->add_option("--buf-len", o.buf_len, "Length for unsized buffer parameters");
  macke->add_option("--max-steps", o.max_steps, "Instructions per path");
  macke->add_option("--threads", o.threads, "Phase-1 workers, 0 for all cores");
  macke->add_option("--max-atoms", o.max_atoms, "Solver atoms per constraint group");
  output(macke);

  auto* munch = app.add_subcommand("munch", "Hybrid fuzzing and symbolic execution");
  program(munch);
  munch->add_option("--mode", o.mode, "fs|sf")->required();
  munch->add_option("--fuzz-execs", o.fuzz_execs, "Fuzzing executions");
  munch->add_option("--symex-states", o.symex_states, "Total symbolic states");
  munch->add_option("--per-target-states", o.per_target_states, "States per sonar target (fs)");
  munch->add_option("--window", o.window, "Saturation window, default 1000");
  munch->add_option("--seed-dir", o.seed_dir, "Directory of raw seed files");
  munch->add_option("--havoc-seed", o.havoc_seed, "Havoc RNG seed");
  munch->add_option("--seed", o.seed, "Symbolic strategy seed");
  munch->add_option("--max-steps", o.max_steps, "Instructions per path");
  munch->add_option("--step-budget", o.step_budget, "Instructions per execution");
  munch->add_option("--max-atoms", o.max_atoms, "Solver atoms per constraint group");
  output(munch);

  auto* severity = app.add_subcommand("severity", "Severity model training and prediction");
  severity->require_subcommand(1, 1);
  auto* train = severity->add_subcommand("train", "Fit a model from a CSV dataset");
  train->add_option("--data", o.data, "CSV dataset")->required();
  train->add_option("--model-out", o.model_out, "Model file to write")->required();
  output(train);
  auto* predict = severity->add_subcommand("predict", "Score the records of a macke report");
  predict->add_option("--model", o.model, "Model file")->required();
  predict->add_option("--report", o.report, "Macke report")->required();
  output(predict);

  auto* report = app.add_subcommand("report", "Re-emit a report canonically");
  report->add_option("--in", o.in, "Report file")->required();
  report->add_flag("--strip", o.strip, "Drop elapsedMillis and toolVersion");
  output(report);

  std::string cmd;
  if (!raw_args.empty() && raw_args[0].rfind('-', 0) != 0) {
    const auto subs = app.get_subcommands([](const CLI::App*) { return true; });
    const bool known = std::any_of(subs.begin(), subs.end(), [&](const CLI::App* s) { return s->get_name() == raw_args[0]; });
    if (!known) {
      err << "vulnkit: unknown subcommand '" << raw_args[0] << "'\n" << app.help();
      return 2;
    }
  }
  try {
    std::vector<std::string> args = apply_config({raw_args.begin(), raw_args.end()}, app);
    std::reverse(args.begin(), args.end()); // CLI11 takes arguments in reverse order
    app.parse(args);
    cmd = app.get_subcommands().at(0)->get_name();

    Json doc;
    if (cmd == "report") {
      try {
        doc = Json::parse(read_file(o.in));
      } catch (const Json::exception& e) {
        throw Error(ErrorKind::SyntaxError, "malformed report '" + o.in + "': " + e.what());
      }
      if (o.strip) doc = strip_volatile(std::move(doc));
    } else {
      Json result = run(cmd, app, o);
      std::string command = cmd;
      if (cmd == "severity") command += app.get_subcommand("severity")->got_subcommand("train") ? " train" : " predict";
      doc = {{"toolVersion", VULNKIT_VERSION},
             {"command", command},
             {"args", args_json(app.get_subcommands().at(0))},
             {"seeds", {{"seed", o.seed}, {"havocSeed", o.havoc_seed}}},
             {"result", std::move(result)}};
      doc["elapsedMillis"] =
          std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started).count();
    }
    if (o.out.empty())
      out << dump_report(doc);
    else
      write_file(o.out, dump_report(doc));
    return 0;
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "vulnkit: " << e.what() << "\n" << app.help();
    return 2;
  } catch (const Error& e) {
    err << "vulnkit: " << to_string(e.kind()) << ": " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "vulnkit: " << e.what() << "\n";
    return 1;
  }
}

} // namespace vulnkit
