// SPDX-License-Identifier: Apache-2.0

#include "vulnkit/severity.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <deque>
#include <iomanip>
#include <json.hpp>
#include <set>
#include <sstream>
#include <stack>

#include "vulnkit/error.hpp"

namespace vulnkit {

const std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "degree_in", "degree_out", "betweenness", "entry_distance", "longest_chain", "exploit_count", "reachable"};

Features ImpactVector::features() const {
  return {static_cast<double>(degree_in),      static_cast<double>(degree_out),    betweenness,
          static_cast<double>(entry_distance), static_cast<double>(longest_chain), static_cast<double>(exploit_count),
          reachable_from_entry ? 1.0 : 0.0};
}

std::vector<double> betweenness(const CallGraph& cg) {
  const std::size_t n = cg.nodes.size();
  std::vector<double> cb(n, 0.0);
  if (n < 3) return cb;
  std::vector<std::set<std::size_t>> adj(n);
  for (const auto& [edge, sites] : cg.edges) {
    const auto [a, b] = edge;
    if (a == b) continue;
    adj[static_cast<std::size_t>(a)].insert(static_cast<std::size_t>(b));
    adj[static_cast<std::size_t>(b)].insert(static_cast<std::size_t>(a));
  }
  // Brandes' accumulation; summing over every source counts ordered pairs.
  for (std::size_t s = 0; s < n; ++s) {
    std::vector<std::vector<std::size_t>> preds(n);
    std::vector<double> sigma(n, 0.0), delta(n, 0.0);
    std::vector<long> dist(n, -1);
    std::vector<std::size_t> order;
    std::deque<std::size_t> q{s};
    sigma[s] = 1;
    dist[s] = 0;
    while (!q.empty()) {
      const std::size_t v = q.front();
      q.pop_front();
      order.push_back(v);
      for (std::size_t w : adj[v]) {
        if (dist[w] < 0) {
          dist[w] = dist[v] + 1;
          q.push_back(w);
        }
        if (dist[w] == dist[v] + 1) {
          sigma[w] += sigma[v];
          preds[w].push_back(v);
        }
      }
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const std::size_t w = *it;
      for (std::size_t v : preds[w]) delta[v] += sigma[v] / sigma[w] * (1 + delta[w]);
      if (w != s) cb[w] += delta[w];
    }
  }
  const double norm = static_cast<double>((n - 1) * (n - 2));
  for (auto& c : cb) c /= norm;
  return cb;
}

ImpactVector compute_impact_factors(const Program& p, const MackeReport& analysis, const std::string& id) {
  const VulnRecord* rec = analysis.find(id);
  if (!rec) throw Error(ErrorKind::UnknownVulnerability, "no vulnerability with id '" + id + "'");
  const FunctionId f = rec->root.function;
  const CallGraph cg = build_call_graph(p);

  ImpactVector v;
  v.degree_in = cg.callers(f).size();
  v.degree_out = cg.callees(f).size();
  v.betweenness = betweenness(cg)[static_cast<std::size_t>(f)];

  const auto depths = call_depths(p, cg);
  std::size_t max_finite = 0;
  for (const auto& d : depths)
    if (d) max_finite = std::max(max_finite, *d);
  const auto& d = depths[static_cast<std::size_t>(f)];
  v.reachable_from_entry = d.has_value();
  v.entry_distance = d ? *d : max_finite + 1;

  const ErrorChain* chain = analysis.chain_for(rec->violation());
  v.longest_chain = chain ? chain->length() : 1;
  v.exploit_count = rec->exploits.size();
  return v;
}

SeverityModel train_model(const std::vector<TrainingRow>& rows) {
  constexpr std::size_t cols = kFeatureCount + 1;
  if (rows.size() < cols)
    throw Error(ErrorKind::Underdetermined, "need at least " + std::to_string(cols) + " rows, got " +
                                                std::to_string(rows.size()));
  Eigen::MatrixXd a(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  Eigen::VectorXd b(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (std::size_t j = 0; j < kFeatureCount; ++j) a(r, static_cast<Eigen::Index>(j)) = rows[i].x[j];
    a(r, static_cast<Eigen::Index>(kFeatureCount)) = 1.0;
    b(r) = rows[i].score;
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() < static_cast<Eigen::Index>(cols)) throw Error(ErrorKind::SingularDesign, "design matrix is rank deficient");
  const Eigen::VectorXd w = qr.solve(b);

  SeverityModel m;
  for (std::size_t j = 0; j < kFeatureCount; ++j) m.weights[j] = w(static_cast<Eigen::Index>(j));
  m.intercept = w(static_cast<Eigen::Index>(kFeatureCount));
  m.rows = rows.size();
  m.residual_norm = (a * w - b).norm();
  return m;
}

double raw_score(const SeverityModel& m, const Features& x) {
  double s = m.intercept;
  for (std::size_t j = 0; j < kFeatureCount; ++j) s += m.weights[j] * x[j];
  return s;
}

double predict_score(const SeverityModel& m, const Features& x) { return std::clamp(raw_score(m, x), 0.0, 10.0); }

namespace {

constexpr std::string_view kHeader =
    "degree_in,degree_out,betweenness,entry_distance,longest_chain,exploit_count,reachable,score";

[[noreturn]] void bad_csv(int line, const std::string& msg) {
  throw Error(ErrorKind::SyntaxError, "dataset line " + std::to_string(line) + ": " + msg, line);
}

std::string trim(std::string s) {
  const auto ws = " \t\r";
  s.erase(0, s.find_first_not_of(ws));
  s.erase(s.find_last_not_of(ws) + 1);
  return s;
}

} // namespace

std::vector<TrainingRow> read_dataset(std::istream& in) {
  std::string line;
  int number = 0;
  bool header = false;
  std::vector<TrainingRow> rows;
  while (std::getline(in, line)) {
    ++number;
    line = trim(line);
    if (line.empty()) continue;
    if (!header) {
      if (line != kHeader) bad_csv(number, "expected header '" + std::string(kHeader) + "'");
      header = true;
      continue;
    }
    std::vector<double> cells;
    std::istringstream fields(line);
    std::string cell;
    while (std::getline(fields, cell, ',')) {
      cell = trim(cell);
      std::size_t used = 0;
      double v = 0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        bad_csv(number, "not a number: '" + cell + "'");
      }
      if (used != cell.size()) bad_csv(number, "not a number: '" + cell + "'");
      cells.push_back(v);
    }
    if (cells.size() != kFeatureCount + 1) bad_csv(number, "expected " + std::to_string(kFeatureCount + 1) + " fields");
    TrainingRow r;
    std::copy_n(cells.begin(), kFeatureCount, r.x.begin());
    r.score = cells.back();
    rows.push_back(r);
  }
  if (!header) bad_csv(number, "missing header");
  return rows;
}

std::string write_dataset(const std::vector<TrainingRow>& rows) {
  std::ostringstream out;
  out << kHeader << '\n' << std::setprecision(17);
  for (const auto& r : rows) {
    for (double x : r.x) out << x << ',';
    out << r.score << '\n';
  }
  return out.str();
}

std::string model_to_json(const SeverityModel& m) {
  nlohmann::json j;
  nlohmann::json w = nlohmann::json::object();
  for (std::size_t k = 0; k < kFeatureCount; ++k) w[std::string(kFeatureNames[k])] = m.weights[k];
  j["weights"] = w;
  j["intercept"] = m.intercept;
  j["trainingMeta"] = {{"rows", m.rows}, {"residualNorm", m.residual_norm}};
  return j.dump(2) + "\n";
}

SeverityModel model_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    SeverityModel m;
    for (std::size_t k = 0; k < kFeatureCount; ++k) m.weights[k] = j.at("weights").at(std::string(kFeatureNames[k]));
    m.intercept = j.at("intercept");
    m.rows = j.at("trainingMeta").at("rows");
    m.residual_norm = j.at("trainingMeta").at("residualNorm");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::SyntaxError, std::string("malformed model: ") + e.what());
  }
}

} // namespace vulnkit
