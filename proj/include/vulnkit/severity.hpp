// SPDX-License-Identifier: Apache-2.0
//
// Call-graph impact factors and a least-squares severity score in [0,10].
#pragma once

#include <array>
#include <cstdint>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "vulnkit/graphs.hpp"
#include "vulnkit/ir.hpp"
#include "vulnkit/macke.hpp"

namespace vulnkit {

inline constexpr std::size_t kFeatureCount = 7;
using Features = std::array<double, kFeatureCount>;

extern const std::array<std::string_view, kFeatureCount> kFeatureNames;

struct ImpactVector {
  std::size_t degree_in = 0;
  std::size_t degree_out = 0;
  double betweenness = 0;
  std::size_t entry_distance = 0; // unreachable: max finite distance + 1
  std::size_t longest_chain = 0;
  std::size_t exploit_count = 0;
  bool reachable_from_entry = false;

  Features features() const;
};

/// Undirected shortest-path betweenness per function, normalised by
/// (n-1)(n-2) over ordered pairs; 0 for graphs with fewer than 3 nodes.
std::vector<double> betweenness(const CallGraph& cg);

/// Impact factors of the root function of record `id`. Throws
/// UnknownVulnerability.
ImpactVector compute_impact_factors(const Program& p, const MackeReport& analysis, const std::string& id);

struct TrainingRow {
  Features x{};
  double score = 0;
};

struct SeverityModel {
  Features weights{};
  double intercept = 0;
  std::size_t rows = 0;
  double residual_norm = 0;
};

/// Ordinary least squares with an intercept. Throws Underdetermined with
/// fewer than kFeatureCount + 1 rows and SingularDesign on a rank-deficient
/// design.
SeverityModel train_model(const std::vector<TrainingRow>& rows);

double raw_score(const SeverityModel& m, const Features& x);
double predict_score(const SeverityModel& m, const Features& x); // clamped to [0,10]
inline double predict_score(const SeverityModel& m, const ImpactVector& v) { return predict_score(m, v.features()); }

/// CSV with header
/// `degree_in,degree_out,betweenness,entry_distance,longest_chain,exploit_count,reachable,score`.
/// Throws SyntaxError on malformed input.
std::vector<TrainingRow> read_dataset(std::istream& in);
std::string write_dataset(const std::vector<TrainingRow>& rows);

std::string model_to_json(const SeverityModel& m);
SeverityModel model_from_json(std::string_view text); // throws SyntaxError

} // namespace vulnkit
