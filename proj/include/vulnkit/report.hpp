// SPDX-License-Identifier: Apache-2.0
//
// JSON views of analysis results. Objects use sorted keys; arrays are in a
// canonical order so identical runs serialise identically.
#pragma once

#include <json.hpp>
#include <string>

#include "vulnkit/fuzz.hpp"
#include "vulnkit/graphs.hpp"
#include "vulnkit/ir.hpp"
#include "vulnkit/macke.hpp"
#include "vulnkit/munch.hpp"
#include "vulnkit/severity.hpp"
#include "vulnkit/symex.hpp"

namespace vulnkit {

using Json = nlohmann::json;

Json location_json(const Program& p, Location at);
Json violation_json(const Program& p, const Violation& v);
Json distance_json(Distance d); // null for infinity
std::string hex_bytes(const Bytes& b);

Json program_json(const Program& p);
Json graph_json(const Program& p, const std::string* target);
Json exploration_json(const Program& p, const ExplorationReport& r);
Json fuzz_json(const Program& p, const FuzzReport& r);
Json macke_json(const Program& p, const MackeReport& r);
Json hybrid_json(const Program& p, const HybridReport& r);
Json impact_json(const ImpactVector& v);
ImpactVector impact_from_json(const Json& j);

/// The report without its volatile fields (elapsedMillis, toolVersion).
Json strip_volatile(Json report);

/// Two-space indented dump with a trailing newline.
std::string dump_report(const Json& j);

} // namespace vulnkit
