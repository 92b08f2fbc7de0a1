#pragma once

#include <optional>

#include <json.hpp>

#include "qdkit/classify.hpp"
#include "qdkit/heine_stieltjes.hpp"
#include "qdkit/measures.hpp"

namespace qd {

using Json = nlohmann::ordered_json;

Json to_json(cplx z);
Json to_json(const Extended& x);  ///< number, or "inf" / "-inf"
Json to_json(const Polynomial& p);
Json to_json(const Location& l);
Json to_json(const CriticalInventory& inv);
Json to_json(const CriticalGraph& cg, bool polylines = true);
Json to_json(const BoundarySystem& bs);
Json to_json(const ReebGraph& reeb);
Json to_json(const Orientation& o);
Json to_json(const PotentialCount& c);
Json to_json(const HSSolution& s);

cplx complex_from_json(const Json& j);
Extended extended_from_json(const Json& j);
/// Coefficient array (ascending, [re, im] pairs or numbers) or an expression string.
Polynomial polynomial_from_json(const Json& j);

/// Reeb graph plus the incidence data the classifiers need, without any analytic field.
struct AbstractInstance {
    std::optional<CriticalGraph> critical_graph;
    BoundarySystem boundaries;  ///< from the critical graph, or only edge_sides when given directly
    bool has_sides = false;
    ReebGraph reeb;
};

/// True for documents with a "reeb" member.
bool is_abstract_document(const Json& doc);

/// Accepts the "graphs" block of a report as well as hand-written instances.
AbstractInstance abstract_from_json(const Json& doc);

}  // namespace qd
