#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ncbundle/battery.hpp"
#include "ncbundle/hopf.hpp"
#include "ncbundle/watatani.hpp"

namespace ncb::io {

using Json = nlohmann::ordered_json;

Json read_json(const std::string& path);

/// Defaults overridden by the keys present in `doc`. Throws InvalidSpec on
/// unknown keys or non-positive tolerances.
RunConfig config_from_json(const Json& doc);
RunConfig load_config(const std::string& path);

MeshSpec mesh_from_json(const Json& doc);
CompactificationKind compactification_kind_from_string(const std::string& s);

CMatrix matrix_from_json(const Json& doc);
Json to_json(const CMatrix& m);
Json to_json(Complex z);

/// Field recipes: identity, constant, hopf, twisted-hopf, bumps, battery, direct-sum, explicit.
ProjectionField field_from_json(const Json& doc, const SpacePtr& space);

/// A problem document: space, optional compactification and field.
struct Problem {
  Json doc;
  SpacePtr space;
  CompactificationPtr compactification;
  std::optional<ProjectionField> field;
};

Problem load_problem(const Json& doc);

/// Frame recipes: unit, hopf-y, hopf-w-column, partition, canonical, explicit.
Frame frame_from_json(const Json& doc, const Problem& problem);

/// Module recipes: from-field, hopf, rank-drop, unbounded-rank, explicit.
ModuleInstance module_from_json(const Json& doc, const Problem& problem);

/// Map recipes for pushforward: identity, annulus-double-cover, sphere-rotation, collapse, explicit.
VertexMap map_from_json(const Json& doc, const Problem& problem);

/// Report with a structured twin. `volatile_text` lines (timings) appear only in the text rendering.
struct Report {
  std::string title;
  Json data = Json::object();
  std::vector<std::string> volatile_text;

  std::string text() const;
  std::string structured() const;
};

struct CsvRow {
  Vertex vertex;
  std::string quantity;
  double value;
};

/// Columns: vertex_id, coord0, coord1, coord2, quantity, value.
std::string csv(const DiscreteSpace& space, const std::vector<CsvRow>& rows);
void write_file(const std::string& path, const std::string& contents);

Json to_json(const ChernResult& r);
Json to_json(const NotExtendable& n);
Json to_json(const ExtensionResult& r);
Json to_json(const EquivalenceReport& r);
Json to_json(const IndexFunction& f);
Json to_json(const Cor58Report& r);
Json to_json(const HopfDemoReport& r);

}  // namespace ncb::io
