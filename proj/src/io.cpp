#include "ncbundle/io.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace ncb::io {

namespace {

template <class T>
T get(const Json& doc, const char* key, T fallback) {
  if (!doc.contains(key)) return fallback;
  try {
    return doc.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw InvalidSpec(std::string("field '") + key + "': " + e.what());
  }
}

const Json& require(const Json& doc, const char* key) {
  if (!doc.is_object() || !doc.contains(key)) throw InvalidSpec(std::string("missing field '") + key + "'");
  return doc.at(key);
}

std::string recipe_of(const Json& doc) {
  if (doc.is_string()) return doc.get<std::string>();
  return get<std::string>(doc, "recipe", "");
}

Complex complex_from_json(const Json& j) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number()) return {j[0].get<double>(), j[1].get<double>()};
  throw InvalidSpec("complex entries are numbers or [re, im] pairs");
}

Section section_from_json(const Json& j, const SpacePtr& space, FunctionClass cls) {
  if (!j.is_array() || j.size() != space->size()) throw InvalidSpec("a section needs one entry per vertex");
  const auto n = static_cast<Eigen::Index>(j.size());
  const auto ambient = static_cast<Eigen::Index>(j[0].is_array() ? j[0].size() : 1);
  CMatrix values(ambient, n);
  for (Eigen::Index v = 0; v < n; ++v) {
    const auto& col = j[static_cast<std::size_t>(v)];
    if (!col.is_array() || static_cast<Eigen::Index>(col.size()) != ambient)
      throw InvalidSpec("section entries must all have the same length");
    for (Eigen::Index r = 0; r < ambient; ++r) values(r, v) = complex_from_json(col[static_cast<std::size_t>(r)]);
  }
  return Section(space, std::move(values), cls);
}

FunctionClass class_from_string(const std::string& s) {
  if (s == "vanishing") return FunctionClass::vanishing;
  if (s == "bounded") return FunctionClass::bounded;
  if (s == "extended") return FunctionClass::extended;
  throw InvalidSpec("unknown function class '" + s + "'");
}

std::optional<FieldFunction> field_function(const Json& doc) {
  const auto recipe = recipe_of(doc);
  if (recipe == "identity") {
    const int n = get<int>(doc, "n", 1);
    if (n < 1) throw InvalidSpec("identity field needs n >= 1");
    return constant_field_function(CMatrix::Identity(n, n));
  }
  if (recipe == "constant") return constant_field_function(matrix_from_json(require(doc, "matrix")));
  if (recipe == "hopf") return hopf_field_function();
  if (recipe == "twisted-hopf")
    return twisted_hopf_field(get<int>(doc, "winding", 1), get<double>(doc, "r_lo", 0.65), get<double>(doc, "r_hi", 1.4));
  if (recipe == "bumps") {
    const int ambient = get<int>(doc, "ambient", 2), rank = get<int>(doc, "rank", 1);
    std::vector<Eigen::VectorXd> centers;
    std::vector<double> radii;
    std::vector<CMatrix> gens;
    for (const auto& b : require(doc, "bumps")) {
      const auto c = get<std::vector<double>>(b, "center", {});
      centers.push_back(Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size())));
      radii.push_back(get<double>(b, "radius", 1.0));
      CMatrix h = matrix_from_json(require(b, "generator"));
      if (h.rows() != ambient || h.cols() != ambient) throw InvalidSpec("bump generator has the wrong size");
      gens.push_back(0.5 * (h + h.adjoint()));
    }
    return bump_field(ambient, rank, std::move(centers), std::move(radii), std::move(gens));
  }
  if (recipe == "battery") {
    const int index = get<int>(doc, "index", 0);
    const auto seed = get<std::uint64_t>(doc, "seed", 20170131);
    const auto kind = get<std::string>(doc, "kind", "random");
    if (index < 0) throw InvalidSpec("battery index must be non-negative");
    auto recipes = kind == "surface" ? surface_battery(index + 1, seed) : random_battery(index + 1, seed);
    return recipes.back().field;
  }
  return std::nullopt;
}

}  // namespace

Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidSpec("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw InvalidSpec("'" + path + "' is not valid JSON: " + e.what());
  }
}

RunConfig config_from_json(const Json& doc) {
  if (!doc.is_object()) throw InvalidSpec("configuration must be an object");
  static const std::set<std::string> top{"tolerances", "seed", "vertex_budget", "out_dir"};
  for (const auto& [k, v] : doc.items())
    if (!top.count(k)) throw InvalidSpec("unknown configuration key '" + k + "'");
  RunConfig c;
  if (doc.contains("tolerances")) {
    const auto& t = doc.at("tolerances");
    auto& tol = c.tol;
    std::vector<std::pair<const char*, double*>> fields = {
        {"equality", &tol.equality},         {"continuity", &tol.continuity}, {"frame", &tol.frame},
        {"boundary", &tol.boundary},         {"vanishing", &tol.vanishing},   {"rank_relative", &tol.rank_relative},
        {"index_rounding", &tol.index_rounding}, {"in_range", &tol.in_range}, {"strict_tail", &tol.strict_tail}};
    for (const auto& [k, v] : t.items()) {
      auto it = std::find_if(fields.begin(), fields.end(), [&](const auto& f) { return k == f.first; });
      if (it == fields.end()) throw InvalidSpec("unknown tolerance '" + k + "'");
      if (!v.is_number()) throw InvalidSpec("tolerance '" + k + "' must be a number");
      *it->second = v.get<double>();
    }
    for (const auto& [name, ptr] : fields)
      if (!(*ptr > 0.0)) throw InvalidSpec(std::string("tolerance '") + name + "' must be positive");
  }
  c.seed = get<std::uint64_t>(doc, "seed", c.seed);
  c.vertex_budget = get<std::size_t>(doc, "vertex_budget", c.vertex_budget);
  c.out_dir = get<std::string>(doc, "out_dir", c.out_dir);
  return c;
}

RunConfig load_config(const std::string& path) { return config_from_json(read_json(path)); }

MeshSpec mesh_from_json(const Json& doc) {
  const auto family = get<std::string>(doc, "family", "");
  if (family == "interval") {
    IntervalSpec s;
    s.lo = get(doc, "lo", s.lo);
    s.hi = get(doc, "hi", s.hi);
    s.count = get(doc, "count", s.count);
    s.tail_lo = get(doc, "tail_lo", s.tail_lo);
    s.tail_hi = get(doc, "tail_hi", s.tail_hi);
    s.tail_ratio = get(doc, "tail_ratio", s.tail_ratio);
    return {s};
  }
  if (family == "plane") {
    PlaneSpec s;
    s.radius = get(doc, "radius", s.radius);
    s.step = get(doc, "step", s.step);
    s.tail_rings = get(doc, "tail_rings", s.tail_rings);
    s.tail_ratio = get(doc, "tail_ratio", s.tail_ratio);
    return {s};
  }
  if (family == "hopf-plane") return {hopf_plane_spec(get(doc, "level", 1))};
  if (family == "sphere") return {SphereSpec{get(doc, "level", 3)}};
  if (family == "annulus") {
    AnnulusSpec s;
    s.inner_radius = get(doc, "inner_radius", s.inner_radius);
    s.outer_radius = get(doc, "outer_radius", s.outer_radius);
    s.rings = get(doc, "rings", s.rings);
    s.sectors = get(doc, "sectors", s.sectors);
    return {s};
  }
  if (family == "union") {
    UnionSpec u;
    for (const auto& part : require(doc, "parts")) u.parts.push_back(mesh_from_json(part));
    return {u};
  }
  throw InvalidSpec("unknown space family '" + family + "'");
}

CompactificationKind compactification_kind_from_string(const std::string& s) {
  if (s == "one_point" || s == "one-point") return CompactificationKind::one_point;
  if (s == "endpoints") return CompactificationKind::endpoints;
  if (s == "radial") return CompactificationKind::radial;
  throw InvalidSpec("unknown compactification '" + s + "'");
}

CMatrix matrix_from_json(const Json& doc) {
  if (!doc.is_array() || doc.empty()) throw InvalidSpec("a matrix is a nonempty array of rows");
  const auto rows = static_cast<Eigen::Index>(doc.size());
  const auto cols = static_cast<Eigen::Index>(doc[0].size());
  CMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = doc[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) throw InvalidSpec("ragged matrix");
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = complex_from_json(row[static_cast<std::size_t>(j)]);
  }
  return m;
}

Json to_json(Complex z) { return Json::array({z.real(), z.imag()}); }

Json to_json(const CMatrix& m) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(to_json(m(i, j)));
    out.push_back(std::move(row));
  }
  return out;
}

ProjectionField field_from_json(const Json& doc, const SpacePtr& space) {
  const auto recipe = recipe_of(doc);
  if (recipe == "explicit") {
    const auto& mats = require(doc, "matrices");
    if (!mats.is_array() || mats.size() != space->size()) throw InvalidSpec("explicit field needs one matrix per vertex");
    std::vector<CMatrix> m;
    for (const auto& j : mats) m.push_back(matrix_from_json(j));
    const int n = static_cast<int>(m.front().rows());
    for (const auto& x : m)
      if (x.rows() != n || x.cols() != n) throw InvalidSpec("explicit field matrices differ in size");
    return {space, n, std::move(m)};
  }
  if (recipe == "direct-sum") {
    const auto& parts = require(doc, "parts");
    if (!parts.is_array() || parts.empty()) throw InvalidSpec("direct-sum needs parts");
    ProjectionField acc = field_from_json(parts[0], space);
    for (std::size_t i = 1; i < parts.size(); ++i) acc = direct_sum(acc, field_from_json(parts[i], space));
    return acc;
  }
  const auto f = field_function(doc);
  if (!f) throw InvalidSpec("unknown field recipe '" + recipe + "'");
  const auto n = space->size();
  ProjectionField p;
  p.space = space;
  p.matrices.resize(n);
  for (std::size_t v = 0; v < n; ++v) p.matrices[v] = (*f)(space->position(static_cast<Vertex>(v)));
  p.n = static_cast<int>(p.matrices.front().rows());
  return p;
}

Problem load_problem(const Json& doc) {
  if (!doc.is_object()) throw InvalidSpec("a problem document is an object");
  Problem pr;
  pr.doc = doc;
  const auto& space_doc = require(doc, "space");
  if (get<std::string>(space_doc, "family", "") == "point") pr.space = point_space();
  else pr.space = build_space(mesh_from_json(space_doc));
  if (doc.contains("compactification")) {
    const auto& c = doc.at("compactification");
    CompactificationOptions opts;
    std::string kind;
    if (c.is_string()) {
      kind = c.get<std::string>();
    } else {
      kind = get<std::string>(c, "kind", "");
      opts.sectors = get(c, "sectors", opts.sectors);
    }
    pr.compactification = attach_compactification(pr.space, compactification_kind_from_string(kind), opts);
  }
  if (doc.contains("field")) pr.field = field_from_json(doc.at("field"), pr.space);
  return pr;
}

Frame frame_from_json(const Json& doc, const Problem& problem) {
  const auto recipe = recipe_of(doc);
  const auto& space = problem.space;
  if (recipe == "unit") return unit_frame(space);
  if (recipe == "hopf-y") return hopf_y_frame(space);
  if (recipe == "hopf-w-column") return hopf_w_column_frame(space);
  if (recipe == "partition" || recipe == "canonical") {
    if (!problem.field) throw InvalidSpec("frame recipe '" + recipe + "' needs a field");
    Frame f;
    if (recipe == "partition") {
      const Json cover = doc.is_object() && doc.contains("cover") ? doc.at("cover") : Json::object();
      const int width = get(cover, "width", 1), sectors = get(cover, "sectors", 0), collar = get(cover, "collar", 4);
      const int max_colors = get(cover, "max_colors", 4);
      const Cover c = sectors > 0 ? sector_band_cover(space, width, sectors, collar) : band_cover(space, width, collar);
      const auto colored = color_cover(c, max_colors);
      f = frame_from_partition(*problem.field, colored, partition_of_unity(colored));
    } else {
      f = canonical_frame(module_from_projection(*problem.field));
      f.context = std::make_shared<ProjectionField>(*problem.field);
    }
    if (doc.is_object() && doc.contains("drop")) {
      const int drop = doc.at("drop").get<int>();
      if (drop < 0 || drop >= static_cast<int>(f.elements.size())) throw InvalidSpec("'drop' index out of range");
      f.elements.erase(f.elements.begin() + drop);
    }
    return f;
  }
  if (recipe == "explicit") {
    Frame f;
    const auto cls = class_from_string(get<std::string>(doc, "class", "bounded"));
    for (const auto& e : require(doc, "elements")) f.elements.push_back(section_from_json(e, space, cls));
    if (f.elements.empty()) throw InvalidSpec("explicit frame has no elements");
    for (const auto& e : f.elements)
      if (e.ambient != f.elements.front().ambient) throw InvalidSpec("frame elements differ in ambient dimension");
    f.finite = get(doc, "finite", true);
    if (problem.field) f.context = std::make_shared<ProjectionField>(*problem.field);
    return f;
  }
  throw InvalidSpec("unknown frame recipe '" + recipe + "'");
}

ModuleInstance module_from_json(const Json& doc, const Problem& problem) {
  const auto recipe = recipe_of(doc);
  if (recipe == "rank-drop") return rank_drop_module();
  if (recipe == "unbounded-rank") return unbounded_rank_module();
  if (recipe == "hopf") return hopf_module(get(doc, "level", 1));
  ModuleInstance mi;
  mi.space = problem.space;
  mi.compactification = problem.compactification;
  if (recipe == "from-field") {
    if (!problem.field) throw InvalidSpec("module recipe 'from-field' needs a field");
    mi.name = "from field";
    mi.module = module_from_projection(*problem.field);
    return mi;
  }
  if (recipe == "explicit") {
    std::vector<Section> gens;
    for (const auto& g : require(doc, "generators"))
      gens.push_back(section_from_json(g, problem.space, FunctionClass::vanishing));
    if (gens.empty()) throw InvalidSpec("explicit module has no generators");
    mi.name = "explicit";
    mi.module = GeneratedModule(problem.space, gens.front().ambient, std::move(gens));
    return mi;
  }
  throw InvalidSpec("unknown module recipe '" + recipe + "'");
}

VertexMap map_from_json(const Json& doc, const Problem& problem) {
  const auto recipe = recipe_of(doc);
  if (recipe == "identity") return identity_map(problem.space, problem.compactification);
  if (recipe == "annulus-double-cover") return annulus_double_cover(problem.space, problem.compactification);
  if (recipe == "sphere-rotation") return sphere_rotation(problem.space, get(doc, "angle", 0.3));
  if (recipe == "collapse") {
    if (problem.space->size() != 1) throw InvalidSpec("collapse maps onto a point space");
    const auto& src = require(doc, "source");
    return collapse_to_point(build_space(mesh_from_json(src)));
  }
  if (recipe == "explicit") {
    VertexMap m;
    m.source = build_space(mesh_from_json(require(doc, "source")));
    m.phi = get<std::vector<Vertex>>(doc, "phi", {});
    return m;
  }
  throw InvalidSpec("unknown map recipe '" + recipe + "'");
}

// ---------------------------------------------------------------------------
// reports

namespace {

void flatten(const Json& j, const std::string& prefix, std::ostringstream& out) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) flatten(v, prefix.empty() ? k : prefix + "." + k, out);
  } else if (j.is_array() && !j.empty() && (j[0].is_object())) {
    for (std::size_t i = 0; i < j.size(); ++i) flatten(j[i], prefix + "[" + std::to_string(i) + "]", out);
  } else {
    out << prefix << ": " << (j.is_string() ? j.get<std::string>() : j.dump()) << "\n";
  }
}

}  // namespace

std::string Report::text() const {
  std::ostringstream out;
  out << "== " << title << " ==\n";
  flatten(data, "", out);
  for (const auto& line : volatile_text) out << line << "\n";
  return out.str();
}

std::string Report::structured() const {
  Json doc = Json::object();
  doc["report"] = title;
  doc["data"] = data;
  return doc.dump(2) + "\n";
}

std::string csv(const DiscreteSpace& space, const std::vector<CsvRow>& rows) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "vertex_id,coord0,coord1,coord2,quantity,value\n";
  for (const auto& r : rows) {
    out << r.vertex;
    for (int d = 0; d < 3; ++d) {
      out << ",";
      if (d < space.coordinate_dim()) out << space.positions()(d, r.vertex);
    }
    out << "," << r.quantity << "," << r.value << "\n";
  }
  return out.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidSpec("cannot write '" + path + "'");
  out << contents;
}

Json to_json(const ChernResult& r) {
  return {{"value", r.value}, {"raw", r.raw}, {"mesh_triangles", r.mesh_triangles}, {"min_overlap", r.min_overlap}};
}

Json to_json(const NotExtendable& n) {
  Json j = {{"boundary_vertex", n.label}, {"oscillation", n.oscillation}};
  if (n.i >= 0) j["gram_entry"] = {n.i, n.j};
  else j["coordinate"] = {{"element", n.element}, {"index", n.coordinate}};
  j["message"] = n.describe();
  return j;
}

Json to_json(const ExtensionResult& r) {
  constexpr std::size_t kListed = 16;
  Json j;
  j["verdicts"] = {{"condition1", r.verdicts.projective_over_unitisation},
                   {"condition2", r.verdicts.multiplier_projective_implied ? "implied" : "not implied"},
                   {"condition3", r.verdicts.finitely_generated_over_multipliers},
                   {"condition4", r.verdicts.left_full}};
  j["snap_residual"] = r.snap_residual;
  j["fullness_defect"] = r.fullness_defect;
  const auto& c = *r.projection.compactification;
  j["boundary_vertices"] = c.boundary_count();
  if (c.boundary_count() <= kListed) {
    Json b = Json::array();
    for (std::size_t i = 0; i < c.boundary_count(); ++i)
      b.push_back({{"label", c.labels[i]}, {"rank", r.boundary_rank[i]}, {"value", to_json(r.projection.boundary[i])}});
    j["boundary"] = std::move(b);
  }
  j["adjoined_values"] = r.unitisation_report.size();
  if (r.unitisation_report.size() <= kListed) {
    Json a = Json::array();
    for (const auto& v : r.unitisation_report)
      a.push_back({{"entry", {v.i, v.j}}, {"boundary_vertex", c.labels[v.boundary]}, {"value", to_json(v.value)}});
    j["unitisation"] = std::move(a);
  }
  return j;
}

Json to_json(const EquivalenceReport& r) {
  Json j = {{"condition1", r.condition1},
            {"condition2", r.condition2_implied ? "implied" : "not implied"},
            {"condition3", r.condition3},
            {"condition4", r.condition4},
            {"condition5", r.condition5},
            {"rank_growth", r.rank_growth},
            {"frame_size", r.frame_size},
            {"fullness_defect", r.fullness_defect}};
  if (r.rank_jump)
    j["rank_jump"] = {{"edge", {r.rank_jump->a, r.rank_jump->b}}, {"ranks", {r.rank_jump->rank_a, r.rank_jump->rank_b}}};
  if (r.divergence) j["divergence"] = to_json(*r.divergence);
  if (!r.failure.empty()) j["failure"] = r.failure;
  return j;
}

Json to_json(const IndexFunction& f) {
  std::map<int, int> histogram;
  for (int v : f.values) ++histogram[v];
  Json h = Json::object();
  for (auto [value, count] : histogram) h[std::to_string(value)] = count;
  return {{"sup", f.sup}, {"bounded", f.bounded}, {"continuous", f.continuous}, {"histogram", h}};
}

Json to_json(const Cor58Report& r) {
  Json j = {{"rank_continuous_bounded", r.rank_continuous_bounded},
            {"bundle_form", r.bundle_form},
            {"finite_index", r.finite_index}};
  if (!r.detail.empty()) j["detail"] = r.detail;
  return j;
}

Json to_json(const HopfDemoReport& r) {
  Json j;
  j["level"] = r.level;
  j["vertices"] = r.vertices;
  j["closed_triangles"] = r.closed_triangles;
  j["trivial"] = {{"chern", to_json(r.trivial_chern)}, {"boundary_value", to_json(r.trivial_boundary)}};
  Json adjoined = Json::array();
  for (const auto& v : r.hopf_unitisation) adjoined.push_back({{"entry", {v.i, v.j}}, {"value", to_json(v.value)}});
  j["hopf"] = {{"chern", to_json(r.hopf_chern)},
               {"boundary_value", to_json(r.hopf_boundary)},
               {"adjoined", adjoined},
               {"formula_error", r.formula_error},
               {"p_at_0_error", r.p_at_zero_error},
               {"p_at_1_error", r.p_at_one_error}};
  j["w"] = {{"ww_star_error", r.ww_error}, {"w_star_w_error", r.wstarw_error}, {"extends", r.w_extends}};
  if (r.w_witness) j["w"]["witness"] = to_json(*r.w_witness);
  return j;
}

}  // namespace ncb::io
