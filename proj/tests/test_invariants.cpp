#include <doctest.h>

#include <cmath>
#include <numbers>

#include "ncbundle/battery.hpp"
#include "ncbundle/hopf.hpp"
#include "ncbundle/io.hpp"

using namespace ncb;

namespace {

ProjectionField closed(const Bundle& b) {
  if (!b.compactification) return b.p;
  auto out = extend_field(b.p, b.compactification);
  REQUIRE(std::holds_alternative<ProjectionField>(out));
  return std::get<ProjectionField>(std::move(out));
}

// eigenvector of (1/2)[[1 - x3, x + iy], [x - iy, 1 + x3]] for eigenvalue 1, in whichever gauge is regular
Eigen::Vector2cd spinor(const Eigen::Vector3d& x) {
  Eigen::Vector2cd north(Complex(x(0), x(1)), 1.0 + x(2));
  Eigen::Vector2cd south(1.0 - x(2), Complex(x(0), -x(1)));
  return north.norm() > south.norm() ? north.normalized() : south.normalized();
}

double solid_angle(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c) {
  const double num = std::abs(a.dot(b.cross(c)));
  const double den = 1.0 + a.dot(b) + b.dot(c) + c.dot(a);
  return 2.0 * std::atan2(num, den);
}

}  // namespace

TEST_SUITE("invariants") {

TEST_CASE("icosphere oracle: explicit spinors on 80 triangles") {
  const auto s = build_space({SphereSpec{1}});
  REQUIRE(s->triangles().size() == 80);
  double total = 0.0;
  for (const auto& t : s->triangles()) {
    const Eigen::Vector3d a = s->position(t[0]), b = s->position(t[1]), c = s->position(t[2]);
    CHECK((b - a).cross(c - a).dot(a + b + c) > 0.0);  // outward, counterclockwise
    const auto pa = spinor(a), pb = spinor(b), pc = spinor(c);
    const double phase = std::arg(pa.dot(pb) * pb.dot(pc) * pc.dot(pa));
    // Pancharatnam phase of a geodesic triangle is half its solid angle
    CHECK(std::abs(std::abs(phase) - 0.5 * solid_angle(a, b, c)) <= 1e-9);
    total += phase;
  }
  const double oracle = total / (2.0 * std::numbers::pi);
  CHECK(std::abs(oracle - std::round(oracle)) <= 1e-9);
  const auto lib = chern_number(hopf_field(s));
  CHECK(lib.value == static_cast<int>(std::lround(oracle)));
  CHECK(lib.value == 1);
  CHECK(lib.mesh_triangles == 80);
}

TEST_CASE("chern numbers on the sphere") {
  const auto s = build_space({SphereSpec{4}});
  REQUIRE(s->triangles().size() >= 2000);
  const auto trivial = chern_number(constant_field(s, CMatrix::Identity(1, 1)));
  CHECK(trivial.value == 0);
  const auto hopf = chern_number(hopf_field(s));
  CHECK(hopf.value == 1);
  CHECK(std::abs(hopf.raw - hopf.value) < 0.5);
  CHECK(std::abs(hopf.raw - 1.0) <= 1e-9);
  const auto sum = chern_number(direct_sum(hopf_field(s), constant_field(s, CMatrix::Identity(1, 1))));
  CHECK(sum.value == 1);
}

TEST_CASE("chern number is additive on surface battery instances") {
  const auto recipes = surface_battery(12, 3);
  for (std::size_t i = 0; i + 1 < recipes.size(); ++i) {
    const auto b = realize(recipes[i]);
    const auto p = closed(b);
    // partner field on the same mesh and compactification: a fixed rank-one projection
    CMatrix line = CMatrix::Constant(2, 2, Complex(0.5, 0.0));
    ProjectionField flat(b.space, 2, std::vector<CMatrix>(b.space->size(), line));
    const auto q = b.compactification ? std::get<ProjectionField>(extend_field(flat, b.compactification)) : flat;
    const auto cp = chern_number(p).value, cq = chern_number(q).value;
    CHECK(chern_number(direct_sum(p, q)).value == cp + cq);
    CHECK(chern_number(direct_sum(p, p)).value == 2 * cp);
  }
}

TEST_CASE("chern number is stable under refinement") {
  for (const auto& r : surface_battery(12, 4)) {
    const auto c1 = chern_number(closed(realize(r)));
    const auto c2 = chern_number(closed(realize(refine(r))));
    CHECK(c1.value == c2.value);
    CHECK(std::abs(c1.raw - c1.value) < 1e-6);
  }
}

TEST_CASE("pushforward along degree one and degree two maps") {
  const auto s = build_space({SphereSpec{3}});
  const auto p = hopf_field(s);
  const auto rot = sphere_rotation(s, 0.4);
  CHECK(chern_number(pushforward(p, rot.source, rot.phi)).value == 1);

  const auto annulus = build_space({AnnulusSpec{0.5, 2.0, 17, 32}});
  const auto ac = attach_compactification(annulus, CompactificationKind::endpoints);
  std::vector<CMatrix> ms;
  const auto f = twisted_hopf_field(1, 0.65, 1.4);
  for (std::size_t v = 0; v < annulus->size(); ++v) ms.push_back(f(annulus->position(static_cast<Vertex>(v))));
  auto ext = extend_field(ProjectionField(annulus, 2, ms), ac);
  REQUIRE(std::holds_alternative<ProjectionField>(ext));
  const auto& q = std::get<ProjectionField>(ext);
  CHECK(chern_number(q).value == 1);
  const auto dc = annulus_double_cover(annulus, ac);
  CHECK(chern_number(pushforward(q, dc.source, dc.phi, dc.source_compactification, dc.boundary_map)).value == 2);
}

TEST_CASE("chern preconditions") {
  const auto plane = build_space({PlaneSpec{2, 0.5, 3, 2.0}});
  CHECK_THROWS_AS(chern_number(constant_field(plane, CMatrix::Identity(1, 1))), NotClosedSurface);

  SurfaceMesh open{3, {{0, 1, 2}}};
  CHECK_THROWS_AS(check_closed_oriented(open), NotClosedSurface);

  const auto s = build_space({SphereSpec{1}});
  std::vector<CMatrix> ms(s->size(), CMatrix::Identity(1, 1));
  ms[0].setZero();
  CHECK_THROWS_AS(chern_number(ProjectionField(s, 1, ms)), RankNotConstant);
}

TEST_CASE("hopf demonstration") {
  const auto d = hopf_demo(3);
  CHECK(d.closed_triangles >= 2000);
  CHECK(d.trivial_chern.value == 0);
  CHECK(d.hopf_chern.value == 1);
  CHECK(d.formula_error <= 1e-9);
  CHECK(d.p_at_zero_error <= 1e-12);
  CHECK(d.p_at_one_error <= 1e-12);
  CHECK(d.ww_error <= 1e-12);
  CHECK(d.wstarw_error <= 1e-12);
  CHECK_FALSE(d.w_extends);
  REQUIRE(d.w_witness.has_value());
  CHECK(d.w_witness->oscillation >= 1.0);
  CHECK(std::abs(d.trivial_boundary(0, 0) - 1.0) <= 1e-9);
  CHECK(std::abs(d.hopf_boundary(1, 1) - 1.0) <= 1e-6);
  CHECK(std::abs(d.hopf_boundary(0, 0)) <= 1e-6);
  CHECK_THROWS_AS(hopf_demo(0), InvalidSpec);
}

TEST_CASE("hopf projection at 0 and 1") {
  CMatrix at0 = CMatrix::Zero(2, 2);
  at0(0, 0) = 1.0;
  CHECK((hopf_projection(Complex(0.0)) - at0).norm() == 0.0);
  CHECK((hopf_projection(Complex(1.0)) - CMatrix::Constant(2, 2, 0.5)).norm() <= 1e-16);
  const CMatrix w = hopf_w(Complex(0.3, -1.2));
  CHECK((w * w.adjoint() - hopf_projection(Complex(0.3, -1.2))).norm() <= 1e-15);
}

TEST_CASE("configuration documents") {
  using io::Json;
  const auto def = io::config_from_json(Json::object());
  CHECK(def.tol.frame == 1e-9);
  CHECK(def.seed == 20170131);
  const auto c = io::config_from_json(Json::parse(R"({"tolerances": {"frame": 1e-8}, "seed": 5})"));
  CHECK(c.tol.frame == 1e-8);
  CHECK(c.seed == 5);
  CHECK_THROWS_AS(io::config_from_json(Json::parse(R"({"tolerances": {"frame": 0}})")), InvalidSpec);
  CHECK_THROWS_AS(io::config_from_json(Json::parse(R"({"tolerances": {"frame": -1e-3}})")), InvalidSpec);
  CHECK_THROWS_AS(io::config_from_json(Json::parse(R"({"tolerance": {}})")), InvalidSpec);
  CHECK_THROWS_AS(io::config_from_json(Json::parse(R"({"tolerances": {"frmae": 1}})")), InvalidSpec);
}

TEST_CASE("problem documents") {
  using io::Json;
  const auto pr = io::load_problem(Json::parse(R"({
    "space": {"family": "plane", "radius": 2, "step": 0.5, "tail_rings": 3},
    "compactification": "one_point",
    "field": {"recipe": "hopf"}})"));
  CHECK(pr.space->size() == 1 + 6 + 12 + 18 + 24 + 3 * 24);
  REQUIRE(pr.compactification);
  REQUIRE(pr.field);
  CHECK(pr.field->n == 2);

  CHECK_THROWS_AS(io::load_problem(Json::parse(R"({"space": {"family": "torus"}})")), InvalidSpec);
  CHECK_THROWS_AS(io::load_problem(Json::parse(R"({"space": {"family": "plane", "step": -1}})")), InvalidSpec);
  CHECK_THROWS_AS(io::load_problem(Json::parse(R"({"space": {"family": "sphere"}, "compactification": "one_point"})")),
                  UnsupportedKind);

  const auto m = io::matrix_from_json(Json::parse("[[1, [0, 2]], [[0, -2], 3]]"));
  CHECK(m(0, 1) == Complex(0, 2));
  CHECK(io::to_json(m) == Json::parse("[[[1.0, 0.0], [0.0, 2.0]], [[0.0, -2.0], [3.0, 0.0]]]"));
  CHECK_THROWS_AS(io::matrix_from_json(Json::parse("[[1, 2], [3]]")), InvalidSpec);
}

TEST_CASE("csv export") {
  const auto s = build_space({SphereSpec{0}});
  const auto text = io::csv(*s, {{0, "rank", 1.0}, {1, "rank", 2.0}});
  CHECK(text.rfind("vertex_id,coord0,coord1,coord2,quantity,value\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 3);
}

}  // TEST_SUITE
