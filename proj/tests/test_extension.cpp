#include <doctest.h>

#include <cmath>
#include <random>

#include "ncbundle/battery.hpp"
#include "ncbundle/hopf.hpp"

using namespace ncb;

namespace {

struct HopfSetup {
  SpacePtr space = build_space({hopf_plane_spec(1)});
  CompactificationPtr c = attach_compactification(space, CompactificationKind::one_point);
};

const HopfSetup& hopf() {
  static const HopfSetup h;
  return h;
}

Frame orthonormal_frame(const SpacePtr& s, int n) {
  Frame f;
  for (int i = 0; i < n; ++i) {
    CMatrix vals = CMatrix::Zero(n, static_cast<Eigen::Index>(s->size()));
    vals.row(i).setOnes();
    f.elements.emplace_back(s, vals);
  }
  return f;
}

int rank_at(const CMatrix& m) { return static_cast<int>(std::lround(m.trace().real())); }

}  // namespace

TEST_SUITE("extension") {

TEST_CASE("unit frame extends trivially") {
  const auto out = extend_projection(unit_frame(hopf().space), hopf().c);
  REQUIRE(std::holds_alternative<ExtensionResult>(out));
  const auto& r = std::get<ExtensionResult>(out);
  REQUIRE(r.projection.boundary.size() == 1);
  CHECK(std::abs(r.projection.boundary[0](0, 0) - 1.0) <= 1e-9);
  CHECK(r.verdicts.projective_over_unitisation);
  CHECK(r.verdicts.finitely_generated_over_multipliers);
  CHECK(r.verdicts.left_full);
  CHECK(r.verdicts.multiplier_projective_implied);
}

TEST_CASE("hopf frame extends with boundary value diag(0, 1)") {
  const auto y = hopf_y_frame(hopf().space);
  const auto out = extend_projection(y, hopf().c);
  REQUIRE(std::holds_alternative<ExtensionResult>(out));
  const auto& r = std::get<ExtensionResult>(out);
  CMatrix expected = CMatrix::Zero(2, 2);
  expected(1, 1) = 1.0;
  CHECK((r.projection.boundary[0] - expected).norm() <= 1e-6);
  // only (y2|y2) has a nonzero limit
  REQUIRE(r.unitisation_report.size() == 1);
  CHECK(r.unitisation_report[0].i == 1);
  CHECK(r.unitisation_report[0].j == 1);
  // interior agrees with stabilize
  const auto st = stabilize(y);
  for (std::size_t v = 0; v < st.p_out.matrices.size(); ++v)
    CHECK((r.projection.matrices[v] - st.p_out.matrices[v]).norm() <= 1e-12);
  // boundary value is a projection too
  const auto& b = r.projection.boundary[0];
  CHECK((b * b - b).norm() <= 1e-12);
  CHECK((b.adjoint() - b).norm() <= 1e-12);
}

TEST_CASE("w column does not extend") {
  const auto out = extend_projection(hopf_w_column_frame(hopf().space), hopf().c);
  REQUIRE(std::holds_alternative<NotExtendable>(out));
  const auto& w = std::get<NotExtendable>(out);
  CHECK(w.oscillation >= 1.0);
  CHECK(w.label == "infinity");
}

TEST_CASE("left fullness defect") {
  const auto s = build_space({PlaneSpec{3, 0.5, 6, 2.0}});
  CHECK(left_fullness_defect(constant_field(s, CMatrix::Identity(2, 2)), orthonormal_frame(s, 2)) == 0.0);

  for (const auto& r : random_battery(10, 3)) {
    const auto b = realize(r);
    const auto f = frame_from_partition(b.p, b.cover, b.pou);
    CHECK(left_fullness_defect(b.p, f) <= 1e-9);
  }

  BundleRecipe r;
  r.name = "rank two";
  r.mesh = {PlaneSpec{3, 0.5, 6, 2.0}};
  r.ambient = 3;
  r.rank = 2;
  r.field = bump_field(3, 2, {Eigen::Vector2d(0.5, 0.0)}, {1.5}, {CMatrix::Constant(3, 3, Complex(0.3, 0.0))});
  const auto b = realize(r);
  auto f = frame_from_partition(b.p, b.cover, b.pou);
  f.elements.pop_back();
  // oracle: the missing F_{i,j} carries weight sum_U h_U which reaches 1 inside some set
  CHECK(left_fullness_defect(b.p, f) >= 0.5);
}

TEST_CASE("equivalence verdicts on designed instances") {
  const auto h = hopf_module(1);
  const auto rh = equivalence_report(h.module, h.compactification);
  CHECK(rh.condition1);
  CHECK(rh.condition3);
  CHECK(rh.condition4);
  CHECK(rh.condition5);
  CHECK(rh.condition2_implied);

  for (const auto& mi : {rank_drop_module(), unbounded_rank_module()}) {
    const auto r = equivalence_report(mi.module, mi.compactification);
    CHECK_FALSE(r.condition1);
    CHECK_FALSE(r.condition3);
    CHECK_FALSE(r.condition4);
    CHECK_FALSE(r.condition5);
    CHECK(r.all_equal());
  }
  const auto rd = rank_drop_module(), ur = unbounded_rank_module();
  CHECK(equivalence_report(rd.module, rd.compactification).rank_jump.has_value());
  CHECK(equivalence_report(ur.module, ur.compactification).rank_growth);
}

TEST_CASE("external tensor") {
  const auto s = build_space({PlaneSpec{2, 0.5, 0, 2.0}});
  const auto one = constant_field(s, CMatrix::Identity(1, 1));
  const auto t = external_tensor(one, one);
  CHECK(t.space->size() == s->size() * s->size());
  for (const auto& m : t.matrices) CHECK(std::abs(m(0, 0) - 1.0) <= 1e-15);

  const auto sphere = build_space({SphereSpec{2}});
  const auto line = build_space({IntervalSpec{0, 1, 4}});
  const auto hp = hopf_field(sphere);
  const auto ht = external_tensor(hp, constant_field(line, CMatrix::Identity(1, 1)));
  for (Vertex y = 0; y < 4; ++y) CHECK(chern_number(slice_second(ht, y)).value == 1);

  // rank multiplies
  const auto q = realize(random_battery(1, 4).front());
  const auto small = build_space({IntervalSpec{0, 2, 3}});
  CMatrix p2 = CMatrix::Zero(3, 3);
  p2(0, 0) = p2(2, 2) = 1.0;
  const auto pq = external_tensor(constant_field(small, p2), q.p);
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<Vertex> pick_x(0, 2), pick_y(0, static_cast<Vertex>(q.space->size()) - 1);
  for (int k = 0; k < 30; ++k) {
    const Vertex x = pick_x(rng), y = pick_y(rng);
    CHECK(numerical_rank(pq.matrices[product_vertex(*pq.space, x, y)], 1e-8) == 2 * rank_at(q.p.matrices[y]));
  }

  CHECK_THROWS_AS(external_tensor(hp, hp, 1000), ProductTooLarge);
}

TEST_CASE("pushforward examples") {
  const auto annulus = build_space({AnnulusSpec{0.5, 2.0, 9, 16}});
  const auto ac = attach_compactification(annulus, CompactificationKind::endpoints);

  const auto p = realize(random_battery(2, 5)[1]).p;
  const auto id = identity_map(p.space);
  const auto same = pushforward(p, id.source, id.phi);
  for (std::size_t v = 0; v < p.matrices.size(); ++v) CHECK((same.matrices[v] - p.matrices[v]).norm() == 0.0);

  auto trivial = extend_field(constant_field(annulus, CMatrix::Identity(1, 1)), ac);
  REQUIRE(std::holds_alternative<ProjectionField>(trivial));
  const auto cover2 = annulus_double_cover(annulus, ac);
  const auto up = pushforward(std::get<ProjectionField>(trivial), cover2.source, cover2.phi,
                              cover2.source_compactification, cover2.boundary_map);
  CHECK(chern_number(up).value == 0);

  const auto pt = point_space();
  CMatrix m(2, 2);
  m << 0.5, 0.5, 0.5, 0.5;
  const auto collapse = collapse_to_point(build_space({SphereSpec{1}}));
  const auto flat = pushforward(constant_field(pt, m), collapse.source, collapse.phi);
  for (const auto& x : flat.matrices) CHECK((x - m).norm() == 0.0);
  const auto open = collapse_to_point(annulus);
  CHECK_THROWS_AS(pushforward(constant_field(pt, m), open.source, open.phi), NotProper);
}

TEST_CASE("pushforward rejects improper maps") {
  const auto line = build_space({IntervalSpec{-4, 4, 9, 4, 4, 2.0}});
  const auto p = constant_field(line, CMatrix::Identity(1, 1));
  // a map from an open line that stays inside a compact set
  std::vector<Vertex> phi(line->size(), line->exhaustion().front().front());
  CHECK_THROWS_AS(pushforward(p, line, phi), NotProper);
  // a compact target from a non-compact source
  const auto sphere_field = constant_field(build_space({SphereSpec{1}}), CMatrix::Identity(1, 1));
  CHECK_THROWS_AS(pushforward(sphere_field, line, std::vector<Vertex>(line->size(), 0)), NotProper);
}

TEST_CASE("external tensor commutes with pushforward along product maps") {
  const auto sphere = build_space({SphereSpec{2}});
  const auto line = build_space({IntervalSpec{-1, 1, 3}});
  const auto p = hopf_field(sphere);
  std::vector<CMatrix> qs;
  for (Vertex y = 0; y < 3; ++y) {
    const double a = 0.3 * y;
    Eigen::Vector2cd u(std::cos(a), std::sin(a));
    qs.push_back(u * u.adjoint());
  }
  const ProjectionField q(line, 2, qs);
  const auto rot = sphere_rotation(sphere, 0.7);
  const std::vector<Vertex> rev = {2, 1, 0};  // reflection x -> -x

  const auto t = external_tensor(p, q);
  std::vector<Vertex> phi(t.space->size());
  for (Vertex x = 0; x < static_cast<Vertex>(sphere->size()); ++x)
    for (Vertex y = 0; y < 3; ++y) phi[product_vertex(*t.space, x, y)] = product_vertex(*t.space, rot.phi[x], rev[y]);
  const auto lhs = pushforward(t, t.space, phi);
  const auto rhs = external_tensor(pushforward(p, sphere, rot.phi), pushforward(q, line, rev));
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<std::size_t> pick(0, t.space->size() - 1);
  for (int k = 0; k < 50; ++k) {
    const auto v = pick(rng);
    CHECK((lhs.matrices[v] - rhs.matrices[v]).norm() <= 1e-12);
  }
}

TEST_CASE("suspension") {
  const auto line = build_space({IntervalSpec{-4, 4, 9, 5, 5, 2.0}});

  const auto pt = point_space();
  Frame one;
  one.elements.emplace_back(pt, CMatrix::Ones(1, 1));
  const auto sp = suspend(constant_field(pt, CMatrix::Identity(1, 1)), one, line);
  CHECK(sp.space->size() == line->size());
  for (const auto& m : sp.projection.matrices) CHECK(std::abs(m(0, 0) - 1.0) == 0.0);
  CHECK(sp.frame_defect == 0.0);

  const auto y = hopf_y_frame(hopf().space);
  const auto st = stabilize(y);
  Frame lifted;
  for (const auto& e : y.elements) lifted.elements.push_back(st.apply(e));
  const auto s = suspend(st.p_out, lifted, line, hopf().c);
  CHECK(s.frame_defect <= 1e-9);
  REQUIRE(s.extension.has_value());
  REQUIRE(std::holds_alternative<ExtensionResult>(*s.extension));
  CHECK(std::get<ExtensionResult>(*s.extension).verdicts.projective_over_unitisation);

  for (Vertex t : {Vertex{0}, Vertex{7}, static_cast<Vertex>(line->size()) - 1}) {
    const auto slice = slice_first(s.projection, t);
    for (std::size_t v = 0; v < slice.matrices.size(); ++v) CHECK(slice.matrices[v] == st.p_out.matrices[v]);
  }
}

TEST_CASE("direct sum is block diagonal") {
  const auto s = build_space({SphereSpec{1}});
  const auto p = hopf_field(s);
  const auto q = constant_field(s, CMatrix::Identity(1, 1));
  const auto d = direct_sum(p, q);
  CHECK(d.n == 3);
  for (std::size_t v = 0; v < d.matrices.size(); ++v) {
    CHECK(d.matrices[v].topLeftCorner(2, 2) == p.matrices[v]);
    CHECK(d.matrices[v](2, 2) == Complex(1.0));
    CHECK(d.matrices[v].topRightCorner(2, 1).norm() == 0.0);
  }
}

}  // TEST_SUITE
