#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "ncbundle/function_algebra.hpp"

using namespace ncb;

namespace {

SpacePtr interval(double lo, double hi, int count, int tail_lo = 0, int tail_hi = 0) {
  return build_space({IntervalSpec{lo, hi, count, tail_lo, tail_hi, 2.0}});
}

SpacePtr plane(double radius, double step, int tail = 0) { return build_space({PlaneSpec{radius, step, tail, 2.0}}); }

std::vector<Complex> sample(const DiscreteSpace& s, Complex (*f)(Complex)) {
  std::vector<Complex> out(s.size());
  for (Vertex v = 0; v < static_cast<Vertex>(s.size()); ++v) out[v] = f(s.complex_coordinate(v));
  return out;
}

bool same_colour_disjoint(const ColoredCover& cc) {
  const auto& sets = cc.cover.sets;
  for (std::size_t a = 0; a < sets.size(); ++a)
    for (std::size_t b = a + 1; b < sets.size(); ++b) {
      if (cc.color[a] != cc.color[b]) continue;
      std::set<Vertex> sa(sets[a].begin(), sets[a].end());
      for (Vertex v : sets[b])
        if (sa.count(v)) return false;
    }
  return true;
}

}  // namespace

TEST_SUITE("base_space") {

TEST_CASE("interval of 11 vertices is a path with exhaustion [0,k]") {
  const auto s = interval(0, 10, 11);
  CHECK(s->size() == 11);
  CHECK(s->edges().size() == 10);
  for (const auto& e : s->edges()) CHECK(std::abs(e.b - e.a) == 1);
  REQUIRE(s->exhaustion().size() == 11);
  for (int k = 0; k <= 10; ++k) {
    auto set = s->exhaustion()[k];
    std::sort(set.begin(), set.end());
    CHECK(set.size() == static_cast<std::size_t>(k + 1));
    CHECK(set.back() == k);
    CHECK(s->positions()(0, set.back()) == doctest::Approx(k));
  }
}

TEST_CASE("plane disk vertex count") {
  // centre plus 6k vertices on ring k = 1..10
  const auto s = plane(5.0, 0.5);
  int expected = 1;
  for (int k = 1; k <= 10; ++k) expected += 6 * k;
  CHECK(s->size() == static_cast<std::size_t>(expected));
  CHECK(s->family() == SpaceFamily::plane);
}

TEST_CASE("sphere level 3 has 1280 triangles") {
  const auto s = build_space({SphereSpec{3}});
  CHECK(s->triangles().size() == 1280);
  CHECK(s->size() == 642);
  CHECK(s->is_compact());
  for (Vertex v = 0; v < static_cast<Vertex>(s->size()); ++v) CHECK(s->position(v).norm() == doctest::Approx(1.0));
}

TEST_CASE("exhaustion is nested and covers the space") {
  for (const auto& s : {interval(-3, 3, 13, 4, 4), plane(3, 0.5, 5), build_space({AnnulusSpec{}})}) {
    const auto& ex = s->exhaustion();
    for (std::size_t k = 1; k < ex.size(); ++k)
      CHECK(std::includes(ex[k].begin(), ex[k].end(), ex[k - 1].begin(), ex[k - 1].end()));
    CHECK(ex.back().size() == s->size());
    for (const auto& e : s->edges()) {
      CHECK(e.a != e.b);
      CHECK(e.length > 0);
    }
  }
}

TEST_CASE("invalid mesh descriptions") {
  CHECK_THROWS_AS(plane(5, 0.0), InvalidSpec);
  CHECK_THROWS_AS(plane(-1, 0.5), InvalidSpec);
  CHECK_THROWS_AS(interval(0, 1, 0), InvalidSpec);
  CHECK_THROWS_AS(build_space({AnnulusSpec{0.5, 2.0, 1, 16}}), InvalidSpec);
  CHECK_THROWS_AS(build_space({UnionSpec{}}), InvalidSpec);
}

TEST_CASE("compactification kinds") {
  const auto half_line = interval(0, 4, 5, 0, 6);
  const auto one = attach_compactification(half_line, CompactificationKind::one_point);
  CHECK(one->boundary_count() == 1);

  const auto line = interval(-4, 4, 9, 5, 5);
  CHECK(attach_compactification(line, CompactificationKind::endpoints)->boundary_count() == 2);

  const auto p = plane(3, 0.5, 6);
  const auto sphere_model = attach_compactification(p, CompactificationKind::one_point);
  CHECK(sphere_model->boundary_count() == 1);
  CHECK_FALSE(sphere_model->closure_triangles.empty());

  CompactificationOptions opts;
  opts.sectors = 8;
  CHECK(attach_compactification(p, CompactificationKind::radial, opts)->boundary_count() == 8);

  CHECK_THROWS_AS(attach_compactification(p, CompactificationKind::endpoints), UnsupportedKind);
  CHECK_THROWS_AS(attach_compactification(line, CompactificationKind::radial), UnsupportedKind);
  CHECK_THROWS_AS(attach_compactification(build_space({SphereSpec{1}}), CompactificationKind::one_point),
                  UnsupportedKind);
}

TEST_CASE("shells eventually leave every proper exhaustion set") {
  const auto p = plane(3, 0.5, 6);
  CompactificationOptions opts;
  opts.sectors = 5;
  for (auto kind : {CompactificationKind::one_point, CompactificationKind::radial}) {
    const auto c = attach_compactification(p, kind, opts);
    for (const auto& seq : c->shells) {
      const auto& last = seq.back();
      for (int k = 0; k < p->max_level(); ++k) {
        const auto& ek = p->exhaustion()[k];
        for (Vertex v : last) CHECK_FALSE(std::binary_search(ek.begin(), ek.end(), v));
      }
      for (std::size_t k = 1; k < seq.size(); ++k)
        CHECK(std::includes(seq[k - 1].begin(), seq[k - 1].end(), seq[k].begin(), seq[k].end()));
    }
    CHECK_NOTHROW(c->validate());
  }
}

TEST_CASE("colouring: disjoint sets get one colour") {
  const auto s = interval(0, 9, 10);
  Cover c{s, {{0, 1, 2}, {3, 4}, {5, 6, 7}, {8, 9}}};
  const auto cc = color_cover(c, 4);
  CHECK(cc.color_count() == 1);
  for (int col : cc.color) CHECK(col == 0);
}

TEST_CASE("colouring: consecutive overlapping pairs need two colours") {
  const auto s = interval(0, 9, 10);
  Cover c{s, {}};
  for (Vertex v = 0; v + 1 < 10; ++v) c.sets.push_back({v, v + 1});
  // brute force: the intersection graph is a path, so exactly sets i and i+1 meet
  for (std::size_t a = 0; a < c.sets.size(); ++a)
    for (std::size_t b = a + 1; b < c.sets.size(); ++b) {
      const bool meet = c.sets[a][1] == c.sets[b][0] || c.sets[a][0] == c.sets[b][1];
      CHECK(meet == (b == a + 1));
    }
  const auto cc = color_cover(c, 4);
  CHECK(cc.color_count() == 2);
  CHECK(same_colour_disjoint(cc));
}

TEST_CASE("colouring: a 5-clique exceeds 3 colours") {
  const auto s = interval(0, 4, 5);
  Cover c{s, {{0, 1}, {0, 2}, {0, 3}, {0, 4}, {0}}};
  CHECK_THROWS_AS(color_cover(c, 3), DimensionExceeded);
  CHECK(color_cover(c, 5).color_count() == 5);
}

TEST_CASE("colouring of generated covers keeps same-coloured sets disjoint") {
  const auto p = plane(4, 0.5, 6);
  for (int sectors : {0, 2, 3}) {
    for (int width : {1, 2}) {
      const auto cover = sectors ? sector_band_cover(p, width, sectors) : band_cover(p, width);
      const auto cc = color_cover(cover, 4);
      CHECK(same_colour_disjoint(cc));
      CHECK(cc.color_count() <= 4);
    }
  }
}

TEST_CASE("partition of unity: single set") {
  const auto s = interval(0, 9, 10);
  const auto pou = partition_of_unity(color_cover(Cover{s, {{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}}}, 1));
  REQUIRE(pou.functions.size() == 1);
  CHECK((pou.functions[0].array() - 1.0).abs().maxCoeff() == 0.0);
}

TEST_CASE("partition of unity: two half-overlapping intervals meet at 1/2") {
  const auto s = interval(0, 10, 11);
  const auto pou = partition_of_unity(color_cover(Cover{s, {{0, 1, 2, 3, 4, 5, 6, 7}, {3, 4, 5, 6, 7, 8, 9, 10}}}, 2));
  CHECK(pou.functions[0][5] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(pou.functions[1][5] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(pou.functions[0][0] == doctest::Approx(1.0));
  CHECK(pou.functions[1][10] == doctest::Approx(1.0));
}

TEST_CASE("partition of unity: three sets on 100 vertices sum to one and respect supports") {
  const auto s = interval(0, 99, 100);
  Cover c{s, {{}, {}, {}}};
  for (Vertex v = 0; v < 100; ++v) {
    if (v < 40) c.sets[0].push_back(v);
    if (v >= 30 && v < 70) c.sets[1].push_back(v);
    if (v >= 60) c.sets[2].push_back(v);
  }
  const auto pou = partition_of_unity(color_cover(c, 3));
  for (Vertex v = 0; v < 100; ++v) {
    double sum = 0;
    for (const auto& h : pou.functions) sum += h[v];
    CHECK(std::abs(sum - 1.0) <= 1e-12);
  }
  for (std::size_t k = 0; k < 3; ++k)
    for (Vertex v = 0; v < 100; ++v) {
      const bool in = std::find(c.sets[k].begin(), c.sets[k].end(), v) != c.sets[k].end();
      if (!in) CHECK(pou.functions[k][v] == 0.0);
      CHECK(pou.functions[k][v] >= 0.0);
    }
}

TEST_CASE("partition of unity rejects an empty set") {
  const auto s = interval(0, 4, 5);
  ColoredCover cc{Cover{s, {{0, 1, 2, 3, 4}, {}}}, {0, 1}, 1};
  CHECK_THROWS_AS(partition_of_unity(cc), EmptyCoverSet);
}

TEST_CASE("boundary limits on the one-point compactified plane") {
  const auto p = plane(4, 0.5, 12);
  const auto c = attach_compactification(p, CompactificationKind::one_point);

  const auto one = sample(*p, [](Complex) { return Complex(1.0); });
  auto lim = boundary_limit(one, *c, 0, 1e-6);
  CHECK(lim.converged);
  CHECK(std::abs(lim.value - 1.0) < 1e-12);

  const auto decay = sample(*p, [](Complex z) { return Complex(1.0 / (1.0 + std::norm(z))); });
  lim = boundary_limit(decay, *c, 0, 1e-6);
  CHECK(lim.converged);
  CHECK(std::abs(lim.value) < 1e-6);

  const auto phase = sample(*p, [](Complex z) { return std::abs(z) > 0 ? std::conj(z) / std::abs(z) : Complex(1.0); });
  lim = boundary_limit(phase, *c, 0, 1e-6);
  CHECK_FALSE(lim.converged);
  // antipodal vertices of the outer ring: z/|z| = +-1
  CHECK(lim.oscillation == doctest::Approx(2.0).epsilon(0.02));
}

TEST_CASE("boundary limit is linear") {
  const auto p = plane(4, 0.5, 12);
  const auto c = attach_compactification(p, CompactificationKind::one_point);
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 20; ++trial) {
    const Complex a0(g(rng), g(rng)), b0(g(rng), g(rng)), alpha(g(rng), g(rng));
    std::vector<Complex> f(p->size()), h(p->size()), mix(p->size());
    for (Vertex v = 0; v < static_cast<Vertex>(p->size()); ++v) {
      const Complex z = p->complex_coordinate(v);
      f[v] = a0 + 1.0 / (1.0 + std::norm(z));
      h[v] = b0 * std::norm(z) / (1.0 + std::norm(z));
      mix[v] = alpha * f[v] + h[v];
    }
    const auto lf = boundary_limit(f, *c, 0, 1e-6), lh = boundary_limit(h, *c, 0, 1e-6);
    const auto lm = boundary_limit(mix, *c, 0, 1e-6 * (1.0 + std::abs(alpha)));
    REQUIRE(lf.converged);
    REQUIRE(lh.converged);
    REQUIRE(lm.converged);
    CHECK(std::abs(lm.value - (alpha * lf.value + lh.value)) <= 1e-9);
  }
}

}  // TEST_SUITE
