#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "ncbundle/function_algebra.hpp"

using namespace ncb;

namespace {

SpacePtr plane_mesh() { return build_space({PlaneSpec{4, 0.5, 8, 2.0}}); }

FunctionElement random_element(const SpacePtr& s, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  CVector v(static_cast<Eigen::Index>(s->size()));
  for (auto& x : v) x = Complex(g(rng), g(rng));
  return {s, v};
}

}  // namespace

TEST_SUITE("function_algebra") {

TEST_CASE("sup norm examples") {
  const auto s = plane_mesh();
  CHECK(sup_norm(constant(s, 0.0)) == 0.0);

  CVector decay(static_cast<Eigen::Index>(s->size()));
  for (Vertex v = 0; v < static_cast<Vertex>(s->size()); ++v) decay[v] = 1.0 / (1.0 + std::norm(s->complex_coordinate(v)));
  CHECK(sup_norm(FunctionElement(s, decay)) == doctest::Approx(1.0).epsilon(1e-15));

  const auto line = build_space({IntervalSpec{0, 99, 100}});
  std::mt19937_64 rng(5);
  for (int t = 0; t < 10; ++t) {
    const auto f = random_element(line, rng);
    double brute = 0;
    for (Eigen::Index i = 0; i < f.values.size(); ++i) brute = std::max(brute, std::abs(f.values[i]));
    CHECK(sup_norm(f) == brute);
  }
}

TEST_CASE("sup norm is a norm") {
  const auto s = plane_mesh();
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g;
  for (int t = 0; t < 50; ++t) {
    const auto f = random_element(s, rng), h = random_element(s, rng);
    const Complex a(g(rng), g(rng));
    CHECK(sup_norm(f + h) <= sup_norm(f) + sup_norm(h) + 1e-12);
    CHECK(std::abs(sup_norm(a * f) - std::abs(a) * sup_norm(f)) <= 1e-12 * (1 + sup_norm(a * f)));
  }
}

TEST_CASE("product class follows the ideal property") {
  CHECK(product_class(FunctionClass::vanishing, FunctionClass::bounded) == FunctionClass::vanishing);
  CHECK(product_class(FunctionClass::bounded, FunctionClass::vanishing) == FunctionClass::vanishing);
  CHECK(product_class(FunctionClass::bounded, FunctionClass::bounded) == FunctionClass::bounded);
  const auto s = plane_mesh();
  const auto a = from_real(s, RVector::Ones(static_cast<Eigen::Index>(s->size())), FunctionClass::vanishing);
  CHECK((a * constant(s, 2.0)).cls == FunctionClass::vanishing);
}

TEST_CASE("vanishing detection on the last shell") {
  const auto s = plane_mesh();
  RVector decay(static_cast<Eigen::Index>(s->size())), one = RVector::Ones(static_cast<Eigen::Index>(s->size()));
  for (Vertex v = 0; v < static_cast<Vertex>(s->size()); ++v) decay[v] = 1.0 / (1.0 + std::norm(s->complex_coordinate(v)));
  CHECK(is_vanishing(from_real(s, decay), 1e-6));
  CHECK_FALSE(is_vanishing(from_real(s, one), 1e-6));
}

TEST_CASE("strict convergence: one nonzero term") {
  const auto s = plane_mesh();
  std::mt19937_64 rng(7);
  std::vector<FunctionElement> series{random_element(s, rng)};
  const auto battery = multiplier_battery(s);
  const auto r = strict_convergence_check(series, battery, 1e-9);
  CHECK(r.converges);
  CHECK((r.limit.values - series[0].values).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("strict convergence: rank-weighted partition sums give the rank function") {
  const auto line = build_space({IntervalSpec{-4, 4, 17, 8, 8, 2.0}});
  const auto cc = color_cover(band_cover(line, 1, 2), 4);
  const auto pou = partition_of_unity(cc);
  const int rank = 3;
  std::vector<FunctionElement> series;
  for (const auto& h : pou.functions) series.push_back(from_real(line, rank * h));
  const auto r = strict_convergence_check(series, multiplier_battery(line, pou.functions), 1e-9);
  REQUIRE(r.converges);
  CHECK((r.limit.values.array() - Complex(rank)).abs().maxCoeff() <= 1e-12);
}

TEST_CASE("strict convergence: bumps marching to infinity converge strictly, not in norm") {
  const auto line = build_space({IntervalSpec{0, 40, 41}});
  std::vector<FunctionElement> series;
  std::vector<Vertex> order(line->size());
  for (Vertex v = 0; v < static_cast<Vertex>(line->size()); ++v) order[v] = v;
  std::sort(order.begin(), order.end(), [&](Vertex a, Vertex b) { return line->level(a) < line->level(b); });
  for (Vertex v : order) {
    const Vertex one[] = {v};
    series.push_back(indicator(line, one));
  }
  const auto battery = multiplier_battery(line);
  // oracle: every multiplier is supported where the tail terms vanish
  for (const auto& a : battery)
    for (std::size_t k = series.size() - series.size() / 4; k < series.size(); ++k)
      CHECK(sup_norm(series[k] * a) == 0.0);
  const auto r = strict_convergence_check(series, battery, 1e-9);
  CHECK(r.converges);
  CHECK((r.limit.values.array() - Complex(1.0)).abs().maxCoeff() == 0.0);
  CHECK(r.norm_tail == doctest::Approx(1.0));
}

TEST_CASE("strict convergence fails on a non-decaying series") {
  const auto line = build_space({IntervalSpec{0, 20, 21}});
  std::vector<FunctionElement> series(12, constant(line, 1.0));
  const auto r = strict_convergence_check(series, multiplier_battery(line), 1e-9);
  CHECK_FALSE(r.converges);
  CHECK(r.witness_multiplier >= 0);
  CHECK(r.tail_norm >= 1.0);
}

TEST_CASE("strict convergence ignores reordering of finitely many terms") {
  const auto line = build_space({IntervalSpec{-4, 4, 17, 8, 8, 2.0}});
  const auto cc = color_cover(band_cover(line, 1, 2), 4);
  const auto pou = partition_of_unity(cc);
  std::vector<FunctionElement> series;
  for (const auto& h : pou.functions) series.push_back(from_real(line, 2.0 * h));
  const auto battery = multiplier_battery(line, pou.functions);
  const auto a = strict_convergence_check(series, battery, 1e-9);
  std::mt19937_64 rng(9);
  auto shuffled = series;
  const std::size_t head = shuffled.size() / 2;
  std::shuffle(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(head), rng);
  const auto b = strict_convergence_check(shuffled, battery, 1e-9);
  CHECK(a.converges == b.converges);
  REQUIRE(a.converges);
  CHECK((a.limit.values - b.limit.values).cwiseAbs().maxCoeff() <= 1e-9);
}

}  // TEST_SUITE
