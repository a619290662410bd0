#include "ncbundle/watatani.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace ncb {

FiberSpace fiber_space(const GeneratedModule& m, Vertex v, double rank_rel) {
  int rank = 0;
  const CMatrix proj = span_projector(m.values_at(v), rank_rel, &rank);
  return {v, rank, range_basis(proj)};
}

FunctionElement conditional_expectation(const ProjectionField& p, const OperatorField& t) {
  if (p.n != t.n || p.matrices.size() != t.matrices.size()) throw ShapeMismatch("operator field does not match the module");
  CVector vals(static_cast<Eigen::Index>(p.matrices.size()));
  for (std::size_t v = 0; v < p.matrices.size(); ++v)
    vals[static_cast<Eigen::Index>(v)] = (p.matrices[v] * t.matrices[v] * p.matrices[v]).trace();
  return {p.space, std::move(vals), FunctionClass::bounded};
}

IndexFunction watatani_index(const GeneratedModule& m, const Frame& frame, const Tolerances& tol) {
  if (frame.elements.empty()) throw ShapeMismatch("empty frame");
  if (frame.ambient() != m.ambient || frame.elements.front().size() != m.space->size())
    throw ShapeMismatch("frame does not belong to the module");
  const auto& s = *m.space;
  const auto nv = static_cast<Eigen::Index>(s.size());

  std::vector<FunctionElement> terms;
  terms.reserve(frame.elements.size());
  IndexFunction idx;
  idx.raw = RVector::Zero(nv);
  for (const auto& e : frame.elements) {
    RVector sq = e.values.colwise().squaredNorm().transpose();
    idx.raw += sq;
    if (!frame.finite) terms.push_back(from_real(m.space, sq));
  }

  if (!frame.finite) {
    const auto battery = multiplier_battery(m.space);
    const auto strict = strict_convergence_check(terms, battery, tol.strict_tail);
    if (!strict.converges)
      throw FiniteIndexError("partial sums of the index do not converge strictly (tail " +
                             std::to_string(strict.tail_norm) + ")");
  }

  idx.values.resize(static_cast<std::size_t>(nv));
  bool rounded = true;
  for (Eigen::Index v = 0; v < nv; ++v) {
    const double r = std::round(idx.raw[v]);
    if (std::abs(idx.raw[v] - r) > tol.index_rounding) rounded = false;
    idx.values[v] = static_cast<int>(r);
  }
  if (rank_grows(s, idx.values))
    throw FiniteIndexError("index grows along the exhaustion: rank is unbounded");

  idx.sup = *std::max_element(idx.values.begin(), idx.values.end());
  idx.bounded = true;
  idx.continuous = rounded;
  for (const auto& e : s.edges())
    if (idx.values[e.a] != idx.values[e.b]) idx.continuous = false;
  return idx;
}

double index_ratio(const ProjectionField& p, std::span<const Section> family) {
  double tr_sup = 0.0, op_sup = 0.0;
  for (std::size_t v = 0; v < p.matrices.size(); ++v) {
    CMatrix sum = CMatrix::Zero(p.n, p.n);
    for (const auto& f : family) {
      const auto col = f.values.col(static_cast<Eigen::Index>(v));
      sum += col * col.adjoint();
    }
    tr_sup = std::max(tr_sup, (p.matrices[v] * sum * p.matrices[v]).trace().real());
    op_sup = std::max(op_sup, operator_norm(sum));
  }
  return op_sup > 0.0 ? tr_sup / op_sup : 0.0;
}

IndexEstimate numerical_index_estimate(const GeneratedModule& m, int trials, int family_size, std::uint64_t seed) {
  if (trials < 1 || family_size < 1) throw InvalidSpec("trials and family_size must be positive");
  const auto sf = span_field(m);
  const int n = m.ambient;
  IndexEstimate est;
  est.trials = trials;
  est.family_size = family_size;
  std::normal_distribution<double> gauss(0.0, std::sqrt(0.5));
  for (int t = 0; t < trials; ++t) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(t)};
    std::mt19937_64 rng(seq);
    CMatrix g(n, family_size);
    for (int j = 0; j < family_size; ++j)
      for (int i = 0; i < n; ++i) g(i, j) = Complex(gauss(rng), gauss(rng));
    const CMatrix gram = g * g.adjoint();
    double tr_sup = 0.0, op_sup = 0.0;
    for (const auto& p : sf.projection.matrices) {
      const CMatrix s = p * gram * p;
      tr_sup = std::max(tr_sup, s.trace().real());
      op_sup = std::max(op_sup, operator_norm(s));
    }
    const double ratio = op_sup > 0.0 ? tr_sup / op_sup : 0.0;
    est.lambda = std::max(est.lambda, ratio);
    est.mean += ratio / trials;
  }
  return est;
}

LocalTriviality local_triviality_check(const GeneratedModule& m, Vertex phi, double rank_rel) {
  const auto& s = *m.space;
  if (phi < 0 || phi >= static_cast<Vertex>(s.size())) throw ShapeMismatch("vertex out of range");
  const auto sf = span_field(m, rank_rel);
  LocalTriviality out;
  const int n = sf.rank[phi];
  out.dimension = n;
  if (n == 0) return out;

  const CMatrix q = range_basis(sf.projection.matrices[phi]);
  const double bound = 1.0 / (2.0 * n * n);
  const Vertex sources[] = {phi};
  const auto dist = s.hop_distances(sources);
  const int far = *std::max_element(dist.begin(), dist.end());

  auto fiber_ok = [&](Vertex v) {
    if (sf.rank[v] != n) return false;
    CMatrix lifted = sf.projection.matrices[v] * q;
    for (Eigen::Index i = 0; i < lifted.cols(); ++i) {
      const double len = lifted.col(i).norm();
      if (len < 1e-12) return false;
      lifted.col(i) /= len;
    }
    const CMatrix g = lifted.adjoint() * lifted;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j) {
          out.worst_off_diagonal = std::max(out.worst_off_diagonal, std::abs(g(i, j)));
          if (std::abs(g(i, j)) >= bound) return false;
        }
    return true;
  };

  for (int r = 1; r <= far; ++r) {
    bool ok = true;
    for (Vertex v = 0; v < static_cast<Vertex>(s.size()) && ok; ++v)
      if (dist[v] == r) ok = fiber_ok(v);
    if (!ok) break;
    out.radius = r;
  }
  out.whole_component = out.radius == far;
  out.ok = out.radius >= 1 || out.whole_component;
  return out;
}

std::variant<ProjectionField, BundleFailure> bundle_from_module(const GeneratedModule& m, double rank_rel) {
  auto sf = span_field(m, rank_rel);
  if (auto jump = rank_jump(*m.space, sf.rank))
    return BundleFailure{"index function jumps across edge " + std::to_string(jump->a) + "-" + std::to_string(jump->b),
                         jump};
  if (rank_grows(*m.space, sf.rank)) return BundleFailure{"index function is unbounded along the exhaustion", {}};
  return std::move(sf.projection);
}

Cor58Report cor58_report(const GeneratedModule& m, const Tolerances& tol) {
  Cor58Report rep;
  const auto sf = span_field(m, tol.rank_relative);
  const auto jump = rank_jump(*m.space, sf.rank);
  const bool growth = rank_grows(*m.space, sf.rank);
  rep.rank_continuous_bounded = !jump && !growth;

  const auto bundle = bundle_from_module(m, tol.rank_relative);
  rep.bundle_form = std::holds_alternative<ProjectionField>(bundle);
  if (!rep.bundle_form) rep.detail = std::get<BundleFailure>(bundle).reason;

  try {
    const auto idx = watatani_index(m, canonical_frame(m, tol.rank_relative), tol);
    rep.finite_index = idx.bounded && idx.continuous;
    if (!rep.finite_index && rep.detail.empty()) rep.detail = "index function is not continuous";
  } catch (const FiniteIndexError& e) {
    rep.finite_index = false;
    if (rep.detail.empty()) rep.detail = e.what();
  }

  if (rep.rank_continuous_bounded != rep.bundle_form || rep.bundle_form != rep.finite_index)
    throw InternalInconsistency("index verdicts disagree: (1)=" + std::to_string(rep.rank_continuous_bounded) +
                                " (2)=" + std::to_string(rep.bundle_form) + " (3)=" + std::to_string(rep.finite_index));
  return rep;
}

}  // namespace ncb
