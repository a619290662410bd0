#include "ncbundle/extension.hpp"

#include <algorithm>
#include <cmath>

namespace ncb {

namespace {

using HermitianSolver = Eigen::SelfAdjointEigenSolver<CMatrix>;

struct Snapped {
  CMatrix projection;
  double residual = 0.0;
  int rank = 0;
};

Snapped snap_to_projection(const CMatrix& m) {
  const CMatrix h = 0.5 * (m + m.adjoint());
  HermitianSolver es(h);
  Snapped out{CMatrix::Zero(m.rows(), m.cols())};
  for (Eigen::Index i = 0; i < h.cols(); ++i) {
    if (es.eigenvalues()(i) > 0.5) {
      out.projection += es.eigenvectors().col(i) * es.eigenvectors().col(i).adjoint();
      ++out.rank;
    }
  }
  out.residual = operator_norm(m - out.projection);
  return out;
}

double snap_limit(double eps_bnd) { return std::max(10.0 * eps_bnd, 1e-9); }

CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// Gram entry (i, j) of the frame at every interior vertex.
std::vector<Complex> gram_entry(const ProjectionField& g, int i, int j) {
  std::vector<Complex> out(g.matrices.size());
  for (std::size_t v = 0; v < out.size(); ++v) out[v] = g.matrices[v](i, j);
  return out;
}

}  // namespace

std::string NotExtendable::describe() const {
  std::string what = i >= 0 ? "Gram entry (" + std::to_string(i) + "," + std::to_string(j) + ")"
                            : "coordinate " + std::to_string(coordinate) + " of element " + std::to_string(element);
  return what + " has no limit at boundary vertex '" + label + "' (oscillation " + std::to_string(oscillation) + ")";
}

ExtensionOutcome extend_projection(const Frame& frame, const CompactificationPtr& c, const Tolerances& tol) {
  if (!c) throw InvalidSpec("extend_projection needs a compactification");
  if (!frame.finite) throw InvalidSpec("extend_projection needs a finite frame");
  if (frame.elements.empty()) throw ShapeMismatch("empty frame");
  if (frame.space().get() != c->base.get() && frame.elements.front().size() != c->base->size())
    throw ShapeMismatch("frame and compactification live on different spaces");

  const auto st = stabilize(frame, tol.frame);
  const int k = static_cast<int>(frame.elements.size());
  const auto nb = c->boundary_count();

  ExtensionResult res;
  res.projection = st.p_out;
  res.projection.compactification = c;
  res.projection.boundary.assign(nb, CMatrix::Zero(k, k));

  for (int i = 0; i < k; ++i) {
    for (int j = i; j < k; ++j) {
      const auto vals = gram_entry(st.p_out, i, j);
      for (std::size_t b = 0; b < nb; ++b) {
        const auto lim = boundary_limit(vals, *c, b, tol.boundary);
        if (!lim.converged) return NotExtendable{i, j, -1, -1, b, c->labels[b], lim.oscillation};
        res.projection.boundary[b](i, j) = lim.value;
        res.projection.boundary[b](j, i) = std::conj(lim.value);
      }
    }
  }

  // elements claimed to be continuous on the compactification need coordinate limits too
  for (int e = 0; e < k; ++e) {
    const auto& sec = frame.elements[e];
    if (sec.cls != FunctionClass::extended) continue;
    std::vector<Complex> vals(sec.size());
    for (int r = 0; r < sec.ambient; ++r) {
      for (std::size_t v = 0; v < vals.size(); ++v) vals[v] = sec.values(r, static_cast<Eigen::Index>(v));
      for (std::size_t b = 0; b < nb; ++b) {
        const auto lim = boundary_limit(vals, *c, b, tol.boundary);
        if (!lim.converged) return NotExtendable{-1, -1, e, r, b, c->labels[b], lim.oscillation};
      }
    }
  }

  res.boundary_rank.resize(nb);
  bool ranks_match = true;
  for (std::size_t b = 0; b < nb; ++b) {
    const auto snapped = snap_to_projection(res.projection.boundary[b]);
    res.snap_residual = std::max(res.snap_residual, snapped.residual);
    res.boundary_rank[b] = snapped.rank;
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) {
        const Complex value = res.projection.boundary[b](i, j);
        if (std::abs(value) > tol.boundary) res.unitisation_report.push_back({i, j, b, value});
      }
    res.projection.boundary[b] = snapped.projection;
    for (Vertex v : c->shells[b].back())
      if (numerical_rank(st.p_out.matrices[v], tol.rank_relative) != snapped.rank) ranks_match = false;
  }
  if (res.snap_residual > snap_limit(tol.boundary))
    throw FrameDefectTooLarge("boundary limits of the Gram field are not a projection (residual " +
                              std::to_string(res.snap_residual) + ")");

  res.fullness_defect = frame.context ? left_fullness_defect(*frame.context, frame) : st.idempotency_defect;
  res.verdicts.projective_over_unitisation = true;
  res.verdicts.multiplier_projective_implied = true;
  res.verdicts.finitely_generated_over_multipliers = frame.finite && ranks_match;
  res.verdicts.left_full = res.fullness_defect <= tol.frame;
  return res;
}

std::variant<ProjectionField, NotExtendable> extend_field(const ProjectionField& p, const CompactificationPtr& c,
                                                          double eps_bnd) {
  if (!c) throw InvalidSpec("extend_field needs a compactification");
  if (p.matrices.size() != c->base->size()) throw ShapeMismatch("field and compactification differ in vertex count");
  const auto nb = c->boundary_count();
  ProjectionField out = p;
  out.compactification = c;
  out.boundary.assign(nb, CMatrix::Zero(p.n, p.n));
  std::vector<Complex> vals(p.matrices.size());
  for (int i = 0; i < p.n; ++i)
    for (int j = i; j < p.n; ++j) {
      for (std::size_t v = 0; v < vals.size(); ++v) vals[v] = p.matrices[v](i, j);
      for (std::size_t b = 0; b < nb; ++b) {
        const auto lim = boundary_limit(vals, *c, b, eps_bnd);
        if (!lim.converged) return NotExtendable{i, j, -1, -1, b, c->labels[b], lim.oscillation};
        out.boundary[b](i, j) = lim.value;
        out.boundary[b](j, i) = std::conj(lim.value);
      }
    }
  for (auto& m : out.boundary) {
    const auto snapped = snap_to_projection(m);
    if (snapped.residual > snap_limit(eps_bnd))
      throw FrameDefectTooLarge("boundary limits of the field are not a projection");
    m = snapped.projection;
  }
  return out;
}

double left_fullness_defect(const ProjectionField& p, const Frame& candidate) {
  double d = 0.0;
  for (std::size_t v = 0; v < p.matrices.size(); ++v) {
    CMatrix s = -p.matrices[v];
    if (!candidate.elements.empty()) {
      const CMatrix e = candidate.values_at(static_cast<Vertex>(v));
      s += e * e.adjoint();
    }
    d = std::max(d, operator_norm(s));
  }
  return d;
}

EquivalenceReport equivalence_report(const GeneratedModule& m, const CompactificationPtr& c,
                                     const EquivalenceOptions& options) {
  const auto& tol = options.tol;
  const auto& space = m.space;
  if (!c && !space->is_compact()) throw InvalidSpec("equivalence_report needs a compactification of a non-compact space");

  EquivalenceReport rep;
  auto sf = span_field(m, tol.rank_relative);
  rep.rank_jump = rank_jump(*space, sf.rank);
  rep.rank_growth = rank_grows(*space, sf.rank);
  const bool bounded_bundle = !rep.rank_jump && !rep.rank_growth;

  // (5): the module is the section module of a locally trivial, finite rank bundle
  rep.condition5 = bounded_bundle && std::holds_alternative<ProjectionField>(projection_from_module(m, tol.rank_relative));
  if (rep.rank_jump) rep.failure = "rank jump";
  else if (rep.rank_growth) rep.failure = "rank grows along the exhaustion";

  if (!rep.rank_jump) {
    const auto& p = sf.projection;
    std::optional<Frame> frame;
    try {
      const auto colored = color_cover(band_cover(space, options.band_width, options.collar), options.max_colors);
      const auto pou = partition_of_unity(colored);
      frame = frame_from_partition(p, colored, pou, tol.frame);
    } catch (const LocalFrameInvalid& e) {
      if (rep.failure.empty()) rep.failure = std::string("partition frame: ") + e.what();
    } catch (const NotInRange& e) {
      if (rep.failure.empty()) rep.failure = std::string("partition frame: ") + e.what();
    } catch (const DimensionExceeded& e) {
      if (rep.failure.empty()) rep.failure = std::string("cover colouring: ") + e.what();
    }
    if (frame) {
      rep.frame_size = static_cast<int>(frame->elements.size());
      rep.fullness_defect = left_fullness_defect(p, *frame);
      rep.condition4 = bounded_bundle && rep.fullness_defect <= tol.frame;
      if (space->is_compact()) {
        rep.condition1 = bounded_bundle;
        rep.condition3 = bounded_bundle;
      } else {
        try {
          auto outcome = extend_projection(*frame, c, tol);
          if (auto* ext = std::get_if<ExtensionResult>(&outcome)) {
            rep.condition1 = bounded_bundle;
            rep.condition3 = bounded_bundle && ext->verdicts.finitely_generated_over_multipliers;
          } else {
            rep.divergence = std::get<NotExtendable>(outcome);
            if (rep.failure.empty()) rep.failure = rep.divergence->describe();
          }
        } catch (const FrameDefectTooLarge& e) {
          if (rep.failure.empty()) rep.failure = std::string("extension: ") + e.what();
        }
      }
    }
  }
  rep.condition2_implied = rep.condition1;
  if (!rep.all_equal())
    throw InternalInconsistency("equivalent conditions disagree: (1)=" + std::to_string(rep.condition1) +
                                " (3)=" + std::to_string(rep.condition3) + " (4)=" + std::to_string(rep.condition4) +
                                " (5)=" + std::to_string(rep.condition5) +
                                (rep.failure.empty() ? "" : " [" + rep.failure + "]"));
  return rep;
}

// ---------------------------------------------------------------------------

SpacePtr product_space(const SpacePtr& x, const SpacePtr& y, std::size_t vertex_budget) {
  const auto nx = x->size(), ny = y->size();
  if (nx * ny > vertex_budget)
    throw ProductTooLarge("product of " + std::to_string(nx) + " and " + std::to_string(ny) +
                          " vertices exceeds the budget of " + std::to_string(vertex_budget));
  const auto NX = static_cast<Vertex>(nx), NY = static_cast<Vertex>(ny);
  SpaceData d;
  d.family = SpaceFamily::product;
  d.dimension_hint = x->dimension_hint() + y->dimension_hint();
  d.positions.resize(x->coordinate_dim() + y->coordinate_dim(), NX * NY);
  for (Vertex a = 0; a < NX; ++a)
    for (Vertex b = 0; b < NY; ++b) {
      d.positions.col(a * NY + b) << x->positions().col(a), y->positions().col(b);
    }
  for (const auto& e : x->edges())
    for (Vertex b = 0; b < NY; ++b) d.edges.push_back({e.a * NY + b, e.b * NY + b, e.length});
  for (const auto& e : y->edges())
    for (Vertex a = 0; a < NX; ++a) d.edges.push_back({a * NY + e.a, a * NY + e.b, e.length});

  const int kx = x->max_level(), ky = y->max_level(), top = std::max(kx, ky);
  auto stage = [top](int k, int kmax) { return (top == 0 || k == top) ? kmax : k * kmax / top; };
  for (int k = 0; k <= top; ++k) {
    std::vector<Vertex> set;
    const int a = stage(k, kx), b = stage(k, ky);
    std::vector<Vertex> ys = y->exhaustion()[b];
    std::sort(ys.begin(), ys.end());
    std::vector<Vertex> xs = x->exhaustion()[a];
    std::sort(xs.begin(), xs.end());
    set.reserve(xs.size() * ys.size());
    for (Vertex u : xs)
      for (Vertex w : ys) set.push_back(u * NY + w);
    d.exhaustion.push_back(std::move(set));
  }
  d.factor_x = x;
  d.factor_y = y;
  return std::make_shared<DiscreteSpace>(std::move(d));
}

CompactificationPtr product_compactification(const SpacePtr& product, const CompactificationPtr& cx,
                                             const CompactificationPtr& cy) {
  const auto& x = product->factor_x();
  const auto& y = product->factor_y();
  if (!x || !y) throw InvalidSpec("product_compactification needs a product space");
  if (!cx && !cy) throw UnsupportedKind("both factors are compact");
  if ((cx && cx->base.get() != x.get()) || (cy && cy->base.get() != y.get()))
    throw ShapeMismatch("factor compactification does not match the product factors");
  if ((!cx && !x->is_compact()) || (!cy && !y->is_compact()))
    throw InvalidSpec("a non-compact factor needs a compactification");
  const auto NX = static_cast<Vertex>(x->size()), NY = static_cast<Vertex>(y->size());

  auto c = std::make_shared<Compactification>();
  c->base = product;
  c->kind = CompactificationKind::product;
  auto sorted = [](std::vector<Vertex> v) {
    std::sort(v.begin(), v.end());
    return v;
  };
  if (cx) {
    for (std::size_t bx = 0; bx < cx->boundary_count(); ++bx) {
      for (Vertex b = 0; b < NY; ++b) {
        std::vector<std::vector<Vertex>> seq;
        for (const auto& shell : cx->shells[bx]) {
          std::vector<Vertex> s;
          for (Vertex a : shell) s.push_back(a * NY + b);
          seq.push_back(sorted(std::move(s)));
        }
        c->labels.push_back(cx->labels[bx] + " x " + std::to_string(b));
        c->shells.push_back(std::move(seq));
      }
      if (cy) {
        for (std::size_t by = 0; by < cy->boundary_count(); ++by) {
          const auto& sx = cx->shells[bx];
          const auto& sy = cy->shells[by];
          const std::size_t len = std::max(sx.size(), sy.size());
          std::vector<std::vector<Vertex>> seq;
          for (std::size_t k = 0; k < len; ++k) {
            const auto& ax = sx[std::min(k, sx.size() - 1)];
            const auto& ay = sy[std::min(k, sy.size() - 1)];
            std::vector<Vertex> s;
            for (Vertex a : ax)
              for (Vertex b : ay) s.push_back(a * NY + b);
            seq.push_back(sorted(std::move(s)));
          }
          c->labels.push_back(cx->labels[bx] + " x " + cy->labels[by]);
          c->shells.push_back(std::move(seq));
        }
      }
    }
  }
  if (cy) {
    for (std::size_t by = 0; by < cy->boundary_count(); ++by)
      for (Vertex a = 0; a < NX; ++a) {
        std::vector<std::vector<Vertex>> seq;
        for (const auto& shell : cy->shells[by]) {
          std::vector<Vertex> s;
          for (Vertex b : shell) s.push_back(a * NY + b);
          seq.push_back(sorted(std::move(s)));
        }
        c->labels.push_back(std::to_string(a) + " x " + cy->labels[by]);
        c->shells.push_back(std::move(seq));
      }
  }
  c->validate();
  return c;
}

ProjectionField external_tensor(const ProjectionField& p, const ProjectionField& q, std::size_t vertex_budget) {
  const auto space = product_space(p.space, q.space, vertex_budget);
  const auto ny = q.matrices.size();
  std::vector<CMatrix> m(space->size());
  for (std::size_t a = 0; a < p.matrices.size(); ++a)
    for (std::size_t b = 0; b < ny; ++b) m[a * ny + b] = kron(p.matrices[a], q.matrices[b]);
  return {space, p.n * q.n, std::move(m)};
}

ProjectionField pushforward(const ProjectionField& p, const SpacePtr& y, const std::vector<Vertex>& phi,
                            const CompactificationPtr& target_c, const std::vector<std::size_t>& boundary_map) {
  const auto& x = *p.space;
  if (phi.size() != y->size()) throw ShapeMismatch("vertex map must have one entry per source vertex");
  for (Vertex t : phi)
    if (t < 0 || t >= static_cast<Vertex>(x.size())) throw ShapeMismatch("vertex map leaves the target space");

  // preimages of compact sets are compact
  if (x.is_compact() && !y->is_compact()) throw NotProper("a non-compact space cannot map properly onto a compact one");
  if (!y->is_compact() && !x.is_compact()) {
    for (Vertex v = 0; v < static_cast<Vertex>(y->size()); ++v) {
      if (y->level(v) == y->max_level() && x.level(phi[v]) < x.max_level())
        throw NotProper("vertex " + std::to_string(v) + " near infinity maps into exhaustion set " +
                        std::to_string(x.level(phi[v])));
    }
  }

  ProjectionField q(y, p.n, std::vector<CMatrix>(y->size()));
  for (std::size_t v = 0; v < phi.size(); ++v) q.matrices[v] = p.matrices[phi[v]];
  if (target_c) {
    if (target_c->base.get() != y.get()) throw ShapeMismatch("target compactification is not over the source space");
    if (!p.extended()) throw InvalidSpec("boundary map given but the field has no boundary values");
    if (boundary_map.size() != target_c->boundary_count()) throw ShapeMismatch("boundary map size");
    q.compactification = target_c;
    for (auto b : boundary_map) {
      if (b >= p.boundary.size()) throw ShapeMismatch("boundary map leaves the target boundary");
      q.boundary.push_back(p.boundary[b]);
    }
  }
  return q;
}

Suspension suspend(const ProjectionField& p, const Frame& frame, const SpacePtr& line, const CompactificationPtr& base_c,
                   const Tolerances& tol) {
  if (frame.elements.empty()) throw ShapeMismatch("suspension needs a nonempty frame");
  if (frame.elements.front().size() != p.matrices.size() || frame.ambient() != p.n)
    throw ShapeMismatch("frame does not match the projection");
  Suspension s;
  s.space = product_space(line, p.space, std::numeric_limits<std::size_t>::max());
  const auto nt = line->size(), nx = p.matrices.size();
  s.projection = ProjectionField(s.space, p.n, std::vector<CMatrix>(nt * nx));
  for (std::size_t t = 0; t < nt; ++t)
    for (std::size_t x = 0; x < nx; ++x) s.projection.matrices[t * nx + x] = p.matrices[x];

  s.frame.finite = frame.finite;
  for (const auto& xi : frame.elements) {
    Section lifted(s.space, CMatrix(xi.ambient, static_cast<Eigen::Index>(nt * nx)), xi.cls);
    for (std::size_t t = 0; t < nt; ++t)
      lifted.values.middleCols(static_cast<Eigen::Index>(t * nx), static_cast<Eigen::Index>(nx)) = xi.values;
    s.frame.elements.push_back(std::move(lifted));
  }
  s.frame.context = std::make_shared<ProjectionField>(s.projection);
  s.frame_defect = frame_defect(s.projection, s.frame, tol.in_range);

  if (base_c || p.space->is_compact()) {
    const auto line_c = attach_compactification(line, CompactificationKind::endpoints);
    s.compactification = product_compactification(s.space, line_c, base_c);
    s.extension = extend_projection(s.frame, s.compactification, tol);
  }
  return s;
}

ProjectionField slice_first(const ProjectionField& f, Vertex t) {
  const auto& x = f.space->factor_x();
  const auto& y = f.space->factor_y();
  if (!x || !y) throw InvalidSpec("slice of a non-product field");
  if (t < 0 || t >= static_cast<Vertex>(x->size())) throw ShapeMismatch("slice index out of range");
  const auto ny = y->size();
  ProjectionField out(y, f.n, std::vector<CMatrix>(ny));
  for (std::size_t b = 0; b < ny; ++b) out.matrices[b] = f.matrices[static_cast<std::size_t>(t) * ny + b];
  return out;
}

ProjectionField slice_second(const ProjectionField& f, Vertex yv) {
  const auto& x = f.space->factor_x();
  const auto& y = f.space->factor_y();
  if (!x || !y) throw InvalidSpec("slice of a non-product field");
  if (yv < 0 || yv >= static_cast<Vertex>(y->size())) throw ShapeMismatch("slice index out of range");
  const auto nx = x->size(), ny = y->size();
  ProjectionField out(x, f.n, std::vector<CMatrix>(nx));
  for (std::size_t a = 0; a < nx; ++a) out.matrices[a] = f.matrices[a * ny + static_cast<std::size_t>(yv)];
  return out;
}

ProjectionField direct_sum(const ProjectionField& p, const ProjectionField& q) {
  if (p.matrices.size() != q.matrices.size()) throw ShapeMismatch("direct sum of fields over different spaces");
  const int n = p.n + q.n;
  auto block = [&](const CMatrix& a, const CMatrix& b) {
    CMatrix m = CMatrix::Zero(n, n);
    m.topLeftCorner(p.n, p.n) = a;
    m.bottomRightCorner(q.n, q.n) = b;
    return m;
  };
  ProjectionField out(p.space, n, std::vector<CMatrix>(p.matrices.size()));
  for (std::size_t v = 0; v < p.matrices.size(); ++v) out.matrices[v] = block(p.matrices[v], q.matrices[v]);
  if (p.extended() && q.extended() && p.compactification == q.compactification) {
    out.compactification = p.compactification;
    for (std::size_t b = 0; b < p.boundary.size(); ++b) out.boundary.push_back(block(p.boundary[b], q.boundary[b]));
  }
  return out;
}

}  // namespace ncb
