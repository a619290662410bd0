#include "ncbundle/module_core.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace ncb {

namespace {

void require_compatible(const Section& a, const Section& b) {
  if (a.ambient != b.ambient || a.values.cols() != b.values.cols())
    throw ShapeMismatch("sections differ in ambient dimension or vertex count");
}

using HermitianSolver = Eigen::SelfAdjointEigenSolver<CMatrix>;

}  // namespace

// ---------------------------------------------------------------------------
// spectral helpers

double operator_norm(const CMatrix& m) {
  if (m.size() == 0) return 0.0;
  if (m.rows() == m.cols() && (m - m.adjoint()).cwiseAbs().maxCoeff() <= 1e-13 * (1.0 + m.cwiseAbs().maxCoeff())) {
    HermitianSolver es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
  }
  Eigen::JacobiSVD<CMatrix> svd(m);
  return svd.singularValues()(0);
}

int numerical_rank(const CMatrix& psd, double rel) {
  if (psd.size() == 0) return 0;
  HermitianSolver es(psd, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  const double top = ev.maxCoeff();
  if (!(top > 0.0)) return 0;
  return static_cast<int>((ev.array() > rel * top).count());
}

CMatrix span_projector(const CMatrix& v, double rel, int* rank) {
  const auto n = v.rows();
  CMatrix p = CMatrix::Zero(n, n);
  int r = 0;
  if (v.cols() > 0) {
    const CMatrix g = v.adjoint() * v;
    HermitianSolver es(g);
    const double top = es.eigenvalues().maxCoeff();
    if (top > 0.0) {
      for (Eigen::Index i = 0; i < g.cols(); ++i) {
        const double lam = es.eigenvalues()(i);
        if (lam > rel * top) {
          const CVector w = v * es.eigenvectors().col(i) / std::sqrt(lam);
          p += w * w.adjoint();
          ++r;
        }
      }
    }
  }
  if (rank) *rank = r;
  return p;
}

CMatrix range_basis(const CMatrix& p, double threshold) {
  const CMatrix h = 0.5 * (p + p.adjoint());
  HermitianSolver es(h);
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < h.cols(); ++i)
    if (es.eigenvalues()(i) > threshold) keep.push_back(i);
  CMatrix b(p.rows(), static_cast<Eigen::Index>(keep.size()));
  // eigenvalues ascend; list the dominant directions first
  for (std::size_t j = 0; j < keep.size(); ++j) b.col(static_cast<Eigen::Index>(j)) = es.eigenvectors().col(keep[keep.size() - 1 - j]);
  return b;
}

// ---------------------------------------------------------------------------
// sections

Section zero_section(const SpacePtr& space, int ambient, FunctionClass c) {
  return {space, CMatrix::Zero(ambient, static_cast<Eigen::Index>(space->size())), c};
}

Section operator*(const Section& g, const FunctionElement& a) {
  if (a.values.size() != g.values.cols()) throw ShapeMismatch("section and function differ in vertex count");
  Section out = g;
  for (Eigen::Index v = 0; v < g.values.cols(); ++v) out.values.col(v) *= a.values[v];
  out.cls = product_class(g.cls, a.cls);
  if (out.cls == FunctionClass::extended) {
    if (g.compactification && g.compactification == a.compactification) {
      for (Eigen::Index b = 0; b < out.boundary_values.cols(); ++b) out.boundary_values.col(b) *= a.boundary_values[b];
    } else {
      out.cls = FunctionClass::bounded;
      out.boundary_values.resize(0, 0);
      out.compactification.reset();
    }
  } else {
    out.boundary_values.resize(0, 0);
    out.compactification.reset();
  }
  return out;
}

Section operator+(const Section& a, const Section& b) {
  require_compatible(a, b);
  Section out = a;
  out.values += b.values;
  if (a.cls != b.cls) out.cls = FunctionClass::bounded;
  if (out.cls == FunctionClass::extended) {
    if (a.compactification == b.compactification) out.boundary_values += b.boundary_values;
    else out.cls = FunctionClass::bounded;
  }
  if (out.cls != FunctionClass::extended) {
    out.boundary_values.resize(0, 0);
    out.compactification.reset();
  }
  return out;
}

Section combine(std::span<const Section> sections, const CVector& coeffs) {
  if (sections.empty()) throw ShapeMismatch("combine: no sections");
  if (static_cast<std::size_t>(coeffs.size()) != sections.size()) throw ShapeMismatch("combine: coefficient count");
  Section out = sections.front();
  out.values *= coeffs[0];
  if (out.boundary_values.size()) out.boundary_values *= coeffs[0];
  for (std::size_t k = 1; k < sections.size(); ++k) {
    Section s = sections[k];
    s.values *= coeffs[static_cast<Eigen::Index>(k)];
    if (s.boundary_values.size()) s.boundary_values *= coeffs[static_cast<Eigen::Index>(k)];
    out = out + s;
  }
  return out;
}

GeneratedModule::GeneratedModule(SpacePtr s, int n, std::vector<Section> gens)
    : space(std::move(s)), ambient(n), generators(std::move(gens)) {
  for (const auto& g : generators)
    if (g.ambient != ambient || g.values.cols() != static_cast<Eigen::Index>(space->size()))
      throw ShapeMismatch("generator does not match module ambient dimension or space");
}

CMatrix GeneratedModule::values_at(Vertex v) const {
  CMatrix m(ambient, static_cast<Eigen::Index>(generators.size()));
  for (std::size_t k = 0; k < generators.size(); ++k) m.col(static_cast<Eigen::Index>(k)) = generators[k].values.col(v);
  return m;
}

CMatrix GeneratedModule::gram(Vertex v) const {
  const CMatrix m = values_at(v);
  return m.adjoint() * m;
}

const CMatrix& ProjectionField::at(Vertex v) const {
  const auto n_int = static_cast<Vertex>(matrices.size());
  if (v < n_int) return matrices[v];
  return boundary.at(static_cast<std::size_t>(v - n_int));
}

ProjectionResiduals residuals(const ProjectionField& p) {
  ProjectionResiduals r;
  auto check = [&](const CMatrix& m) {
    r.idempotent = std::max(r.idempotent, operator_norm(m * m - m));
    r.hermitian = std::max(r.hermitian, operator_norm(m.adjoint() - m));
  };
  for (const auto& m : p.matrices) check(m);
  for (const auto& m : p.boundary) check(m);
  for (const auto& e : p.space->edges()) {
    const double jump = operator_norm(p.matrices[e.a] - p.matrices[e.b]);
    r.max_edge_jump = std::max(r.max_edge_jump, jump);
    r.edge_oscillation = std::max(r.edge_oscillation, jump / e.length);
  }
  return r;
}

ProjectionField constant_field(const SpacePtr& space, const CMatrix& m) {
  return {space, static_cast<int>(m.rows()), std::vector<CMatrix>(space->size(), m)};
}

OperatorField operator+(const OperatorField& a, const OperatorField& b) {
  if (a.n != b.n || a.matrices.size() != b.matrices.size()) throw ShapeMismatch("operator fields differ in shape");
  OperatorField out = a;
  for (std::size_t v = 0; v < a.matrices.size(); ++v) out.matrices[v] += b.matrices[v];
  out.positive = a.positive && b.positive;
  return out;
}

OperatorField adjoint(const OperatorField& t) {
  OperatorField out = t;
  for (auto& m : out.matrices) m = m.adjoint().eval();
  return out;
}

double sup_norm(const OperatorField& t) {
  double s = 0.0;
  for (const auto& m : t.matrices) s = std::max(s, operator_norm(m));
  return s;
}

Section apply(const OperatorField& t, const Section& g) {
  if (t.n != g.ambient || t.matrices.size() != g.size()) throw ShapeMismatch("operator and section differ in shape");
  Section out = g;
  for (std::size_t v = 0; v < g.size(); ++v)
    out.values.col(static_cast<Eigen::Index>(v)) = t.matrices[v] * g.values.col(static_cast<Eigen::Index>(v));
  // a bounded operator keeps vanishing sections vanishing
  if (out.cls == FunctionClass::extended) {
    out.cls = FunctionClass::bounded;
    out.boundary_values.resize(0, 0);
    out.compactification.reset();
  }
  return out;
}

CMatrix Frame::values_at(Vertex v) const {
  CMatrix m(ambient(), static_cast<Eigen::Index>(elements.size()));
  for (std::size_t k = 0; k < elements.size(); ++k) m.col(static_cast<Eigen::Index>(k)) = elements[k].values.col(v);
  return m;
}

// ---------------------------------------------------------------------------
// inner products and rank-one operators

FunctionElement inner_product(const Section& e, const Section& f) {
  require_compatible(e, f);
  CVector vals(e.values.cols());
  for (Eigen::Index v = 0; v < e.values.cols(); ++v) vals[v] = e.values.col(v).dot(f.values.col(v));
  FunctionElement out(e.space, std::move(vals), product_class(e.cls, f.cls));
  if (out.cls == FunctionClass::extended) {
    if (e.compactification && e.compactification == f.compactification) {
      out.compactification = e.compactification;
      out.boundary_values.resize(e.boundary_values.cols());
      for (Eigen::Index b = 0; b < e.boundary_values.cols(); ++b)
        out.boundary_values[b] = e.boundary_values.col(b).dot(f.boundary_values.col(b));
    } else {
      out.cls = FunctionClass::bounded;
    }
  }
  return out;
}

OperatorField theta(const Section& e, const Section& f) {
  require_compatible(e, f);
  std::vector<CMatrix> m(e.size());
  for (std::size_t v = 0; v < e.size(); ++v) {
    const auto i = static_cast<Eigen::Index>(v);
    m[v] = e.values.col(i) * f.values.col(i).adjoint();
  }
  return {e.space, e.ambient, std::move(m), false};
}

OperatorField frame_operator(const Frame& frame) {
  if (frame.elements.empty()) throw ShapeMismatch("empty frame");
  const auto nv = frame.elements.front().size();
  const int n = frame.ambient();
  std::vector<CMatrix> m(nv);
  for (std::size_t v = 0; v < nv; ++v) {
    const CMatrix e = frame.values_at(static_cast<Vertex>(v));
    m[v] = e * e.adjoint();
  }
  return {frame.space(), n, std::move(m), true};
}

double frame_defect(const ProjectionField& p, const Frame& frame, double range_tol) {
  if (frame.elements.empty()) {
    double d = 0.0;
    for (const auto& m : p.matrices) d = std::max(d, operator_norm(m));
    return d;
  }
  if (frame.ambient() != p.n || frame.elements.front().size() != p.matrices.size())
    throw ShapeMismatch("frame and projection differ in shape");
  double defect = 0.0;
  for (std::size_t v = 0; v < p.matrices.size(); ++v) {
    const CMatrix e = frame.values_at(static_cast<Vertex>(v));
    const CMatrix& pv = p.matrices[v];
    const CMatrix off = e - pv * e;
    for (Eigen::Index j = 0; j < off.cols(); ++j) {
      if (off.col(j).norm() > range_tol)
        throw NotInRange("frame element " + std::to_string(j) + " leaves range p at vertex " + std::to_string(v));
    }
    defect = std::max(defect, operator_norm(e * e.adjoint() - pv));
  }
  return defect;
}

// ---------------------------------------------------------------------------
// local trivialisations and partition frames

std::vector<CMatrix> local_trivialization(const ProjectionField& p, std::span<const Vertex> set, double rank_rel) {
  (void)rank_rel;
  const auto& s = *p.space;
  const auto n_v = static_cast<Vertex>(s.size());
  std::vector<int> pos(n_v, -1);
  for (std::size_t i = 0; i < set.size(); ++i) pos[set[i]] = static_cast<int>(i);

  std::vector<CMatrix> basis(set.size());
  int rank = -1;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const int r = static_cast<int>(range_basis(p.matrices[set[i]]).cols());
    if (rank < 0) rank = r;
    if (r != rank)
      throw LocalFrameInvalid("rank of p is not constant on the cover set (" + std::to_string(rank) + " vs " +
                              std::to_string(r) + " at vertex " + std::to_string(set[i]) + ")");
  }
  if (set.empty()) return basis;

  std::vector<Vertex> outside;
  for (Vertex v = 0; v < n_v; ++v)
    if (pos[v] < 0) outside.push_back(v);
  const auto depth = s.hop_distances(outside);

  std::vector<char> done(set.size(), 0);
  std::size_t remaining = set.size();
  while (remaining > 0) {
    // seed at the deepest untouched vertex
    std::size_t seed = set.size();
    for (std::size_t i = 0; i < set.size(); ++i) {
      if (done[i]) continue;
      if (seed == set.size()) seed = i;
      const int di = depth[set[i]] < 0 ? 1 << 29 : depth[set[i]];
      const int ds = depth[set[seed]] < 0 ? 1 << 29 : depth[set[seed]];
      if (di > ds) seed = i;
    }
    basis[seed] = range_basis(p.matrices[set[seed]]);
    done[seed] = 1;
    --remaining;
    std::deque<std::size_t> q{seed};
    while (!q.empty()) {
      const auto cur = q.front();
      q.pop_front();
      for (const auto& nb : s.neighbors(set[cur])) {
        const int j = pos[nb.v];
        if (j < 0 || done[j]) continue;
        const CMatrix& pv = p.matrices[nb.v];
        CMatrix moved = pv * basis[cur];
        if (moved.cols() > 0) {
          const CMatrix gram = moved.adjoint() * moved;
          HermitianSolver es(gram);
          if (es.eigenvalues().minCoeff() > 1e-6) {
            const CMatrix inv_sqrt = es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                                     es.eigenvectors().adjoint();
            moved = moved * inv_sqrt;
          } else {
            moved = range_basis(pv);
          }
        }
        basis[j] = std::move(moved);
        done[j] = 1;
        --remaining;
        q.push_back(static_cast<std::size_t>(j));
      }
    }
  }
  return basis;
}

LocalFrames local_trivializations(const ProjectionField& p, const Cover& cover, double rank_rel) {
  LocalFrames out;
  out.reserve(cover.sets.size());
  for (const auto& set : cover.sets) out.push_back(local_trivialization(p, set, rank_rel));
  return out;
}

namespace {

void check_local_frames(const ProjectionField& p, const Cover& cover, const PartitionOfUnity& pou,
                        const LocalFrames& local, double tol) {
  if (local.size() != cover.sets.size()) throw LocalFrameInvalid("one local frame per cover set is required");
  for (std::size_t u = 0; u < cover.sets.size(); ++u) {
    const auto& set = cover.sets[u];
    if (local[u].size() != set.size())
      throw LocalFrameInvalid("local frame for set " + std::to_string(u) + " has the wrong vertex count");
    for (std::size_t i = 0; i < set.size(); ++i) {
      const Vertex x = set[i];
      const CMatrix& b = local[u][i];
      if (b.rows() != p.n) throw LocalFrameInvalid("local frame has the wrong ambient dimension");
      const double h = pou.functions[u][x];
      const CMatrix f = std::sqrt(h) * b;
      const double residual = operator_norm(f * f.adjoint() - h * p.matrices[x]);
      if (residual > tol)
        throw LocalFrameInvalid("set " + std::to_string(u) + ": local frame residual " + std::to_string(residual) +
                                " at vertex " + std::to_string(x));
    }
  }
}

}  // namespace

Frame partition_family(const ProjectionField& p, const ColoredCover& colored, const PartitionOfUnity& pou,
                       const LocalFrames& local, double tol) {
  const auto& cover = colored.cover;
  check_local_frames(p, cover, pou, local, tol);
  Frame frame;
  frame.finite = false;
  frame.context = std::make_shared<ProjectionField>(p);
  for (std::size_t u = 0; u < cover.sets.size(); ++u) {
    const auto& set = cover.sets[u];
    const auto n_u = set.empty() ? 0 : local[u].front().cols();
    for (Eigen::Index j = 0; j < n_u; ++j) {
      Section f = zero_section(p.space, p.n);
      for (std::size_t i = 0; i < set.size(); ++i)
        f.values.col(set[i]) = std::sqrt(pou.functions[u][set[i]]) * local[u][i].col(j);
      frame.elements.push_back(std::move(f));
    }
  }
  return frame;
}

Frame frame_from_partition(const ProjectionField& p, const ColoredCover& colored, const PartitionOfUnity& pou,
                           const LocalFrames& local, double tol) {
  const auto& cover = colored.cover;
  check_local_frames(p, cover, pou, local, tol);
  Eigen::Index n = 0;
  for (std::size_t u = 0; u < cover.sets.size(); ++u)
    if (!local[u].empty()) n = std::max(n, local[u].front().cols());

  Frame frame;
  frame.finite = true;
  frame.context = std::make_shared<ProjectionField>(p);
  for (int color = 0; color <= colored.max_color; ++color) {
    for (Eigen::Index j = 0; j < n; ++j) {
      Section f = zero_section(p.space, p.n);
      for (std::size_t u = 0; u < cover.sets.size(); ++u) {
        if (colored.color[u] != color) continue;
        const auto& set = cover.sets[u];
        if (set.empty() || local[u].front().cols() <= j) continue;
        for (std::size_t i = 0; i < set.size(); ++i)
          f.values.col(set[i]) += std::sqrt(pou.functions[u][set[i]]) * local[u][i].col(j);
      }
      frame.elements.push_back(std::move(f));
    }
  }
  const double defect = frame_defect(p, frame, std::max(tol, 1e-9));
  if (defect > tol) throw LocalFrameInvalid("assembled partition frame has defect " + std::to_string(defect));
  return frame;
}

Frame frame_from_partition(const ProjectionField& p, const ColoredCover& colored, const PartitionOfUnity& pou,
                           double tol) {
  return frame_from_partition(p, colored, pou, local_trivializations(p, colored.cover), tol);
}

// ---------------------------------------------------------------------------
// stabilisation

Section Stabilization::apply(const Section& e) const {
  if (e.ambient != frame.ambient() || e.size() != p_out.matrices.size())
    throw ShapeMismatch("section does not belong to the framed module");
  const auto k = static_cast<Eigen::Index>(frame.elements.size());
  Section out(e.space, CMatrix(k, e.values.cols()), e.cls == FunctionClass::extended ? FunctionClass::bounded : e.cls);
  for (Eigen::Index v = 0; v < e.values.cols(); ++v)
    out.values.col(v) = frame.values_at(static_cast<Vertex>(v)).adjoint() * e.values.col(v);
  return out;
}

Stabilization stabilize(const Frame& frame, double eps_frame) {
  if (!frame.finite) throw InvalidSpec("stabilize needs a finite frame");
  if (frame.elements.empty()) throw ShapeMismatch("empty frame");
  const auto nv = frame.elements.front().size();
  Stabilization st;
  st.frame = frame;
  st.p_out = ProjectionField(frame.space(), static_cast<int>(frame.elements.size()), std::vector<CMatrix>(nv));
  for (std::size_t v = 0; v < nv; ++v) {
    const CMatrix e = frame.values_at(static_cast<Vertex>(v));
    CMatrix g = e.adjoint() * e;
    st.idempotency_defect = std::max(st.idempotency_defect, operator_norm(g * g - g));
    st.p_out.matrices[v] = std::move(g);
  }
  if (st.idempotency_defect > eps_frame)
    throw FrameDefectTooLarge("frame identity fails: ||p_out^2 - p_out|| = " + std::to_string(st.idempotency_defect));
  if (frame.context) {
    const double d = frame_defect(*frame.context, frame);
    if (d > eps_frame) throw FrameDefectTooLarge("frame defect " + std::to_string(d) + " exceeds tolerance");
  }
  return st;
}

// ---------------------------------------------------------------------------
// Serre-Swan conversions

RVector exhaustion_cutoff(const DiscreteSpace& space, double eps_van) {
  const auto n = static_cast<Eigen::Index>(space.size());
  if (space.is_compact()) return RVector::Ones(n);
  // bands of one level each; weights decay geometrically to (eps_van/10)^2 on the last band
  const auto sp = std::shared_ptr<const DiscreteSpace>(&space, [](const DiscreteSpace*) {});
  const auto colored = color_cover(band_cover(sp, 1, 1), 2);
  const auto pou = partition_of_unity(colored);
  const auto bands = pou.functions.size();
  const double floor_weight = std::pow(eps_van / 10.0, 2);
  RVector c2 = RVector::Zero(n);
  for (std::size_t k = 0; k < bands; ++k) {
    const double w = bands == 1 ? 1.0 : std::pow(floor_weight, static_cast<double>(k) / static_cast<double>(bands - 1));
    c2 += w * pou.functions[k];
  }
  return c2.cwiseSqrt();
}

GeneratedModule module_from_projection(const ProjectionField& p, double eps_van) {
  const RVector c = exhaustion_cutoff(*p.space, eps_van);
  std::vector<Section> gens;
  for (int i = 0; i < p.n; ++i) {
    Section g = zero_section(p.space, p.n, FunctionClass::vanishing);
    double biggest = 0.0;
    for (std::size_t v = 0; v < p.matrices.size(); ++v) {
      g.values.col(static_cast<Eigen::Index>(v)) = c[static_cast<Eigen::Index>(v)] * p.matrices[v].col(i);
      biggest = std::max(biggest, p.matrices[v].col(i).norm());
    }
    if (biggest > 1e-14) gens.push_back(std::move(g));
  }
  return GeneratedModule(p.space, p.n, std::move(gens));
}

SpanField span_field(const GeneratedModule& m, double rank_rel) {
  const auto nv = m.space->size();
  SpanField out{ProjectionField(m.space, m.ambient, std::vector<CMatrix>(nv)), std::vector<int>(nv, 0)};
  for (std::size_t v = 0; v < nv; ++v)
    out.projection.matrices[v] = span_projector(m.values_at(static_cast<Vertex>(v)), rank_rel, &out.rank[v]);
  return out;
}

std::optional<NotLocallyTrivial> rank_jump(const DiscreteSpace& space, const std::vector<int>& rank) {
  for (const auto& e : space.edges())
    if (rank[e.a] != rank[e.b]) return NotLocallyTrivial{e.a, e.b, rank[e.a], rank[e.b]};
  return std::nullopt;
}

std::variant<ProjectionField, NotLocallyTrivial> projection_from_module(const GeneratedModule& m, double rank_rel) {
  auto sf = span_field(m, rank_rel);
  if (auto jump = rank_jump(*m.space, sf.rank)) return *jump;
  return std::move(sf.projection);
}

Frame canonical_frame(const GeneratedModule& m, double rank_rel) {
  const auto nv = m.space->size();
  const auto k = static_cast<Eigen::Index>(m.generators.size());
  Frame frame;
  for (Eigen::Index j = 0; j < k; ++j) frame.elements.push_back(zero_section(m.space, m.ambient));
  for (std::size_t v = 0; v < nv; ++v) {
    const CMatrix vals = m.values_at(static_cast<Vertex>(v));
    const CMatrix g = vals.adjoint() * vals;
    HermitianSolver es(g);
    const double top = es.eigenvalues().maxCoeff();
    RVector inv_sqrt = RVector::Zero(k);
    for (Eigen::Index i = 0; i < k; ++i) {
      const double lam = es.eigenvalues()(i);
      if (top > 0.0 && lam > rank_rel * top) inv_sqrt[i] = 1.0 / std::sqrt(lam);
    }
    const CMatrix root = es.eigenvectors() * inv_sqrt.cast<Complex>().asDiagonal() * es.eigenvectors().adjoint();
    const CMatrix e = vals * root;
    for (Eigen::Index j = 0; j < k; ++j) frame.elements[j].values.col(static_cast<Eigen::Index>(v)) = e.col(j);
  }
  return frame;
}

bool rank_grows(const DiscreteSpace& space, std::span<const int> rank) {
  const int top = space.max_level();
  if (top < 2) return false;
  std::vector<int> sup(top + 1, 0);
  for (Vertex v = 0; v < static_cast<Vertex>(space.size()); ++v)
    sup[space.level(v)] = std::max(sup[space.level(v)], rank[v]);
  return sup[top - 2] < sup[top - 1] && sup[top - 1] < sup[top];
}

}  // namespace ncb
