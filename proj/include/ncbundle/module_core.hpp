#pragma once

#include <memory>
#include <optional>
#include <variant>
#include <vector>

#include "ncbundle/function_algebra.hpp"

namespace ncb {

/// Section of the trivial bundle X x C^N: one column of `values` per vertex.
struct Section {
  SpacePtr space;
  int ambient = 0;
  CMatrix values;  // ambient x |V|
  FunctionClass cls = FunctionClass::bounded;
  CompactificationPtr compactification;  // extended class only
  CMatrix boundary_values;               // ambient x |boundary|

  Section() = default;
  Section(SpacePtr s, CMatrix v, FunctionClass c = FunctionClass::bounded)
      : space(std::move(s)), ambient(static_cast<int>(v.rows())), values(std::move(v)), cls(c) {}

  auto at(Vertex v) const { return values.col(v); }
  std::size_t size() const { return static_cast<std::size_t>(values.cols()); }
};

Section zero_section(const SpacePtr& space, int ambient, FunctionClass c = FunctionClass::bounded);
/// g * a (right module action).
Section operator*(const Section& g, const FunctionElement& a);
Section operator+(const Section& a, const Section& b);
/// Constant coefficients: sum_k coeffs[k] * sections[k].
Section combine(std::span<const Section> sections, const CVector& coeffs);

/// Finitely generated module of sections in a common ambient C^N.
struct GeneratedModule {
  SpacePtr space;
  int ambient = 0;
  std::vector<Section> generators;

  GeneratedModule() = default;
  GeneratedModule(SpacePtr s, int n, std::vector<Section> gens);

  /// N x k matrix of generator values at v.
  CMatrix values_at(Vertex v) const;
  /// G_ij(v) = <g_i(v), g_j(v)>.
  CMatrix gram(Vertex v) const;
};

/// Hermitian idempotent matrix per vertex (and per boundary vertex when extended).
struct ProjectionField {
  SpacePtr space;
  int n = 0;
  std::vector<CMatrix> matrices;
  CompactificationPtr compactification;
  std::vector<CMatrix> boundary;

  ProjectionField() = default;
  ProjectionField(SpacePtr s, int dim, std::vector<CMatrix> m) : space(std::move(s)), n(dim), matrices(std::move(m)) {}

  bool extended() const { return compactification != nullptr && !boundary.empty(); }
  /// Value at an interior vertex or, for index >= |V|, at boundary vertex index - |V|.
  const CMatrix& at(Vertex v) const;
  std::size_t total_vertices() const { return matrices.size() + boundary.size(); }
};

struct ProjectionResiduals {
  double idempotent = 0.0;
  double hermitian = 0.0;
  double max_edge_jump = 0.0;  // max ||p(a) - p(b)|| over edges
  double edge_oscillation = 0.0;  // max ||p(a) - p(b)|| / length
};

ProjectionResiduals residuals(const ProjectionField& p);

/// Constant field equal to m everywhere.
ProjectionField constant_field(const SpacePtr& space, const CMatrix& m);

/// Matrix field, not necessarily a projection.
struct OperatorField {
  SpacePtr space;
  int n = 0;
  std::vector<CMatrix> matrices;
  bool positive = false;

  OperatorField() = default;
  OperatorField(SpacePtr s, int dim, std::vector<CMatrix> m, bool pos = false)
      : space(std::move(s)), n(dim), matrices(std::move(m)), positive(pos) {}
};

OperatorField operator+(const OperatorField& a, const OperatorField& b);
OperatorField adjoint(const OperatorField& t);
/// sup over vertices of the operator norm.
double sup_norm(const OperatorField& t);
Section apply(const OperatorField& t, const Section& g);

/// Ordered family of sections, optionally tied to the projection it frames.
struct Frame {
  std::vector<Section> elements;
  bool finite = true;
  std::shared_ptr<const ProjectionField> context;

  SpacePtr space() const { return elements.empty() ? nullptr : elements.front().space; }
  int ambient() const { return elements.empty() ? 0 : elements.front().ambient; }
  /// N x k matrix of element values at v.
  CMatrix values_at(Vertex v) const;
};

// ---------------------------------------------------------------------------
// numerical rank and spectral helpers

/// Rank of a positive semidefinite matrix: eigenvalues above rel * max eigenvalue.
int numerical_rank(const CMatrix& psd, double rel);
/// Orthogonal projection onto the span of the columns of `v`.
CMatrix span_projector(const CMatrix& v, double rel, int* rank = nullptr);
/// Orthonormal basis (columns) of the range of a Hermitian projection.
CMatrix range_basis(const CMatrix& p, double threshold = 0.5);
double operator_norm(const CMatrix& m);

// ---------------------------------------------------------------------------
// operations

FunctionElement inner_product(const Section& e, const Section& f);
OperatorField theta(const Section& e, const Section& f);
/// sum_j Theta_{e_j, e_j}
OperatorField frame_operator(const Frame& frame);

/// sup over vertices of || sum_j Theta_{e_j,e_j}(x) - p(x) ||; throws NotInRange when an element leaves range p.
double frame_defect(const ProjectionField& p, const Frame& frame, double range_tol = 1e-9);

/// Orthonormal frame of range p over a vertex set, seeded at the vertex deepest
/// inside the set and propagated to neighbours by projecting and re-orthonormalising.
/// Returns one N x n matrix per vertex of `set` (same order). Throws LocalFrameInvalid
/// when the rank is not constant on the set.
std::vector<CMatrix> local_trivialization(const ProjectionField& p, std::span<const Vertex> set,
                                          double rank_rel = 1e-8);

/// Per cover set: one N x n matrix per vertex of the set.
using LocalFrames = std::vector<std::vector<CMatrix>>;

LocalFrames local_trivializations(const ProjectionField& p, const Cover& cover, double rank_rel = 1e-8);

/// The sections f_{U,j} = sqrt(h_U) b_{U,j}, one per cover set and basis index, in cover order.
/// Marked as a (truncated) countable frame: finite = false.
Frame partition_family(const ProjectionField& p, const ColoredCover& colored, const PartitionOfUnity& pou,
                       const LocalFrames& local, double tol = 1e-9);

/// F_{i,j} = sum over sets U of colour i of f_{U,j}; (d'+1) * n bounded sections.
Frame frame_from_partition(const ProjectionField& p, const ColoredCover& colored, const PartitionOfUnity& pou,
                           const LocalFrames& local, double tol = 1e-9);
Frame frame_from_partition(const ProjectionField& p, const ColoredCover& colored, const PartitionOfUnity& pou,
                           double tol = 1e-9);

/// Kasparov stabilisation of a finite frame: v(e) = ((e_j | e))_j and p_out = v v*.
struct Stabilization {
  Frame frame;
  ProjectionField p_out;
  double idempotency_defect = 0.0;

  /// v applied to a section of the framed module; result lives in C^{|frame|}.
  Section apply(const Section& e) const;
};

Stabilization stabilize(const Frame& frame, double eps_frame = 1e-9);

/// Generators c * p e_i with a strictly positive cutoff c decaying along the exhaustion.
GeneratedModule module_from_projection(const ProjectionField& p, double eps_van = 1e-6);
/// The cutoff used by module_from_projection.
RVector exhaustion_cutoff(const DiscreteSpace& space, double eps_van = 1e-6);

struct NotLocallyTrivial {
  Vertex a = -1;
  Vertex b = -1;
  int rank_a = 0;
  int rank_b = 0;
};

/// Fiberwise projection onto the generator span and its rank, with no continuity gate.
struct SpanField {
  ProjectionField projection;
  std::vector<int> rank;
};
SpanField span_field(const GeneratedModule& m, double rank_rel = 1e-8);

/// First edge with unequal ranks, if any.
std::optional<NotLocallyTrivial> rank_jump(const DiscreteSpace& space, const std::vector<int>& rank);

std::variant<ProjectionField, NotLocallyTrivial> projection_from_module(const GeneratedModule& m,
                                                                        double rank_rel = 1e-8);

/// Parseval frame e_j = V G^{+1/2} e_j of the generator span; finite, bounded class.
Frame canonical_frame(const GeneratedModule& m, double rank_rel = 1e-8);

/// True when the per-level sup of `rank` strictly increases over the last three
/// exhaustion increments (desk-scale proxy for an unbounded rank function).
bool rank_grows(const DiscreteSpace& space, std::span<const int> rank);

}  // namespace ncb
