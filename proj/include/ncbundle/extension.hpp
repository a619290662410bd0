#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ncbundle/module_core.hpp"

namespace ncb {

/// A boundary value that had to be adjoined to the algebra: entry (i, j) of the
/// Gram field has a nonzero limit at boundary vertex `boundary`.
struct AdjoinedValue {
  int i = 0;
  int j = 0;
  std::size_t boundary = 0;
  Complex value;
};

struct ExtensionVerdicts {
  bool projective_over_unitisation = false;  // (1)
  bool multiplier_projective_implied = false;  // (2), never tested directly
  bool finitely_generated_over_multipliers = false;  // (3)
  bool left_full = false;  // (4)
};

struct ExtensionResult {
  ProjectionField projection;  // Gram field with boundary values
  std::vector<AdjoinedValue> unitisation_report;
  double snap_residual = 0.0;  // distance from boundary limits to the nearest projection
  double fullness_defect = 0.0;
  std::vector<int> boundary_rank;
  ExtensionVerdicts verdicts;
};

/// Witness that some frame datum has no limit at a boundary vertex.
/// Gram entries report (i, j); coordinates of extended-class elements report
/// (element, coordinate) with i = j = -1.
struct NotExtendable {
  int i = -1;
  int j = -1;
  int element = -1;
  int coordinate = -1;
  std::size_t boundary = 0;
  std::string label;
  double oscillation = 0.0;

  std::string describe() const;
};

using ExtensionOutcome = std::variant<ExtensionResult, NotExtendable>;

/// Boundary limits of every Gram entry (and of every coordinate of extended-class
/// frame elements) at every boundary vertex; the limits are snapped to the nearest
/// projection and the residual recorded.
ExtensionOutcome extend_projection(const Frame& frame, const CompactificationPtr& c, const Tolerances& tol = {});

/// Boundary limits of the matrix entries of p itself.
std::variant<ProjectionField, NotExtendable> extend_field(const ProjectionField& p, const CompactificationPtr& c,
                                                          double eps_bnd = 1e-6);

/// sup_x || sum_i Theta_{xi_i, xi_i}(x) - p(x) ||, without any range requirement.
double left_fullness_defect(const ProjectionField& p, const Frame& candidate);

struct EquivalenceReport {
  bool condition1 = false;
  bool condition2_implied = false;
  bool condition3 = false;
  bool condition4 = false;
  bool condition5 = false;
  std::optional<NotLocallyTrivial> rank_jump;
  bool rank_growth = false;
  double fullness_defect = -1.0;
  std::optional<NotExtendable> divergence;
  std::string failure;  // first construction step that failed, if any
  int frame_size = 0;

  bool all_equal() const {
    return condition1 == condition3 && condition3 == condition4 && condition4 == condition5;
  }
};

struct EquivalenceOptions {
  Tolerances tol;
  int band_width = 1;
  int collar = 4;
  int max_colors = 4;
};

/// Verdicts for the four equivalent conditions. Throws InternalInconsistency if they disagree.
EquivalenceReport equivalence_report(const GeneratedModule& m, const CompactificationPtr& c,
                                     const EquivalenceOptions& options = {});

// ---------------------------------------------------------------------------
// products, tensors, pushforwards, suspension

/// Cartesian product graph; vertex (x, y) has index x * |Y| + y. Exhaustion sets
/// advance both factors proportionally. Throws ProductTooLarge above the budget.
SpacePtr product_space(const SpacePtr& x, const SpacePtr& y, std::size_t vertex_budget = 250000);

inline Vertex product_vertex(const DiscreteSpace& product, Vertex x, Vertex y) {
  return x * static_cast<Vertex>(product.factor_y()->size()) + y;
}

/// Boundary of X^c x Y^c minus X x Y. Either factor compactification may be null
/// when that factor is compact.
CompactificationPtr product_compactification(const SpacePtr& product, const CompactificationPtr& cx,
                                             const CompactificationPtr& cy);

/// (p (x) q)(x, y) = p(x) kron q(y).
ProjectionField external_tensor(const ProjectionField& p, const ProjectionField& q, std::size_t vertex_budget = 250000);

/// q(y) = p(phi(y)). `boundary_map`, when given, sends the boundary vertices of
/// `target_c` (a compactification of Y) to those of p's compactification.
ProjectionField pushforward(const ProjectionField& p, const SpacePtr& y, const std::vector<Vertex>& phi,
                            const CompactificationPtr& target_c = nullptr,
                            const std::vector<std::size_t>& boundary_map = {});

struct Suspension {
  SpacePtr space;  // line x base
  ProjectionField projection;
  Frame frame;  // {1 (x) xi_j}
  double frame_defect = 0.0;
  CompactificationPtr compactification;
  std::optional<ExtensionOutcome> extension;
};

/// Suspended projection over line x X, constant along the line, with the lifted
/// frame. When the base compactification is given the extension over
/// [-inf, inf] x X^c is attempted.
Suspension suspend(const ProjectionField& p, const Frame& frame, const SpacePtr& line,
                   const CompactificationPtr& base_c = nullptr, const Tolerances& tol = {});

/// Restriction of a product field to the slice {t} x X (t a vertex of the first factor).
ProjectionField slice_first(const ProjectionField& product_field, Vertex t);
/// Restriction to X x {y}.
ProjectionField slice_second(const ProjectionField& product_field, Vertex y);

/// Block-diagonal p (+) q.
ProjectionField direct_sum(const ProjectionField& p, const ProjectionField& q);

}  // namespace ncb
