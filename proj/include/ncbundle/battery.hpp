#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ncbundle/extension.hpp"

namespace ncb {

/// Projection-valued function of position; sampled on a mesh or its refinement.
using FieldFunction = std::function<CMatrix(const Eigen::VectorXd&)>;

struct CoverRecipe {
  int width = 1;
  int sectors = 0;  // 0: plain bands
  int collar = 4;
  int max_colors = 4;
};

struct BundleRecipe {
  std::string name;
  MeshSpec mesh;
  std::optional<CompactificationKind> compactification;
  FieldFunction field;
  int ambient = 1;
  int rank = 1;
  CoverRecipe cover;
};

struct Bundle {
  BundleRecipe recipe;
  SpacePtr space;
  CompactificationPtr compactification;
  ProjectionField p;
  ColoredCover cover;
  PartitionOfUnity pou;

  /// Closed surface available: sphere, or a compactification with closure triangles.
  bool has_surface() const;
};

Bundle realize(const BundleRecipe& recipe);
/// One level finer mesh with the same field and compactification.
BundleRecipe refine(const BundleRecipe& recipe);

/// Smooth bump exp(1 - 1 / (1 - s^2)) for s < 1, zero otherwise.
double smooth_bump(double s);

/// U(x) diag(1_rank, 0) U(x)* with U = exp(i sum_k bump(|x - c_k| / r_k) A_k).
FieldFunction bump_field(int ambient, int rank, std::vector<Eigen::VectorXd> centers, std::vector<double> radii,
                         std::vector<CMatrix> generators);
/// Hopf projection of rho(|z|) e^{i m arg z}: constant near 0 and near infinity, winding m.
FieldFunction twisted_hopf_field(int winding, double r_lo, double r_hi);
/// Hopf projection in the plane (complex coordinate) or on the sphere (3 coordinates).
FieldFunction hopf_field_function();
FieldFunction constant_field_function(const CMatrix& m);
/// Block-diagonal sum of two field functions.
FieldFunction sum_field(FieldFunction a, int na, FieldFunction b, int nb);

/// Randomised bundles over planes, annuli and lines: ranks 1-4, covers of at most
/// 20 sets, 2-4 colours, fields constant near infinity.
std::vector<BundleRecipe> random_battery(int count, std::uint64_t seed);

/// Closed-surface instances for the Chern checks: spheres, compactified planes and annuli.
std::vector<BundleRecipe> surface_battery(int count, std::uint64_t seed);

struct ModuleInstance {
  std::string name;
  SpacePtr space;
  CompactificationPtr compactification;
  GeneratedModule module;
  bool expected = true;  // whether the equivalent conditions should hold
};

/// Generator f e_1 with f vanishing at the origin of a plane mesh.
ModuleInstance rank_drop_module();
/// Disjoint union of four lines; rank n on the n-th component.
ModuleInstance unbounded_rank_module();
/// Hopf projection over the compactified plane, presented by cut-off columns.
ModuleInstance hopf_module(int level = 1);
/// module_from_projection of a realised bundle.
ModuleInstance bundle_module(const Bundle& b);

/// Vertex map phi: source -> target, with the induced map of boundary vertices when both sides are compactified.
struct VertexMap {
  SpacePtr source;
  std::vector<Vertex> phi;
  CompactificationPtr source_compactification;
  std::vector<std::size_t> boundary_map;
};

/// z -> z^2 on an annulus mesh built by the annulus generator: the source has twice the sectors.
VertexMap annulus_double_cover(const SpacePtr& target, const CompactificationPtr& target_c = nullptr);
/// Nearest-vertex map y -> R y for a rotation R by `angle` about (1, 1, 1); degree one.
VertexMap sphere_rotation(const SpacePtr& sphere, double angle);
/// Every vertex of `source` to the single vertex of a point space.
VertexMap collapse_to_point(const SpacePtr& source);
VertexMap identity_map(const SpacePtr& space, const CompactificationPtr& c = nullptr);

}  // namespace ncb
