#pragma once

#include <array>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ncbundle/types.hpp"

namespace ncb {

struct Edge {
  Vertex a;
  Vertex b;
  double length;
};

struct Neighbor {
  Vertex v;
  double length;
};

/// Oriented triangle. Indices >= size() of the owning space refer to boundary
/// vertices of a compactification (index size() + b).
using Triangle = std::array<Vertex, 3>;

enum class SpaceFamily { interval, plane, sphere, annulus, disjoint_union, product, custom };

const char* to_string(SpaceFamily f);

class DiscreteSpace;
using SpacePtr = std::shared_ptr<const DiscreteSpace>;

/// Raw construction data for a DiscreteSpace. Validated by the constructor.
struct SpaceData {
  SpaceFamily family = SpaceFamily::custom;
  RMatrix positions;  // dim x n
  std::vector<Edge> edges;
  std::vector<Triangle> triangles;
  std::vector<std::vector<Vertex>> exhaustion;
  std::vector<int> component;  // empty: single component
  int dimension_hint = 0;
  // plane/annulus: ring index per vertex, used for outer/inner boundary cycles
  std::vector<int> ring;
  std::shared_ptr<const DiscreteSpace> factor_x;  // product family only
  std::shared_ptr<const DiscreteSpace> factor_y;
};

/// Finite weighted graph standing in for a locally compact space.
///
/// The exhaustion is a nested list of vertex sets whose last member is the
/// whole vertex set; `level(v)` is the first exhaustion stage containing v.
/// A space with a single exhaustion set models a compact space.
class DiscreteSpace {
 public:
  explicit DiscreteSpace(SpaceData data);

  std::size_t size() const { return static_cast<std::size_t>(data_.positions.cols()); }
  SpaceFamily family() const { return data_.family; }
  int dimension_hint() const { return data_.dimension_hint; }
  int coordinate_dim() const { return static_cast<int>(data_.positions.rows()); }

  const RMatrix& positions() const { return data_.positions; }
  Eigen::VectorXd position(Vertex v) const { return data_.positions.col(v); }
  /// x + i y for spaces with at least two coordinates, x otherwise.
  Complex complex_coordinate(Vertex v) const;

  const std::vector<Edge>& edges() const { return data_.edges; }
  std::span<const Neighbor> neighbors(Vertex v) const;
  const std::vector<Triangle>& triangles() const { return data_.triangles; }

  const std::vector<std::vector<Vertex>>& exhaustion() const { return data_.exhaustion; }
  int level(Vertex v) const { return level_[v]; }
  int max_level() const { return static_cast<int>(data_.exhaustion.size()) - 1; }
  bool is_compact() const { return data_.exhaustion.size() == 1; }

  int component(Vertex v) const { return data_.component.empty() ? 0 : data_.component[v]; }
  int component_count() const { return component_count_; }
  int ring(Vertex v) const { return data_.ring.empty() ? -1 : data_.ring[v]; }
  bool has_rings() const { return !data_.ring.empty(); }

  const SpacePtr& factor_x() const { return data_.factor_x; }
  const SpacePtr& factor_y() const { return data_.factor_y; }

  /// Hop distances from a set of sources; -1 where unreachable.
  std::vector<int> hop_distances(std::span<const Vertex> sources) const;

 private:
  SpaceData data_;
  std::vector<std::vector<Neighbor>> adjacency_;
  std::vector<int> level_;
  int component_count_ = 1;
};

// ---------------------------------------------------------------------------
// mesh descriptions

struct IntervalSpec {
  double lo = 0.0;
  double hi = 10.0;
  int count = 11;
  int tail_lo = 0;  // geometric tail points appended below lo
  int tail_hi = 0;  // ... and above hi
  double tail_ratio = 2.0;
};

/// Polar triangulated disk: a center vertex and rings k = 1..K at radius k*step
/// carrying 6k vertices each, followed by `tail_rings` rings of 6K vertices at
/// radii radius * tail_ratio^t modelling the approach to infinity.
struct PlaneSpec {
  double radius = 5.0;
  double step = 0.5;
  int tail_rings = 0;
  double tail_ratio = 2.0;
};

/// Icosahedral sphere, `level` midpoint subdivisions: 20 * 4^level triangles.
struct SphereSpec {
  int level = 3;
};

/// Annulus r_in <= |z| <= r_out with geometric ring radii.
struct AnnulusSpec {
  double inner_radius = 0.5;
  double outer_radius = 2.0;
  int rings = 9;
  int sectors = 16;
};

struct MeshSpec;

struct UnionSpec {
  std::vector<MeshSpec> parts;
};

struct MeshSpec {
  std::variant<IntervalSpec, PlaneSpec, SphereSpec, AnnulusSpec, UnionSpec> family;
};

SpacePtr build_space(const MeshSpec& spec);

/// Point space: one vertex, compact.
SpacePtr point_space();

// ---------------------------------------------------------------------------
// compactifications

enum class CompactificationKind { one_point, endpoints, radial, product };

const char* to_string(CompactificationKind k);

/// Boundary vertices with nested approach shells of interior vertices.
struct Compactification {
  SpacePtr base;
  CompactificationKind kind = CompactificationKind::one_point;
  std::vector<std::string> labels;
  /// shells[b] is a nested decreasing sequence of interior vertex sets.
  std::vector<std::vector<std::vector<Vertex>>> shells;
  /// Triangles closing the base mesh into a closed surface, when one exists.
  std::vector<Triangle> closure_triangles;

  std::size_t boundary_count() const { return shells.size(); }
  /// Throws InvalidSpec if the shell invariants fail.
  void validate() const;
};

using CompactificationPtr = std::shared_ptr<const Compactification>;

struct CompactificationOptions {
  int sectors = 8;  // radial kind
};

CompactificationPtr attach_compactification(const SpacePtr& space, CompactificationKind kind,
                                            const CompactificationOptions& options = {});

// ---------------------------------------------------------------------------
// covers and partitions of unity

struct Cover {
  SpacePtr space;
  std::vector<std::vector<Vertex>> sets;

  int locally_finite_bound() const;
  /// Throws InvalidSpec if the union misses a vertex or a vertex id is out of range.
  void validate() const;
};

struct ColoredCover {
  Cover cover;
  std::vector<int> color;
  int max_color = 0;  // d': colors are 0..d'

  int color_count() const { return max_color + 1; }
};

struct PartitionOfUnity {
  SpacePtr space;
  std::vector<RVector> functions;  // one per cover set
};

/// Overlapping bands along the exhaustion levels, each 2*width levels thick.
/// The outermost `collar` levels belong to the last set alone.
Cover band_cover(const SpacePtr& space, int width, int collar = 4);

/// Odd bands split into `sectors` overlapping angular pieces (plane-like spaces);
/// even bands and the collar stay whole, so sectors + 1 colours suffice.
Cover sector_band_cover(const SpacePtr& space, int width, int sectors, int collar = 4);

ColoredCover color_cover(const Cover& cover, int max_colors);

PartitionOfUnity partition_of_unity(const ColoredCover& colored);

// ---------------------------------------------------------------------------
// boundary limits

struct BoundaryLimit {
  bool converged = false;
  Complex value{0.0, 0.0};
  double oscillation = 0.0;  // witness: intra-shell diameter or inter-shell jump
};

/// Limit of interior values along the shells of boundary vertex b.
BoundaryLimit boundary_limit(std::span<const Complex> interior_values, const Compactification& c,
                             std::size_t b, double eps);

/// Number of trailing shells inspected by boundary_limit.
inline constexpr int kShellWindow = 3;

}  // namespace ncb
