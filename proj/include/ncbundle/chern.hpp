#pragma once

#include <vector>

#include "ncbundle/module_core.hpp"

namespace ncb {

/// Closed oriented triangulated surface over interior + boundary vertex indices.
struct SurfaceMesh {
  std::size_t vertex_count = 0;
  std::vector<Triangle> triangles;
};

/// The space's triangles, plus the closure triangles of p's compactification when p is extended.
SurfaceMesh closed_surface(const ProjectionField& p);

/// Throws NotClosedSurface unless every directed edge appears once and its reverse once.
void check_closed_oriented(const SurfaceMesh& mesh);

struct ChernResult {
  int value = 0;
  double raw = 0.0;
  std::size_t mesh_triangles = 0;
  double min_overlap = 1.0;  // smallest |det| of a neighbouring frame overlap
};

/// Sum over triangles of arg(det(Ba*Bb) det(Bb*Bc) det(Bc*Ba)) / 2 pi, where B_v
/// is an orthonormal basis of range p(v). Triangles are traversed counterclockwise
/// seen from the outward normal.
ChernResult chern_number(const ProjectionField& p, const SurfaceMesh& mesh);
ChernResult chern_number(const ProjectionField& p);

}  // namespace ncb
