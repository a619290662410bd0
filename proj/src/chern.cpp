#include "ncbundle/chern.hpp"

#include <cmath>
#include <numbers>
#include <set>

namespace ncb {

SurfaceMesh closed_surface(const ProjectionField& p) {
  SurfaceMesh mesh{p.total_vertices(), p.space->triangles()};
  if (p.extended()) {
    const auto& extra = p.compactification->closure_triangles;
    mesh.triangles.insert(mesh.triangles.end(), extra.begin(), extra.end());
  }
  return mesh;
}

void check_closed_oriented(const SurfaceMesh& mesh) {
  if (mesh.triangles.empty()) throw NotClosedSurface("surface has no triangles");
  std::set<std::pair<Vertex, Vertex>> directed;
  for (const auto& t : mesh.triangles) {
    for (int i = 0; i < 3; ++i) {
      const Vertex a = t[i], b = t[(i + 1) % 3];
      if (a < 0 || static_cast<std::size_t>(a) >= mesh.vertex_count) throw NotClosedSurface("triangle vertex out of range");
      if (!directed.insert({a, b}).second)
        throw NotClosedSurface("edge " + std::to_string(a) + "-" + std::to_string(b) +
                               " is traversed twice in the same direction");
    }
  }
  for (auto [a, b] : directed)
    if (!directed.count({b, a}))
      throw NotClosedSurface("edge " + std::to_string(a) + "-" + std::to_string(b) + " lies in only one triangle");
}

ChernResult chern_number(const ProjectionField& p, const SurfaceMesh& mesh) {
  check_closed_oriented(mesh);
  if (mesh.vertex_count > p.total_vertices()) throw ShapeMismatch("surface uses vertices without field values");

  std::vector<CMatrix> basis(mesh.vertex_count);
  int rank = -1;
  for (std::size_t v = 0; v < mesh.vertex_count; ++v) {
    basis[v] = range_basis(p.at(static_cast<Vertex>(v)));
    const int r = static_cast<int>(basis[v].cols());
    if (rank < 0) rank = r;
    if (r != rank)
      throw RankNotConstant("rank " + std::to_string(r) + " at vertex " + std::to_string(v) + ", expected " +
                            std::to_string(rank));
  }

  ChernResult out;
  out.mesh_triangles = mesh.triangles.size();
  if (rank == 0) return out;
  auto overlap = [&](Vertex a, Vertex b) {
    const Complex d = (basis[a].adjoint() * basis[b]).determinant();
    out.min_overlap = std::min(out.min_overlap, std::abs(d));
    return d;
  };
  double total = 0.0;
  for (const auto& t : mesh.triangles) {
    const Complex w = overlap(t[0], t[1]) * overlap(t[1], t[2]) * overlap(t[2], t[0]);
    total += std::arg(w);
  }
  out.raw = total / (2.0 * std::numbers::pi);
  out.value = static_cast<int>(std::lround(out.raw));
  return out;
}

ChernResult chern_number(const ProjectionField& p) { return chern_number(p, closed_surface(p)); }

}  // namespace ncb
