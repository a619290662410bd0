#include "ncbundle/base_space.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <numbers>
#include <numeric>
#include <set>
#include <unordered_map>

namespace ncb {

const char* to_string(FunctionClass c) {
  switch (c) {
    case FunctionClass::vanishing: return "vanishing";
    case FunctionClass::bounded: return "bounded";
    case FunctionClass::extended: return "extended";
  }
  return "?";
}

const char* to_string(SpaceFamily f) {
  switch (f) {
    case SpaceFamily::interval: return "interval";
    case SpaceFamily::plane: return "plane";
    case SpaceFamily::sphere: return "sphere";
    case SpaceFamily::annulus: return "annulus";
    case SpaceFamily::disjoint_union: return "disjoint_union";
    case SpaceFamily::product: return "product";
    case SpaceFamily::custom: return "custom";
  }
  return "?";
}

const char* to_string(CompactificationKind k) {
  switch (k) {
    case CompactificationKind::one_point: return "one-point";
    case CompactificationKind::endpoints: return "endpoints";
    case CompactificationKind::radial: return "radial";
    case CompactificationKind::product: return "product";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// DiscreteSpace

DiscreteSpace::DiscreteSpace(SpaceData data) : data_(std::move(data)) {
  const auto n = static_cast<Vertex>(data_.positions.cols());
  if (n == 0) throw InvalidSpec("space has no vertices");

  adjacency_.assign(n, {});
  std::set<std::pair<Vertex, Vertex>> seen;
  for (const auto& e : data_.edges) {
    if (e.a < 0 || e.b < 0 || e.a >= n || e.b >= n) throw InvalidSpec("edge endpoint out of range");
    if (e.a == e.b) throw InvalidSpec("self-loop edge");
    if (!(e.length > 0.0)) throw InvalidSpec("edge length must be positive");
    const auto key = std::minmax(e.a, e.b);
    if (!seen.insert(key).second) throw InvalidSpec("duplicate edge");
    adjacency_[e.a].push_back({e.b, e.length});
    adjacency_[e.b].push_back({e.a, e.length});
  }

  // exhaustion: nested, last one is everything
  if (data_.exhaustion.empty()) throw InvalidSpec("empty exhaustion");
  level_.assign(n, -1);
  std::vector<char> in_prev(n, 0);
  for (std::size_t k = 0; k < data_.exhaustion.size(); ++k) {
    std::vector<char> in_cur(n, 0);
    for (Vertex v : data_.exhaustion[k]) {
      if (v < 0 || v >= n) throw InvalidSpec("exhaustion vertex out of range");
      in_cur[v] = 1;
      if (level_[v] < 0) level_[v] = static_cast<int>(k);
    }
    for (Vertex v = 0; v < n; ++v)
      if (in_prev[v] && !in_cur[v]) throw InvalidSpec("exhaustion sets are not nested");
    in_prev = std::move(in_cur);
  }
  for (Vertex v = 0; v < n; ++v)
    if (!in_prev[v]) throw InvalidSpec("exhaustion does not cover every vertex");

  if (data_.component.empty()) {
    // connected components by BFS
    std::vector<int> comp(n, -1);
    int c = 0;
    for (Vertex s = 0; s < n; ++s) {
      if (comp[s] >= 0) continue;
      std::deque<Vertex> q{s};
      comp[s] = c;
      while (!q.empty()) {
        Vertex u = q.front();
        q.pop_front();
        for (const auto& nb : adjacency_[u])
          if (comp[nb.v] < 0) {
            comp[nb.v] = c;
            q.push_back(nb.v);
          }
      }
      ++c;
    }
    component_count_ = c;
    if (c > 1) data_.component = std::move(comp);
  } else {
    if (data_.component.size() != static_cast<std::size_t>(n)) throw InvalidSpec("component size mismatch");
    component_count_ = *std::max_element(data_.component.begin(), data_.component.end()) + 1;
  }
  if (!data_.ring.empty() && data_.ring.size() != static_cast<std::size_t>(n))
    throw InvalidSpec("ring size mismatch");
}

Complex DiscreteSpace::complex_coordinate(Vertex v) const {
  if (coordinate_dim() >= 2) return {data_.positions(0, v), data_.positions(1, v)};
  return {data_.positions(0, v), 0.0};
}

std::span<const Neighbor> DiscreteSpace::neighbors(Vertex v) const { return adjacency_[v]; }

std::vector<int> DiscreteSpace::hop_distances(std::span<const Vertex> sources) const {
  std::vector<int> dist(size(), -1);
  std::deque<Vertex> q;
  for (Vertex s : sources) {
    if (dist[s] < 0) {
      dist[s] = 0;
      q.push_back(s);
    }
  }
  while (!q.empty()) {
    Vertex u = q.front();
    q.pop_front();
    for (const auto& nb : adjacency_[u])
      if (dist[nb.v] < 0) {
        dist[nb.v] = dist[u] + 1;
        q.push_back(nb.v);
      }
  }
  return dist;
}

// ---------------------------------------------------------------------------
// mesh generators

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::vector<Edge> edges_from_triangles(const RMatrix& pos, const std::vector<Triangle>& tris) {
  std::set<std::pair<Vertex, Vertex>> keys;
  for (const auto& t : tris)
    for (int i = 0; i < 3; ++i) keys.insert(std::minmax(t[i], t[(i + 1) % 3]));
  std::vector<Edge> edges;
  edges.reserve(keys.size());
  for (auto [a, b] : keys) edges.push_back({a, b, (pos.col(a) - pos.col(b)).norm()});
  return edges;
}

std::vector<std::vector<Vertex>> exhaustion_from_levels(const std::vector<int>& level) {
  const int top = *std::max_element(level.begin(), level.end());
  std::vector<std::vector<Vertex>> ex(top + 1);
  for (int k = 0; k <= top; ++k)
    for (Vertex v = 0; v < static_cast<Vertex>(level.size()); ++v)
      if (level[v] <= k) ex[k].push_back(v);
  return ex;
}

std::vector<int> hop_levels(Vertex n, const std::vector<Edge>& edges, const std::vector<Vertex>& roots) {
  std::vector<std::vector<Vertex>> adj(n);
  for (const auto& e : edges) {
    adj[e.a].push_back(e.b);
    adj[e.b].push_back(e.a);
  }
  std::vector<int> lvl(n, -1);
  std::deque<Vertex> q;
  for (Vertex r : roots) {
    lvl[r] = 0;
    q.push_back(r);
  }
  while (!q.empty()) {
    Vertex u = q.front();
    q.pop_front();
    for (Vertex w : adj[u])
      if (lvl[w] < 0) {
        lvl[w] = lvl[u] + 1;
        q.push_back(w);
      }
  }
  for (int l : lvl)
    if (l < 0) throw InvalidSpec("mesh is not connected to its root");
  return lvl;
}

// Makes every triangle counter-clockwise in the xy-plane.
void orient_planar(const RMatrix& pos, std::vector<Triangle>& tris) {
  for (auto& t : tris) {
    const Eigen::Vector2d a = pos.col(t[0]).head<2>(), b = pos.col(t[1]).head<2>(), c = pos.col(t[2]).head<2>();
    const Eigen::Vector2d u = b - a, w = c - a;
    if (u.x() * w.y() - u.y() * w.x() < 0) std::swap(t[1], t[2]);
  }
}

// Triangulates the strip between two closed rings listed by increasing angle from 0.
void zip_rings(const std::vector<Vertex>& inner, const std::vector<Vertex>& outer, std::vector<Triangle>& tris) {
  const auto na = inner.size(), nb = outer.size();
  std::size_t i = 0, j = 0;
  while (i < na || j < nb) {
    const double next_a = kTwoPi * static_cast<double>(i + 1) / static_cast<double>(na);
    const double next_b = kTwoPi * static_cast<double>(j + 1) / static_cast<double>(nb);
    if (j == nb || (i < na && next_a <= next_b + 1e-12)) {
      tris.push_back({inner[i % na], outer[j % nb], inner[(i + 1) % na]});
      ++i;
    } else {
      tris.push_back({inner[i % na], outer[j % nb], outer[(j + 1) % nb]});
      ++j;
    }
  }
}

SpacePtr build_interval(const IntervalSpec& s) {
  if (s.count < 1 || s.tail_lo < 0 || s.tail_hi < 0) throw InvalidSpec("interval: non-positive resolution");
  if (s.count > 1 && !(s.hi > s.lo)) throw InvalidSpec("interval: hi must exceed lo");
  if (!(s.tail_ratio >= 1.0)) throw InvalidSpec("interval: tail_ratio must be >= 1");
  const double d0 = s.count > 1 ? (s.hi - s.lo) / (s.count - 1) : 1.0;

  std::vector<double> xs;
  for (int t = s.tail_lo; t >= 1; --t) {
    double off = 0.0, step = d0;
    for (int i = 0; i < t; ++i, step *= s.tail_ratio) off += step;
    xs.push_back(s.lo - off);
  }
  for (int i = 0; i < s.count; ++i) xs.push_back(s.lo + d0 * i);
  for (int t = 1; t <= s.tail_hi; ++t) {
    double off = 0.0, step = d0;
    for (int i = 0; i < t; ++i, step *= s.tail_ratio) off += step;
    xs.push_back(s.hi + off);
  }

  SpaceData d;
  d.family = SpaceFamily::interval;
  d.dimension_hint = 1;
  const auto n = static_cast<Vertex>(xs.size());
  d.positions.resize(1, n);
  for (Vertex v = 0; v < n; ++v) d.positions(0, v) = xs[v];
  for (Vertex v = 0; v + 1 < n; ++v) d.edges.push_back({v, v + 1, xs[v + 1] - xs[v]});

  Vertex root = 0;
  for (Vertex v = 1; v < n; ++v)
    if (std::abs(xs[v]) < std::abs(xs[root])) root = v;
  d.exhaustion = exhaustion_from_levels(hop_levels(n, d.edges, {root}));
  return std::make_shared<DiscreteSpace>(std::move(d));
}

SpacePtr build_plane(const PlaneSpec& s) {
  if (!(s.step > 0.0) || !(s.radius > 0.0) || s.tail_rings < 0) throw InvalidSpec("plane: non-positive resolution");
  if (!(s.tail_ratio > 1.0)) throw InvalidSpec("plane: tail_ratio must exceed 1");
  const int rings = std::max(1, static_cast<int>(std::lround(s.radius / s.step)));
  const double outer_r = rings * s.step;

  std::vector<Eigen::Vector2d> pts{{0.0, 0.0}};
  std::vector<int> ring_of{0};
  std::vector<std::vector<Vertex>> ring_vertices{{0}};
  auto add_ring = [&](int count, double r, int ring_index) {
    std::vector<Vertex> ids;
    for (int j = 0; j < count; ++j) {
      const double a = kTwoPi * j / count;
      ids.push_back(static_cast<Vertex>(pts.size()));
      pts.emplace_back(r * std::cos(a), r * std::sin(a));
      ring_of.push_back(ring_index);
    }
    ring_vertices.push_back(std::move(ids));
  };
  for (int k = 1; k <= rings; ++k) add_ring(6 * k, k * s.step, k);
  double r = outer_r;
  for (int t = 1; t <= s.tail_rings; ++t) {
    r *= s.tail_ratio;
    add_ring(6 * rings, r, rings + t);
  }

  SpaceData d;
  d.family = SpaceFamily::plane;
  d.dimension_hint = 2;
  const auto n = static_cast<Vertex>(pts.size());
  d.positions.resize(2, n);
  for (Vertex v = 0; v < n; ++v) d.positions.col(v) = pts[v];

  const auto& first = ring_vertices[1];
  for (std::size_t j = 0; j < first.size(); ++j) d.triangles.push_back({0, first[j], first[(j + 1) % first.size()]});
  for (std::size_t k = 1; k + 1 < ring_vertices.size(); ++k) zip_rings(ring_vertices[k], ring_vertices[k + 1], d.triangles);
  orient_planar(d.positions, d.triangles);
  d.edges = edges_from_triangles(d.positions, d.triangles);
  d.ring = ring_of;
  d.exhaustion = exhaustion_from_levels(ring_of);
  return std::make_shared<DiscreteSpace>(std::move(d));
}

SpacePtr build_annulus(const AnnulusSpec& s) {
  if (s.rings < 2 || s.sectors < 3) throw InvalidSpec("annulus: non-positive resolution");
  if (!(s.inner_radius > 0.0) || !(s.outer_radius > s.inner_radius)) throw InvalidSpec("annulus: bad radii");
  std::vector<std::vector<Vertex>> ring_vertices;
  std::vector<Eigen::Vector2d> pts;
  std::vector<int> ring_of;
  const double ratio = std::pow(s.outer_radius / s.inner_radius, 1.0 / (s.rings - 1));
  for (int i = 0; i < s.rings; ++i) {
    const double r = s.inner_radius * std::pow(ratio, i);
    std::vector<Vertex> ids;
    for (int j = 0; j < s.sectors; ++j) {
      const double a = kTwoPi * j / s.sectors;
      ids.push_back(static_cast<Vertex>(pts.size()));
      pts.emplace_back(r * std::cos(a), r * std::sin(a));
      ring_of.push_back(i);
    }
    ring_vertices.push_back(std::move(ids));
  }
  SpaceData d;
  d.family = SpaceFamily::annulus;
  d.dimension_hint = 2;
  const auto n = static_cast<Vertex>(pts.size());
  d.positions.resize(2, n);
  for (Vertex v = 0; v < n; ++v) d.positions.col(v) = pts[v];
  for (int i = 0; i + 1 < s.rings; ++i) zip_rings(ring_vertices[i], ring_vertices[i + 1], d.triangles);
  orient_planar(d.positions, d.triangles);
  d.edges = edges_from_triangles(d.positions, d.triangles);
  d.ring = ring_of;
  d.exhaustion = exhaustion_from_levels(hop_levels(n, d.edges, ring_vertices[s.rings / 2]));
  return std::make_shared<DiscreteSpace>(std::move(d));
}

SpacePtr build_sphere(const SphereSpec& s) {
  if (s.level < 0) throw InvalidSpec("sphere: negative subdivision level");
  if (s.level > 7) throw InvalidSpec("sphere: subdivision level above 7 is not supported");
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Eigen::Vector3d> pts = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                                      {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& p : pts) p.normalize();
  std::vector<Triangle> tris = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                                {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                                {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (int l = 0; l < s.level; ++l) {
    std::map<std::pair<Vertex, Vertex>, Vertex> mid;
    auto midpoint = [&](Vertex a, Vertex b) {
      const auto key = std::minmax(a, b);
      if (auto it = mid.find(key); it != mid.end()) return it->second;
      const auto id = static_cast<Vertex>(pts.size());
      pts.push_back((pts[a] + pts[b]).normalized());
      mid.emplace(key, id);
      return id;
    };
    std::vector<Triangle> next;
    next.reserve(tris.size() * 4);
    for (const auto& tr : tris) {
      const Vertex ab = midpoint(tr[0], tr[1]), bc = midpoint(tr[1], tr[2]), ca = midpoint(tr[2], tr[0]);
      next.push_back({tr[0], ab, ca});
      next.push_back({tr[1], bc, ab});
      next.push_back({tr[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    tris = std::move(next);
  }
  SpaceData d;
  d.family = SpaceFamily::sphere;
  d.dimension_hint = 2;
  const auto n = static_cast<Vertex>(pts.size());
  d.positions.resize(3, n);
  for (Vertex v = 0; v < n; ++v) d.positions.col(v) = pts[v];
  // outward normals
  for (auto& tr : tris) {
    const Eigen::Vector3d a = pts[tr[0]], b = pts[tr[1]], c = pts[tr[2]];
    if ((b - a).cross(c - a).dot(a + b + c) < 0) std::swap(tr[1], tr[2]);
  }
  d.triangles = std::move(tris);
  d.edges = edges_from_triangles(d.positions, d.triangles);
  std::vector<Vertex> all(n);
  std::iota(all.begin(), all.end(), 0);
  d.exhaustion = {all};
  return std::make_shared<DiscreteSpace>(std::move(d));
}

SpacePtr build_union(const UnionSpec& s) {
  if (s.parts.empty()) throw InvalidSpec("disjoint union needs at least one part");
  std::vector<SpacePtr> parts;
  int dim = 1, hint = 0;
  for (const auto& p : s.parts) {
    parts.push_back(build_space(p));
    dim = std::max(dim, parts.back()->coordinate_dim());
    hint = std::max(hint, parts.back()->dimension_hint());
  }
  SpaceData d;
  d.family = SpaceFamily::disjoint_union;
  d.dimension_hint = hint;
  Vertex total = 0;
  for (const auto& p : parts) total += static_cast<Vertex>(p->size());
  d.positions = RMatrix::Zero(dim, total);
  d.component.assign(total, 0);
  Vertex offset = 0;
  double shift = 0.0;
  int comp_offset = 0;
  for (std::size_t c = 0; c < parts.size(); ++c) {
    const auto& p = *parts[c];
    const auto n = static_cast<Vertex>(p.size());
    const double lo = p.positions().row(0).minCoeff(), hi = p.positions().row(0).maxCoeff();
    for (Vertex v = 0; v < n; ++v) {
      d.positions.block(0, offset + v, p.coordinate_dim(), 1) = p.positions().col(v);
      d.positions(0, offset + v) += shift - lo;
      d.component[offset + v] = comp_offset + p.component(v);
    }
    shift += (hi - lo) + 1.0;
    for (const auto& e : p.edges()) d.edges.push_back({e.a + offset, e.b + offset, e.length});
    for (const auto& t : p.triangles()) d.triangles.push_back({t[0] + offset, t[1] + offset, t[2] + offset});
    // component c enters the exhaustion at stage c, whole
    std::vector<Vertex> stage = c == 0 ? std::vector<Vertex>{} : d.exhaustion.back();
    for (Vertex v = 0; v < n; ++v) stage.push_back(offset + v);
    d.exhaustion.push_back(std::move(stage));
    offset += n;
    comp_offset += p.component_count();
  }
  return std::make_shared<DiscreteSpace>(std::move(d));
}

}  // namespace

SpacePtr build_space(const MeshSpec& spec) {
  return std::visit(
      [](const auto& s) -> SpacePtr {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, IntervalSpec>) return build_interval(s);
        else if constexpr (std::is_same_v<T, PlaneSpec>) return build_plane(s);
        else if constexpr (std::is_same_v<T, SphereSpec>) return build_sphere(s);
        else if constexpr (std::is_same_v<T, AnnulusSpec>) return build_annulus(s);
        else return build_union(s);
      },
      spec.family);
}

SpacePtr point_space() {
  SpaceData d;
  d.family = SpaceFamily::custom;
  d.positions = RMatrix::Zero(1, 1);
  d.exhaustion = {{0}};
  return std::make_shared<DiscreteSpace>(std::move(d));
}

// ---------------------------------------------------------------------------
// compactifications

namespace {

// Directed boundary edges (u -> v) of the triangulation restricted to `keep`.
std::vector<std::pair<Vertex, Vertex>> boundary_edges(const std::vector<Triangle>& tris) {
  std::set<std::pair<Vertex, Vertex>> directed;
  for (const auto& t : tris)
    for (int i = 0; i < 3; ++i) directed.insert({t[i], t[(i + 1) % 3]});
  std::vector<std::pair<Vertex, Vertex>> out;
  for (auto [u, v] : directed)
    if (!directed.count({v, u})) out.push_back({u, v});
  return out;
}

std::vector<std::vector<Vertex>> complement_shells(const DiscreteSpace& s, const std::vector<char>& side) {
  std::vector<std::vector<Vertex>> shells;
  for (int k = 0; k < s.max_level(); ++k) {
    std::vector<Vertex> shell;
    for (Vertex v = 0; v < static_cast<Vertex>(s.size()); ++v)
      if (s.level(v) > k && side[v]) shell.push_back(v);
    if (!shell.empty()) shells.push_back(std::move(shell));
  }
  return shells;
}

}  // namespace

CompactificationPtr attach_compactification(const SpacePtr& space, CompactificationKind kind,
                                            const CompactificationOptions& options) {
  const auto& s = *space;
  if (s.is_compact()) throw UnsupportedKind("space is already compact; nothing to compactify");
  auto c = std::make_shared<Compactification>();
  c->base = space;
  c->kind = kind;
  const auto n = static_cast<Vertex>(s.size());

  switch (kind) {
    case CompactificationKind::one_point: {
      c->labels = {"infinity"};
      c->shells.push_back(complement_shells(s, std::vector<char>(n, 1)));
      if (s.family() == SpaceFamily::plane) {
        for (auto [u, v] : boundary_edges(s.triangles())) c->closure_triangles.push_back({v, u, n});
      }
      break;
    }
    case CompactificationKind::endpoints: {
      if (s.family() == SpaceFamily::interval) {
        Vertex root = s.exhaustion().front().front();
        const double x0 = s.positions()(0, root);
        std::vector<char> below(n, 0), above(n, 0);
        for (Vertex v = 0; v < n; ++v) {
          below[v] = s.positions()(0, v) < x0;
          above[v] = s.positions()(0, v) > x0;
        }
        auto lo = complement_shells(s, below), hi = complement_shells(s, above);
        if (!lo.empty()) {
          c->labels.push_back("-infinity");
          c->shells.push_back(std::move(lo));
        }
        if (!hi.empty()) {
          c->labels.push_back("+infinity");
          c->shells.push_back(std::move(hi));
        }
      } else if (s.family() == SpaceFamily::annulus) {
        const int mid = s.ring(s.exhaustion().front().front());
        std::vector<char> inner(n, 0), outer(n, 0);
        for (Vertex v = 0; v < n; ++v) {
          inner[v] = s.ring(v) < mid;
          outer[v] = s.ring(v) > mid;
        }
        c->labels = {"inner", "outer"};
        c->shells.push_back(complement_shells(s, inner));
        c->shells.push_back(complement_shells(s, outer));
        int top_ring = 0;
        for (Vertex v = 0; v < n; ++v) top_ring = std::max(top_ring, s.ring(v));
        for (auto [u, v] : boundary_edges(s.triangles())) {
          const Vertex b = s.ring(u) == 0 ? n : n + 1;
          if (s.ring(u) == 0 || s.ring(u) == top_ring) c->closure_triangles.push_back({v, u, b});
        }
      } else {
        throw UnsupportedKind("endpoints compactification needs an interval or annulus mesh");
      }
      break;
    }
    case CompactificationKind::radial: {
      if (s.family() != SpaceFamily::plane) throw UnsupportedKind("radial compactification needs a plane mesh");
      if (options.sectors < 1) throw InvalidSpec("radial compactification needs at least one sector");
      for (int sec = 0; sec < options.sectors; ++sec) {
        std::vector<char> side(n, 0);
        for (Vertex v = 0; v < n; ++v) {
          double a = std::atan2(s.positions()(1, v), s.positions()(0, v));
          if (a < 0) a += kTwoPi;
          const int k = std::min(options.sectors - 1, static_cast<int>(a / kTwoPi * options.sectors));
          side[v] = (k == sec);
        }
        c->labels.push_back("sector " + std::to_string(sec));
        c->shells.push_back(complement_shells(s, side));
      }
      break;
    }
    case CompactificationKind::product:
      throw UnsupportedKind("product compactifications are built from two factors");
  }
  c->validate();
  return c;
}

void Compactification::validate() const {
  const auto& s = *base;
  const auto n = static_cast<Vertex>(s.size());
  if (shells.empty()) throw InvalidSpec("compactification without boundary vertices");
  for (std::size_t b = 0; b < shells.size(); ++b) {
    const auto& seq = shells[b];
    if (seq.empty()) throw InvalidSpec("boundary vertex " + labels.at(b) + " has no shells");
    for (std::size_t k = 0; k < seq.size(); ++k) {
      if (seq[k].empty()) throw InvalidSpec("empty shell");
      for (Vertex v : seq[k])
        if (v < 0 || v >= n) throw InvalidSpec("shell vertex out of range");
      if (k > 0) {
        std::vector<Vertex> prev = seq[k - 1], cur = seq[k];
        std::sort(prev.begin(), prev.end());
        std::sort(cur.begin(), cur.end());
        if (!std::includes(prev.begin(), prev.end(), cur.begin(), cur.end()))
          throw InvalidSpec("shells are not nested");
      }
    }
    // eventually outside every proper exhaustion set: the last shell sits in the outermost increment
    if (s.max_level() > 0) {
      int lowest = s.max_level();
      for (Vertex v : seq.back()) lowest = std::min(lowest, s.level(v));
      if (lowest < s.max_level())
        throw InvalidSpec("shells of " + labels.at(b) + " never leave exhaustion set " + std::to_string(lowest));
    }
  }
  // every route to infinity is captured: the outermost increment lies in some last shell
  if (kind != CompactificationKind::product && s.max_level() > 0) {
    std::vector<char> captured(n, 0);
    for (const auto& seq : shells)
      for (Vertex v : seq.back()) captured[v] = 1;
    for (Vertex v = 0; v < n; ++v)
      if (s.level(v) == s.max_level() && !captured[v])
        throw InvalidSpec("vertex " + std::to_string(v) + " escapes to infinity without a boundary vertex");
  }
}

// ---------------------------------------------------------------------------
// covers

int Cover::locally_finite_bound() const {
  std::vector<int> count(space->size(), 0);
  for (const auto& set : sets)
    for (Vertex v : set) ++count[v];
  return count.empty() ? 0 : *std::max_element(count.begin(), count.end());
}

void Cover::validate() const {
  const auto n = static_cast<Vertex>(space->size());
  std::vector<char> hit(n, 0);
  for (const auto& set : sets)
    for (Vertex v : set) {
      if (v < 0 || v >= n) throw InvalidSpec("cover vertex out of range");
      hit[v] = 1;
    }
  for (Vertex v = 0; v < n; ++v)
    if (!hit[v]) throw InvalidSpec("cover misses vertex " + std::to_string(v));
}

namespace {

// Level ranges [lo, hi] of the bands used by band_cover / sector_band_cover.
std::vector<std::pair<int, int>> band_ranges(int top, int width, int collar) {
  if (width < 1) throw InvalidSpec("band width must be positive");
  if (top == 0) return {{0, 0}};
  const int cut = std::max(1, top - std::max(collar, 1) + 1);
  std::vector<std::pair<int, int>> out;
  for (int k = 0;; ++k) {
    const int lo = k * width;
    if (lo + 2 * width >= cut) {
      out.push_back({lo, top});
      break;
    }
    out.push_back({lo, lo + 2 * width - 1});
  }
  return out;
}

}  // namespace

Cover band_cover(const SpacePtr& space, int width, int collar) {
  Cover c{space, {}};
  for (auto [lo, hi] : band_ranges(space->max_level(), width, collar)) {
    std::vector<Vertex> set;
    for (Vertex v = 0; v < static_cast<Vertex>(space->size()); ++v)
      if (space->level(v) >= lo && space->level(v) <= hi) set.push_back(v);
    if (!set.empty()) c.sets.push_back(std::move(set));
  }
  c.validate();
  return c;
}

Cover sector_band_cover(const SpacePtr& space, int width, int sectors, int collar) {
  if (space->coordinate_dim() < 2) throw InvalidSpec("sector cover needs planar coordinates");
  if (sectors < 1) throw InvalidSpec("sector count must be positive");
  const auto ranges = band_ranges(space->max_level(), width, collar);
  const double span = kTwoPi / sectors;
  Cover c{space, {}};
  for (std::size_t k = 0; k < ranges.size(); ++k) {
    const auto [lo, hi] = ranges[k];
    const bool whole = (k % 2 == 0 || k + 1 == ranges.size() || sectors == 1);
    for (int sec = 0; sec < (whole ? 1 : sectors); ++sec) {
      std::vector<Vertex> set;
      for (Vertex v = 0; v < static_cast<Vertex>(space->size()); ++v) {
        const int l = space->level(v);
        if (l < lo || l > hi) continue;
        if (!whole) {
          double a = std::atan2(space->positions()(1, v), space->positions()(0, v));
          if (a < 0) a += kTwoPi;
          // sector [sec*span - span/4, (sec+1)*span + span/4) modulo 2 pi
          double rel = std::fmod(a - sec * span + span / 4 + 2 * kTwoPi, kTwoPi);
          if (rel >= 1.5 * span) continue;
        }
        set.push_back(v);
      }
      if (!set.empty()) c.sets.push_back(std::move(set));
    }
  }
  c.validate();
  return c;
}

ColoredCover color_cover(const Cover& cover, int max_colors) {
  cover.validate();
  const auto m = cover.sets.size();
  std::vector<std::vector<int>> sets_at(cover.space->size());
  for (std::size_t i = 0; i < m; ++i)
    for (Vertex v : cover.sets[i]) sets_at[v].push_back(static_cast<int>(i));
  std::vector<std::set<int>> adj(m);
  for (const auto& here : sets_at)
    for (int a : here)
      for (int b : here)
        if (a != b) adj[a].insert(b);

  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return adj[a].size() > adj[b].size(); });

  ColoredCover out{cover, std::vector<int>(m, -1), 0};
  for (int i : order) {
    std::set<int> used;
    for (int j : adj[i])
      if (out.color[j] >= 0) used.insert(out.color[j]);
    int col = 0;
    while (used.count(col)) ++col;
    if (col >= max_colors)
      throw DimensionExceeded("greedy colouring needs more than " + std::to_string(max_colors) +
                              " colours; refine the cover");
    out.color[i] = col;
    out.max_color = std::max(out.max_color, col);
  }
  return out;
}

PartitionOfUnity partition_of_unity(const ColoredCover& colored) {
  const auto& cover = colored.cover;
  const auto& s = *cover.space;
  const auto n = static_cast<Vertex>(s.size());
  PartitionOfUnity pou{cover.space, {}};
  RVector total = RVector::Zero(n);
  for (const auto& set : cover.sets) {
    if (set.empty()) throw EmptyCoverSet("cover set has no vertices");
    std::vector<char> in(n, 0);
    for (Vertex v : set) in[v] = 1;
    std::vector<Vertex> outside;
    for (Vertex v = 0; v < n; ++v)
      if (!in[v]) outside.push_back(v);
    const auto dist = s.hop_distances(outside);
    RVector tent = RVector::Zero(n);
    for (Vertex v : set) tent[v] = dist[v] > 0 ? static_cast<double>(dist[v]) : 1.0;
    total += tent;
    pou.functions.push_back(std::move(tent));
  }
  for (auto& h : pou.functions) h = h.cwiseQuotient(total);
  return pou;
}

// ---------------------------------------------------------------------------
// boundary limits

namespace {

double diameter(std::span<const Complex> values, const std::vector<Vertex>& shell) {
  if (shell.size() > 4096) {
    Complex mean = 0;
    for (Vertex v : shell) mean += values[v];
    mean /= static_cast<double>(shell.size());
    double r = 0;
    for (Vertex v : shell) r = std::max(r, std::abs(values[v] - mean));
    return 2 * r;
  }
  double d = 0;
  for (std::size_t i = 0; i < shell.size(); ++i)
    for (std::size_t j = i + 1; j < shell.size(); ++j) d = std::max(d, std::abs(values[shell[i]] - values[shell[j]]));
  return d;
}

}  // namespace

BoundaryLimit boundary_limit(std::span<const Complex> interior_values, const Compactification& c, std::size_t b,
                             double eps) {
  if (interior_values.size() != c.base->size()) throw ShapeMismatch("boundary_limit: value count differs from space");
  const auto& seq = c.shells.at(b);
  const int m = static_cast<int>(seq.size());
  const int first = std::max(0, m - kShellWindow);

  std::vector<Complex> avg;
  for (int k = first; k < m; ++k) {
    Complex a = 0;
    for (Vertex v : seq[k]) a += interior_values[v];
    avg.push_back(a / static_cast<double>(seq[k].size()));
  }
  double inter = 0;
  for (const auto& a : avg) inter = std::max(inter, std::abs(a - avg.back()));
  const double intra = diameter(interior_values, seq[first]);

  BoundaryLimit out;
  out.value = avg.back();
  out.oscillation = std::max(inter, intra);
  out.converged = out.oscillation <= eps;
  return out;
}

}  // namespace ncb
