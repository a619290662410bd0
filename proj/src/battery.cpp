#include "ncbundle/battery.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "ncbundle/hopf.hpp"

namespace ncb {

namespace {

constexpr double kPi = std::numbers::pi;

CMatrix unitary_exp(const CMatrix& h) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h);
  CVector phase(h.rows());
  for (Eigen::Index i = 0; i < h.rows(); ++i) phase[i] = std::polar(1.0, es.eigenvalues()(i));
  return es.eigenvectors() * phase.asDiagonal() * es.eigenvectors().adjoint();
}

CMatrix random_hermitian(int n, double norm, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  CMatrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = Complex(g(rng), g(rng));
  CMatrix h = 0.5 * (a + a.adjoint());
  return h * (norm / operator_norm(h));
}

double uniform(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
int uniform_int(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

std::mt19937_64 substream(std::uint64_t seed, int index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index)};
  return std::mt19937_64(seq);
}

Eigen::VectorXd planar_point(double r, double angle) {
  Eigen::VectorXd c(2);
  c << r * std::cos(angle), r * std::sin(angle);
  return c;
}

FieldFunction random_bumps(std::mt19937_64& rng, int ambient, int rank, int count,
                           const std::function<Eigen::VectorXd()>& center, double r_lo, double r_hi, double amp_lo,
                           double amp_hi) {
  std::vector<Eigen::VectorXd> centers;
  std::vector<double> radii;
  std::vector<CMatrix> gens;
  for (int k = 0; k < count; ++k) {
    centers.push_back(center());
    radii.push_back(uniform(rng, r_lo, r_hi));
    gens.push_back(random_hermitian(ambient, uniform(rng, amp_lo, amp_hi), rng));
  }
  return bump_field(ambient, rank, std::move(centers), std::move(radii), std::move(gens));
}

Eigen::VectorXd random_sphere_point(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::VectorXd c(3);
  c << g(rng), g(rng), g(rng);
  return c.normalized();
}

}  // namespace

bool Bundle::has_surface() const {
  if (space->family() == SpaceFamily::sphere) return true;
  return compactification && !compactification->closure_triangles.empty();
}

double smooth_bump(double s) {
  if (s >= 1.0) return 0.0;
  return std::exp(1.0 - 1.0 / (1.0 - s * s));
}

FieldFunction bump_field(int ambient, int rank, std::vector<Eigen::VectorXd> centers, std::vector<double> radii,
                         std::vector<CMatrix> generators) {
  if (rank < 0 || rank > ambient) throw InvalidSpec("bump field rank out of range");
  if (centers.size() != radii.size() || centers.size() != generators.size()) throw ShapeMismatch("bump field data");
  CMatrix base = CMatrix::Zero(ambient, ambient);
  for (int i = 0; i < rank; ++i) base(i, i) = 1.0;
  return [=](const Eigen::VectorXd& x) {
    CMatrix h = CMatrix::Zero(ambient, ambient);
    for (std::size_t k = 0; k < centers.size(); ++k) {
      const auto d = static_cast<Eigen::Index>(std::min(centers[k].size(), x.size()));
      const double w = smooth_bump((x.head(d) - centers[k].head(d)).norm() / radii[k]);
      if (w > 0.0) h += w * generators[k];
    }
    if (h.cwiseAbs().maxCoeff() == 0.0) return base;
    const CMatrix u = unitary_exp(h);
    return CMatrix(u * base * u.adjoint());
  };
}

FieldFunction twisted_hopf_field(int winding, double r_lo, double r_hi) {
  if (!(r_hi > r_lo) || r_lo < 0) throw InvalidSpec("twisted field radii");
  return [=](const Eigen::VectorXd& x) {
    const double r = std::hypot(x[0], x[1]);
    if (r <= r_lo) return hopf_projection(Complex(0.0, 0.0));
    CMatrix far = CMatrix::Zero(2, 2);
    far(1, 1) = 1.0;
    if (r >= r_hi) return far;
    double t = (r - r_lo) / (r_hi - r_lo);
    t = t * t * (3 - 2 * t);
    const double rho = std::tan(0.5 * kPi * t);
    return hopf_projection(std::polar(rho, winding * std::atan2(x[1], x[0])));
  };
}

FieldFunction hopf_field_function() {
  return [](const Eigen::VectorXd& x) {
    if (x.size() >= 3) return hopf_projection(Eigen::Vector3d(x.head<3>()));
    return hopf_projection(Complex(x[0], x.size() > 1 ? x[1] : 0.0));
  };
}

FieldFunction constant_field_function(const CMatrix& m) {
  return [m](const Eigen::VectorXd&) { return m; };
}

FieldFunction sum_field(FieldFunction a, int na, FieldFunction b, int nb) {
  return [=](const Eigen::VectorXd& x) {
    CMatrix m = CMatrix::Zero(na + nb, na + nb);
    m.topLeftCorner(na, na) = a(x);
    m.bottomRightCorner(nb, nb) = b(x);
    return m;
  };
}

Bundle realize(const BundleRecipe& recipe) {
  Bundle b;
  b.recipe = recipe;
  b.space = build_space(recipe.mesh);
  if (recipe.compactification) b.compactification = attach_compactification(b.space, *recipe.compactification);
  const auto n = b.space->size();
  b.p = ProjectionField(b.space, recipe.ambient, std::vector<CMatrix>(n));
  for (std::size_t v = 0; v < n; ++v) {
    b.p.matrices[v] = recipe.field(b.space->position(static_cast<Vertex>(v)));
    if (b.p.matrices[v].rows() != recipe.ambient) throw ShapeMismatch("field function returns the wrong size");
  }
  const auto& cr = recipe.cover;
  const Cover cover = cr.sectors > 0 ? sector_band_cover(b.space, cr.width, cr.sectors, cr.collar)
                                     : band_cover(b.space, cr.width, cr.collar);
  b.cover = color_cover(cover, cr.max_colors);
  b.pou = partition_of_unity(b.cover);
  return b;
}

namespace {

MeshSpec refine_mesh(const MeshSpec& m) {
  return std::visit(
      [](const auto& s) -> MeshSpec {
        using T = std::decay_t<decltype(s)>;
        T r = s;
        if constexpr (std::is_same_v<T, IntervalSpec>) {
          r.count = 2 * s.count - 1;
        } else if constexpr (std::is_same_v<T, PlaneSpec>) {
          r.step = s.step / 2;
        } else if constexpr (std::is_same_v<T, SphereSpec>) {
          r.level = s.level + 1;
        } else if constexpr (std::is_same_v<T, AnnulusSpec>) {
          r.rings = 2 * s.rings - 1;
          r.sectors = 2 * s.sectors;
        } else {
          for (auto& part : r.parts) part = refine_mesh(part);
        }
        return MeshSpec{r};
      },
      m.family);
}

}  // namespace

BundleRecipe refine(const BundleRecipe& recipe) {
  BundleRecipe r = recipe;
  r.name += " (refined)";
  r.mesh = refine_mesh(recipe.mesh);
  return r;
}

std::vector<BundleRecipe> random_battery(int count, std::uint64_t seed) {
  std::vector<BundleRecipe> out;
  for (int i = 0; i < count; ++i) {
    auto rng = substream(seed, i);
    BundleRecipe r;
    r.rank = uniform_int(rng, 1, 4);
    r.ambient = r.rank + uniform_int(rng, 1, 2);
    const int bumps = uniform_int(rng, 1, 3);
    const int kind = uniform_int(rng, 0, 3);
    r.cover.width = uniform_int(rng, 1, 2);
    r.cover.sectors = std::array<int, 3>{0, 2, 3}[uniform_int(rng, 0, 2)];
    if (kind <= 1) {
      PlaneSpec s;
      s.radius = uniform_int(rng, 3, 4);
      s.step = 0.5;
      s.tail_rings = 6;
      r.mesh = {s};
      r.compactification = CompactificationKind::one_point;
      r.field = random_bumps(
          rng, r.ambient, r.rank, bumps, [&] { return planar_point(uniform(rng, 0, 1.5), uniform(rng, 0, 2 * kPi)); },
          1.2, 2.0, 0.4, 1.2);
      r.name = "plane";
    } else if (kind == 2) {
      r.mesh = {AnnulusSpec{0.5, 2.0, 17, 32}};
      r.compactification = CompactificationKind::endpoints;
      r.field = random_bumps(
          rng, r.ambient, r.rank, bumps, [&] { return planar_point(uniform(rng, 0.95, 1.05), uniform(rng, 0, 2 * kPi)); },
          0.25, 0.3, 0.4, 1.2);
      r.cover.width = 1;
      r.name = "annulus";
    } else {
      r.mesh = {IntervalSpec{-4.0, 4.0, 17, 6, 6, 2.0}};
      r.compactification = CompactificationKind::endpoints;
      r.cover.sectors = 0;
      r.field = random_bumps(
          rng, r.ambient, r.rank, bumps, [&] { return Eigen::VectorXd::Constant(1, uniform(rng, -2, 2)); }, 1.0, 1.8,
          0.4, 1.2);
      r.name = "line";
    }
    r.name += " #" + std::to_string(i) + " rank " + std::to_string(r.rank) + " in C^" + std::to_string(r.ambient);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<BundleRecipe> surface_battery(int count, std::uint64_t seed) {
  std::vector<BundleRecipe> out;
  for (int i = 0; i < count; ++i) {
    auto rng = substream(seed ^ 0x5eedULL, i);
    BundleRecipe r;
    r.cover = {1, 0, 4, 4};
    switch (i % 6) {
      case 0:
        r.mesh = {SphereSpec{2}};
        r.field = hopf_field_function();
        r.ambient = 2;
        r.rank = 1;
        r.name = "sphere hopf";
        break;
      case 1:
      case 5: {
        r.mesh = {SphereSpec{2}};
        r.rank = uniform_int(rng, 1, 2);
        r.ambient = r.rank + 1;
        auto bumps = random_bumps(rng, r.ambient, r.rank, uniform_int(rng, 1, 3), [&] { return random_sphere_point(rng); },
                                  0.8, 1.2, 0.4, 1.0);
        if (i % 6 == 5) {
          r.field = sum_field(hopf_field_function(), 2, bumps, r.ambient);
          r.ambient += 2;
          r.rank += 1;
          r.name = "sphere hopf + bumps";
        } else {
          r.field = bumps;
          r.name = "sphere bumps";
        }
        break;
      }
      case 2: {
        PlaneSpec s{4.0, 0.5, 6, 2.0};
        r.mesh = {s};
        r.compactification = CompactificationKind::one_point;
        r.rank = uniform_int(rng, 1, 2);
        r.ambient = r.rank + 1;
        r.field = random_bumps(
            rng, r.ambient, r.rank, uniform_int(rng, 1, 3),
            [&] { return planar_point(uniform(rng, 0, 1.5), uniform(rng, 0, 2 * kPi)); }, 1.5, 2.0, 0.4, 1.0);
        r.name = "plane bumps";
        break;
      }
      case 3:
        r.mesh = {hopf_plane_spec(1)};
        r.compactification = CompactificationKind::one_point;
        r.field = hopf_field_function();
        r.ambient = 2;
        r.rank = 1;
        r.name = "plane hopf";
        break;
      default: {
        const int m = uniform_int(rng, -2, 2);
        r.mesh = {AnnulusSpec{0.5, 2.0, 17, 32}};
        r.compactification = CompactificationKind::endpoints;
        r.field = twisted_hopf_field(m, 0.65, 1.4);
        r.ambient = 2;
        r.rank = 1;
        r.name = "annulus winding " + std::to_string(m);
        break;
      }
    }
    r.name += " #" + std::to_string(i);
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------

ModuleInstance rank_drop_module() {
  ModuleInstance mi;
  mi.name = "rank drop";
  mi.expected = false;
  mi.space = build_space({PlaneSpec{3.0, 0.5, 6, 2.0}});
  mi.compactification = attach_compactification(mi.space, CompactificationKind::one_point);
  const RVector cut = exhaustion_cutoff(*mi.space);
  Section g = zero_section(mi.space, 2, FunctionClass::vanishing);
  for (Vertex v = 0; v < static_cast<Vertex>(mi.space->size()); ++v)
    g.values(0, v) = std::abs(mi.space->complex_coordinate(v)) * cut[v];
  mi.module = GeneratedModule(mi.space, 2, {g});
  return mi;
}

ModuleInstance unbounded_rank_module() {
  ModuleInstance mi;
  mi.name = "unbounded rank";
  mi.expected = false;
  UnionSpec u;
  for (int c = 0; c < 4; ++c) u.parts.push_back({IntervalSpec{0.0, 4.0, 5}});
  mi.space = build_space({u});
  mi.compactification = attach_compactification(mi.space, CompactificationKind::one_point);
  const RVector cut = exhaustion_cutoff(*mi.space);
  std::vector<Section> gens;
  for (int j = 0; j < 4; ++j) {
    Section g = zero_section(mi.space, 4, FunctionClass::vanishing);
    for (Vertex v = 0; v < static_cast<Vertex>(mi.space->size()); ++v)
      if (mi.space->component(v) >= j) g.values(j, v) = cut[v];
    gens.push_back(std::move(g));
  }
  mi.module = GeneratedModule(mi.space, 4, std::move(gens));
  return mi;
}

ModuleInstance hopf_module(int level) {
  ModuleInstance mi;
  mi.name = "hopf";
  mi.space = build_space({hopf_plane_spec(level)});
  mi.compactification = attach_compactification(mi.space, CompactificationKind::one_point);
  mi.module = module_from_projection(hopf_field(mi.space));
  return mi;
}

ModuleInstance bundle_module(const Bundle& b) {
  ModuleInstance mi;
  mi.name = b.recipe.name;
  mi.space = b.space;
  mi.compactification = b.compactification;
  mi.module = module_from_projection(b.p);
  return mi;
}

// ---------------------------------------------------------------------------

VertexMap annulus_double_cover(const SpacePtr& target, const CompactificationPtr& target_c) {
  if (target->family() != SpaceFamily::annulus) throw UnsupportedKind("double cover needs an annulus mesh");
  const auto n = static_cast<Vertex>(target->size());
  int rings = 0;
  for (Vertex v = 0; v < n; ++v) rings = std::max(rings, target->ring(v) + 1);
  const int sectors = n / rings;
  AnnulusSpec spec;
  spec.inner_radius = target->position(0).norm();
  spec.outer_radius = target->position(n - 1).norm();
  spec.rings = rings;
  spec.sectors = 2 * sectors;
  VertexMap m;
  m.source = build_space({spec});
  m.phi.resize(m.source->size());
  for (int i = 0; i < rings; ++i)
    for (int j = 0; j < 2 * sectors; ++j) m.phi[i * 2 * sectors + j] = i * sectors + j % sectors;
  if (target_c) {
    m.source_compactification = attach_compactification(m.source, target_c->kind);
    for (std::size_t b = 0; b < m.source_compactification->boundary_count(); ++b) m.boundary_map.push_back(b);
  }
  return m;
}

VertexMap sphere_rotation(const SpacePtr& sphere, double angle) {
  if (sphere->family() != SpaceFamily::sphere) throw UnsupportedKind("rotation needs a sphere mesh");
  const Eigen::Matrix3d r = Eigen::AngleAxisd(angle, Eigen::Vector3d(1, 1, 1).normalized()).toRotationMatrix();
  VertexMap m;
  m.source = sphere;
  const auto n = static_cast<Vertex>(sphere->size());
  m.phi.resize(n);
  for (Vertex y = 0; y < n; ++y) {
    const Eigen::Vector3d target = r * Eigen::Vector3d(sphere->position(y));
    Vertex best = 0;
    double best_d = 1e300;
    for (Vertex x = 0; x < n; ++x) {
      const double d = (Eigen::Vector3d(sphere->position(x)) - target).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = x;
      }
    }
    m.phi[y] = best;
  }
  return m;
}

VertexMap collapse_to_point(const SpacePtr& source) {
  return {source, std::vector<Vertex>(source->size(), 0), nullptr, {}};
}

VertexMap identity_map(const SpacePtr& space, const CompactificationPtr& c) {
  VertexMap m{space, std::vector<Vertex>(space->size()), c, {}};
  for (std::size_t v = 0; v < m.phi.size(); ++v) m.phi[v] = static_cast<Vertex>(v);
  if (c)
    for (std::size_t b = 0; b < c->boundary_count(); ++b) m.boundary_map.push_back(b);
  return m;
}

}  // namespace ncb
