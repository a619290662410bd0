#include "ncbundle/hopf.hpp"

#include <chrono>
#include <cmath>

namespace ncb {

CMatrix hopf_projection(Complex z) {
  const double s = 1.0 + std::norm(z);
  CMatrix p(2, 2);
  p << 1.0, std::conj(z), z, std::norm(z);
  return p / s;
}

CMatrix hopf_projection(const Eigen::Vector3d& x) {
  CMatrix p(2, 2);
  p << 1.0 - x[2], Complex(x[0], x[1]), Complex(x[0], -x[1]), 1.0 + x[2];
  return 0.5 * p;
}

CMatrix hopf_w(Complex z) {
  const double s = std::sqrt(1.0 + std::norm(z));
  CMatrix w = CMatrix::Zero(2, 2);
  w(0, 0) = 1.0 / s;
  w(1, 0) = z / s;
  return w;
}

ProjectionField hopf_field(const SpacePtr& space) {
  const auto n = space->size();
  ProjectionField p(space, 2, std::vector<CMatrix>(n));
  const bool sphere = space->family() == SpaceFamily::sphere;
  for (std::size_t v = 0; v < n; ++v) {
    const auto x = static_cast<Vertex>(v);
    p.matrices[v] = sphere ? hopf_projection(Eigen::Vector3d(space->position(x))) : hopf_projection(space->complex_coordinate(x));
  }
  return p;
}

Frame unit_frame(const SpacePtr& space) {
  Frame f;
  f.elements.push_back(Section(space, CMatrix::Ones(1, static_cast<Eigen::Index>(space->size()))));
  f.context = std::make_shared<ProjectionField>(constant_field(space, CMatrix::Identity(1, 1)));
  return f;
}

Frame hopf_y_frame(const SpacePtr& space) {
  const auto n = static_cast<Eigen::Index>(space->size());
  CMatrix y1 = CMatrix::Zero(2, n), y2 = CMatrix::Zero(2, n);
  for (Eigen::Index v = 0; v < n; ++v) {
    const Complex z = space->complex_coordinate(static_cast<Vertex>(v));
    const double s = std::sqrt(1.0 + std::norm(z));
    y1(0, v) = 1.0 / s;
    y2(0, v) = std::conj(z) / s;
  }
  Frame f;
  f.elements = {Section(space, std::move(y1)), Section(space, std::move(y2))};
  CMatrix e11 = CMatrix::Zero(2, 2);
  e11(0, 0) = 1.0;
  f.context = std::make_shared<ProjectionField>(constant_field(space, e11));
  return f;
}

Frame hopf_w_column_frame(const SpacePtr& space) {
  const auto n = static_cast<Eigen::Index>(space->size());
  CMatrix w = CMatrix::Zero(2, n);
  for (Eigen::Index v = 0; v < n; ++v) w.col(v) = hopf_w(space->complex_coordinate(static_cast<Vertex>(v))).col(0);
  Frame f;
  f.elements = {Section(space, std::move(w), FunctionClass::extended)};
  f.context = std::make_shared<ProjectionField>(hopf_field(space));
  return f;
}

PlaneSpec hopf_plane_spec(int level) {
  if (level < 1) throw InvalidSpec("hopf demo level must be at least 1");
  PlaneSpec s;
  s.radius = 5.0;
  s.step = 1.0 / std::pow(2.0, level - 1);
  s.tail_ratio = 2.0;
  // far enough out that every entry of p is within 1e-7 of its limit
  s.tail_rings = static_cast<int>(std::ceil(std::log2(1e8 / s.radius)));
  return s;
}

HopfDemoReport hopf_demo(int level, const Tolerances& tol) {
  const auto start = std::chrono::steady_clock::now();
  HopfDemoReport rep;
  rep.level = level;
  const auto space = build_space({hopf_plane_spec(level)});
  const auto c = attach_compactification(space, CompactificationKind::one_point);
  rep.vertices = space->size();
  rep.closed_triangles = space->triangles().size() + c->closure_triangles.size();

  auto extended = [&](const Frame& f) {
    auto out = extend_projection(f, c, tol);
    if (auto* bad = std::get_if<NotExtendable>(&out)) throw InternalInconsistency("frame failed to extend: " + bad->describe());
    return std::get<ExtensionResult>(std::move(out));
  };

  const auto trivial = extended(unit_frame(space));
  rep.trivial_boundary = trivial.projection.boundary.front();
  rep.trivial_chern = chern_number(trivial.projection);

  const auto hopf = extended(hopf_y_frame(space));
  rep.hopf_boundary = hopf.projection.boundary.front();
  rep.hopf_unitisation = hopf.unitisation_report;
  rep.hopf_chern = chern_number(hopf.projection);

  CMatrix e11 = CMatrix::Zero(2, 2);
  e11(0, 0) = 1.0;
  for (Vertex v = 0; v < static_cast<Vertex>(space->size()); ++v) {
    const Complex z = space->complex_coordinate(v);
    const CMatrix displayed = hopf_projection(z);
    rep.formula_error = std::max(rep.formula_error, (hopf.projection.matrices[v] - displayed).cwiseAbs().maxCoeff());
    if (std::abs(z) < 1e-12) rep.p_at_zero_error = (hopf.projection.matrices[v] - e11).cwiseAbs().maxCoeff();
    if (std::abs(z - 1.0) < 1e-12)
      rep.p_at_one_error = (hopf.projection.matrices[v] - CMatrix::Constant(2, 2, 0.5)).cwiseAbs().maxCoeff();
    const CMatrix w = hopf_w(z);
    rep.ww_error = std::max(rep.ww_error, operator_norm(w * w.adjoint() - displayed));
    rep.wstarw_error = std::max(rep.wstarw_error, operator_norm(w.adjoint() * w - e11));
  }

  const auto w_out = extend_projection(hopf_w_column_frame(space), c, tol);
  if (const auto* bad = std::get_if<NotExtendable>(&w_out)) {
    rep.w_extends = false;
    rep.w_witness = *bad;
  }
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

}  // namespace ncb
