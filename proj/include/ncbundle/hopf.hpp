#pragma once

#include <optional>

#include "ncbundle/chern.hpp"
#include "ncbundle/extension.hpp"

namespace ncb {

/// (1 / (1 + |z|^2)) [[1, conj z], [z, |z|^2]]
CMatrix hopf_projection(Complex z);
/// The same projection written on the unit sphere, z = (x - i y) / (1 - x3).
CMatrix hopf_projection(const Eigen::Vector3d& x);
/// 2 x 2 matrix with first column (1, z) / sqrt(1 + |z|^2) and zero second column.
CMatrix hopf_w(Complex z);

/// Hopf field on a plane-like mesh (complex coordinate) or on the sphere mesh.
ProjectionField hopf_field(const SpacePtr& space);

/// {1} in C^1, framing the trivial module.
Frame unit_frame(const SpacePtr& space);
/// {y1, y2} in C^2, framing the trivial module embedded as the first coordinate.
Frame hopf_y_frame(const SpacePtr& space);
/// The single section z -> (1, z) / sqrt(1 + |z|^2), tagged as a continuous element on the compactification.
Frame hopf_w_column_frame(const SpacePtr& space);

/// Plane mesh used by the demonstration at a given refinement level (>= 1).
PlaneSpec hopf_plane_spec(int level);

struct HopfDemoReport {
  int level = 0;
  std::size_t vertices = 0;
  std::size_t closed_triangles = 0;

  ChernResult trivial_chern;
  CMatrix trivial_boundary;
  ChernResult hopf_chern;
  CMatrix hopf_boundary;
  std::vector<AdjoinedValue> hopf_unitisation;
  double formula_error = 0.0;  // max over interior vertices of |p_out - displayed p|
  double p_at_zero_error = 0.0;
  double p_at_one_error = 0.0;

  double ww_error = 0.0;  // max |w w* - p|
  double wstarw_error = 0.0;  // max |w* w - diag(1, 0)|
  bool w_extends = true;
  std::optional<NotExtendable> w_witness;

  double seconds = 0.0;
};

HopfDemoReport hopf_demo(int level, const Tolerances& tol = {});

}  // namespace ncb
