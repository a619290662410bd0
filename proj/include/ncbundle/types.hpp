#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace ncb {

using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;

using Vertex = int;

/// Which commutative algebra a field is meant to live in.
///   vanishing: C_0(X)   bounded: C_b(X)   extended: C(X^c), carries boundary values
enum class FunctionClass { vanishing, bounded, extended };

const char* to_string(FunctionClass c);

/// Numerical tolerances shared by every module.
struct Tolerances {
  double equality = 1e-12;
  double continuity = 4.0;      // edge oscillation per unit edge length
  double frame = 1e-9;
  double boundary = 1e-6;       // limit detection along shells
  double vanishing = 1e-6;
  double rank_relative = 1e-8;  // eigenvalue sigma counts iff sigma > rank_relative * sigma_max
  double index_rounding = 1e-6;
  double in_range = 1e-9;
  double strict_tail = 1e-9;
};

struct RunConfig {
  Tolerances tol;
  std::uint64_t seed = 20170131;
  std::size_t vertex_budget = 250000;  // product constructions
  std::string out_dir;
};

// ---------------------------------------------------------------------------
// errors

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define NCB_DEFINE_ERROR(Name)            \
  class Name : public Error {             \
   public:                                \
    using Error::Error;                   \
  }

NCB_DEFINE_ERROR(InvalidSpec);
NCB_DEFINE_ERROR(UnsupportedKind);
NCB_DEFINE_ERROR(DimensionExceeded);
NCB_DEFINE_ERROR(EmptyCoverSet);
NCB_DEFINE_ERROR(ShapeMismatch);
NCB_DEFINE_ERROR(NotInRange);
NCB_DEFINE_ERROR(LocalFrameInvalid);
NCB_DEFINE_ERROR(FrameDefectTooLarge);
NCB_DEFINE_ERROR(ProductTooLarge);
NCB_DEFINE_ERROR(NotProper);
NCB_DEFINE_ERROR(FiniteIndexError);
NCB_DEFINE_ERROR(NotClosedSurface);
NCB_DEFINE_ERROR(RankNotConstant);

/// Verdicts that must agree disagreed. Always a bug, never a user error.
NCB_DEFINE_ERROR(InternalInconsistency);

#undef NCB_DEFINE_ERROR

}  // namespace ncb
