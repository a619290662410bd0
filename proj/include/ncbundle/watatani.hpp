#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ncbundle/module_core.hpp"

namespace ncb {

/// Bimodule structure of the commutative flip model: a.e := e a and
/// left inner product _A(e|f) := (f|e)_A.
struct BiHilbertStructure {
  GeneratedModule module;
  double lambda_prime = 1.0;

  FunctionElement left_inner(const Section& e, const Section& f) const { return inner_product(f, e); }
  Section left_action(const FunctionElement& a, const Section& e) const { return e * a; }
};

/// Fiber of the module at one vertex.
struct FiberSpace {
  Vertex vertex = 0;
  int dimension = 0;
  CMatrix basis;  // N x dimension, orthonormal
};

FiberSpace fiber_space(const GeneratedModule& m, Vertex v, double rank_rel = 1e-8);

struct IndexFunction {
  std::vector<int> values;
  RVector raw;
  bool bounded = false;
  bool continuous = false;  // rounded everywhere and constant across edges
  int sup = 0;
};

/// Phi(T)(x) = tr(p(x) T(x) p(x)).
FunctionElement conditional_expectation(const ProjectionField& p, const OperatorField& t);

/// Pointwise sum of |e_j(x)|^2, rounded when within the rounding window.
/// Throws FiniteIndexError when the rank grows along the exhaustion or a
/// countable frame fails the strict convergence test.
IndexFunction watatani_index(const GeneratedModule& m, const Frame& frame, const Tolerances& tol = {});

struct IndexEstimate {
  double lambda = 0.0;  // max ratio over trials
  double mean = 0.0;
  int trials = 0;
  int family_size = 0;
};

/// Large enough that the best of 10^3 families reaches within 0.1 of rank 3 in C^4.
inline constexpr int kDefaultFamilySize = 4096;

/// max over seeded random families {f_i} of ||sum_i Phi(Theta_{f_i,f_i})|| / ||sum_i Theta_{f_i,f_i}||.
/// Each f_i is p(x) g_i for a standard complex Gaussian vector g_i.
IndexEstimate numerical_index_estimate(const GeneratedModule& m, int trials, int family_size, std::uint64_t seed);

/// The same ratio for one explicit family.
double index_ratio(const ProjectionField& p, std::span<const Section> family);

struct LocalTriviality {
  bool ok = false;
  int radius = 0;
  bool whole_component = false;
  double worst_off_diagonal = 0.0;
  int dimension = 0;
};

/// Largest BFS radius around phi on which lifted fiber basis vectors stay
/// nearly orthonormal (off-diagonals below 1/(2n^2)) and the rank stays n.
LocalTriviality local_triviality_check(const GeneratedModule& m, Vertex phi, double rank_rel = 1e-8);

struct BundleFailure {
  std::string reason;
  std::optional<NotLocallyTrivial> edge;
};

std::variant<ProjectionField, BundleFailure> bundle_from_module(const GeneratedModule& m, double rank_rel = 1e-8);

struct Cor58Report {
  bool rank_continuous_bounded = false;  // (1)
  bool bundle_form = false;              // (2)
  bool finite_index = false;             // (3)
  std::string detail;
};

/// Throws InternalInconsistency if the three verdicts disagree.
Cor58Report cor58_report(const GeneratedModule& m, const Tolerances& tol = {});

}  // namespace ncb
