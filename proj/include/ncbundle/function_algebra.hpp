#pragma once

#include <optional>
#include <span>
#include <vector>

#include "ncbundle/base_space.hpp"

namespace ncb {

/// A complex function on the vertices of a DiscreteSpace, tagged with the
/// algebra it is meant to belong to. Extended elements also carry one value
/// per boundary vertex of their compactification.
struct FunctionElement {
  SpacePtr space;
  CVector values;
  FunctionClass cls = FunctionClass::bounded;
  CompactificationPtr compactification;  // extended class only
  CVector boundary_values;

  FunctionElement() = default;
  FunctionElement(SpacePtr s, CVector v, FunctionClass c = FunctionClass::bounded)
      : space(std::move(s)), values(std::move(v)), cls(c) {}

  std::span<const Complex> view() const { return {values.data(), static_cast<std::size_t>(values.size())}; }
};

FunctionElement constant(const SpacePtr& space, Complex value);
FunctionElement indicator(const SpacePtr& space, std::span<const Vertex> set);
FunctionElement from_real(const SpacePtr& space, const RVector& values, FunctionClass c = FunctionClass::bounded);

/// Pointwise algebra. The class of a product follows the ideal property:
/// vanishing * anything = vanishing.
FunctionElement operator+(const FunctionElement& a, const FunctionElement& b);
FunctionElement operator-(const FunctionElement& a, const FunctionElement& b);
FunctionElement operator*(const FunctionElement& a, const FunctionElement& b);
FunctionElement operator*(Complex s, const FunctionElement& a);
FunctionElement conj(const FunctionElement& a);

FunctionClass product_class(FunctionClass a, FunctionClass b);

double sup_norm(const FunctionElement& f);

/// Sup of |f| over the outermost exhaustion increment; 0 on compact spaces.
double last_shell_sup(const FunctionElement& f);

/// True if the last-shell sup is at most eps_van.
bool is_vanishing(const FunctionElement& f, double eps_van);

BoundaryLimit boundary_limit(const FunctionElement& f, const Compactification& c, std::size_t b, double eps);

/// Extended copy of f with boundary values, or nullopt with the first
/// divergent boundary vertex reported through `divergent`.
std::optional<FunctionElement> extend(const FunctionElement& f, const CompactificationPtr& c, double eps,
                                      BoundaryLimit* divergent = nullptr, std::size_t* divergent_at = nullptr);

// ---------------------------------------------------------------------------
// strict convergence

struct StrictConvergence {
  bool converges = false;
  FunctionElement limit;        // sum of the series (bounded class) when converges
  int witness_multiplier = -1;  // index into the multiplier list on failure
  double tail_norm = 0.0;       // sup_N ||(S_L - S_N) a|| over the tail window
  double norm_tail = 0.0;       // the same without the multiplier (norm convergence gauge)
  bool battery_approximation = true;
};

/// Cauchy test of S_N * a for every multiplier a over the trailing window of
/// max(1, L/4) partial sums. Series of length <= 1 converge trivially.
StrictConvergence strict_convergence_check(std::span<const FunctionElement> series,
                                           std::span<const FunctionElement> multipliers, double tol);

/// Multipliers supported strictly below half the exhaustion depth: the given
/// partition functions that fit there, plus indicators of those exhaustion sets.
std::vector<FunctionElement> multiplier_battery(const SpacePtr& space,
                                                std::span<const RVector> partition_functions = {});

}  // namespace ncb
