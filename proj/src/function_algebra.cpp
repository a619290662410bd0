#include "ncbundle/function_algebra.hpp"

#include <algorithm>
#include <cmath>

namespace ncb {

namespace {

void require_same_space(const FunctionElement& a, const FunctionElement& b) {
  if (a.space != b.space && a.values.size() != b.values.size())
    throw ShapeMismatch("function elements live on different spaces");
  if (a.values.size() != b.values.size()) throw ShapeMismatch("function elements differ in length");
}

FunctionElement combine(const FunctionElement& a, const FunctionElement& b, CVector values, FunctionClass c,
                        const CVector* boundary) {
  FunctionElement out(a.space, std::move(values), c);
  if (c == FunctionClass::extended && boundary) {
    out.compactification = a.compactification;
    out.boundary_values = *boundary;
  } else if (c == FunctionClass::extended) {
    out.cls = FunctionClass::bounded;
  }
  (void)b;
  return out;
}

bool both_extended(const FunctionElement& a, const FunctionElement& b) {
  return a.cls == FunctionClass::extended && b.cls == FunctionClass::extended &&
         a.compactification == b.compactification && a.compactification;
}

}  // namespace

FunctionClass product_class(FunctionClass a, FunctionClass b) {
  if (a == FunctionClass::vanishing || b == FunctionClass::vanishing) return FunctionClass::vanishing;
  if (a == FunctionClass::extended && b == FunctionClass::extended) return FunctionClass::extended;
  return FunctionClass::bounded;
}

FunctionElement constant(const SpacePtr& space, Complex value) {
  return {space, CVector::Constant(static_cast<Eigen::Index>(space->size()), value), FunctionClass::bounded};
}

FunctionElement indicator(const SpacePtr& space, std::span<const Vertex> set) {
  CVector v = CVector::Zero(static_cast<Eigen::Index>(space->size()));
  for (Vertex x : set) v[x] = 1.0;
  return {space, std::move(v), FunctionClass::bounded};
}

FunctionElement from_real(const SpacePtr& space, const RVector& values, FunctionClass c) {
  return {space, values.cast<Complex>(), c};
}

FunctionElement operator+(const FunctionElement& a, const FunctionElement& b) {
  require_same_space(a, b);
  FunctionClass c = (a.cls == b.cls) ? a.cls : FunctionClass::bounded;
  if (c == FunctionClass::extended && !both_extended(a, b)) c = FunctionClass::bounded;
  CVector bd;
  if (c == FunctionClass::extended) bd = a.boundary_values + b.boundary_values;
  return combine(a, b, a.values + b.values, c, c == FunctionClass::extended ? &bd : nullptr);
}

FunctionElement operator-(const FunctionElement& a, const FunctionElement& b) { return a + Complex(-1.0) * b; }

FunctionElement operator*(const FunctionElement& a, const FunctionElement& b) {
  require_same_space(a, b);
  FunctionClass c = product_class(a.cls, b.cls);
  if (c == FunctionClass::extended && !both_extended(a, b)) c = FunctionClass::bounded;
  CVector bd;
  if (c == FunctionClass::extended) bd = a.boundary_values.cwiseProduct(b.boundary_values);
  return combine(a, b, a.values.cwiseProduct(b.values), c, c == FunctionClass::extended ? &bd : nullptr);
}

FunctionElement operator*(Complex s, const FunctionElement& a) {
  FunctionElement out = a;
  out.values *= s;
  if (out.boundary_values.size()) out.boundary_values *= s;
  return out;
}

FunctionElement conj(const FunctionElement& a) {
  FunctionElement out = a;
  out.values = a.values.conjugate();
  if (out.boundary_values.size()) out.boundary_values = a.boundary_values.conjugate();
  return out;
}

double sup_norm(const FunctionElement& f) {
  double s = f.values.size() ? f.values.cwiseAbs().maxCoeff() : 0.0;
  if (f.cls == FunctionClass::extended && f.boundary_values.size())
    s = std::max(s, f.boundary_values.cwiseAbs().maxCoeff());
  return s;
}

double last_shell_sup(const FunctionElement& f) {
  const auto& s = *f.space;
  if (s.is_compact()) return 0.0;
  double m = 0.0;
  for (Vertex v = 0; v < static_cast<Vertex>(s.size()); ++v)
    if (s.level(v) == s.max_level()) m = std::max(m, std::abs(f.values[v]));
  return m;
}

bool is_vanishing(const FunctionElement& f, double eps_van) { return last_shell_sup(f) <= eps_van; }

BoundaryLimit boundary_limit(const FunctionElement& f, const Compactification& c, std::size_t b, double eps) {
  if (f.space.get() != c.base.get() && f.values.size() != static_cast<Eigen::Index>(c.base->size()))
    throw ShapeMismatch("function and compactification live on different spaces");
  return boundary_limit(f.view(), c, b, eps);
}

std::optional<FunctionElement> extend(const FunctionElement& f, const CompactificationPtr& c, double eps,
                                      BoundaryLimit* divergent, std::size_t* divergent_at) {
  CVector bd(static_cast<Eigen::Index>(c->boundary_count()));
  for (std::size_t b = 0; b < c->boundary_count(); ++b) {
    const auto lim = boundary_limit(f, *c, b, eps);
    if (!lim.converged) {
      if (divergent) *divergent = lim;
      if (divergent_at) *divergent_at = b;
      return std::nullopt;
    }
    bd[static_cast<Eigen::Index>(b)] = lim.value;
  }
  FunctionElement out = f;
  out.cls = FunctionClass::extended;
  out.compactification = c;
  out.boundary_values = std::move(bd);
  return out;
}

// ---------------------------------------------------------------------------

StrictConvergence strict_convergence_check(std::span<const FunctionElement> series,
                                           std::span<const FunctionElement> multipliers, double tol) {
  StrictConvergence out;
  if (series.empty()) throw InvalidSpec("strict_convergence_check: empty series");
  const auto n = series.front().values.size();
  for (const auto& t : series)
    if (t.values.size() != n) throw ShapeMismatch("series terms differ in length");
  for (const auto& a : multipliers)
    if (a.values.size() != n) throw ShapeMismatch("multiplier length differs from series");

  const auto len = static_cast<int>(series.size());
  CVector total = CVector::Zero(n);
  for (const auto& t : series) total += t.values;

  // tail[N] = S_L - S_N for N in the window
  const int window = len <= 1 ? 0 : std::max(1, len / 4);
  std::vector<CVector> tails;
  {
    CVector tail = CVector::Zero(n);
    for (int k = len - 1; k >= len - window; --k) {
      tail += series[k].values;
      tails.push_back(tail);
    }
  }
  for (const auto& t : tails) out.norm_tail = std::max(out.norm_tail, t.cwiseAbs().maxCoeff());

  out.converges = true;
  for (std::size_t i = 0; i < multipliers.size(); ++i) {
    double worst = 0.0;
    for (const auto& t : tails) worst = std::max(worst, t.cwiseProduct(multipliers[i].values).cwiseAbs().maxCoeff());
    if (worst > out.tail_norm) out.tail_norm = worst;
    if (worst > tol && out.converges) {
      out.converges = false;
      out.witness_multiplier = static_cast<int>(i);
    }
  }
  if (out.converges) out.limit = FunctionElement(series.front().space, total, FunctionClass::bounded);
  return out;
}

std::vector<FunctionElement> multiplier_battery(const SpacePtr& space, std::span<const RVector> partition_functions) {
  const auto& s = *space;
  const int half = std::max(1, s.max_level() / 2);
  std::vector<FunctionElement> out;
  for (const auto& h : partition_functions) {
    bool inside = true;
    for (Vertex v = 0; v < static_cast<Vertex>(s.size()) && inside; ++v)
      if (h[v] != 0.0 && s.level(v) >= half) inside = false;
    if (inside) out.push_back(from_real(space, h));
  }
  for (int k = 0; k < half; ++k) {
    if (k == s.max_level() && !s.is_compact()) break;
    out.push_back(indicator(space, s.exhaustion()[k]));
  }
  return out;
}

}  // namespace ncb
