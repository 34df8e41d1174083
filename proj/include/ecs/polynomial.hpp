#pragma once

// Integer polynomials with unit leading and constant coefficients, exact root
// isolation and integer companion matrices.

#include <Eigen/Dense>
#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "ecs/error.hpp"

namespace ecs {

namespace mp = boost::multiprecision;
using BigInt = mp::cpp_int;
using Rational = mp::cpp_rational;
using IntMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

namespace detail {

/// Dense polynomial over Q, constant coefficient first.
using RatPoly = std::vector<Rational>;

inline void trim(RatPoly& p) {
  while (!p.empty() && p.back() == 0) p.pop_back();
}

inline int degree(const RatPoly& p) { return static_cast<int>(p.size()) - 1; }

inline Rational eval(const RatPoly& p, const Rational& x) {
  Rational acc = 0;
  for (auto it = p.rbegin(); it != p.rend(); ++it) acc = acc * x + *it;
  return acc;
}

inline RatPoly derivative(const RatPoly& p) {
  RatPoly d;
  for (std::size_t i = 1; i < p.size(); ++i) d.push_back(p[i] * static_cast<int>(i));
  trim(d);
  return d;
}

/// Remainder of a / b; b must be nonzero.
inline RatPoly remainder(RatPoly a, const RatPoly& b) {
  trim(a);
  const int db = degree(b);
  while (degree(a) >= db && !a.empty()) {
    const int shift = degree(a) - db;
    const Rational factor = a.back() / b.back();
    for (int i = 0; i <= db; ++i) a[shift + i] -= factor * b[i];
    a.pop_back();
    trim(a);
  }
  return a;
}

inline RatPoly gcd(RatPoly a, RatPoly b) {
  trim(a);
  trim(b);
  while (!b.empty()) {
    RatPoly r = remainder(a, b);
    a = std::move(b);
    b = std::move(r);
  }
  if (!a.empty()) {
    const Rational lead = a.back();
    for (auto& c : a) c /= lead;
  }
  return a;
}

inline int sign(const Rational& x) { return x > 0 ? 1 : (x < 0 ? -1 : 0); }

/// Sturm chain P, P', -rem(P, P'), ...
inline std::vector<RatPoly> sturm_chain(const RatPoly& p) {
  std::vector<RatPoly> chain{p, derivative(p)};
  while (!chain.back().empty()) {
    RatPoly r = remainder(chain[chain.size() - 2], chain.back());
    for (auto& c : r) c = -c;
    if (r.empty()) break;
    chain.push_back(std::move(r));
  }
  return chain;
}

inline int variations(const std::vector<int>& signs) {
  int count = 0, last = 0;
  for (int s : signs) {
    if (s == 0) continue;
    if (last != 0 && s != last) ++count;
    last = s;
  }
  return count;
}

inline int variations_at(const std::vector<RatPoly>& chain, const Rational& x) {
  std::vector<int> s;
  for (const auto& q : chain) s.push_back(sign(eval(q, x)));
  return variations(s);
}

/// Sign variations at +infinity (positive) or -infinity.
inline int variations_at_infinity(const std::vector<RatPoly>& chain, bool positive) {
  std::vector<int> s;
  for (const auto& q : chain) {
    int sg = sign(q.back());
    if (!positive && degree(q) % 2 == 1) sg = -sg;
    s.push_back(sg);
  }
  return variations(s);
}

/// Distinct real roots in the half-open interval (a, b].
inline int count_roots(const std::vector<RatPoly>& chain, const Rational& a,
                       const Rational& b) {
  return variations_at(chain, a) - variations_at(chain, b);
}

inline std::int64_t narrow(const BigInt& v, const char* what) {
  if (v > std::numeric_limits<std::int64_t>::max() ||
      v < std::numeric_limits<std::int64_t>::min())
    throw ParameterDomainError(std::string(what) + ": coefficient overflows 64 bits");
  return static_cast<std::int64_t>(v);
}

}  // namespace detail

/// Degree-m integer polynomial with leading coefficient (-1)^m and constant
/// term +1 or -1. Coefficients are stored constant-first.
class GlzPolynomial {
 public:
  explicit GlzPolynomial(std::vector<std::int64_t> coefficients)
      : coeffs_(std::move(coefficients)) {
    if (coeffs_.size() < 3)
      throw ParameterDomainError("GL(m,Z) polynomial needs degree m >= 2");
    const int m = degree();
    const std::int64_t lead = (m % 2 == 0) ? 1 : -1;
    if (coeffs_.back() != lead)
      throw ParameterDomainError("leading coefficient must equal (-1)^m = " +
                                 std::to_string(lead));
    if (coeffs_.front() != 1 && coeffs_.front() != -1)
      throw ParameterDomainError("constant term must be +1 or -1");
  }

  int degree() const { return static_cast<int>(coeffs_.size()) - 1; }
  const std::vector<std::int64_t>& coefficients() const { return coeffs_; }
  std::int64_t operator[](int i) const { return coeffs_.at(i); }

  Rational evaluate(const Rational& x) const { return detail::eval(rational(), x); }

  double evaluate(double x) const {
    double acc = 0.0;
    for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it)
      acc = acc * x + static_cast<double>(*it);
    return acc;
  }

  detail::RatPoly rational() const {
    detail::RatPoly p;
    for (auto c : coeffs_) p.emplace_back(c);
    return p;
  }

  friend GlzPolynomial operator*(const GlzPolynomial& a, const GlzPolynomial& b) {
    std::vector<BigInt> prod(a.coeffs_.size() + b.coeffs_.size() - 1, 0);
    for (std::size_t i = 0; i < a.coeffs_.size(); ++i)
      for (std::size_t j = 0; j < b.coeffs_.size(); ++j)
        prod[i + j] += BigInt(a.coeffs_[i]) * b.coeffs_[j];
    std::vector<std::int64_t> out;
    for (const auto& c : prod) out.push_back(detail::narrow(c, "product"));
    return GlzPolynomial(std::move(out));
  }

  friend bool operator==(const GlzPolynomial&, const GlzPolynomial&) = default;

 private:
  std::vector<std::int64_t> coeffs_;
};

/// Positive multipliers sorted ascending. Admissibility predicates (distinct,
/// away from 1, non-degenerate) are queried, not enforced on construction:
/// averaged spectra of test curves may legitimately sit at 1.
class Spectrum {
 public:
  Spectrum() = default;
  explicit Spectrum(std::vector<double> values) : values_(std::move(values)) {
    for (double v : values_)
      if (!(v > 0.0) || !std::isfinite(v))
        throw SpectrumStructureError("spectrum values must be positive and finite");
    std::sort(values_.begin(), values_.end());
  }

  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }

  bool multiplicity_free(double rel_tol = 1e-9) const {
    for (std::size_t i = 1; i < values_.size(); ++i)
      if (values_[i] - values_[i - 1] <= rel_tol * values_[i]) return false;
    return true;
  }

  bool avoids_unit(double gap = 1e-9) const {
    return std::none_of(values_.begin(), values_.end(),
                        [gap](double v) { return std::abs(v - 1.0) < gap; });
  }

  /// The set is inside (0,inf)\{1} and is neither {x} nor {x, 1/x}: all
  /// |log value| positive and not all equal.
  bool nondegenerate(double tol = 1e-12) const {
    if (values_.empty()) return false;
    const double first = std::abs(std::log(values_.front()));
    bool all_equal = true;
    for (double v : values_) {
      const double mod = std::abs(std::log(v));
      if (mod <= tol) return false;
      if (std::abs(mod - first) > tol * std::max(1.0, first)) all_equal = false;
    }
    return !all_equal;
  }

 private:
  std::vector<double> values_;
};

/// Rational interval with an exact sign-change witness P(lower)*P(upper) < 0.
struct RootBracket {
  Rational lower;
  Rational upper;
  Rational value_at_lower;
  Rational value_at_upper;

  bool strict_sign_change() const {
    return detail::sign(value_at_lower) * detail::sign(value_at_upper) < 0;
  }
  double lower_d() const { return static_cast<double>(lower); }
  double upper_d() const { return static_cast<double>(upper); }
};

inline RootBracket make_bracket(const GlzPolynomial& p, Rational lo, Rational hi) {
  RootBracket b{lo, hi, p.evaluate(lo), p.evaluate(hi)};
  return b;
}

/// lambda -> -lambda^3 + k lambda^2 - l lambda + 1, for 2 <= k < l <= k^2/4.
inline GlzPolynomial cubic_family(std::int64_t k, std::int64_t l) {
  if (k < 2) throw ParameterDomainError("cubic family: requires 2 <= k");
  if (!(k < l)) throw ParameterDomainError("cubic family: requires k < l");
  if (4 * l > k * k) throw ParameterDomainError("cubic family: requires l <= k^2/4");
  return GlzPolynomial({1, -l, k, -1});
}

/// The three guaranteed brackets (1/l, 1), (1, k/2), (k/2, k).
inline std::vector<RootBracket> cubic_brackets(std::int64_t k, std::int64_t l) {
  const GlzPolynomial p = cubic_family(k, l);
  return {make_bracket(p, Rational(1, l), 1), make_bracket(p, 1, Rational(k, 2)),
          make_bracket(p, Rational(k, 2), k)};
}

/// lambda -> lambda^2 + k lambda + 1 for integer k < -2.
inline GlzPolynomial quadratic_family(std::int64_t k) {
  if (k >= -2) throw ParameterDomainError("quadratic family: requires k < -2");
  return GlzPolynomial({1, k, 1});
}

/// Exact values P(1), P(2) and 16 P(1/2) of a quartic with unit ends.
struct QuarticTestValues {
  std::int64_t at_one;
  std::int64_t at_two;
  std::int64_t sixteen_at_half;
};

inline QuarticTestValues quartic_test_values(const GlzPolynomial& p) {
  const Rational half = p.evaluate(Rational(1, 2)) * 16;
  return {detail::narrow(mp::numerator(p.evaluate(Rational(1))), "P(1)"),
          detail::narrow(mp::numerator(p.evaluate(Rational(2))), "P(2)"),
          detail::narrow(mp::numerator(half), "16P(1/2)")};
}

/// lambda -> lambda^4 - m lambda^3 + l lambda^2 - k lambda + 1.
/// Preconditions: k >= 7, k <= m <= 2k-7, 2(k+m)-4 < 2l < 4k+m-8; these give
/// P(2) <= 16 P(1/2) < 0 < P(1), hence four distinct positive roots.
inline GlzPolynomial quartic_family(std::int64_t k, std::int64_t m, std::int64_t l) {
  if (k < 7) throw ParameterDomainError("quartic family: requires k >= 7");
  if (m < k) throw ParameterDomainError("quartic family: requires k <= m");
  if (m > 2 * k - 7) throw ParameterDomainError("quartic family: requires m <= 2k-7");
  if (!(2 * (k + m) - 4 < 2 * l))
    throw ParameterDomainError("quartic family: requires 2(k+m)-4 < 2l");
  if (!(2 * l < 4 * k + m - 8))
    throw ParameterDomainError("quartic family: requires 2l < 4k+m-8");
  GlzPolynomial p({1, -k, l, -m, 1});
  const auto v = quartic_test_values(p);
  if (!(v.at_two <= v.sixteen_at_half && v.sixteen_at_half < 0 && 0 < v.at_one))
    throw ConsistencyError("quartic family: P(2) <= 16P(1/2) < 0 < P(1) failed");
  return p;
}

/// Degree-m product of quadratic_family(-3), quadratic_family(-4), ... and, for
/// odd m, cubic_family(5, 6).
inline GlzPolynomial compose_for_dimension(int m) {
  if (m < 3) throw ParameterDomainError("compose_for_dimension: requires m >= 3");
  const bool odd = (m % 2) == 1;
  std::vector<GlzPolynomial> factors;
  if (odd) factors.push_back(cubic_family(5, 6));
  const int quadratics = odd ? (m - 3) / 2 : m / 2;
  for (int j = 0; j < quadratics; ++j) factors.push_back(quadratic_family(-3 - j));
  GlzPolynomial result = factors.front();
  for (std::size_t i = 1; i < factors.size(); ++i) result = result * factors[i];
  return result;
}

struct IsolationOptions {
  double tolerance = 1e-12;
  double unit_gap = 1e-9;

  /// Brackets narrower than one double spacing; used where the roots feed
  /// further numerics (lattice bases, calibration targets).
  static IsolationOptions full_precision() { return {1e-16, 1e-9}; }
};

struct RootIsolation {
  Spectrum spectrum;
  std::vector<RootBracket> brackets;  ///< isolating, refined to `tolerance`
};

/// All roots of P, which must be real, simple, positive and away from 1.
/// Counting is exact (Sturm chain over Q); refinement bisects on dyadic
/// rationals, so every bracket carries an exact sign change.
inline RootIsolation isolate_roots(const GlzPolynomial& p, IsolationOptions opt = {}) {
  using namespace detail;
  const RatPoly poly = p.rational();
  const int m = p.degree();

  if (degree(gcd(poly, derivative(poly))) > 0)
    throw SpectrumStructureError("polynomial has repeated roots");
  if (p.evaluate(Rational(1)) == 0) throw UnitRootError("polynomial has root 1");

  const auto chain = sturm_chain(poly);
  const int real_roots =
      variations_at_infinity(chain, false) - variations_at_infinity(chain, true);
  if (real_roots < m)
    throw SpectrumStructureError("polynomial has " + std::to_string(m - real_roots) +
                                 " non-real roots");

  BigInt bound = 0;
  for (int i = 0; i < m; ++i) bound = std::max(bound, BigInt(mp::abs(BigInt(p[i]))));
  const Rational cauchy = Rational(bound + 1);
  if (count_roots(chain, -cauchy, 0) > 0)
    throw SpectrumStructureError("polynomial has a nonpositive root");

  // Split (0, bound] until each piece isolates one root.
  std::vector<std::pair<Rational, Rational>> pending{{Rational(0), cauchy}};
  std::vector<std::pair<Rational, Rational>> isolated;
  while (!pending.empty()) {
    auto [a, b] = pending.back();
    pending.pop_back();
    const int n = count_roots(chain, a, b);
    if (n == 0) continue;
    if (n == 1) {
      isolated.emplace_back(a, b);
      continue;
    }
    const Rational mid = (a + b) / 2;
    pending.emplace_back(a, mid);
    pending.emplace_back(mid, b);
  }
  std::sort(isolated.begin(), isolated.end());

  const Rational width_goal = Rational(opt.tolerance);
  std::vector<double> roots;
  std::vector<RootBracket> brackets;
  for (auto [a, b] : isolated) {
    // The root lies in (a, b]; b is never a root since rational roots of a
    // unit-ended integer polynomial are +-1, excluded above.
    int sa = sign(eval(poly, a));
    if (sa == 0) {  // only possible at a = 0 if P(0) = 0, excluded by the type
      throw SpectrumStructureError("root at bracket endpoint");
    }
    while (b - a > width_goal) {
      const Rational mid = (a + b) / 2;
      const int sm = sign(eval(poly, mid));
      if (sm == sa) a = mid;
      else b = mid;
    }
    brackets.push_back(make_bracket(p, a, b));
    roots.push_back(static_cast<double>((a + b) / 2));
  }
  if (static_cast<int>(roots.size()) != m)
    throw SpectrumStructureError("root isolation lost a root");
  for (double r : roots)
    if (std::abs(r - 1.0) < opt.unit_gap)
      throw UnitRootError("root within unit gap of 1: " + std::to_string(r));
  return {Spectrum(roots), std::move(brackets)};
}

/// Companion matrix of the monic normalisation (-1)^m P: ones on the
/// subdiagonal, last column -a_0..-a_{m-1}. Integer with determinant +-1.
inline IntMatrix companion_matrix(const GlzPolynomial& p) {
  const int m = p.degree();
  const std::int64_t sign = (m % 2 == 0) ? 1 : -1;
  IntMatrix c = IntMatrix::Zero(m, m);
  for (int i = 1; i < m; ++i) c(i, i - 1) = 1;
  for (int i = 0; i < m; ++i) c(i, m - 1) = -sign * p[i];
  return c;
}

/// Exact determinant of an integer matrix (fraction-free Bareiss).
inline BigInt exact_determinant(const IntMatrix& a) {
  const int n = static_cast<int>(a.rows());
  std::vector<std::vector<BigInt>> m(n, std::vector<BigInt>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m[i][j] = a(i, j);
  BigInt prev = 1;
  int sgn = 1;
  for (int k = 0; k < n - 1; ++k) {
    if (m[k][k] == 0) {
      int swap = -1;
      for (int i = k + 1; i < n; ++i)
        if (m[i][k] != 0) swap = i;
      if (swap < 0) return 0;
      std::swap(m[k], m[swap]);
      sgn = -sgn;
    }
    for (int i = k + 1; i < n; ++i)
      for (int j = k + 1; j < n; ++j)
        m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) / prev;
    prev = m[k][k];
  }
  return sgn * m[n - 1][n - 1];
}

/// Characteristic polynomial det(xI - a), constant-first, by Faddeev-LeVerrier
/// over the rationals.
inline std::vector<BigInt> characteristic_polynomial(const IntMatrix& a) {
  const int n = static_cast<int>(a.rows());
  using RMat = std::vector<std::vector<Rational>>;
  RMat A(n, std::vector<Rational>(n)), M(n, std::vector<Rational>(n, Rational(0)));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A[i][j] = a(i, j);
  std::vector<Rational> c(n + 1, Rational(0));
  c[n] = 1;
  for (int k = 1; k <= n; ++k) {
    RMat AM(n, std::vector<Rational>(n, Rational(0)));
    for (int i = 0; i < n; ++i)
      for (int l = 0; l < n; ++l)
        if (A[i][l] != 0)
          for (int j = 0; j < n; ++j) AM[i][j] += A[i][l] * M[l][j];
    for (int i = 0; i < n; ++i) AM[i][i] += c[n - k + 1];
    M = AM;
    Rational tr = 0;
    for (int i = 0; i < n; ++i)
      for (int l = 0; l < n; ++l) tr += A[i][l] * M[l][i];
    c[n - k] = -tr / k;
  }
  std::vector<BigInt> out;
  for (const auto& x : c) {
    if (mp::denominator(x) != 1) throw ConsistencyError("non-integral characteristic polynomial");
    out.push_back(mp::numerator(x));
  }
  return out;
}

/// Exact inverse of a unimodular integer matrix.
inline IntMatrix unimodular_inverse(const IntMatrix& a) {
  const int n = static_cast<int>(a.rows());
  std::vector<std::vector<Rational>> m(n, std::vector<Rational>(2 * n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) m[i][j] = a(i, j);
    m[i][n + i] = 1;
  }
  for (int col = 0; col < n; ++col) {
    int piv = col;
    while (piv < n && m[piv][col] == 0) ++piv;
    if (piv == n) throw ConsistencyError("singular integer matrix");
    std::swap(m[col], m[piv]);
    const Rational d = m[col][col];
    for (auto& x : m[col]) x /= d;
    for (int i = 0; i < n; ++i) {
      if (i == col || m[i][col] == 0) continue;
      const Rational f = m[i][col];
      for (int j = 0; j < 2 * n; ++j) m[i][j] -= f * m[col][j];
    }
  }
  IntMatrix inv(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const Rational& x = m[i][n + j];
      if (mp::denominator(x) != 1) throw ConsistencyError("matrix is not unimodular");
      inv(i, j) = detail::narrow(mp::numerator(x), "inverse");
    }
  return inv;
}

}  // namespace ecs
