#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "ecs/polynomial.hpp"

using namespace ecs;

namespace {

// plain double bisection, kept separate from the library's exact isolation
double bisect(const std::vector<std::int64_t>& c, double lo, double hi) {
  auto P = [&](double x) {
    double acc = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * x + static_cast<double>(*it);
    return acc;
  };
  double flo = P(lo);
  for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = P(mid);
    if ((fm < 0) == (flo < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

std::vector<std::int64_t> convolve(const std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b) {
  std::vector<std::int64_t> out(a.size() + b.size() - 1, 0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

std::int64_t det3(const IntMatrix& a) {
  return a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) - a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0)) +
         a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
}

}  // namespace

TEST(CubicFamily, CoefficientsAndBracketsForFiveSix) {
  const GlzPolynomial P = cubic_family(5, 6);
  EXPECT_EQ(P.coefficients(), (std::vector<std::int64_t>{1, -6, 5, -1}));
  const auto br = cubic_brackets(5, 6);
  ASSERT_EQ(br.size(), 3u);
  EXPECT_EQ(br[0].lower, Rational(1, 6));
  EXPECT_EQ(br[0].upper, Rational(1));
  EXPECT_EQ(br[1].lower, Rational(1));
  EXPECT_EQ(br[1].upper, Rational(5, 2));
  EXPECT_EQ(br[2].lower, Rational(5, 2));
  EXPECT_EQ(br[2].upper, Rational(5));
  for (const auto& b : br) EXPECT_TRUE(b.strict_sign_change());
}

TEST(CubicFamily, RootsMatchBisectionOracle) {
  const GlzPolynomial P = cubic_family(5, 6);
  const auto iso = isolate_roots(P);
  ASSERT_EQ(iso.spectrum.size(), 3u);
  const double expect[3] = {bisect(P.coefficients(), 1.0 / 6, 1.0), bisect(P.coefficients(), 1.0, 2.5),
                            bisect(P.coefficients(), 2.5, 5.0)};
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(iso.spectrum[i], expect[i], 1e-12);
    EXPECT_LT(std::abs(P.evaluate(iso.spectrum[i])), 1e-10);
  }
  EXPECT_NEAR(iso.spectrum[0], 0.19806, 1e-5);
  EXPECT_NEAR(iso.spectrum[1], 1.55496, 1e-5);
  EXPECT_NEAR(iso.spectrum[2], 3.24698, 1e-5);
}

TEST(CubicFamily, RejectsParametersOutsideDomain) {
  EXPECT_THROW(cubic_family(2, 1), ParameterDomainError);
  EXPECT_THROW(cubic_family(1, 2), ParameterDomainError);
  EXPECT_THROW(cubic_family(5, 7), ParameterDomainError);  // l > k^2/4
  EXPECT_THROW(cubic_family(5, 5), ParameterDomainError);  // l = k
}

TEST(CubicFamily, EveryBracketHasExactSignChangeUpToKTwelve) {
  int count = 0;
  for (std::int64_t k = 2; k <= 12; ++k)
    for (std::int64_t l = k + 1; 4 * l <= k * k; ++l) {
      for (const auto& b : cubic_brackets(k, l)) {
        const GlzPolynomial P = cubic_family(k, l);
        EXPECT_LT(P.evaluate(b.lower) * P.evaluate(b.upper), 0) << "k=" << k << " l=" << l;
      }
      ++count;
    }
  EXPECT_GT(count, 50);
}

TEST(QuadraticFamily, MatchesQuadraticFormula) {
  for (std::int64_t k : {-3, -4, -5, -9}) {
    const GlzPolynomial P = quadratic_family(k);
    EXPECT_EQ(P.coefficients(), (std::vector<std::int64_t>{1, k, 1}));
    const double disc = std::sqrt(static_cast<double>(k * k - 4));
    const auto iso = isolate_roots(P);
    ASSERT_EQ(iso.spectrum.size(), 2u);
    EXPECT_NEAR(iso.spectrum[0], (-k - disc) / 2.0, 1e-12);
    EXPECT_NEAR(iso.spectrum[1], (-k + disc) / 2.0, 1e-12);
    EXPECT_LT(iso.spectrum[0], 1.0);
    EXPECT_GT(iso.spectrum[1], 1.0);
  }
  const auto r3 = isolate_roots(quadratic_family(-3)).spectrum;
  EXPECT_NEAR(r3[0], 0.381966, 1e-6);
  EXPECT_NEAR(r3[1], 2.618034, 1e-6);
  const auto r4 = isolate_roots(quadratic_family(-4)).spectrum;
  EXPECT_NEAR(r4[0], 2.0 - std::sqrt(3.0), 1e-12);
  EXPECT_NEAR(r4[1], 2.0 + std::sqrt(3.0), 1e-12);
}

TEST(QuadraticFamily, RejectsKAboveMinusThree) {
  EXPECT_THROW(quadratic_family(-2), ParameterDomainError);
  EXPECT_THROW(quadratic_family(0), ParameterDomainError);
}

TEST(QuarticFamily, AnchorValues) {
  const GlzPolynomial P = quartic_family(8, 9, 16);
  EXPECT_EQ(P.coefficients(), (std::vector<std::int64_t>{1, -8, 16, -9, 1}));
  const auto v = quartic_test_values(P);
  EXPECT_EQ(v.at_one, 1);
  EXPECT_EQ(v.at_two, -7);
  EXPECT_EQ(v.sixteen_at_half, -1);

  const auto w = quartic_test_values(quartic_family(7, 7, 13));
  EXPECT_EQ(w.at_one, 1);
  EXPECT_EQ(w.at_two, -1);
}

TEST(QuarticFamily, RejectsBrokenInequalities) {
  EXPECT_THROW(quartic_family(7, 8, 14), ParameterDomainError);  // m > 2k-7
  EXPECT_THROW(quartic_family(6, 6, 10), ParameterDomainError);  // k < 7
  EXPECT_THROW(quartic_family(8, 9, 15), ParameterDomainError);  // 2(k+m)-4 >= 2l
}

TEST(QuarticFamily, IdentityAndFourPositiveRootsForAllValidParameters) {
  int count = 0;
  for (std::int64_t k = 7; k <= 12; ++k)
    for (std::int64_t m = k; m <= 2 * k - 7; ++m)
      for (std::int64_t l = k + m - 1; 2 * l < 4 * k + m - 8; ++l) {
        if (!(2 * (k + m) - 4 < 2 * l)) continue;
        const GlzPolynomial P = quartic_family(k, m, l);
        const auto v = quartic_test_values(P);
        EXPECT_EQ(v.sixteen_at_half - v.at_two, 6 * (m - k));
        const auto iso = isolate_roots(P);
        EXPECT_EQ(iso.spectrum.size(), 4u);
        EXPECT_TRUE(iso.spectrum.multiplicity_free());
        ++count;
      }
  EXPECT_GT(count, 10);
}

TEST(Compose, LowDimensionsMatchConvolutionOracle) {
  EXPECT_EQ(compose_for_dimension(3), cubic_family(5, 6));
  const GlzPolynomial P4 = compose_for_dimension(4);
  EXPECT_EQ(P4.coefficients(), convolve({1, -3, 1}, {1, -4, 1}));
  EXPECT_EQ(P4.coefficients(), (std::vector<std::int64_t>{1, -7, 14, -7, 1}));
  const GlzPolynomial P5 = compose_for_dimension(5);
  EXPECT_EQ(P5.coefficients(), convolve({1, -6, 5, -1}, {1, -3, 1}));
  EXPECT_EQ(P5[5], -1);
}

TEST(Compose, CubicAndQuadraticFactorsShareNoRoot) {
  // resultant of x^2 - 3x + 1 and the cubic via the remainder a x + b:
  // Res = (a r1 + b)(a r2 + b) = a^2 r1 r2 + a b (r1 + r2) + b^2 with r1 r2 = 1, r1 + r2 = 3
  // -x^3 + 5x^2 - 6x + 1 = (x^2 - 3x + 1)(-x + 2) + (x - 1)
  const std::int64_t a = 1, b = -1;
  EXPECT_NE(a * a + 3 * a * b + b * b, 0);
  const auto iso = isolate_roots(compose_for_dimension(5));
  EXPECT_TRUE(iso.spectrum.multiplicity_free());
}

TEST(Compose, RejectsSmallDegree) { EXPECT_THROW(compose_for_dimension(2), ParameterDomainError); }

TEST(Compose, DistinctAdmissibleRootsUpToTen) {
  for (int m = 3; m <= 10; ++m) {
    const GlzPolynomial P = compose_for_dimension(m);
    EXPECT_EQ(P.degree(), m);
    EXPECT_EQ(P[m], (m % 2 == 0) ? 1 : -1);
    EXPECT_EQ(std::abs(P[0]), 1);
    const auto s = isolate_roots(P).spectrum;
    ASSERT_EQ(static_cast<int>(s.size()), m);
    EXPECT_TRUE(s.multiplicity_free());
    EXPECT_TRUE(s.avoids_unit());
    EXPECT_TRUE(s.nondegenerate());
    for (double x : s.values()) EXPECT_GT(x, 0.0);
  }
}

TEST(IsolateRoots, RejectsComplexRepeatedAndUnitRoots) {
  EXPECT_THROW(isolate_roots(GlzPolynomial({1, 1, 1})), SpectrumStructureError);
  EXPECT_THROW(isolate_roots(GlzPolynomial({1, -2, 1})), SpectrumStructureError);
  // -(x - 1)(x^2 - 3x + 1)
  EXPECT_THROW(isolate_roots(GlzPolynomial({1, -4, 4, -1})), UnitRootError);
}

TEST(GlzPolynomial, RejectsWrongLeadingOrConstant) {
  EXPECT_THROW(GlzPolynomial({1, -3, -1}), ParameterDomainError);
  EXPECT_THROW(GlzPolynomial({2, -3, 1}), ParameterDomainError);
  EXPECT_THROW(GlzPolynomial({1, -6, 5, 1}), ParameterDomainError);
}

TEST(Companion, QuadraticExample) {
  const IntMatrix C = companion_matrix(quadratic_family(-3));
  IntMatrix expect(2, 2);
  expect << 0, -1, 1, 3;
  EXPECT_EQ(C, expect);
  EXPECT_EQ(exact_determinant(C), 1);
  EXPECT_EQ(C.trace(), 3);
}

TEST(Companion, CubicDeterminantByCofactors) {
  const IntMatrix C = companion_matrix(cubic_family(5, 6));
  EXPECT_EQ(det3(C), 1);
  EXPECT_EQ(exact_determinant(C), 1);
}

TEST(Companion, CharacteristicPolynomialRoundTrip) {
  std::vector<GlzPolynomial> polys;
  for (int m = 3; m <= 8; ++m) polys.push_back(compose_for_dimension(m));
  polys.push_back(quartic_family(8, 9, 16));
  polys.push_back(quadratic_family(-7));
  for (const auto& P : polys) {
    const IntMatrix C = companion_matrix(P);
    const auto chi = characteristic_polynomial(C);
    const int m = P.degree();
    const int sign = (m % 2 == 0) ? 1 : -1;
    ASSERT_EQ(static_cast<int>(chi.size()), m + 1);
    for (int i = 0; i <= m; ++i) EXPECT_EQ(chi[i], BigInt(sign * P[i])) << "m=" << m << " i=" << i;
    const BigInt d = exact_determinant(C);
    EXPECT_TRUE(d == 1 || d == -1);
    const IntMatrix Ci = unimodular_inverse(C);
    EXPECT_EQ(C * Ci, IntMatrix::Identity(m, m));
  }
}

TEST(Spectrum, DegeneracyPredicates) {
  EXPECT_FALSE(Spectrum({2.0}).nondegenerate());
  EXPECT_FALSE(Spectrum({2.0, 0.5}).nondegenerate());
  EXPECT_TRUE(Spectrum({2.0, 0.5, 3.0}).nondegenerate());
  EXPECT_FALSE(Spectrum({1.0, 2.0, 3.0}).avoids_unit());
  EXPECT_FALSE(Spectrum({2.0, 2.0, 3.0}).multiplicity_free());
  EXPECT_THROW(Spectrum({-1.0, 2.0}), SpectrumStructureError);
}

TEST(Spectrum, MoreThanTwoAdmissibleValuesAreNondegenerate) {
  for (int m = 3; m <= 10; ++m) {
    const auto s = isolate_roots(compose_for_dimension(m)).spectrum;
    EXPECT_TRUE(s.nondegenerate()) << m;
  }
}
