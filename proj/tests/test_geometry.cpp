#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "ecs/geometry.hpp"

using namespace ecs;

namespace {

struct Fixture {
  ModelData model;
  SolutionSpace space;
};

// cubic(5, 6) at p = 1, signature +-+, calibrated
const Fixture& fixture() {
  static const Fixture fx = [] {
    const GlzPolynomial P = cubic_family(5, 6);
    const Spectrum target = isolate_roots(P, IsolationOptions::full_precision()).spectrum;
    const auto seed = seed_constant(target, 1.0);
    const auto sol = calibrate(PeriodicProfile::cosine(1.0, seed.h, 0.05), target, seed);
    ModelData model(5, 1.0, {1, -1, 1}, sol.f, sol.A, sol.B);
    SolutionSpace space(model);
    return Fixture{std::move(model), std::move(space)};
  }();
  return fx;
}

std::vector<ManifoldPoint> points(const ModelData& model, int count, std::uint64_t seed) {
  Rng rng(seed);
  return sample_points(model, count, rng);
}

}  // namespace

TEST(Metric, ValuesAtSimplePoints) {
  // seed data for {2, 1/2, 3}: f(0) = h + 0.05 and a_1 = log(2)^2 - h
  const auto seed = seed_constant(Spectrum({2.0, 0.5, 3.0}), 1.0);
  const ModelData model(5, 1.0, {1, 1, 1}, PeriodicProfile::cosine(1.0, seed.h, 0.05), seed.A);
  ManifoldPoint q{0.0, 0.4, Eigen::Vector3d::Zero()};
  auto g = metric_at(model, q);
  EXPECT_EQ(g.kappa, 0.0);
  EXPECT_EQ(g.g(0, 0), 0.0);
  EXPECT_EQ(g.g(0, 4), 1.0);
  q.v = Eigen::Vector3d(1, 0, 0);
  g = metric_at(model, q);
  EXPECT_NEAR(g.kappa, seed.h + 0.05 + seed.A[0], 1e-15);
  EXPECT_NEAR(g.kappa, 0.5304, 1e-4);  // printed to four digits
  EXPECT_LT((g.g * g.g_inverse - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Metric, SignatureEntersKappa) {
  const auto& model = fixture().model;
  const ManifoldPoint q{0.3, 0.0, Eigen::Vector3d(0.5, -1.0, 0.25)};
  double expect = 0;
  for (int i = 0; i < 3; ++i) expect += model.eps(i) * (model.f()(0.3) + model.a()[i]) * q.v[i] * q.v[i];
  EXPECT_NEAR(metric_at(model, q).kappa, expect, 1e-15);
  EXPECT_EQ(metric_at(model, q).g(2, 2), -1.0);
}

TEST(Christoffel, VanishesOnZeroSection) {
  const auto& model = fixture().model;
  const auto G = christoffel_at(model, {0.37, 1.2, Eigen::Vector3d::Zero()});
  EXPECT_EQ(G.max_abs(), 0.0);
}

TEST(Christoffel, MatchesDifferencedMetric) {
  const auto& model = fixture().model;
  const Connection conn = model_connection(model);
  double worst = 0, asym = 0;
  for (const auto& q : points(model, 20, 11)) {
    const Eigen::VectorXd x = coordinates(q);
    const Tensor exact = christoffel_at(model, q);
    const Tensor fd = christoffel_from_metric(conn.metric, x);
    worst = std::max(worst, exact.combine(1.0, fd, -1.0).max_abs());
    for (int a = 0; a < 5; ++a)
      for (int b = 0; b < 5; ++b)
        for (int c = 0; c < 5; ++c) asym = std::max(asym, std::abs(exact(a, b, c) - exact(a, c, b)));
  }
  EXPECT_LT(worst, 1e-6);
  EXPECT_EQ(asym, 0.0);
}

TEST(Christoffel, MetricCompatibility) {
  const auto& model = fixture().model;
  const Connection conn = model_connection(model);
  for (const auto& q : points(model, 5, 12)) EXPECT_LT(metric_compatibility(conn, coordinates(q)), 1e-6);
}

TEST(Curvature, FlatModelHasNoCurvature) {
  const auto flat = ModelData::relaxed(5, 1.0, {1, 1, -1}, PeriodicProfile::constant(1.0, 0.0), {0, 0, 0});
  const auto cur = curvature_at(model_connection(flat), coordinates(ManifoldPoint{0.2, 0.1, Eigen::Vector3d(1, 2, 3)}));
  EXPECT_LT(cur.riemann.max_abs(), 1e-12);
}

TEST(Curvature, RicciScalarAndWeyl) {
  const auto& model = fixture().model;
  const auto rep = curvature_report(model, points(model, 20, 13), {}, false);
  ASSERT_EQ(rep.ricci00_over_f.size(), 20u);
  for (double r : rep.ricci00_over_f) EXPECT_NEAR(r, -3.0, 3e-5);
  EXPECT_LT(rep.max_ricci_other, 1e-7);
  EXPECT_LT(rep.max_scalar, 1e-8);
  EXPECT_GT(rep.min_weyl_norm, 1e-3);
  EXPECT_LT(rep.max_weyl_ratio, 1e-5);
  EXPECT_GT(rep.gradient_points, 0);
  EXPECT_GT(rep.min_ricci_gradient, 1e-3);
  EXPECT_LT(rep.max_weyl_structure, 1e-7);
  EXPECT_TRUE(rep.report.passed());
}

TEST(Curvature, RicciDependsOnDimensionOnly) {
  // constant f = 0.8 with A = 0: Ric_00 = (2 - n) f for n = 3..6
  for (int n = 3; n <= 6; ++n) {
    const auto md = ModelData::relaxed(n, 1.0, std::vector<int>(n - 2, 1),
                                       PeriodicProfile::constant(1.0, 0.8), std::vector<double>(n - 2, 0.0));
    ManifoldPoint q{0.1, 0.0, Eigen::VectorXd::Constant(n - 2, 0.7)};
    const auto cur = curvature_at(model_connection(md), coordinates(q));
    EXPECT_NEAR(cur.ricci(0, 0), (2.0 - n) * 0.8, 1e-7) << "n=" << n;
  }
}

TEST(Olszak, ModelPasses) {
  const auto& model = fixture().model;
  const auto res = olszak_test(model, points(model, 20, 14));
  EXPECT_LT(res.max_wedge, 1e-8);
  EXPECT_EQ(res.max_parallel_defect, 0.0);
  EXPECT_EQ(res.gradient_defect, 0.0);
  EXPECT_TRUE(res.report.passed());
}

TEST(Olszak, NegativeControls) {
  const auto& model = fixture().model;
  const auto pts = points(model, 10, 15);
  // cubic term in g_00: still of the wedge form, but Weyl is no longer parallel
  auto cubic = [&model](const Eigen::VectorXd& x) {
    Eigen::MatrixXd g = metric_at(model, point_from(x)).g;
    g(0, 0) += x[1] * x[1] * x[1];
    return g;
  };
  const Connection c1 = numeric_connection(cubic, 5);
  EXPECT_LT(olszak_test(c1, pts).max_wedge, 1e-6);
  const Eigen::VectorXd x = coordinates(pts[3]);
  const double ratio = weyl_derivative(c1, x).norm() / curvature_at(c1, x).weyl.norm();
  EXPECT_GT(ratio, 1e-2);
  // V-block depending on v: Weyl leaves the dt-wedge pattern
  auto block = [&model](const Eigen::VectorXd& x) {
    Eigen::MatrixXd g = metric_at(model, point_from(x)).g;
    g(1, 1) += 0.3 * x[2] * x[2];
    return g;
  };
  const auto bad = olszak_test(numeric_connection(block, 5), pts);
  EXPECT_GT(bad.max_wedge, 1e-4);
  EXPECT_FALSE(bad.report.passed());
}

TEST(Geodesic, TransversalLeafIsStraight) {
  const auto& fx = fixture();
  const ManifoldPoint q{0.3, -0.2, Eigen::Vector3d(0.1, 0.4, -0.3)};
  const TangentVector w{0.0, 0.5, Eigen::Vector3d(0.2, -0.1, 0.3)};
  const auto tr = geodesic(fx.space, q, w, -3.0, 3.0, {.samples = 13});
  for (const auto& smp : tr.samples) {
    EXPECT_EQ(smp.point.t, 0.3);
    EXPECT_NEAR(smp.point.s, -0.2 + 0.5 * smp.sigma, 1e-13);
    EXPECT_LT((smp.point.v - (q.v + smp.sigma * w.dv)).norm(), 1e-13);
  }
  EXPECT_LT(tr.max_disagreement, 1e-9);
}

TEST(Geodesic, NullDirectionOfS) {
  const auto& fx = fixture();
  const ManifoldPoint q{1.1, 0.0, Eigen::Vector3d(0.5, 0.5, 0.5)};
  const TangentVector w{0.0, 1.0, Eigen::Vector3d::Zero()};
  const auto tr = geodesic(fx.space, q, w, 0.0, 4.0, {.samples = 5});
  EXPECT_NEAR(tr.samples.back().point.s, 4.0, 1e-13);
  EXPECT_EQ(tr.samples.back().energy, 0.0);
}

TEST(Geodesic, StructuredAgreesWithGenericOverFiftyPeriods) {
  const auto& fx = fixture();
  Rng rng(16);
  for (int k = 0; k < 3; ++k) {
    ManifoldPoint q{rng.uniform(0.0, 1.0), rng.uniform(-1.0, 1.0), Eigen::VectorXd(3)};
    TangentVector w{rng.uniform(0.5, 1.5), rng.uniform(-1.0, 1.0), Eigen::VectorXd(3)};
    for (int i = 0; i < 3; ++i) {
      q.v[i] = rng.uniform(-1.0, 1.0);
      w.dv[i] = rng.uniform(-1.0, 1.0);
    }
    const auto tr = geodesic(fx.space, q, w, -50.0, 50.0, {.samples = 51});
    EXPECT_LT(tr.max_disagreement, 1e-6);
    EXPECT_LT(tr.max_energy_drift, 1e-8);
    EXPECT_LT(tr.max_generic_energy_drift, 1e-8);
    // t is affine in the parameter
    for (const auto& smp : tr.samples) EXPECT_NEAR(smp.point.t, q.t + w.dt * smp.sigma, 1e-12);
  }
}

TEST(Geodesic, RejectsBadSpan) {
  const auto& fx = fixture();
  const ManifoldPoint q{0, 0, Eigen::Vector3d::Zero()};
  const TangentVector w{1, 0, Eigen::Vector3d::Zero()};
  EXPECT_THROW(geodesic(fx.space, q, w, 1.0, 2.0), ParameterDomainError);
  EXPECT_THROW(geodesic(fx.space, q, w, -INFINITY, 2.0), ParameterDomainError);
}

TEST(Homogeneity, ModelShowsObstruction) {
  const auto& f = fixture().model.f();
  const auto res = homogeneity_obstruction(f);
  EXPECT_TRUE(res.obstruction_found);
  // oracle: direct sampling of -f'/(2 f^{3/2}) (f stays positive here)
  double lo = INFINITY, hi = -INFINITY;
  for (int k = 0; k <= 20000; ++k) {
    const double t = k / 20000.0;
    const double d = -f.derivative(t) / (2 * std::pow(f(t), 1.5));
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  EXPECT_NEAR(res.variation, hi - lo, 1e-4 * (hi - lo));
}

TEST(Homogeneity, AffineControlAndErrors) {
  const auto control = homogeneity_obstruction([](double t) { return 1.0 / ((t + 1) * (t + 1)); },
                                               [](double t) { return -2.0 / std::pow(t + 1, 3); }, 0.0, 3.0);
  EXPECT_FALSE(control.obstruction_found);
  EXPECT_LT(control.variation, 1e-9);
  EXPECT_THROW(homogeneity_obstruction(PeriodicProfile::constant(1.0, 2.0)), ParameterDomainError);
  EXPECT_THROW(homogeneity_obstruction([](double) { return 0.0; }, [](double) { return 0.0; }, 0.0, 1.0),
               DomainError);
}
