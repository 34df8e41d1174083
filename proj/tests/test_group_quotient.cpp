#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "ecs/group_quotient.hpp"

using namespace ecs;

namespace {

ModelData calibrated_model(double p) {
  const GlzPolynomial P = cubic_family(5, 6);
  const Spectrum target = isolate_roots(P, IsolationOptions::full_precision()).spectrum;
  const auto seed = seed_constant(target, p);
  const auto sol = calibrate(PeriodicProfile::cosine(p, seed.h, 0.05), target, seed);
  return ModelData(5, p, {1, -1, 1}, sol.f, sol.A, sol.B);
}

// cubic(5, 6), p = 1, theta = 0.7
const Quotient& quotient() {
  static const Quotient Q(calibrated_model(1.0), cubic_family(5, 6), 0.7);
  return Q;
}

SolutionE random_solution(int m, Rng& rng) {
  SolutionE u = SolutionE::zero(m);
  for (int i = 0; i < m; ++i) {
    u.u0[i] = rng.uniform(-1.0, 1.0);
    u.du0[i] = rng.uniform(-1.0, 1.0);
  }
  return u;
}

GroupElement random_element(int m, Rng& rng) {
  return {rng.integer(-2, 2), rng.uniform(-1.0, 1.0), random_solution(m, rng)};
}

ManifoldPoint random_point(int m, Rng& rng) {
  ManifoldPoint x{rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0), Eigen::VectorXd(m)};
  for (int i = 0; i < m; ++i) x.v[i] = rng.uniform(-1.0, 1.0);
  return x;
}

double scale(const ManifoldPoint& x) {
  return std::max({1.0, std::abs(x.t), std::abs(x.s), x.v.cwiseAbs().maxCoeff()});
}

}  // namespace

TEST(Group, IdentityInverseAssociativity) {
  const IsometryGroup G(quotient().space());
  Rng rng(21);
  for (int i = 0; i < 100; ++i) {
    const auto a = random_element(3, rng), b = random_element(3, rng), c = random_element(3, rng);
    EXPECT_LT(group_distance(G.op(G.op(a, b), c), G.op(a, G.op(b, c))), 1e-9);
    EXPECT_LT(group_distance(G.op(a, G.identity()), a), 1e-12);
    EXPECT_LT(group_distance(G.op(G.identity(), a), a), 1e-12);
    EXPECT_LT(group_distance(G.op(a, G.inverse(a)), G.identity()), 1e-9);
    EXPECT_LT(group_distance(G.op(G.inverse(a), a), G.identity()), 1e-9);
  }
}

TEST(Group, PureTranslationsAdd) {
  const IsometryGroup G(quotient().space());
  const auto zero = SolutionE::zero(3);
  const auto g = G.op({2, 0.0, zero}, {-5, 0.0, zero});
  EXPECT_EQ(g.k, -3);
  EXPECT_EQ(g.q, 0.0);
  EXPECT_EQ(g.u.u0.norm() + g.u.du0.norm(), 0.0);
  const auto h = G.op({0, 0.25, zero}, {0, 0.5, zero});
  EXPECT_EQ(h.q, 0.75);
}

TEST(Group, ActionAxiomsAndConjugation) {
  const auto& space = quotient().space();
  const IsometryGroup G(space);
  Rng rng(22);
  for (int i = 0; i < 100; ++i) {
    const auto a = random_element(3, rng), b = random_element(3, rng);
    const ManifoldPoint x = random_point(3, rng);
    const ManifoldPoint lhs = G.act(a, G.act(b, x)), rhs = G.act(G.op(a, b), x);
    EXPECT_LT(point_distance(lhs, rhs), 1e-9 * scale(lhs));
    EXPECT_LT(point_distance(G.act(G.identity(), x), x), 1e-15);

    const REPoint X{x.t, rng.uniform(-1.0, 1.0), random_solution(3, rng)};
    const REPoint L = G.act(a, G.act(b, X)), R = G.act(G.op(a, b), X);
    EXPECT_NEAR(L.t, R.t, 1e-12);
    EXPECT_NEAR(L.z, R.z, 1e-9);
    EXPECT_LT((L.w.u0 - R.w.u0).norm() + (L.w.du0 - R.w.du0).norm(), 1e-9);

    // g (0, r, w) g^-1 = (0, r - 2 Omega(u, w), T^k w)
    const SolutionE w = random_solution(3, rng);
    const double r = rng.uniform(-1.0, 1.0);
    const auto conj = G.op(G.op(a, GroupElement{0, r, w}), G.inverse(a));
    const GroupElement expect{0, r - 2.0 * space.omega(a.u, w), space.translate(w, a.k)};
    EXPECT_LT(group_distance(conj, expect), 1e-9);

    // the map R x R x E -> M intertwines the actions
    const ManifoldPoint e1 = G.equivariant_map(G.act(a, X)), e2 = G.act(a, G.equivariant_map(X));
    EXPECT_LT(point_distance(e1, e2), 1e-9 * scale(e1));
  }
}

TEST(Group, ActsByIsometries) {
  const IsometryGroup G(quotient().space());
  Rng rng(23);
  std::vector<ManifoldPoint> pts;
  for (int i = 0; i < 10; ++i) pts.push_back(random_point(3, rng));
  for (int i = 0; i < 100; ++i) {
    const auto g = random_element(3, rng);
    EXPECT_TRUE(isometry_check(G, g, pts).passed());
  }
}

TEST(Group, DifferentialMatchesFiniteDifferences) {
  const IsometryGroup G(quotient().space());
  Rng rng(24);
  const auto g = random_element(3, rng);
  const ManifoldPoint x = random_point(3, rng);
  const Eigen::MatrixXd J = G.differential(g, x);
  const double h = 1e-5;
  for (int j = 0; j < 5; ++j) {
    Eigen::VectorXd xp = coordinates(x), xm = coordinates(x);
    xp[j] += h;
    xm[j] -= h;
    const Eigen::VectorXd col =
        (coordinates(G.act(g, point_from(xp))) - coordinates(G.act(g, point_from(xm)))) / (2 * h);
    EXPECT_LT((col - J.col(j)).norm(), 1e-6) << "column " << j;
  }
}

TEST(Group, WrongEquationIsNotAnIsometry) {
  // solutions of a shifted Hill equation do not preserve the model metric
  const ModelData& md = quotient().model();
  const auto shifted = ModelData::relaxed(5, 1.0, md.signature(), md.f().with_mean(md.f().mean() + 0.3), md.a());
  const SolutionSpace other(shifted);
  const IsometryGroup G(other);
  Rng rng(25);
  const auto g = random_element(3, rng);
  const ManifoldPoint x = random_point(3, rng);
  const Eigen::MatrixXd J = G.differential(g, x);
  const Eigen::MatrixXd pulled = J.transpose() * metric_at(md, G.act(g, x)).g * J;
  EXPECT_GT((pulled - metric_at(md, x).g).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(Gamma, ExactGroupLaw) {
  const auto& Q = quotient();
  Rng rng(26);
  for (int i = 0; i < 100; ++i) {
    const auto a = random_gamma(Q, rng), b = random_gamma(Q, rng), c = random_gamma(Q, rng);
    EXPECT_EQ(Q.op(Q.op(a, b), c), Q.op(a, Q.op(b, c)));
    EXPECT_EQ(Q.op(a, Q.inverse(a)), Q.identity());
    EXPECT_EQ(Q.op(Q.identity(), a), a);
  }
}

TEST(Gamma, MatchesContinuousGroup) {
  const auto& Q = quotient();
  const IsometryGroup G(Q.space());
  Rng rng(27);
  for (int i = 0; i < 50; ++i) {
    const auto a = random_gamma(Q, rng), b = random_gamma(Q, rng);
    const auto cont = G.op(Q.to_group(a), Q.to_group(b));
    const auto disc = Q.to_group(Q.op(a, b));
    const double s = 1.0 + disc.u.u0.cwiseAbs().maxCoeff() + disc.u.du0.cwiseAbs().maxCoeff();
    EXPECT_LT(group_distance(cont, disc), 1e-9 * s);
    const ManifoldPoint x = random_point(3, rng);
    const ManifoldPoint y1 = Q.act(a, x), y2 = G.act(Q.to_group(a), x);
    EXPECT_LT(point_distance(y1, y2), 1e-8 * scale(y1));
  }
}

TEST(Quotient, FreeAndProperlyDiscontinuous) {
  const auto& Q = quotient();
  Rng rng(28);
  EXPECT_TRUE(freeness_check(Q, 100, rng).passed());
  const auto disc = proper_discontinuity_check(Q, 100, rng, 3);
  EXPECT_GT(disc.min_displacement, 0.01);
  EXPECT_GT(disc.min_sequence_gap, 0.01);
  EXPECT_TRUE(disc.report.passed());
}

TEST(Quotient, WordBallSize) {
  const auto& Q = quotient();
  EXPECT_EQ(word_ball(Q, 1).size(), 10u);
  const auto ball = word_ball(Q, 2);
  for (const auto& g : ball) EXPECT_FALSE(g.is_identity());
  EXPECT_GT(ball.size(), 10u);
}

TEST(Canonicalize, SimpleShifts) {
  const auto& Q = quotient();
  const ManifoldPoint q{1.3, 0.2, Eigen::Vector3d::Zero()};
  const auto cf = Q.canonicalize(q);
  EXPECT_EQ(cf.gamma.k, -1);
  EXPECT_EQ(cf.gamma.ell, 0);
  EXPECT_EQ(cf.gamma.n, IntVector::Zero(3));
  EXPECT_NEAR(cf.point.t, 0.3, 1e-15);
  EXPECT_EQ(cf.point.s, 0.2);
  const auto neg = Q.canonicalize({0.5, -0.25 * 0.7, Eigen::Vector3d::Zero()});
  EXPECT_EQ(neg.gamma.ell, 1);
  EXPECT_NEAR(neg.point.s, 0.75 * 0.7, 1e-15);
  EXPECT_TRUE(Q.in_domain(cf.point));
  EXPECT_FALSE(Q.in_domain(q));
}

TEST(Canonicalize, OrbitInvariantAndIdempotent) {
  const auto& Q = quotient();
  const IsometryGroup G(Q.space());
  Rng rng(29);
  for (int i = 0; i < 200; ++i) {
    ManifoldPoint q{rng.uniform(-3.0, 3.0), rng.uniform(-7.0, 7.0), Eigen::VectorXd(3)};
    for (int j = 0; j < 3; ++j) q.v[j] = rng.uniform(-5.0, 5.0);
    const auto cf = Q.canonicalize(q);
    EXPECT_TRUE(Q.in_domain(cf.point));
    for (int j = 0; j < 3; ++j) {
      EXPECT_GE(cf.fiber[j], 0.0);
      EXPECT_LT(cf.fiber[j], 1.0);
    }
    // gamma . q is the representative
    EXPECT_LT(point_distance(Q.act(cf.gamma, q), cf.point), 1e-8 * scale(q));
    // idempotent
    const auto again = Q.canonicalize(cf.point);
    EXPECT_TRUE(again.gamma.is_identity());
    EXPECT_LT(point_distance(again.point, cf.point), 1e-12);
    // orbit invariant
    GammaElement g = random_gamma(Q, rng, 1);
    const ManifoldPoint moved = Q.act(g, q);
    if (std::abs(moved.t) > 3.0) continue;
    EXPECT_LT(point_distance(Q.canonicalize(moved).point, cf.point), 1e-8) << "point " << i;
  }
}

TEST(Torus, FibreGroupIsAbelianButGenericIsNot) {
  const auto& Q = quotient();
  const IsometryGroup G(Q.space());
  Rng rng(30);
  const std::vector<double> times{0.0, 0.4, 1.7, -2.3};
  EXPECT_TRUE(torus_fiber_check(Q, G, times, rng).passed());
  // second-order elements outside the first-order subspace do not commute
  double control = 0;
  for (int i = 0; i < 10; ++i) {
    const GroupElement a{0, 0.0, random_solution(3, rng)}, b{0, 0.0, random_solution(3, rng)};
    control = std::max(control, group_distance(G.commutator(a, b), G.identity()));
  }
  EXPECT_GT(control, 1e-6);
}

TEST(Nontriviality, LatticeAndIdentityControl) {
  const auto& Q = quotient();
  const auto r = bundle_nontriviality_evidence(Q.lattice(), 20);
  EXPECT_TRUE(r.passed());
  for (const auto& c : r.checks()) EXPECT_NE(c.note.find("checked premise"), std::string::npos);
  const IntMatrix id = IntMatrix::Identity(3, 3);
  const std::vector<double> ones{1.0, 1.0, 1.0};
  EXPECT_FALSE(bundle_nontriviality_evidence(id, ones, 20).passed());
}

TEST(Quotient, RejectsBadTheta) {
  EXPECT_THROW(Quotient(calibrated_model(1.0), cubic_family(5, 6), 0.0), ParameterDomainError);
}
