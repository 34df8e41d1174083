#pragma once

// The isometry group Z x R x E of the model metric, the discrete subgroup
// Z x Z theta x Lambda, and the checks behind compactness of the quotient.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "ecs/error.hpp"
#include "ecs/geometry.hpp"
#include "ecs/model.hpp"
#include "ecs/ode_core.hpp"
#include "ecs/polynomial.hpp"
#include "ecs/random.hpp"
#include "ecs/report.hpp"

namespace ecs {

struct GroupElement {
  long long k = 0;
  double q = 0.0;
  SolutionE u;
};

/// Point (t, z, w) of R x R x E for the auxiliary action.
struct REPoint {
  double t = 0.0;
  double z = 0.0;
  SolutionE w;
};

/// Group law and actions on top of a solution space.
class IsometryGroup {
 public:
  explicit IsometryGroup(const SolutionSpace& space) : space_(&space) {}

  const SolutionSpace& space() const { return *space_; }
  int m() const { return space_->m(); }

  GroupElement identity() const { return {0, 0.0, SolutionE::zero(m())}; }

  /// (k,q,u)(l,r,w) = (k+l, q + r - Omega(u, T^l w), T^{-l} u + w)
  GroupElement op(const GroupElement& a, const GroupElement& b) const {
    check(a);
    check(b);
    return {a.k + b.k, a.q + b.q - space_->omega(a.u, space_->translate(b.u, b.k)),
            space_->translate(a.u, -b.k) + b.u};
  }

  /// (k,q,u)^{-1} = (-k, -q, -T^k u)
  GroupElement inverse(const GroupElement& a) const {
    check(a);
    return {-a.k, -a.q, -space_->translate(a.u, a.k)};
  }

  /// (k,q,u)(t,s,v) = (t + kp, s + q - <u'(t), 2v + u(t)>, v + u(t))
  ManifoldPoint act(const GroupElement& g, const ManifoldPoint& x) const {
    check(g);
    const PhaseState st = space_->evaluate(g.u, x.t);
    const ModelData& md = space_->model();
    return {x.t + g.k * md.period(), x.s + g.q - md.inner(st.du, 2.0 * x.v + st.u), x.v + st.u};
  }

  /// (k,q,u)(t,z,w) = (t + kp, z + q - Omega(u, w), T^k (w + u))
  REPoint act(const GroupElement& g, const REPoint& x) const {
    check(g);
    return {x.t + g.k * space_->period(), x.z + g.q - space_->omega(g.u, x.w),
            space_->translate(x.w + g.u, g.k)};
  }

  /// (t, z, w) -> (t, z - <w'(t), w(t)>, w(t)), intertwining the two actions.
  ManifoldPoint equivariant_map(const REPoint& x) const {
    const PhaseState st = space_->evaluate(x.w, x.t);
    return {x.t, x.z - space_->model().inner(st.du, st.u), st.u};
  }

  GroupElement commutator(const GroupElement& a, const GroupElement& b) const {
    return op(op(a, b), op(inverse(a), inverse(b)));
  }

  /// Differential of the action at x in the coordinates (t, v, s/2).
  Eigen::MatrixXd differential(const GroupElement& g, const ManifoldPoint& x) const {
    const ModelData& md = space_->model();
    const int m = md.m(), n = md.n(), y = n - 1;
    const PhaseState st = space_->evaluate(g.u, x.t);
    Eigen::VectorXd acc(m);
    for (int i = 0; i < m; ++i) acc[i] = md.potential(i, x.t) * st.u[i];
    Eigen::MatrixXd J = Eigen::MatrixXd::Identity(n, n);
    J.block(1, 0, m, 1) = st.du;
    J(y, 0) = -0.5 * (md.inner(acc, 2.0 * x.v + st.u) + md.inner(st.du, st.du));
    for (int j = 0; j < m; ++j) J(y, 1 + j) = -md.eps(j) * st.du[j];
    return J;
  }

  /// max |J^T g(g.x) J - g(x)|
  double pullback_deviation(const GroupElement& g, const ManifoldPoint& x) const {
    const ModelData& md = space_->model();
    const Eigen::MatrixXd J = differential(g, x);
    const Eigen::MatrixXd pulled = J.transpose() * metric_at(md, act(g, x)).g * J;
    return (pulled - metric_at(md, x).g).cwiseAbs().maxCoeff();
  }

 private:
  void check(const GroupElement& g) const {
    if (g.u.u0.size() != m() || g.u.du0.size() != m())
      throw DomainError("group element belongs to a model of different dimension");
  }

  const SolutionSpace* space_;
};

inline GroupElement group_op(const IsometryGroup& G, const GroupElement& a, const GroupElement& b) {
  return G.op(a, b);
}
inline ManifoldPoint act_on_M(const IsometryGroup& G, const GroupElement& g, const ManifoldPoint& x) {
  return G.act(g, x);
}
inline REPoint act_on_RE(const IsometryGroup& G, const GroupElement& g, const REPoint& x) {
  return G.act(g, x);
}

inline double group_distance(const GroupElement& a, const GroupElement& b) {
  return std::max({static_cast<double>(std::llabs(a.k - b.k)), std::abs(a.q - b.q),
                   (a.u.u0 - b.u.u0).cwiseAbs().maxCoeff(),
                   (a.u.du0 - b.u.du0).cwiseAbs().maxCoeff()});
}

inline double point_distance(const ManifoldPoint& a, const ManifoldPoint& b) {
  return std::sqrt((a.t - b.t) * (a.t - b.t) + (a.s - b.s) * (a.s - b.s) + (a.v - b.v).squaredNorm());
}

/// Metric pullback through the action of g at each point; fails when the
/// largest deviation exceeds `tolerance` (and throws IsometryError if asked).
inline Report isometry_check(const IsometryGroup& G, const GroupElement& g,
                             const std::vector<ManifoldPoint>& points, double tolerance = 1e-7,
                             bool throw_on_failure = true) {
  if (points.size() < 10) throw ParameterDomainError("isometry check needs >= 10 points");
  double worst = 0.0;
  for (const auto& x : points) worst = std::max(worst, G.pullback_deviation(g, x));
  Report r("isometry");
  r.below("max |J^T g(gx) J - g(x)|", worst, tolerance);
  if (throw_on_failure && !r.passed())
    throw IsometryError("metric pullback deviation " + std::to_string(worst));
  return r;
}

using IntVector = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>;

/// (k, l theta, u) with u given by exact lattice coordinates.
struct GammaElement {
  long long k = 0;
  long long ell = 0;
  IntVector n;

  bool is_identity() const { return k == 0 && ell == 0 && (n.array() == 0).all(); }
  friend bool operator==(const GammaElement& a, const GammaElement& b) {
    return a.k == b.k && a.ell == b.ell && a.n == b.n;
  }
  auto key() const {
    return std::make_tuple(k, ell, std::vector<std::int64_t>(n.data(), n.data() + n.size()));
  }
};

struct CanonicalForm {
  GammaElement gamma;      ///< gamma . q = point
  ManifoldPoint point;     ///< representative in the fundamental domain
  Eigen::VectorXd fiber;   ///< lattice coordinates of v at the representative, in [0,1)^m
};

/// Model with curve B, the lattice for P, and the fibre period theta.
class Quotient {
 public:
  /// Values within this relative distance of an integer count as that integer
  /// when reducing into half-open cells.
  static constexpr double kSnap = 1e-10;

  Quotient(const ModelData& model, const GlzPolynomial& P, double theta = 1.0,
           int steps = SolutionSpace::kDefaultSteps)
      : space_(model, steps), lattice_(lattice_for(model.curve(), P)), theta_(theta) {
    if (!(theta_ > 0.0)) throw ParameterDomainError("theta must be positive");
  }

  const SolutionSpace& space() const { return space_; }
  const ModelData& model() const { return space_.model(); }
  const LatticeBasis& lattice() const { return lattice_; }
  double theta() const { return theta_; }
  int m() const { return space_.m(); }

  GammaElement identity() const { return {0, 0, IntVector::Zero(m())}; }

  /// (k1,l1,n1)(k2,l2,n2) = (k1+k2, l1+l2, C^{-k2} n1 + n2); exact.
  GammaElement op(const GammaElement& a, const GammaElement& b) const {
    const IntMatrix P = integer_power(lattice_.C, lattice_.C_inverse, -b.k);
    return {a.k + b.k, a.ell + b.ell, P * a.n + b.n};
  }

  GammaElement inverse(const GammaElement& a) const {
    const IntMatrix P = integer_power(lattice_.C, lattice_.C_inverse, a.k);
    return {-a.k, -a.ell, -(P * a.n)};
  }

  SolutionL lattice_solution(const IntVector& n) const {
    return {lattice_.channel_data(n.cast<double>())};
  }

  GroupElement to_group(const GammaElement& g) const {
    return {g.k, g.ell * theta_, space_.embed(lattice_solution(g.n))};
  }

  /// Action with u in the lattice, so u'(t) = B(t) u(t).
  ManifoldPoint act(const GammaElement& g, const ManifoldPoint& x) const {
    const PhaseState st = space_.evaluate(lattice_solution(g.n), x.t);
    const ModelData& md = model();
    return {x.t + g.k * md.period(), x.s + g.ell * theta_ - md.inner(st.du, 2.0 * x.v + st.u),
            x.v + st.u};
  }

  /// Evaluation map lattice coordinates -> u(t): diag(exp int_0^t b) S.
  Eigen::MatrixXd evaluation_matrix(double t) const {
    return space_.growth(t).asDiagonal() * lattice_.S;
  }

  /// Lattice coordinates of the w in the first-order subspace with w(t) = v.
  Eigen::VectorXd fiber_coordinates(double t, const Eigen::VectorXd& v) const {
    const Eigen::VectorXd x = (1.0 / space_.growth(t).array()).matrix().cwiseProduct(v);
    return lattice_.lattice_coords(x);
  }

  static long long stable_floor(double x) {
    const double r = std::round(x);
    if (std::abs(x - r) <= kSnap * std::max(1.0, std::abs(x))) return static_cast<long long>(r);
    return static_cast<long long>(std::floor(x));
  }

  /// Integer shift j with x + j * period in [0, period). A residue within
  /// kSnap * period below period is treated as period (then reduces to ~0), so
  /// reducing a reduced value is the identity.
  static long long reduce_shift(double x, double period) {
    long long j = -static_cast<long long>(std::floor(x / period));
    const double r = x + static_cast<double>(j) * period;
    if (r < 0.0) ++j;
    else if (r >= period * (1.0 - kSnap)) --j;
    return j;
  }

  bool in_domain(const ManifoldPoint& q) const {
    if (stable_floor(q.t / model().period()) != 0 || stable_floor(q.s / theta_) != 0) return false;
    const Eigen::VectorXd z = fiber_coordinates(q.t, q.v);
    for (int i = 0; i < m(); ++i)
      if (stable_floor(z[i]) != 0) return false;
    return true;
  }

  /// gamma with gamma . q in [0,p) x [0,theta) x (half-open lattice cell).
  CanonicalForm canonicalize(const ManifoldPoint& q) const {
    const ModelData& md = model();
    const long long k = reduce_shift(q.t, md.period());
    ManifoldPoint x{q.t + k * md.period(), q.s, q.v};

    const Eigen::VectorXd z = fiber_coordinates(x.t, x.v);
    IntVector n(m());
    for (int i = 0; i < m(); ++i) n[i] = reduce_shift(z[i], 1.0);
    const PhaseState st = space_.evaluate(lattice_solution(n), x.t);
    x.s -= md.inner(st.du, 2.0 * x.v + st.u);
    x.v += st.u;

    const long long ell = reduce_shift(x.s, theta_);
    x.s += ell * theta_;

    CanonicalForm out;
    out.gamma = {k, ell, integer_power(lattice_.C, lattice_.C_inverse, -k) * n};
    out.point = x;
    out.fiber = z + n.cast<double>();
    return out;
  }

 private:
  SolutionSpace space_;
  LatticeBasis lattice_;
  double theta_;
};

inline ManifoldPoint gamma_act(const Quotient& Q, const GammaElement& g, const ManifoldPoint& x) {
  return Q.act(g, x);
}

inline CanonicalForm canonicalize(const Quotient& Q, const ManifoldPoint& q) {
  return Q.canonicalize(q);
}

/// Uniform point of the fundamental domain: t in [0,p), s in [0,theta), v from
/// lattice coordinates in [0,1)^m.
inline ManifoldPoint random_domain_point(const Quotient& Q, Rng& rng) {
  ManifoldPoint q;
  q.t = rng.uniform() * Q.model().period();
  q.s = rng.uniform() * Q.theta();
  Eigen::VectorXd z(Q.m());
  for (int i = 0; i < Q.m(); ++i) z[i] = rng.uniform();
  q.v = Q.evaluation_matrix(q.t) * z;
  return q;
}

inline GammaElement random_gamma(const Quotient& Q, Rng& rng, int range = 2) {
  GammaElement g{rng.integer(-range, range), rng.integer(-range, range), IntVector(Q.m())};
  for (int i = 0; i < Q.m(); ++i) g.n[i] = rng.integer(-range, range);
  return g;
}

/// Non-identity gamma moves every sampled point, and the evaluation map
/// u -> u(t) on the first-order subspace is invertible, which is what forces
/// u = 0 when u(t) = 0.
inline Report freeness_check(const Quotient& Q, int trials, Rng& rng) {
  Report r("freeness");
  double min_disp = INFINITY;
  for (int i = 0; i < trials; ++i) {
    GammaElement g = random_gamma(Q, rng);
    if (g.is_identity()) g.ell = 1;
    ManifoldPoint x = random_domain_point(Q, rng);
    x.t += rng.integer(-2, 2) * Q.model().period();
    min_disp = std::min(min_disp, point_distance(Q.act(g, x), x));
  }
  r.above("min displacement of random non-identity elements", min_disp, 0.0);
  double worst_cond = 0.0, min_gen = INFINITY;
  for (int i = 0; i < 20; ++i) {
    const double t = rng.uniform(-2.0, 2.0) * Q.model().period();
    worst_cond = std::max(worst_cond, condition_number(Q.evaluation_matrix(t)));
    for (int j = 0; j < Q.m(); ++j)
      min_gen = std::min(min_gen, Q.space().evaluate(Q.lattice().generator(j), t).u.norm());
  }
  r.below("max condition of evaluation map on first-order solutions", worst_cond, 1e9);
  r.above("min |u(t)| over lattice generators", min_gen, 0.0);
  return r;
}

/// All products of at most `length` generators (k, l, n unit steps and their
/// inverses), exact, identity removed.
inline std::vector<GammaElement> word_ball(const Quotient& Q, int length) {
  std::vector<GammaElement> gens;
  for (int sign : {1, -1}) {
    gens.push_back({sign, 0, IntVector::Zero(Q.m())});
    gens.push_back({0, sign, IntVector::Zero(Q.m())});
    for (int j = 0; j < Q.m(); ++j) {
      GammaElement g = Q.identity();
      g.n[j] = sign;
      gens.push_back(g);
    }
  }
  std::set<decltype(Q.identity().key())> seen{Q.identity().key()};
  std::vector<GammaElement> frontier{Q.identity()}, out;
  for (int len = 0; len < length; ++len) {
    std::vector<GammaElement> next;
    for (const auto& w : frontier)
      for (const auto& g : gens) {
        GammaElement p = Q.op(w, g);
        if (seen.insert(p.key()).second) {
          next.push_back(p);
          out.push_back(p);
        }
      }
    frontier = std::move(next);
  }
  return out;
}

struct DiscontinuityResult {
  Report report{"proper discontinuity"};
  double min_displacement = INFINITY;  ///< over the word ball and sampled domain points
  double min_sequence_gap = INFINITY;  ///< alternating sequences gamma_a y, gamma_b y
  std::size_t elements = 0;
};

/// Lower bound of |gamma x - x| over non-identity words of length <= `length`
/// and sampled x in the fundamental domain. Throws ConsistencyError below 1e-10.
inline DiscontinuityResult proper_discontinuity_check(const Quotient& Q, int samples, Rng& rng,
                                                      int length = 3, double floor = 0.01) {
  DiscontinuityResult out;
  const auto ball = word_ball(Q, length);
  out.elements = ball.size();
  std::vector<ManifoldPoint> xs;
  for (int i = 0; i < samples; ++i) xs.push_back(random_domain_point(Q, rng));
  for (const auto& g : ball)
    for (const auto& x : xs) out.min_displacement = std::min(out.min_displacement, point_distance(Q.act(g, x), x));
  for (int i = 0; i < samples; ++i) {
    const auto& a = ball[rng.integer(0, static_cast<long long>(ball.size()) - 1)];
    auto b = ball[rng.integer(0, static_cast<long long>(ball.size()) - 1)];
    if (a == b) b = Q.identity();
    const auto& y = xs[i];
    out.min_sequence_gap = std::min(out.min_sequence_gap, point_distance(Q.act(a, y), Q.act(b, y)));
  }
  if (out.min_displacement < 1e-10 || out.min_sequence_gap < 1e-10)
    throw ConsistencyError("discreteness alarm: a non-identity element nearly fixes a point");
  out.report.above("min |gamma x - x| over word length <= " + std::to_string(length), out.min_displacement, floor);
  out.report.above("min |gamma_a y - gamma_b y| for alternating sequences", out.min_sequence_gap, floor);
  return out;
}

/// Fibres {t} x R x V modulo {0} x Z theta x Lambda: the group {0} x R x L is
/// abelian, the map (z, w) -> (z - <w'(t), w(t)>, w(t)) is bijective onto each
/// fibre, and the generators of the fibre subgroup are independent. Throws
/// AbelianError if a commutator exceeds `tolerance`.
inline Report torus_fiber_check(const Quotient& Q, const IsometryGroup& G,
                                std::span<const double> times, Rng& rng,
                                double tolerance = 1e-9) {
  Report r("torus fibre");
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    auto element = [&]() {
      Eigen::VectorXd x(Q.m());
      for (int j = 0; j < Q.m(); ++j) x[j] = rng.uniform(-1.0, 1.0);
      return GroupElement{0, rng.uniform(-1.0, 1.0), Q.space().embed(SolutionL{x})};
    };
    const GroupElement a = element(), b = element();
    worst = std::max(worst, group_distance(G.commutator(a, b), G.identity()));
  }
  if (worst > tolerance) throw AbelianError("commutator of fibre elements is " + std::to_string(worst));
  r.below("max commutator in {0} x R x L", worst, tolerance);

  double cond = 0.0, roundtrip = 0.0;
  for (double t : times) {
    const Eigen::MatrixXd E = Q.evaluation_matrix(t);
    cond = std::max(cond, condition_number(E));
    for (int i = 0; i < 10; ++i) {
      Eigen::VectorXd v(Q.m());
      for (int j = 0; j < Q.m(); ++j) v[j] = rng.uniform(-2.0, 2.0);
      const Eigen::VectorXd z = Q.fiber_coordinates(t, v);
      roundtrip = std::max(roundtrip, (E * z - v).cwiseAbs().maxCoeff());
    }
  }
  r.below("condition of w -> w(t) on first-order solutions", cond, 1e9);
  r.below("fibre map round trip", roundtrip, 1e-10);

  Eigen::MatrixXd gens = Eigen::MatrixXd::Zero(Q.m() + 1, Q.m() + 1);
  gens(0, 0) = Q.theta();
  gens.bottomRightCorner(Q.m(), Q.m()) = Q.lattice().S;
  r.below("condition of fibre lattice generators", condition_number(gens), 1e12);
  return r;
}

inline Report torus_fiber_check(const Quotient& Q, const IsometryGroup& G, double t, Rng& rng,
                                double tolerance = 1e-9) {
  const double times[] = {t};
  return torus_fiber_check(Q, G, times, rng, tolerance);
}

/// T^k != Id for 1 <= |k| <= kmax. This is the checked premise; the bundle being
/// nontrivial follows from the absence of a finite-index abelian subgroup,
/// which is argued, not computed.
inline Report bundle_nontriviality_evidence(const IntMatrix& C, std::span<const double> eigenvalues,
                                            int kmax) {
  Report r = check_T_nontrivial(C, eigenvalues, kmax);
  Report out("bundle nontriviality");
  for (auto c : r.checks()) {
    c.note = c.note.empty() ? "checked premise" : c.note + "; checked premise";
    out.add(c);
  }
  return out;
}

inline Report bundle_nontriviality_evidence(const LatticeBasis& L, int kmax) {
  return bundle_nontriviality_evidence(L.C, L.roots, kmax);
}

}  // namespace ecs
