#pragma once

// End-to-end construction of one compact model and the verification suites
// that certify it, one Report per section.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ecs/error.hpp"
#include "ecs/geometry.hpp"
#include "ecs/group_quotient.hpp"
#include "ecs/model.hpp"
#include "ecs/ode_core.hpp"
#include "ecs/periodic_profile.hpp"
#include "ecs/polynomial.hpp"
#include "ecs/random.hpp"
#include "ecs/report.hpp"
#include "ecs/spectral_solver.hpp"

namespace ecs {

struct Tolerances {
  double spectrum = 1e-9;
  double reintegration = 1e-8;
  double periodicity = 1e-10;
  double ode_residual = 1e-8;
  double fixed_point = 1e-8;
  double trace = TracelessDiag::kTraceTolerance;
  double a_floor = TracelessDiag::kNonzeroFloor;
  double root_residual = 1e-10;
  double monodromy_det = 1e-10;
  double omega_spread = 1e-9;
  double omega_on_L = 1e-10;
  double embedding = 1e-9;
  double translation = 1e-10;
  double charpoly = 1e-7;
  double integrality = 1e-7;
  double metric_inverse = 1e-12;
  double christoffel_fd = 1e-6;
  double metric_compatibility = 1e-6;
  CurvatureTolerances curvature;
  double olszak = 1e-8;
  double geodesic_agreement = 1e-6;
  double energy_drift = 1e-8;
  double homogeneity = 1e-3;
  double group = 1e-9;
  double isometry = 1e-7;
  double orbit = 1e-8;
  double separation = 0.01;
  double commutator = 1e-9;
};

struct SampleSizes {
  int curvature_points = 20;
  int christoffel_points = 20;
  int omega_pairs = 20;
  int group_instances = 100;
  int isometry_points = 10;
  int canonical_points = 200;
  double chart_box_periods = 3.0;  ///< |t| bound of the canonicalisation box, in periods
  int geodesics = 8;
  double geodesic_span_periods = 20.0;
  int geodesic_samples = 101;
  int freeness_trials = 100;
  int discontinuity_samples = 100;
  int word_length = 3;
  int kmax = 20;
  int torus_times = 10;
};

struct Config {
  Tolerances tol;
  SampleSizes samples;
  std::uint64_t seed = kDefaultSeed;
  int solution_steps = SolutionSpace::kDefaultSteps;
  RiccatiOptions riccati;
  CalibrationOptions calibration;
};

/// Which GL(m,Z) polynomial to use. "compose" picks the default product for the
/// dimension; "explicit" takes the coefficients as given.
struct PolynomialSpec {
  std::string family = "compose";
  long long k = 0;
  long long l = 0;
  long long mid = 0;  ///< middle parameter of the quartic family
  std::vector<std::int64_t> coefficients;

  GlzPolynomial make(int m) const {
    GlzPolynomial P = [&] {
      if (family == "compose") return compose_for_dimension(m);
      if (family == "cubic") return cubic_family(k, l);
      if (family == "quadratic") return quadratic_family(k);
      if (family == "quartic") return quartic_family(k, mid, l);
      if (family == "explicit") return GlzPolynomial(coefficients);
      throw InputError("unknown polynomial family '" + family + "'");
    }();
    if (P.degree() != m)
      throw ParameterDomainError("polynomial degree " + std::to_string(P.degree()) +
                                 " does not match n - 2 = " + std::to_string(m));
    return P;
  }
};

struct BuildInputs {
  int n = 5;
  double p = 1.0;
  double theta = 1.0;
  std::string signature;  ///< empty means all '+'
  PolynomialSpec polynomial;
  double amplitude = 0.05;                ///< f = h + amplitude cos(2 pi t / p)
  std::optional<PeriodicProfile> profile;  ///< overrides the cosine profile
  Config config;
};

/// Everything produced by the pipeline. The quotient owns the solution space
/// and lattice and must keep a stable address (IsometryGroup points into it).
struct Construction {
  BuildInputs inputs;
  GlzPolynomial P{{1, -3, 1}};
  Spectrum target;
  ConstantSeed seed;
  PeriodicProfile f_initial{1.0, 0.0};
  SpectralSolution solution;
  std::shared_ptr<const Quotient> quotient;

  const ModelData& model() const { return quotient->model(); }
  const SolutionSpace& space() const { return quotient->space(); }
  const LatticeBasis& lattice() const { return quotient->lattice(); }
};

namespace detail {

template <class F>
auto stage(const char* name, F&& body) {
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const ParameterDomainError& e) {
    throw StageError(name, e.what(), true);
  } catch (const InputError& e) {
    throw StageError(name, e.what(), true);
  } catch (const Error& e) {
    throw StageError(name, e.what(), false);
  }
}

inline std::vector<int> resolve_signature(const BuildInputs& in) {
  if (in.n < 5)
    throw ParameterDomainError("construction requires n >= 5, got n = " + std::to_string(in.n));
  if (in.signature.empty()) return std::vector<int>(in.n - 2, 1);
  auto sig = ModelData::parse_signature(in.signature);
  if (static_cast<int>(sig.size()) != in.n - 2)
    throw ParameterDomainError("signature length must be n - 2 = " + std::to_string(in.n - 2));
  return sig;
}

}  // namespace detail

/// polynomial -> roots -> constant seed -> calibrated (f, A, B) -> lattice.
inline Construction construct(const BuildInputs& in) {
  Construction c;
  c.inputs = in;
  const auto sig = detail::stage("inputs", [&] { return detail::resolve_signature(in); });
  const int m = in.n - 2;
  c.P = detail::stage("polynomial", [&] { return in.polynomial.make(m); });
  c.target = detail::stage("roots", [&] {
    return isolate_roots(c.P, IsolationOptions::full_precision()).spectrum;
  });
  c.seed = detail::stage("seed", [&] { return seed_constant(c.target, in.p); });
  c.f_initial = detail::stage("profile", [&] {
    return in.profile ? *in.profile : PeriodicProfile::cosine(in.p, c.seed.h, in.amplitude);
  });
  c.solution = detail::stage("calibrate", [&] {
    CalibrationOptions opt = in.config.calibration;
    opt.riccati = in.config.riccati;
    return calibrate(c.f_initial, c.target, c.seed, opt);
  });
  c.quotient = detail::stage("lattice", [&] {
    ModelData md(in.n, in.p, sig, c.solution.f, c.solution.A, c.solution.B);
    return std::make_shared<const Quotient>(md, c.P, in.theta, in.config.solution_steps);
  });
  return c;
}

/// Rebuilds a construction from stored (f, A) and shooting start, without
/// recalibrating.
inline Construction reconstruct(const BuildInputs& in, const GlzPolynomial& P,
                                const Spectrum& target, const PeriodicProfile& f_initial,
                                const PeriodicProfile& f, const TracelessDiag& A,
                                const std::vector<double>& init) {
  Construction c;
  c.inputs = in;
  const auto sig = detail::stage("inputs", [&] { return detail::resolve_signature(in); });
  c.P = P;
  c.target = target;
  c.seed = detail::stage("seed", [&] { return seed_constant(c.target, in.p); });
  c.f_initial = f_initial;
  c.solution = detail::stage("riccati", [&] {
    SpectralSolution s;
    s.f = f;
    s.A = A;
    s.target = target;
    s.init = init;
    RiccatiDiagnostics diag;
    s.B = solve_periodic_riccati(f, A, init, in.config.riccati, &diag);
    s.riccati_steps = diag.steps;
    s.multipliers = channel_multipliers(s.B);
    s.achieved = Spectrum(s.multipliers);
    for (std::size_t i = 0; i < s.multipliers.size(); ++i) {
      s.spectrum_error = std::max(s.spectrum_error, std::abs(s.multipliers[i] - target[i]));
      s.periodicity_defect = std::max(s.periodicity_defect, s.B.periodicity_defect(i));
    }
    s.ode_residual = riccati_residual(s.B, f, A.entries());
    return s;
  });
  c.quotient = detail::stage("lattice", [&] {
    ModelData md(in.n, in.p, sig, f, A, c.solution.B);
    return std::make_shared<const Quotient>(md, c.P, in.theta, in.config.solution_steps);
  });
  return c;
}

/// Independent RNG stream per section.
inline Rng section_rng(const Config& cfg, std::uint64_t section) {
  return Rng(cfg.seed * 0x9E3779B97F4A7C15ULL + section);
}

// ---------------------------------------------------------------- polynomial

inline Report verify_polynomial(const GlzPolynomial& P, const Tolerances& tol) {
  Report r("polynomial");
  const int m = P.degree();
  r.holds("leading coefficient is (-1)^m", P[m] == ((m % 2 == 0) ? 1 : -1));
  r.holds("constant term is +1 or -1", P[0] == 1 || P[0] == -1);
  const auto rp = P.rational();
  r.holds("square-free: gcd(P, P') constant",
          detail::degree(detail::gcd(rp, detail::derivative(rp))) == 0);
  try {
    const auto iso = isolate_roots(P, IsolationOptions::full_precision());
    r.holds("m real positive roots away from 1", static_cast<int>(iso.spectrum.size()) == m &&
                                                      iso.spectrum.avoids_unit() &&
                                                      iso.spectrum.multiplicity_free());
    bool brackets = true;
    for (const auto& b : iso.brackets) brackets = brackets && b.strict_sign_change();
    r.holds("every root bracket has an exact sign change", brackets);
    double resid = 0.0;
    for (double x : iso.spectrum.values()) {
      double scale = 0.0;
      for (int i = 0; i <= m; ++i) scale += std::abs(static_cast<double>(P[i])) * std::pow(x, i);
      resid = std::max(resid, std::abs(P.evaluate(x)) / scale);
    }
    r.below("max |P(root)| relative to sum |a_i root^i|", resid, tol.root_residual);
    r.holds("spectrum is not {x} or {x, 1/x}", iso.spectrum.nondegenerate());
  } catch (const Error& e) {
    r.holds("m real positive roots away from 1", false, e.what());
  }
  const IntMatrix C = companion_matrix(P);
  const BigInt det = exact_determinant(C);
  r.holds("companion determinant is +-1 (exact)", det == 1 || det == -1);
  const auto chi = characteristic_polynomial(C);
  bool round_trip = true;
  const int sign = (m % 2 == 0) ? 1 : -1;
  for (int i = 0; i <= m; ++i) round_trip = round_trip && chi[i] == BigInt(sign * P[i]);
  r.holds("companion characteristic polynomial equals (-1)^m P (exact)", round_trip);
  return r;
}

// ------------------------------------------------------------------ spectral

inline Report verify_spectral(const Construction& c, const Tolerances& tol) {
  Report r("spectral");
  const auto& s = c.solution;
  const ModelData& md = c.model();
  r.below("|trace A|", std::abs(TracelessDiag::trace(s.A.entries())), tol.trace * 10 + 1e-300);
  r.above("max |a_i| (A nonzero)", s.A.max_abs(), tol.a_floor);
  r.holds("f nonconstant", !s.f.is_constant());
  r.below("max |exp(-int b_i) - lambda_i|", s.spectrum_error, tol.spectrum);
  r.below("max |b_i(p) - b_i(0)|", s.periodicity_defect, tol.periodicity);
  r.below("max |B' + B^2 - f - A| (differenced samples)", s.ode_residual, tol.ode_residual);

  // Hill route at four times the resolution: the start (1, b_i(0)) is an
  // eigenvector of the period map with eigenvalue 1/lambda_i.
  const Monodromy hi = monodromy_of(md, 4 * c.space().steps(), 1e-8);
  double reint = 0.0, eigvec = 0.0;
  for (int i = 0; i < md.m(); ++i) {
    const Eigen::Vector2d e(1.0, s.B.sample(i, 0));
    const Eigen::Vector2d img = hi.blocks[i] * e;
    reint = std::max(reint, std::abs(1.0 / img[0] - s.multipliers[i]));
    eigvec = std::max(eigvec, std::abs(img[1] / img[0] - e[1]));
  }
  r.below("independent Hill re-integration of lambda_i", reint, tol.reintegration);
  r.below("(1, b_i(0)) is a period-map eigenvector", eigvec, tol.reintegration);

  // fixed point: solving again from the constant seed returns the same curve
  const DiagonalCurve again = solve_periodic_riccati(s.f, s.A, c.seed.c, c.inputs.config.riccati);
  double gap = 0.0;
  for (int i = 0; i < md.m(); ++i)
    for (int k = 0; k <= s.B.steps(); ++k)
      gap = std::max(gap, std::abs(again.value(i, s.B.node(k)) - s.B.sample(i, k)));
  r.below("re-solve from the constant seed reproduces B", gap, tol.fixed_point);

  r.merge(necessity_check(s.A.entries(), s.B));
  return r;
}

// ----------------------------------------------------------------------- ode

inline SolutionE random_solution(int m, Rng& rng, double scale = 1.0) {
  SolutionE u = SolutionE::zero(m);
  for (int i = 0; i < m; ++i) {
    u.u0[i] = rng.uniform(-scale, scale);
    u.du0[i] = rng.uniform(-scale, scale);
  }
  return u;
}

inline Report verify_ode(const Construction& c, const Config& cfg) {
  Report r("ode");
  Rng rng = section_rng(cfg, 3);
  const auto& tol = cfg.tol;
  const SolutionSpace& space = c.space();
  const ModelData& md = c.model();
  const LatticeBasis& L = c.lattice();
  const int m = md.m();
  const double p = md.period();

  r.below("max |det M_i - 1| (direct sweep)", monodromy_of(md, space.steps(), 1e-8).max_det_error,
          tol.monodromy_det);
  r.below("max |det M_i - 1| (tabulated)", space.monodromy().max_det_error, tol.monodromy_det);

  std::vector<double> times;
  for (int k = 0; k < 10; ++k) times.push_back(3.0 * p * k / 9.0);
  double spread = 0.0;
  for (int k = 0; k < cfg.samples.omega_pairs; ++k)
    spread = std::max(spread, space.omega_spread(random_solution(m, rng), random_solution(m, rng), times));
  r.below("Omega spread over [0, 3p]", spread, tol.omega_spread);

  double on_L = 0.0, embed = 0.0, trans = 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      on_L = std::max(on_L, std::abs(space.omega(space.embed(L.generator(i)), space.embed(L.generator(j)))));
  for (int k = 0; k < 5; ++k) {
    Eigen::VectorXd x(m);
    for (int i = 0; i < m; ++i) x[i] = rng.uniform(-1.0, 1.0);
    const SolutionL u{x};
    const SolutionE e = space.embed(u);
    for (int j = 0; j <= 20; ++j) {
      const double t = 2.0 * p * j / 20.0;
      const PhaseState a = space.evaluate(u, t), b = space.evaluate(e, t);
      embed = std::max({embed, (a.u - b.u).cwiseAbs().maxCoeff(), (a.du - b.du).cwiseAbs().maxCoeff()});
    }
  }
  for (int i = 0; i < m; ++i) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(m);
    x[i] = 1.0;
    const SolutionE e = space.embed(SolutionL{x});
    const SolutionE te = space.translate(e, 1);
    const SolutionE expect = c.solution.multipliers[i] * e;
    trans = std::max({trans, (te.u0 - expect.u0).cwiseAbs().maxCoeff(),
                      (te.du0 - expect.du0).cwiseAbs().maxCoeff()});
  }
  r.below("Omega on first-order solutions", on_L, tol.omega_on_L);
  r.below("first-order solutions solve the second-order equation on [0, 2p]", embed, tol.embedding);
  r.below("T e_i = lambda_i e_i on first-order solutions", trans, tol.translation);

  const auto chi = monic_from_roots(c.solution.multipliers);
  const auto want = monic_coefficients(c.P);
  double cp = 0.0;
  for (std::size_t i = 0; i < chi.size(); ++i) cp = std::max(cp, std::abs(chi[i] - want[i]));
  r.below("characteristic polynomial of T on first-order solutions vs P", cp, tol.charpoly);
  r.below("T in lattice coordinates minus integer companion", L.integrality_defect, tol.integrality);
  const BigInt det = exact_determinant(L.C);
  r.holds("|det| of the integer T-matrix is 1", det == 1 || det == -1);
  r.below("lattice basis condition number", L.condition, kConditioningLimit);
  r.merge(check_T_nontrivial(L, cfg.samples.kmax));
  return r;
}

// ------------------------------------------------------------------ geometry

inline Report verify_geometry(const Construction& c, const Config& cfg) {
  Report r("geometry");
  Rng rng = section_rng(cfg, 4);
  const auto& tol = cfg.tol;
  const ModelData& md = c.model();
  const int n = md.n(), m = md.m();

  const auto pts = sample_points(md, std::max(cfg.samples.curvature_points, 10), rng);
  const auto cpts = sample_points(md, cfg.samples.christoffel_points, rng);
  const Connection conn = model_connection(md);
  double inv = 0.0, fd = 0.0, compat = 0.0;
  for (const auto& q : cpts) {
    const MetricAtPoint g = metric_at(md, q);
    inv = std::max(inv, (g.g * g.g_inverse - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff());
    const Eigen::VectorXd x = coordinates(q);
    const Tensor a = christoffel_at(md, q);
    const Tensor b = christoffel_from_metric(conn.metric, x);
    fd = std::max(fd, a.combine(1.0, b, -1.0).max_abs());
    compat = std::max(compat, metric_compatibility(conn, x));
  }
  r.below("|g g^-1 - I|", inv, tol.metric_inverse);
  r.below("analytic vs differenced Christoffel symbols", fd, tol.christoffel_fd);
  r.below("|nabla g| (metric compatibility)", compat, tol.metric_compatibility);

  r.merge(curvature_report(md, pts, tol.curvature, false).report);
  r.merge(olszak_test(md, pts, tol.olszak).report);

  double agree = 0.0, drift = 0.0, gdrift = 0.0;
  bool finite = true;
  const double span = cfg.samples.geodesic_span_periods * md.period();
  for (int k = 0; k < cfg.samples.geodesics; ++k) {
    ManifoldPoint q{rng.uniform(0.0, md.period()), rng.uniform(-1.0, 1.0), Eigen::VectorXd(m)};
    TangentVector w{rng.uniform(0.5, 1.5), rng.uniform(-1.0, 1.0), Eigen::VectorXd(m)};
    for (int i = 0; i < m; ++i) {
      q.v[i] = rng.uniform(-1.0, 1.0);
      w.dv[i] = rng.uniform(-1.0, 1.0);
    }
    GeodesicOptions opt;
    opt.samples = cfg.samples.geodesic_samples;
    opt.agreement_tolerance = INFINITY;
    const Trajectory tr = geodesic(c.space(), q, w, -span, span, opt);
    agree = std::max(agree, tr.max_disagreement);
    drift = std::max(drift, tr.max_energy_drift);
    gdrift = std::max(gdrift, tr.max_generic_energy_drift);
    for (const auto& smp : tr.samples)
      finite = finite && std::isfinite(smp.point.s) && smp.point.v.allFinite();
  }
  r.holds("geodesics defined on the whole span", finite);
  r.below("structured vs generic geodesic integrator (relative)", agree, tol.geodesic_agreement);
  r.below("g(gamma', gamma') drift, structured (relative)", drift, tol.energy_drift);
  r.below("g(gamma', gamma') drift, generic RK (relative)", gdrift, tol.energy_drift);

  r.merge(homogeneity_obstruction(md.f(), tol.homogeneity).report);
  // (t + 1)^{-2}: |f|^{-1/2} = t + 1 is affine, so no obstruction may be reported
  const auto control = homogeneity_obstruction([](double t) { return 1.0 / ((t + 1.0) * (t + 1.0)); },
                                               [](double t) { return -2.0 / std::pow(t + 1.0, 3); },
                                               0.0, 1.0);
  r.below("control (at+b)^-2 shows no obstruction", control.variation, 1e-9);
  return r;
}

// --------------------------------------------------------------------- group

inline double re_distance(const REPoint& a, const REPoint& b) {
  return std::max({std::abs(a.t - b.t), std::abs(a.z - b.z), (a.w.u0 - b.w.u0).cwiseAbs().maxCoeff(),
                   (a.w.du0 - b.w.du0).cwiseAbs().maxCoeff()});
}

inline GroupElement random_group_element(int m, Rng& rng) {
  return {rng.integer(-2, 2), rng.uniform(-1.0, 1.0), random_solution(m, rng)};
}

inline ManifoldPoint random_point(int m, double p, Rng& rng) {
  ManifoldPoint x{rng.uniform(-2.0 * p, 2.0 * p), rng.uniform(-2.0, 2.0), Eigen::VectorXd(m)};
  for (int i = 0; i < m; ++i) x.v[i] = rng.uniform(-1.0, 1.0);
  return x;
}

/// Group law, actions, conjugation identity, equivariance and isometry.
inline Report verify_group_laws(const Construction& c, const Config& cfg) {
  Report r("group");
  Rng rng = section_rng(cfg, 5);
  const auto& tol = cfg.tol;
  const IsometryGroup G(c.space());
  const int m = c.model().m();
  const double p = c.model().period();
  double assoc = 0, ident = 0, inv = 0, act = 0, act_id = 0, re = 0, conj = 0, eqv = 0, iso = 0;
  for (int i = 0; i < cfg.samples.group_instances; ++i) {
    const GroupElement a = random_group_element(m, rng), b = random_group_element(m, rng),
                       d = random_group_element(m, rng);
    assoc = std::max(assoc, group_distance(G.op(G.op(a, b), d), G.op(a, G.op(b, d))));
    ident = std::max({ident, group_distance(G.op(G.identity(), a), a), group_distance(G.op(a, G.identity()), a)});
    inv = std::max({inv, group_distance(G.op(a, G.inverse(a)), G.identity()),
                    group_distance(G.op(G.inverse(a), a), G.identity())});
    const ManifoldPoint x = random_point(m, p, rng);
    act = std::max(act, point_distance(G.act(a, G.act(b, x)), G.act(G.op(a, b), x)));
    act_id = std::max(act_id, point_distance(G.act(G.identity(), x), x));
    const REPoint X{x.t, rng.uniform(-1.0, 1.0), random_solution(m, rng)};
    re = std::max(re, re_distance(G.act(a, G.act(b, X)), G.act(G.op(a, b), X)));
    const double rr = rng.uniform(-1.0, 1.0);
    const GroupElement lhs = G.op(G.op(a, GroupElement{0, rr, d.u}), G.inverse(a));
    const GroupElement rhs{0, rr - 2.0 * c.space().omega(a.u, d.u), c.space().translate(d.u, a.k)};
    conj = std::max(conj, group_distance(lhs, rhs));
    eqv = std::max(eqv, point_distance(G.equivariant_map(G.act(a, X)), G.act(a, G.equivariant_map(X))));
    std::vector<ManifoldPoint> pts;
    for (int k = 0; k < std::max(cfg.samples.isometry_points, 10); ++k) pts.push_back(random_point(m, p, rng));
    iso = std::max(iso, isometry_check(G, a, pts, tol.isometry, false).checks().front().measured);
  }
  r.below("associativity", assoc, tol.group);
  r.below("identity element", ident, tol.group);
  r.below("inverse (-k, -q, -T^k u)", inv, tol.group);
  r.below("action on M: g(hx) = (gh)x", act, tol.group);
  r.below("action on M: identity fixes points", act_id, tol.group);
  r.below("auxiliary action: g(hX) = (gh)X", re, tol.group);
  r.below("conjugation g(0,r,w)g^-1 = (0, r - 2 Omega(u,w), T^k w)", conj, tol.group);
  r.below("equivariance of (t,z,w) -> (t, z - <w'(t),w(t)>, w(t))", eqv, tol.group);
  r.below("metric pullback deviation", iso, tol.isometry);
  return r;
}

/// max(1, |t|, |s|, |v|_inf)
inline double chart_scale(const ManifoldPoint& x) {
  return std::max({1.0, std::abs(x.t), std::abs(x.s), x.v.cwiseAbs().maxCoeff()});
}

/// Fundamental domain, freeness, discreteness, torus fibres, nontriviality.
inline Report verify_quotient(const Construction& c, const Config& cfg) {
  Report r("quotient");
  Rng rng = section_rng(cfg, 6);
  const auto& tol = cfg.tol;
  const Quotient& Q = *c.quotient;
  const IsometryGroup G(Q.space());
  const int m = Q.m();
  const double p = Q.model().period(), box = cfg.samples.chart_box_periods * p;

  int outside = 0, not_idempotent = 0;
  double idem = 0.0, orbit = 0.0, consistency = 0.0;
  for (int i = 0; i < cfg.samples.canonical_points; ++i) {
    ManifoldPoint q{rng.uniform(-box, box), rng.uniform(-10.0, 10.0) * Q.theta(), Eigen::VectorXd(m)};
    for (int j = 0; j < m; ++j) q.v[j] = rng.uniform(-5.0, 5.0);
    const CanonicalForm cf = Q.canonicalize(q);
    if (!Q.in_domain(cf.point)) ++outside;
    const CanonicalForm again = Q.canonicalize(cf.point);
    if (!again.gamma.is_identity()) ++not_idempotent;
    idem = std::max(idem, point_distance(again.point, cf.point));
    // gamma0 . q is formed in floating point, so its representative can only be
    // as accurate as eps * |gamma0 . q|; compare relative to that magnitude
    const GammaElement g0 = random_gamma(Q, rng);
    const ManifoldPoint moved = Q.act(g0, q);
    orbit = std::max(orbit, point_distance(Q.canonicalize(moved).point, cf.point) / chart_scale(moved));
    const double u_size = Q.space().evaluate(Q.lattice_solution(cf.gamma.n), q.t).u.cwiseAbs().maxCoeff();
    consistency = std::max(consistency, point_distance(Q.act(cf.gamma, q), cf.point) /
                                            std::max(chart_scale(q), u_size * u_size));
  }
  r.below("canonical points outside the half-open domain", outside, 0.5);
  r.below("canonicalize(q') is not the identity", not_idempotent, 0.5);
  r.below("canonicalize(q') moves q'", idem, tol.orbit);
  r.below("orbit invariance of the representative, relative to |gamma0 q|", orbit, tol.orbit);
  r.below("gamma . q equals the representative, relative to |q| + |u(t)|^2", consistency, tol.orbit);

  r.merge(freeness_check(Q, cfg.samples.freeness_trials, rng));
  r.merge(proper_discontinuity_check(Q, cfg.samples.discontinuity_samples, rng, cfg.samples.word_length,
                                     tol.separation)
              .report);
  std::vector<double> times;
  for (int k = 0; k < cfg.samples.torus_times; ++k) times.push_back(p * (k + rng.uniform()) / cfg.samples.torus_times);
  r.merge(torus_fiber_check(Q, G, times, rng, tol.commutator));
  double control = 0.0;
  for (int k = 0; k < 10; ++k) {
    const GroupElement a{0, 0.0, random_solution(m, rng)}, b{0, 0.0, random_solution(m, rng)};
    control = std::max(control, group_distance(G.commutator(a, b), G.identity()));
  }
  r.above("commutator of generic second-order elements (control)", control, 1e-6);
  r.merge(bundle_nontriviality_evidence(Q.lattice(), cfg.samples.kmax));
  return r;
}

/// All sections in certificate order.
inline std::vector<Report> verify_all(const Construction& c) {
  const Config& cfg = c.inputs.config;
  return {verify_polynomial(c.P, cfg.tol), verify_spectral(c, cfg.tol), verify_ode(c, cfg),
          verify_geometry(c, cfg), verify_group_laws(c, cfg), verify_quotient(c, cfg)};
}

}  // namespace ecs
