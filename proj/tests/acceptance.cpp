// Acceptance run: twelve criteria, one PASS/FAIL line each, nonzero exit if
// any fails. Tolerances, sample counts and time limits are the contract values.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "ecs/certificate.hpp"

using namespace ecs;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string title;
  double time_limit;  // seconds, INFINITY when none is stated
  std::function<Outcome()> run;
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

// constructions shared between criteria, built on first use
std::map<std::string, std::shared_ptr<const Construction>> cache;

const Construction& model(const std::string& key, const BuildInputs& in) {
  auto& slot = cache[key];
  if (!slot) slot = std::make_shared<const Construction>(construct(in));
  return *slot;
}

BuildInputs inputs(int n, const std::string& signature, PolynomialSpec poly = {}) {
  BuildInputs in;
  in.n = n;
  in.signature = signature;
  in.polynomial = std::move(poly);
  return in;
}

PolynomialSpec cubic56() {
  PolynomialSpec s;
  s.family = "cubic";
  s.k = 5;
  s.l = 6;
  return s;
}

const Construction& reference() { return model("n5", inputs(5, "+-+", cubic56())); }

// ------------------------------------------------------------------ criterion 1

Outcome quartic_identity() {
  int cases = 0, bad = 0;
  for (std::int64_t k = 7; k <= 12; ++k)
    for (std::int64_t m = k; m <= 2 * k - 7; ++m)
      for (std::int64_t l = k + m - 1; 2 * l < 4 * k + m - 8; ++l) {
        if (!(2 * (k + m) - 4 < 2 * l)) continue;
        const GlzPolynomial P = quartic_family(k, m, l);
        // plain integer evaluation: 16 P(1/2) = sum c_i 2^(4-i), P(2) = sum c_i 2^i
        std::int64_t half16 = 0, two = 0;
        for (int i = 0; i <= 4; ++i) {
          half16 += P[i] * (std::int64_t{1} << (4 - i));
          two += P[i] * (std::int64_t{1} << i);
        }
        const auto v = quartic_test_values(P);
        if (half16 - two != 6 * (m - k) || v.sixteen_at_half != half16 || v.at_two != two) ++bad;
        ++cases;
      }
  const auto a = quartic_test_values(quartic_family(8, 9, 16));
  const bool anchor = a.at_one == 1 && a.at_two == -7 && a.sixteen_at_half == -1;
  return {bad == 0 && anchor && cases > 0,
          std::to_string(cases) + " parameter triples, " + std::to_string(bad) +
              " mismatches; anchor (8,9,16): P(1)=" + std::to_string(a.at_one) +
              " P(2)=" + std::to_string(a.at_two) + " 16P(1/2)=" + std::to_string(a.sixteen_at_half)};
}

// ------------------------------------------------------------------ criterion 2

Outcome cubic_brackets_all() {
  int cases = 0, bad = 0;
  for (std::int64_t k = 2; k <= 10; ++k)
    for (std::int64_t l = k + 1; 4 * l <= k * k; ++l) {
      for (const auto& b : cubic_brackets(k, l))
        if (!b.strict_sign_change()) ++bad;
      ++cases;
    }
  return {bad == 0 && cases > 0,
          std::to_string(cases) + " (k,l) pairs, " + std::to_string(bad) + " brackets without a sign change"};
}

// ------------------------------------------------------------------ criterion 3

// Floquet multiplier of u'' = q u by plain RK4 on the 2x2 linear system.
double hill_multiplier(const std::function<double(double)>& q, double p, double c, int steps) {
  auto flow = [&](double u, double w) {
    const double h = p / steps;
    for (int k = 0; k < steps; ++k) {
      const double t = k * h;
      const double k1u = w, k1w = q(t) * u;
      const double k2u = w + 0.5 * h * k1w, k2w = q(t + 0.5 * h) * (u + 0.5 * h * k1u);
      const double k3u = w + 0.5 * h * k2w, k3w = q(t + 0.5 * h) * (u + 0.5 * h * k2u);
      const double k4u = w + h * k3w, k4w = q(t + h) * (u + h * k3u);
      u += h / 6 * (k1u + 2 * k2u + 2 * k3u + k4u);
      w += h / 6 * (k1w + 2 * k2w + 2 * k3w + k4w);
    }
    return std::pair{u, w};
  };
  const auto [m00, m10] = flow(1.0, 0.0);
  const auto [m01, m11] = flow(0.0, 1.0);
  const double tr = m00 + m11, det = m00 * m11 - m01 * m10;
  const double disc = std::sqrt(tr * tr / 4 - det);
  // eigenvalue exp(int b) of the branch with growth rate near c
  const double mu1 = tr / 2 + disc, mu2 = tr / 2 - disc;
  const double mu = std::abs(std::log(mu1) / p - c) < std::abs(std::log(mu2) / p - c) ? mu1 : mu2;
  return 1.0 / mu;
}

Outcome spectrum_round_trip(const std::string& key, const BuildInputs& in, double& seconds_max) {
  const auto t0 = std::chrono::steady_clock::now();
  const Construction& c = model(key, in);
  const auto& sol = c.solution;
  double entry = 0.0, reint = 0.0;
  const Spectrum achieved = spectrum_of(sol.B);
  for (std::size_t i = 0; i < c.target.size(); ++i) entry = std::max(entry, std::abs(achieved[i] - c.target[i]));
  for (int i = 0; i < c.model().m(); ++i) {
    const double a = sol.A[i];
    const double lam = hill_multiplier([&](double t) { return sol.f(t) + a; }, c.model().period(),
                                       c.seed.c[i], 100000);
    reint = std::max(reint, std::abs(lam - sol.multipliers[i]));
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  seconds_max = std::max(seconds_max, secs);
  return {entry < 1e-9 && reint < 1e-8 && secs < 30.0,
          key + ": max entry error " + fmt("%.2e", entry) + ", re-integration gap " + fmt("%.2e", reint) +
              ", " + fmt("%.1f", secs) + " s"};
}

Outcome spectrum_round_trips() {
  double worst = 0.0;
  Outcome out{true, ""};
  const std::vector<std::pair<std::string, BuildInputs>> models = {
      {"cubic(5,6)", inputs(5, "+-+", cubic56())},
      {"compose m=4", inputs(6, "+-+-")},
      {"compose m=5", inputs(7, "+-+-+")}};
  for (const auto& [key, in] : models) {
    const Outcome o = spectrum_round_trip(key, in, worst);
    out.pass = out.pass && o.pass;
    out.detail += (out.detail.empty() ? "" : "; ") + o.detail;
  }
  return out;
}

// ------------------------------------------------------------------ criterion 4

// det(x I - A) coefficients, constant first (Faddeev-LeVerrier).
std::vector<double> charpoly(const Eigen::MatrixXd& A) {
  const int n = static_cast<int>(A.rows());
  std::vector<double> c(n + 1, 0.0);
  c[n] = 1.0;
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k <= n; ++k) {
    M = A * M + c[n - k + 1] * Eigen::MatrixXd::Identity(n, n);
    c[n - k] = -(A * M).trace() / k;
  }
  return c;
}

Outcome integer_monodromy() {
  Outcome out{true, ""};
  for (const std::string key : {"cubic(5,6)", "compose m=4", "compose m=5"}) {
    const Construction& c = *cache.at(key);
    const auto& L = c.lattice();
    const int m = L.rank();
    // T on the first-order subspace through the Hill period maps, in lattice coordinates
    Eigen::MatrixXd T(m, m);
    for (int j = 0; j < m; ++j) {
      const SolutionE moved = c.space().translate(c.space().embed(L.generator(j)));
      T.col(j) = L.lattice_coords(moved.u0);
    }
    const auto measured = charpoly(T);
    const auto expect = monic_coefficients(c.P);
    double coeff = 0.0;
    for (int j = 0; j <= m; ++j) coeff = std::max(coeff, std::abs(measured[j] - expect[j]));
    IntMatrix rounded(m, m);
    double integral = 0.0;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        rounded(i, j) = static_cast<std::int64_t>(std::llround(T(i, j)));
        integral = std::max(integral, std::abs(T(i, j) - static_cast<double>(rounded(i, j))));
      }
    const BigInt det = exact_determinant(rounded);
    const bool unimodular = det == 1 || det == -1;
    const bool ok = coeff < 1e-7 && integral < 1e-7 && unimodular && rounded == L.C;
    out.pass = out.pass && ok;
    out.detail += (out.detail.empty() ? "" : "; ") + key + ": charpoly gap " + fmt("%.2e", coeff) +
                  ", integrality " + fmt("%.2e", integral) + ", det " + det.str();
  }
  return out;
}

// ------------------------------------------------------------------ criteria 5-7

std::vector<ManifoldPoint> reference_points(std::uint64_t salt) {
  Rng rng(kDefaultSeed + salt);
  return sample_points(reference().model(), 20, rng);
}

const CurvatureReport& reference_curvature() {
  static const CurvatureReport r = curvature_report(reference().model(), reference_points(5), {}, false);
  return r;
}

Outcome ricci_anchor() {
  const auto& r = reference_curvature();
  double worst = 0.0;
  for (double x : r.ricci00_over_f) worst = std::max(worst, std::abs(x - (-3.0)) / 3.0);
  return {worst < 1e-5 && r.max_ricci_other < 1e-7 && r.ricci00_over_f.size() == 20,
          "Ric_tt/f = -3 to " + fmt("%.2e", worst) + " relative at 20 points; other components <= " +
              fmt("%.2e", r.max_ricci_other)};
}

Outcome ecs_trichotomy() {
  const auto& r = reference_curvature();
  return {r.max_weyl_ratio < 1e-5 && r.min_weyl_norm > 1e-3 && r.gradient_points > 0 && r.min_ricci_gradient > 1e-3,
          "||nabla W||/||W|| <= " + fmt("%.2e", r.max_weyl_ratio) + ", ||W|| >= " + fmt("%.3f", r.min_weyl_norm) +
              ", ||nabla Ric|| >= " + fmt("%.3f", r.min_ricci_gradient) + " at " + std::to_string(r.gradient_points) +
              " points with |f'| > 0.1"};
}

Outcome olszak() {
  const auto res = olszak_test(reference().model(), reference_points(7), 1e-8);
  return {res.max_wedge < 1e-8, "max |dt ^ W(e_p,e_q,.,.)| = " + fmt("%.2e", res.max_wedge) + " at 20 points"};
}

// ------------------------------------------------------------------ criterion 8

Outcome group_suite() {
  Config cfg;
  cfg.samples.group_instances = 100;
  cfg.tol.group = 1e-7;
  cfg.tol.isometry = 1e-7;
  const Report r = verify_group_laws(reference(), cfg);
  double worst = 0.0;
  for (const auto& c : r.checks()) worst = std::max(worst, c.measured);
  std::string first = r.passed() ? "" : "; first failure: " + r.failures().front()->name;
  return {r.passed(), std::to_string(r.checks().size()) + " identities over 100 instances, max deviation " +
                          fmt("%.2e", worst) + first};
}

// ------------------------------------------------------------------ criterion 9

Outcome quotient_certificate() {
  const Construction& c = reference();
  const Quotient& Q = *c.quotient;
  const double p = Q.model().period(), theta = Q.theta();
  Rng rng(kDefaultSeed + 9);
  int outside = 0;
  double idem = 0.0, orbit = 0.0;
  for (int i = 0; i < 1000; ++i) {
    ManifoldPoint q{rng.uniform(-3 * p, 3 * p), rng.uniform(-10 * theta, 10 * theta), Eigen::VectorXd(Q.m())};
    for (int j = 0; j < Q.m(); ++j) q.v[j] = rng.uniform(-5.0, 5.0);
    const CanonicalForm cf = Q.canonicalize(q);
    if (!Q.in_domain(cf.point)) ++outside;
    const CanonicalForm twice = Q.canonicalize(cf.point);
    idem = std::max(idem, point_distance(twice.point, cf.point));
    if (!twice.gamma.is_identity()) idem = INFINITY;
    GammaElement g = random_gamma(Q, rng, 1);
    if (std::abs(q.t + g.k * p) > 3 * p) g.k = -g.k;
    orbit = std::max(orbit, point_distance(Q.canonicalize(Q.act(g, q)).point, cf.point));
  }
  const auto disc = proper_discontinuity_check(Q, 1000, rng, 3, 0.01);
  return {outside == 0 && idem < 1e-8 && orbit < 1e-8 && disc.min_displacement > 0.01,
          "1000 points: " + std::to_string(outside) + " outside the domain, idempotence gap " + fmt("%.2e", idem) +
              ", orbit gap " + fmt("%.2e", orbit) + "; min displacement " + fmt("%.4f", disc.min_displacement) +
              " over " + std::to_string(disc.elements) + " words of length <= 3"};
}

// ------------------------------------------------------------------ criterion 10

Outcome geodesics() {
  const Construction& c = reference();
  const int m = c.model().m();
  const double p = c.model().period();
  Rng rng(kDefaultSeed + 10);
  double agree = 0.0, drift = 0.0;
  bool finite = true;
  for (int k = 0; k < 50; ++k) {
    ManifoldPoint q{rng.uniform(0.0, p), rng.uniform(-1.0, 1.0), Eigen::VectorXd(m)};
    TangentVector w{rng.uniform(0.5, 1.5), rng.uniform(-1.0, 1.0), Eigen::VectorXd(m)};
    for (int i = 0; i < m; ++i) {
      q.v[i] = rng.uniform(-1.0, 1.0);
      w.dv[i] = rng.uniform(-1.0, 1.0);
    }
    GeodesicOptions opt;
    opt.samples = 101;
    opt.agreement_tolerance = INFINITY;
    const Trajectory tr = geodesic(c.space(), q, w, -100 * p, 100 * p, opt);
    agree = std::max(agree, tr.max_disagreement);
    drift = std::max({drift, tr.max_energy_drift, tr.max_generic_energy_drift});
    for (const auto& s : tr.samples) finite = finite && std::isfinite(s.point.s) && s.point.v.allFinite();
  }
  return {finite && agree < 1e-6 && drift < 1e-8,
          "50 geodesics on [-100p, 100p]: agreement " + fmt("%.2e", agree) + " relative, energy drift " +
              fmt("%.2e", drift)};
}

// ------------------------------------------------------------------ criterion 11

std::vector<std::pair<std::string, BuildInputs>> coverage_models() {
  return {{"n5 +++", inputs(5, "+++")},     {"n5 +-+", inputs(5, "+-+")},
          {"n6 ++++", inputs(6, "++++")},   {"n6 +-+-", inputs(6, "+-+-")},
          {"n7 +++++", inputs(7, "+++++")}, {"n7 +-+-+", inputs(7, "+-+-+")}};
}

Outcome homogeneity() {
  double weakest = INFINITY;
  int models = 0;
  for (const auto& [key, in] : coverage_models()) model(key, in);
  for (const auto& [key, c] : cache) {
    weakest = std::min(weakest, homogeneity_obstruction(c->model().f(), 1e-3).variation);
    ++models;
  }
  const auto control = homogeneity_obstruction([](double t) { return 1.0 / ((t + 1) * (t + 1)); },
                                               [](double t) { return -2.0 / std::pow(t + 1, 3); }, 0.0, 3.0);
  return {weakest > 1e-3 && !control.obstruction_found,
          std::to_string(models) + " models, min variation " + fmt("%.4f", weakest) +
              "; affine control variation " + fmt("%.1e", control.variation) +
              (control.obstruction_found ? " (obstruction reported)" : " (constant)")};
}

// ------------------------------------------------------------------ criterion 12

Outcome coverage() {
  int passing = 0, total = 0;
  std::string failed;
  std::map<int, int> per_n;
  for (const auto& [key, in] : coverage_models()) {
    ++total;
    const BuildResult r = build_certificate(in);
    if (r.certificate.pass) {
      ++passing;
      ++per_n[in.n];
    } else {
      failed += " " + key;
    }
  }
  const bool ok = passing == total && per_n[5] >= 2 && per_n[6] >= 2 && per_n[7] >= 2;
  return {ok, std::to_string(passing) + "/" + std::to_string(total) +
                  " certificates pass (n = 5, 6, 7; two signatures each)" +
                  (failed.empty() ? "" : "; failing:" + failed)};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "quartic identity", 1.0, quartic_identity},
      {2, "cubic root brackets", 1.0, cubic_brackets_all},
      {3, "spectrum round-trip", 90.0, spectrum_round_trips},
      {4, "integer monodromy", 5.0, integer_monodromy},
      {5, "Ricci anchor", 10.0, ricci_anchor},
      {6, "ECS trichotomy", 30.0, ecs_trichotomy},
      {7, "Olszak rank one", INFINITY, olszak},
      {8, "isometry and group suite", 30.0, group_suite},
      {9, "quotient compactness", 60.0, quotient_certificate},
      {10, "geodesic completeness evidence", 60.0, geodesics},
      {11, "homogeneity obstruction", INFINITY, homogeneity},
      {12, "dimension and signature coverage", 600.0, coverage},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.time_limit;
    const bool pass = o.pass && in_time;
    if (!pass) ++failed;
    std::string limit = std::isfinite(c.time_limit) ? " / limit " + fmt("%.0f", c.time_limit) + " s" : "";
    std::printf("[%s] %2d %-34s %7.2f s%s  %s%s\n", pass ? "PASS" : "FAIL", c.id, c.title.c_str(), secs,
                limit.c_str(), o.detail.c_str(), in_time ? "" : " (time limit exceeded)");
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
