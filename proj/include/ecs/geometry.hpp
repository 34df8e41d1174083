#pragma once

// Metric kappa dt^2 + dt ds + <dv, dv> on R^2 x V: Christoffel symbols,
// curvature by finite differences of the connection, the Olszak wedge test,
// geodesics and the local-homogeneity obstruction.
//
// Coordinates x = (t, v_1, ..., v_m, s/2), so that g_{0,n-1} = 1.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

#include "ecs/error.hpp"
#include "ecs/integrators.hpp"
#include "ecs/model.hpp"
#include "ecs/ode_core.hpp"
#include "ecs/random.hpp"
#include "ecs/report.hpp"

namespace ecs {

struct ManifoldPoint {
  double t = 0.0;
  double s = 0.0;
  Eigen::VectorXd v;
};

struct TangentVector {
  double dt = 0.0;
  double ds = 0.0;
  Eigen::VectorXd dv;
};

inline Eigen::VectorXd coordinates(const ManifoldPoint& q) {
  const int m = static_cast<int>(q.v.size());
  Eigen::VectorXd x(m + 2);
  x[0] = q.t;
  x.segment(1, m) = q.v;
  x[m + 1] = 0.5 * q.s;
  return x;
}

inline ManifoldPoint point_from(const Eigen::VectorXd& x) {
  const int m = static_cast<int>(x.size()) - 2;
  return {x[0], 2.0 * x[m + 1], x.segment(1, m)};
}

inline Eigen::VectorXd coordinates(const TangentVector& w) {
  const int m = static_cast<int>(w.dv.size());
  Eigen::VectorXd x(m + 2);
  x[0] = w.dt;
  x.segment(1, m) = w.dv;
  x[m + 1] = 0.5 * w.ds;
  return x;
}

/// Dense n^rank array, index order as written.
class Tensor {
 public:
  Tensor() = default;
  Tensor(int dim, int rank) : n_(dim), rank_(rank) {
    std::size_t size = 1;
    for (int r = 0; r < rank; ++r) size *= dim;
    data_.assign(size, 0.0);
  }

  int dim() const { return n_; }
  int rank() const { return rank_; }

  template <class... I>
  double& operator()(I... idx) {
    return data_[offset({static_cast<int>(idx)...})];
  }
  template <class... I>
  double operator()(I... idx) const {
    return data_[offset({static_cast<int>(idx)...})];
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  double norm() const {
    double s = 0.0;
    for (double x : data_) s += x * x;
    return std::sqrt(s);
  }
  double max_abs() const {
    double s = 0.0;
    for (double x : data_) s = std::max(s, std::abs(x));
    return s;
  }

  /// a*this + b*other
  Tensor combine(double a, const Tensor& other, double b) const {
    Tensor out = *this;
    for (std::size_t i = 0; i < data_.size(); ++i) out.data_[i] = a * data_[i] + b * other.data_[i];
    return out;
  }

 private:
  std::size_t offset(std::initializer_list<int> idx) const {
    std::size_t o = 0;
    for (int i : idx) o = o * n_ + i;
    return o;
  }

  int n_ = 0;
  int rank_ = 0;
  std::vector<double> data_;
};

struct MetricAtPoint {
  Eigen::MatrixXd g;
  Eigen::MatrixXd g_inverse;
  double kappa = 0.0;
};

inline MetricAtPoint metric_at(const ModelData& model, const ManifoldPoint& q) {
  const int n = model.n(), m = model.m(), y = n - 1;
  MetricAtPoint out;
  out.kappa = model.kappa(q.t, q.v);
  out.g = Eigen::MatrixXd::Zero(n, n);
  out.g_inverse = Eigen::MatrixXd::Zero(n, n);
  out.g(0, 0) = out.kappa;
  out.g(0, y) = out.g(y, 0) = 1.0;
  out.g_inverse(0, y) = out.g_inverse(y, 0) = 1.0;
  out.g_inverse(y, y) = -out.kappa;
  for (int i = 0; i < m; ++i) out.g(1 + i, 1 + i) = out.g_inverse(1 + i, 1 + i) = model.eps(i);
  return out;
}

/// Gamma(a, b, c) = Gamma^a_{bc} from the closed-form derivatives of kappa.
inline Tensor christoffel_at(const ModelData& model, const ManifoldPoint& q) {
  const int n = model.n(), m = model.m(), y = n - 1;
  Tensor G(n, 2 + 1);
  const double ft = model.f()(q.t);
  G(y, 0, 0) = 0.5 * model.f().derivative(q.t) * model.inner(q.v, q.v);
  for (int i = 0; i < m; ++i) {
    const double w = (ft + model.a()[i]) * q.v[i];  // eps_i d_i kappa / 2
    G(1 + i, 0, 0) = -w;
    G(y, 0, 1 + i) = G(y, 1 + i, 0) = model.eps(i) * w;
  }
  return G;
}

/// Metric field plus its Levi-Civita connection, both as functions of the
/// coordinate vector.
struct Connection {
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> metric;
  std::function<Tensor(const Eigen::VectorXd&)> christoffel;
  int dim = 0;
};

inline Connection model_connection(const ModelData& model) {
  Connection c;
  c.dim = model.n();
  c.metric = [model](const Eigen::VectorXd& x) { return metric_at(model, point_from(x)).g; };
  c.christoffel = [model](const Eigen::VectorXd& x) {
    return christoffel_at(model, point_from(x));
  };
  return c;
}

namespace detail {

/// Fourth-order central difference of a Tensor-valued function along axis k.
template <class F>
Tensor tensor_derivative(const F& field, const Eigen::VectorXd& x, int k, double h) {
  auto at = [&](double s) {
    Eigen::VectorXd y = x;
    y[k] += s;
    return field(y);
  };
  const Tensor p1 = at(h), m1 = at(-h), p2 = at(2 * h), m2 = at(-2 * h);
  Tensor out = p1;
  for (std::size_t i = 0; i < out.data().size(); ++i)
    out.data()[i] = (-p2.data()[i] + 8 * p1.data()[i] - 8 * m1.data()[i] + m2.data()[i]) / (12 * h);
  return out;
}

inline Eigen::MatrixXd matrix_derivative(
    const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& g, const Eigen::VectorXd& x,
    int k, double h) {
  auto at = [&](double s) {
    Eigen::VectorXd y = x;
    y[k] += s;
    return g(y);
  };
  return (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
}

}  // namespace detail

/// Gamma^k_{ij} = 1/2 g^{kl} (d_i g_lj + d_j g_li - d_l g_ij) with differenced
/// metric derivatives.
inline Tensor christoffel_from_metric(const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& g,
                                      const Eigen::VectorXd& x, double h = 1e-3) {
  const int n = static_cast<int>(x.size());
  std::vector<Eigen::MatrixXd> dg;
  for (int k = 0; k < n; ++k) dg.push_back(detail::matrix_derivative(g, x, k, h));
  const Eigen::MatrixXd ginv = g(x).inverse();
  Tensor G(n, 3);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int l = 0; l < n; ++l) s += ginv(k, l) * (dg[i](l, j) + dg[j](l, i) - dg[l](i, j));
        G(k, i, j) = 0.5 * s;
      }
  return G;
}

/// Connection of an arbitrary metric field, Christoffels by differencing.
inline Connection numeric_connection(std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> g,
                                     int dim, double h = 1e-3) {
  Connection c;
  c.dim = dim;
  c.metric = g;
  c.christoffel = [g, h](const Eigen::VectorXd& x) { return christoffel_from_metric(g, x, h); };
  return c;
}

/// Curvature at one point. Riemann is R_{abcd} = g_{ae} R^e_{bcd} with
/// R^a_{bcd} = d_c Gamma^a_{db} - d_d Gamma^a_{cb} + Gamma^a_{ce} Gamma^e_{db}
///             - Gamma^a_{de} Gamma^e_{cb},
/// Ric_{bd} = R^a_{bad}.
struct CurvatureAt {
  Eigen::MatrixXd g;
  Eigen::MatrixXd g_inverse;
  Tensor riemann;
  Tensor ricci;
  Tensor weyl;
  double scalar = 0.0;
};

inline CurvatureAt curvature_at(const Connection& conn, const Eigen::VectorXd& x, double h = 1e-3) {
  const int n = conn.dim;
  CurvatureAt out;
  out.g = conn.metric(x);
  out.g_inverse = out.g.inverse();
  const Tensor G = conn.christoffel(x);
  std::vector<Tensor> dG;
  for (int k = 0; k < n; ++k) dG.push_back(detail::tensor_derivative(conn.christoffel, x, k, h));

  Tensor up(n, 4);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c)
        for (int d = 0; d < n; ++d) {
          double r = dG[c](a, d, b) - dG[d](a, c, b);
          for (int e = 0; e < n; ++e) r += G(a, c, e) * G(e, d, b) - G(a, d, e) * G(e, c, b);
          up(a, b, c, d) = r;
        }
  out.riemann = Tensor(n, 4);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c)
        for (int d = 0; d < n; ++d) {
          double r = 0.0;
          for (int e = 0; e < n; ++e) r += out.g(a, e) * up(e, b, c, d);
          out.riemann(a, b, c, d) = r;
        }
  out.ricci = Tensor(n, 2);
  for (int b = 0; b < n; ++b)
    for (int d = 0; d < n; ++d) {
      double r = 0.0;
      for (int a = 0; a < n; ++a) r += up(a, b, a, d);
      out.ricci(b, d) = r;
    }
  for (int b = 0; b < n; ++b)
    for (int d = 0; d < n; ++d) out.scalar += out.g_inverse(b, d) * out.ricci(b, d);

  const auto& g = out.g;
  const auto& R = out.ricci;
  const double k1 = 1.0 / (n - 2), k2 = out.scalar / ((n - 1.0) * (n - 2.0));
  out.weyl = Tensor(n, 4);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c)
        for (int d = 0; d < n; ++d)
          out.weyl(a, b, c, d) =
              out.riemann(a, b, c, d) -
              k1 * (g(a, c) * R(b, d) - g(a, d) * R(b, c) + g(b, d) * R(a, c) - g(b, c) * R(a, d)) +
              k2 * (g(a, c) * g(b, d) - g(a, d) * g(b, c));
  return out;
}

/// (nabla_e T)_{i1..ik} = d_e T - sum_slots Gamma^f_{e,i_slot} T_{..f..} for a
/// covariant tensor field T. Result index order (e, i1, ..., ik).
template <class Field>
Tensor covariant_derivative(const Connection& conn, const Field& field, const Eigen::VectorXd& x,
                            double h) {
  const int n = conn.dim;
  const Tensor T = field(x);
  const int k = T.rank();
  const Tensor G = conn.christoffel(x);
  Tensor out(n, k + 1);
  const std::size_t block = T.data().size();
  std::vector<int> idx(k);
  for (int e = 0; e < n; ++e) {
    const Tensor dT = detail::tensor_derivative(field, x, e, h);
    for (std::size_t flat = 0; flat < block; ++flat) {
      std::size_t rem = flat;
      for (int s = k - 1; s >= 0; --s) {
        idx[s] = static_cast<int>(rem % n);
        rem /= n;
      }
      double v = dT.data()[flat];
      for (int slot = 0; slot < k; ++slot) {
        std::size_t stride = 1;
        for (int s = slot + 1; s < k; ++s) stride *= n;
        const std::size_t base = flat - static_cast<std::size_t>(idx[slot]) * stride;
        for (int f = 0; f < n; ++f) v -= G(f, e, idx[slot]) * T.data()[base + f * stride];
      }
      out.data()[e * block + flat] = v;
    }
  }
  return out;
}

inline Tensor weyl_derivative(const Connection& conn, const Eigen::VectorXd& x, double h = 1e-3) {
  auto W = [&conn, h](const Eigen::VectorXd& y) { return curvature_at(conn, y, h).weyl; };
  return covariant_derivative(conn, W, x, h);
}

inline Tensor ricci_derivative(const Connection& conn, const Eigen::VectorXd& x, double h = 1e-3) {
  auto R = [&conn, h](const Eigen::VectorXd& y) { return curvature_at(conn, y, h).ricci; };
  return covariant_derivative(conn, R, x, h);
}

/// max |nabla_c g_ab| with differenced metric derivatives.
inline double metric_compatibility(const Connection& conn, const Eigen::VectorXd& x, double h = 1e-3) {
  auto g = [&conn](const Eigen::VectorXd& y) {
    const Eigen::MatrixXd m = conn.metric(y);
    Tensor t(static_cast<int>(m.rows()), 2);
    for (int i = 0; i < m.rows(); ++i)
      for (int j = 0; j < m.cols(); ++j) t(i, j) = m(i, j);
    return t;
  };
  return covariant_derivative(conn, g, x, h).max_abs();
}

/// Sample points with t stratified over [0, p), |v| in [0.5, 2], s in [-1, 1].
inline std::vector<ManifoldPoint> sample_points(const ModelData& model, int count, Rng& rng) {
  std::vector<ManifoldPoint> out;
  for (int k = 0; k < count; ++k) {
    ManifoldPoint q;
    q.t = model.period() * (k + rng.uniform()) / count;
    q.s = rng.uniform(-1.0, 1.0);
    Eigen::VectorXd v(model.m());
    for (int i = 0; i < model.m(); ++i) v[i] = rng.uniform(-1.0, 1.0);
    if (v.norm() == 0.0) v[0] = 1.0;
    q.v = v.normalized() * rng.uniform(0.5, 2.0);
    out.push_back(q);
  }
  return out;
}

struct CurvatureTolerances {
  double ricci_relative = 1e-5;
  double ricci_other = 1e-7;
  double scalar = 1e-8;
  double weyl_floor = 1e-3;
  double weyl_parallel_ratio = 1e-5;
  double ricci_gradient_floor = 1e-3;
  double fdot_threshold = 0.1;
  double weyl_structure = 1e-7;
  double richardson = 1e-7;
  double step = 1e-3;
};

struct CurvatureReport {
  Report report{"curvature"};
  std::vector<double> ricci00_over_f;  ///< one per sample point
  double max_ricci_relative_error = 0.0;
  double max_ricci_other = 0.0;
  double max_scalar = 0.0;
  double min_weyl_norm = INFINITY;
  double max_weyl_ratio = 0.0;      ///< ||nabla W|| / ||W||
  double min_ricci_gradient = INFINITY;  ///< over points with |f'| above threshold
  double max_weyl_structure = 0.0;  ///< components outside W_{0i0j} and its symmetries
  double richardson_gap = 0.0;      ///< Ricci at h vs 2h
  int gradient_points = 0;
};

namespace detail {

/// W_{abcd} allowed to be nonzero: one index 0 in each pair, the other a V index.
inline bool weyl_slot_allowed(int a, int b, int c, int d, int y) {
  auto pair_ok = [y](int p, int q) {
    return (p == 0 && q != 0 && q != y) || (q == 0 && p != 0 && p != y);
  };
  return pair_ok(a, b) && pair_ok(c, d);
}

}  // namespace detail

/// Checks the Ricci formula (2 - n) f dt (x) dt, zero scalar curvature, the
/// Weyl component pattern, parallel Weyl tensor and non-parallel Ricci tensor
/// at every sample point. Throws GeometryVerificationError naming the first
/// failed identity unless `throw_on_failure` is false.
inline CurvatureReport curvature_report(const ModelData& model,
                                        const std::vector<ManifoldPoint>& points,
                                        const CurvatureTolerances& tol = {},
                                        bool throw_on_failure = true) {
  if (points.size() < 10) throw ParameterDomainError("curvature report needs >= 10 sample points");
  const Connection conn = model_connection(model);
  const int n = model.n(), y = n - 1;
  CurvatureReport out;
  for (const auto& q : points) {
    const Eigen::VectorXd x = coordinates(q);
    const CurvatureAt cur = curvature_at(conn, x, tol.step);
    const double f = model.f()(q.t);
    const double ratio = cur.ricci(0, 0) / f;
    out.ricci00_over_f.push_back(ratio);
    out.max_ricci_relative_error =
        std::max(out.max_ricci_relative_error, std::abs(ratio - (2.0 - n)) / (n - 2.0));
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        if (a != 0 || b != 0) out.max_ricci_other = std::max(out.max_ricci_other, std::abs(cur.ricci(a, b)));
    out.max_scalar = std::max(out.max_scalar, std::abs(cur.scalar));
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c)
          for (int d = 0; d < n; ++d)
            if (!detail::weyl_slot_allowed(a, b, c, d, y))
              out.max_weyl_structure = std::max(out.max_weyl_structure, std::abs(cur.weyl(a, b, c, d)));

    const CurvatureAt coarse = curvature_at(conn, x, 2 * tol.step);
    for (std::size_t i = 0; i < cur.ricci.data().size(); ++i)
      out.richardson_gap =
          std::max(out.richardson_gap, std::abs(cur.ricci.data()[i] - coarse.ricci.data()[i]));

    const double wn = cur.weyl.norm();
    out.min_weyl_norm = std::min(out.min_weyl_norm, wn);
    const double dw = weyl_derivative(conn, x, tol.step).norm();
    out.max_weyl_ratio = std::max(out.max_weyl_ratio, dw / wn);
    if (std::abs(model.f().derivative(q.t)) > tol.fdot_threshold) {
      ++out.gradient_points;
      out.min_ricci_gradient =
          std::min(out.min_ricci_gradient, ricci_derivative(conn, x, tol.step).norm());
    }
  }
  auto& r = out.report;
  r.below("Ric_00/f = 2-n, relative error", out.max_ricci_relative_error, tol.ricci_relative);
  r.below("other Ricci components", out.max_ricci_other, tol.ricci_other);
  r.below("scalar curvature", out.max_scalar, tol.scalar);
  r.below("Weyl components outside W_0i0j pattern", out.max_weyl_structure, tol.weyl_structure);
  r.below("Ricci step-halving consistency", out.richardson_gap, tol.richardson);
  r.above("min ||W|| (not conformally flat)", out.min_weyl_norm, tol.weyl_floor);
  r.below("max ||nabla W|| / ||W|| (parallel Weyl)", out.max_weyl_ratio, tol.weyl_parallel_ratio);
  r.holds("points with |f'| above threshold present", out.gradient_points > 0);
  r.above("min ||nabla Ric|| where |f'| > threshold (not locally symmetric)",
          out.gradient_points ? out.min_ricci_gradient : 0.0, tol.ricci_gradient_floor);
  if (throw_on_failure)
    if (const auto fails = r.failures(); !fails.empty())
      throw GeometryVerificationError("curvature identity failed: " + fails.front()->name);
  return out;
}

struct OlszakResult {
  Report report{"olszak"};
  double max_wedge = 0.0;
  double max_parallel_defect = 0.0;  ///< max |Gamma^a_{b,n-1}|
  double gradient_defect = 0.0;      ///< |g^{a0} - delta^a_{n-1}|
  double max_weyl_norm = 0.0;
};

/// With xi = dt, checks xi ^ W(e_p, e_q, ., .) = 0 for all coordinate bivectors
/// and that d/d(s/2) = grad t is null and parallel.
inline OlszakResult olszak_test(const Connection& conn, const std::vector<ManifoldPoint>& points,
                                double tolerance = 1e-8, double step = 1e-3) {
  const int n = conn.dim, y = n - 1;
  OlszakResult out;
  for (const auto& q : points) {
    const Eigen::VectorXd x = coordinates(q);
    const CurvatureAt cur = curvature_at(conn, x, step);
    out.max_weyl_norm = std::max(out.max_weyl_norm, cur.weyl.norm());
    for (int p = 0; p < n; ++p)
      for (int r = p + 1; r < n; ++r)
        for (int a = 0; a < n; ++a)
          for (int b = 0; b < n; ++b)
            for (int c = 0; c < n; ++c) {
              auto w = [&](int i, int j) { return cur.weyl(p, r, i, j); };
              const double wedge = (a == 0) * w(b, c) + (b == 0) * w(c, a) + (c == 0) * w(a, b);
              out.max_wedge = std::max(out.max_wedge, std::abs(wedge));
            }
    const Tensor G = conn.christoffel(x);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        out.max_parallel_defect = std::max(out.max_parallel_defect, std::abs(G(a, b, y)));
    for (int a = 0; a < n; ++a)
      out.gradient_defect =
          std::max(out.gradient_defect, std::abs(cur.g_inverse(a, 0) - (a == y ? 1.0 : 0.0)));
    out.gradient_defect = std::max(out.gradient_defect, std::abs(cur.g(y, y)));
  }
  out.report.below("max |dt ^ W(e_p, e_q, ., .)|", out.max_wedge, tolerance);
  out.report.below("max |Gamma^a_{b,n-1}| (grad t parallel)", out.max_parallel_defect, 1e-10);
  out.report.below("grad t = d/d(s/2) and null", out.gradient_defect, 1e-12);
  return out;
}

inline OlszakResult olszak_test(const ModelData& model, const std::vector<ManifoldPoint>& points,
                                double tolerance = 1e-8) {
  return olszak_test(model_connection(model), points, tolerance);
}

struct GeodesicSample {
  double sigma = 0.0;
  ManifoldPoint point;
  TangentVector velocity;
  double energy = 0.0;  ///< g(gamma', gamma')
};

struct GeodesicOptions {
  int samples = 201;              ///< output points over the span
  double generic_step = 4e-3;     ///< RK4 step in the affine parameter
  double panel = 1.0 / 64.0;      ///< max quadrature panel for s, in affine units
  double agreement_tolerance = 1e-6;
  bool cross_check = true;
};

struct Trajectory {
  std::vector<GeodesicSample> samples;
  double max_energy_drift = 0.0;          ///< structured route, relative
  double max_generic_energy_drift = 0.0;  ///< generic RK route, relative
  double max_disagreement = 0.0;          ///< structured vs generic, block-relative
};

namespace detail {

/// Energy relative to the size of its three terms, so that exponential growth
/// of the transversal solutions does not swamp the comparison.
inline double energy_scale(const ModelData& model, const ManifoldPoint& q, const TangentVector& w) {
  const double k = model.kappa(q.t, q.v);
  return std::max(1.0, std::abs(k) * w.dt * w.dt + std::abs(w.dt * w.ds) +
                           std::abs(model.inner(w.dv, w.dv)));
}

inline double energy(const ModelData& model, const ManifoldPoint& q, const TangentVector& w) {
  return model.kappa(q.t, q.v) * w.dt * w.dt + w.dt * w.ds + model.inner(w.dv, w.dv);
}

}  // namespace detail

/// Geodesic with gamma(0) = q0, gamma'(0) = w0 over sigma in [sigma0, sigma1].
/// Structured route: t' = c is constant, v(sigma) = u(t0 + c sigma) with
/// u'' = (f + A) u, and s' from the first integral
///   s' = s'_0 - c (kappa - kappa_0) - (<v', v'> - <v'_0, v'_0>) / c,
/// integrated by Gauss-Legendre panels. Generic route: RK4 on the full geodesic
/// equation with the analytic Christoffel array.
inline Trajectory geodesic(const SolutionSpace& space, const ManifoldPoint& q0,
                           const TangentVector& w0, double sigma0, double sigma1,
                           const GeodesicOptions& opt = {}) {
  const ModelData& model = space.model();
  const int m = model.m(), n = model.n();
  if (!(sigma0 <= 0.0 && 0.0 <= sigma1) || !std::isfinite(sigma0) || !std::isfinite(sigma1))
    throw ParameterDomainError("geodesic span must be finite and contain 0");
  if (opt.samples < 2) throw ParameterDomainError("geodesic needs at least two samples");
  const double c = w0.dt;
  const double kappa0 = model.kappa(q0.t, q0.v);
  const double vv0 = model.inner(w0.dv, w0.dv);

  // transversal part as a solution keyed by its state at t0
  SolutionE u = SolutionE::zero(m);
  if (c != 0.0) u = space.from_state(q0.t, q0.v, w0.dv / c);

  auto transversal = [&](double sigma, Eigen::VectorXd& v, Eigen::VectorXd& dv) {
    if (c == 0.0) {
      v = q0.v + sigma * w0.dv;
      dv = w0.dv;
      return;
    }
    const PhaseState st = space.evaluate(u, q0.t + c * sigma);
    v = st.u;
    dv = c * st.du;
  };
  auto sdot = [&](double sigma) {
    if (c == 0.0) return w0.ds;
    Eigen::VectorXd v, dv;
    transversal(sigma, v, dv);
    return w0.ds - c * (model.kappa(q0.t + c * sigma, v) - kappa0) - (model.inner(dv, dv) - vv0) / c;
  };
  auto s_increment = [&](double a, double b) {
    const int panels = std::max(1, static_cast<int>(std::ceil(std::abs(b - a) / opt.panel)));
    double acc = 0.0;
    for (int k = 0; k < panels; ++k)
      acc += GaussLegendre8::integrate(sdot, a + (b - a) * k / panels, a + (b - a) * (k + 1) / panels);
    return acc;
  };

  // output grid containing sigma = 0
  std::vector<double> sig;
  for (int k = 0; k < opt.samples; ++k) sig.push_back(sigma0 + (sigma1 - sigma0) * k / (opt.samples - 1));
  sig.push_back(0.0);
  std::sort(sig.begin(), sig.end());
  sig.erase(std::unique(sig.begin(), sig.end()), sig.end());
  const auto zero = std::find(sig.begin(), sig.end(), 0.0) - sig.begin();

  Trajectory out;
  out.samples.resize(sig.size());
  std::vector<double> s(sig.size());
  s[zero] = q0.s;
  for (std::size_t k = zero + 1; k < sig.size(); ++k) s[k] = s[k - 1] + s_increment(sig[k - 1], sig[k]);
  for (std::size_t k = zero; k-- > 0;) s[k] = s[k + 1] - s_increment(sig[k], sig[k + 1]);

  const double e0 = detail::energy(model, q0, w0);
  for (std::size_t k = 0; k < sig.size(); ++k) {
    GeodesicSample& g = out.samples[k];
    g.sigma = sig[k];
    g.point.t = q0.t + c * sig[k];
    g.point.s = s[k];
    transversal(sig[k], g.point.v, g.velocity.dv);
    g.velocity.dt = c;
    g.velocity.ds = sdot(sig[k]);
    g.energy = detail::energy(model, g.point, g.velocity);
    out.max_energy_drift = std::max(
        out.max_energy_drift, std::abs(g.energy - e0) / detail::energy_scale(model, g.point, g.velocity));
  }
  if (!opt.cross_check) return out;

  // generic route: state (x, x') in the coordinates (t, v, s/2)
  using Vec = Eigen::VectorXd;
  auto rhs = [&model, n](double, const Vec& z) {
    Vec d(2 * n);
    d.head(n) = z.tail(n);
    const Tensor G = christoffel_at(model, point_from(z.head(n)));
    for (int a = 0; a < n; ++a) {
      double acc = 0.0;
      for (int b = 0; b < n; ++b)
        for (int e = 0; e < n; ++e) acc += G(a, b, e) * z[n + b] * z[n + e];
      d[n + a] = -acc;
    }
    return d;
  };
  auto compare = [&](const Vec& z, const GeodesicSample& ref) {
    const ManifoldPoint p = point_from(z.head(n));
    TangentVector w{z[n], 2.0 * z[2 * n - 1], z.segment(n + 1, m)};
    const double dt = std::abs(p.t - ref.point.t) / std::max(1.0, std::abs(ref.point.t));
    const double ds = std::abs(p.s - ref.point.s) / std::max(1.0, std::abs(ref.point.s));
    const double dv = (p.v - ref.point.v).norm() / std::max(1.0, ref.point.v.norm());
    out.max_disagreement = std::max({out.max_disagreement, dt, ds, dv});
    out.max_generic_energy_drift =
        std::max(out.max_generic_energy_drift,
                 std::abs(detail::energy(model, p, w) - e0) / detail::energy_scale(model, p, w));
  };
  Vec z0(2 * n);
  z0.head(n) = coordinates(q0);
  z0.tail(n) = coordinates(w0);
  for (int dir : {1, -1}) {
    Vec z = z0;
    double at = 0.0;
    std::size_t k = zero;
    while (true) {
      if (dir > 0 ? k + 1 >= sig.size() : k == 0) break;
      k = dir > 0 ? k + 1 : k - 1;
      const double target = sig[k];
      const int steps = std::max(1, static_cast<int>(std::ceil(std::abs(target - at) / opt.generic_step)));
      const double h = (target - at) / steps;
      for (int j = 0; j < steps; ++j) z = rk4_step(rhs, at + j * h, z, h);
      at = target;
      compare(z, out.samples[k]);
    }
  }
  if (out.max_disagreement > opt.agreement_tolerance)
    throw IntegratorError("structured and generic geodesic integrators disagree by " +
                          std::to_string(out.max_disagreement));
  return out;
}

struct HomogeneityResult {
  Report report{"homogeneity"};
  bool obstruction_found = false;
  double variation = 0.0;  ///< max - min of (|f|^{-1/2})' on the witnessing interval
  double witness_lo = 0.0, witness_hi = 0.0;
};

/// Local homogeneity would force |f|^{-1/2} to be affine on every interval
/// where f does not vanish. Samples (|f|^{-1/2})' = -f'/(2 sign(f) |f|^{3/2})
/// on [lo, hi] and reports the largest variation over maximal runs with
/// |f| > floor.
template <class F, class DF>
HomogeneityResult homogeneity_obstruction(const F& f, const DF& df, double lo, double hi,
                                          int samples = 4001, double floor = 1e-6,
                                          double threshold = 1e-3) {
  HomogeneityResult out;
  bool any = false, in_run = false;
  double run_lo = 0, run_min = 0, run_max = 0, last_t = lo;
  auto close = [&](double end) {
    if (!in_run) return;
    if (run_max - run_min > out.variation) {
      out.variation = run_max - run_min;
      out.witness_lo = run_lo;
      out.witness_hi = end;
    }
    in_run = false;
  };
  for (int k = 0; k < samples; ++k) {
    const double t = lo + (hi - lo) * k / (samples - 1);
    const double v = f(t);
    if (std::abs(v) <= floor) {
      close(last_t);
      last_t = t;
      continue;
    }
    any = true;
    const double d = -df(t) / (2.0 * (v > 0 ? 1.0 : -1.0) * std::pow(std::abs(v), 1.5));
    if (!in_run) {
      in_run = true;
      run_lo = t;
      run_min = run_max = d;
    }
    run_min = std::min(run_min, d);
    run_max = std::max(run_max, d);
    last_t = t;
  }
  close(last_t);
  if (!any) throw DomainError("homogeneity test inconclusive: |f| below floor at every sample");
  out.obstruction_found = out.variation > threshold;
  out.report.above("variation of (|f|^{-1/2})' on a nonvanishing interval", out.variation, threshold);
  return out;
}

inline HomogeneityResult homogeneity_obstruction(const PeriodicProfile& f, double threshold = 1e-3) {
  if (f.is_constant()) throw ParameterDomainError("homogeneity obstruction needs nonconstant f");
  return homogeneity_obstruction([&f](double t) { return f(t); },
                                 [&f](double t) { return f.derivative(t); }, 0.0, f.period(), 4001,
                                 1e-6, threshold);
}

}  // namespace ecs
