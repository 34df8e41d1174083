#pragma once

// Linear ODE layer on V: the 2m-dimensional solution space of u'' = (f + A) u,
// its first-order subspace u' = B u, the constant skew form Omega, the
// translation (T u)(t) = u(t - p) and the T-invariant lattice.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ecs/error.hpp"
#include "ecs/integrators.hpp"
#include "ecs/model.hpp"
#include "ecs/polynomial.hpp"
#include "ecs/report.hpp"
#include "ecs/spectral_solver.hpp"

namespace ecs {

/// Element of the second-order solution space, keyed by data at t = 0.
struct SolutionE {
  Eigen::VectorXd u0;
  Eigen::VectorXd du0;

  static SolutionE zero(int m) { return {Eigen::VectorXd::Zero(m), Eigen::VectorXd::Zero(m)}; }
  int dim() const { return static_cast<int>(u0.size()); }

  friend SolutionE operator+(const SolutionE& a, const SolutionE& b) {
    return {a.u0 + b.u0, a.du0 + b.du0};
  }
  friend SolutionE operator-(const SolutionE& a, const SolutionE& b) {
    return {a.u0 - b.u0, a.du0 - b.du0};
  }
  friend SolutionE operator-(const SolutionE& a) { return {-a.u0, -a.du0}; }
  friend SolutionE operator*(double s, const SolutionE& a) { return {s * a.u0, s * a.du0}; }
};

/// Element of the first-order subspace: u_i(t) = exp(int_0^t b_i) u_i(0).
struct SolutionL {
  Eigen::VectorXd x;  ///< channel values at t = 0
};

/// Position and velocity at some time.
struct PhaseState {
  Eigen::VectorXd u;
  Eigen::VectorXd du;
};

/// Per-channel one-period transfer matrices of u_i'' = (f + a_i) u_i acting on
/// (u_i, u_i').
struct Monodromy {
  std::vector<Eigen::Matrix2d> blocks;
  double max_det_error = 0.0;

  /// 2m x 2m matrix on (u_1..u_m, u_1'..u_m').
  Eigen::MatrixXd assembled() const {
    const int m = static_cast<int>(blocks.size());
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(2 * m, 2 * m);
    for (int i = 0; i < m; ++i) {
      out(i, i) = blocks[i](0, 0);
      out(i, m + i) = blocks[i](0, 1);
      out(m + i, i) = blocks[i](1, 0);
      out(m + i, m + i) = blocks[i](1, 1);
    }
    return out;
  }
};

namespace detail {

inline Eigen::Matrix2d inverse_unimodular(const Eigen::Matrix2d& a) {
  Eigen::Matrix2d r;
  r << a(1, 1), -a(0, 1), -a(1, 0), a(0, 0);
  return r;
}

inline Eigen::Matrix2d power(const Eigen::Matrix2d& a, long long k) {
  Eigen::Matrix2d base = k >= 0 ? a : inverse_unimodular(a);
  unsigned long long e = k >= 0 ? k : -k;
  Eigen::Matrix2d out = Eigen::Matrix2d::Identity();
  while (e) {
    if (e & 1ULL) out = out * base;
    base = base * base;
    e >>= 1;
  }
  return out;
}

/// RK4 propagation of the fundamental matrix of Y' = [[0,1],[q,0]] Y.
template <class Q>
Eigen::Matrix2d hill_step(const Q& q, double t, const Eigen::Matrix2d& y, double h) {
  auto rhs = [&q](double s, const Eigen::Matrix2d& Y) {
    Eigen::Matrix2d d;
    d.row(0) = Y.row(1);
    d.row(1) = q(s) * Y.row(0);
    return d;
  };
  return rk4_step(rhs, t, y, h);
}

}  // namespace detail

/// Fundamental matrices of the decoupled Hill equations tabulated over one
/// period; Phi(t, 0) for arbitrary t follows from Phi(t + jp, 0) = Phi(t, 0) M^j.
class SolutionSpace {
 public:
  static constexpr int kDefaultSteps = 4096;

  explicit SolutionSpace(ModelData model, int steps = kDefaultSteps)
      : model_(std::move(model)), steps_(steps) {
    if (steps_ < 16) throw ParameterDomainError("solution grid needs at least 16 steps");
    const double h = model_.period() / steps_;
    grid_.resize(m());
    for (int i = 0; i < m(); ++i) {
      auto q = [this, i](double t) { return model_.potential(i, t); };
      auto& g = grid_[i];
      g.reserve(steps_ + 1);
      g.push_back(Eigen::Matrix2d::Identity());
      for (int k = 0; k < steps_; ++k) g.push_back(detail::hill_step(q, k * h, g.back(), h));
    }
  }

  const ModelData& model() const { return model_; }
  int m() const { return model_.m(); }
  int steps() const { return steps_; }
  double period() const { return model_.period(); }

  const Eigen::Matrix2d& period_map(int i) const { return grid_[i].back(); }

  /// Phi_i(t, 0).
  Eigen::Matrix2d fundamental(int i, double t) const {
    const double p = period();
    const double j = std::floor(t / p);
    const double tau = t - j * p;
    const double h = p / steps_;
    int k = static_cast<int>(std::floor(tau / h));
    k = std::clamp(k, 0, steps_);
    Eigen::Matrix2d local = grid_[i][k];
    const double rest = tau - k * h;
    if (rest != 0.0) {
      auto q = [this, i](double s) { return model_.potential(i, s); };
      local = detail::hill_step(q, k * h, local, rest);
    }
    if (j == 0.0) return local;
    return local * detail::power(period_map(i), static_cast<long long>(j));
  }

  /// Phi_i(t1, t0)
  Eigen::Matrix2d transfer(int i, double t1, double t0) const {
    return fundamental(i, t1) * detail::inverse_unimodular(fundamental(i, t0));
  }

  PhaseState evaluate(const SolutionE& u, double t) const {
    require_dim(u);
    PhaseState s{Eigen::VectorXd(m()), Eigen::VectorXd(m())};
    for (int i = 0; i < m(); ++i) {
      const Eigen::Vector2d y = fundamental(i, t) * Eigen::Vector2d(u.u0[i], u.du0[i]);
      s.u[i] = y[0];
      s.du[i] = y[1];
    }
    return s;
  }

  /// Solution whose position and velocity at t0 are (u, du).
  SolutionE from_state(double t0, const Eigen::VectorXd& u, const Eigen::VectorXd& du) const {
    SolutionE out = SolutionE::zero(m());
    for (int i = 0; i < m(); ++i) {
      const Eigen::Vector2d y =
          detail::inverse_unimodular(fundamental(i, t0)) * Eigen::Vector2d(u[i], du[i]);
      out.u0[i] = y[0];
      out.du0[i] = y[1];
    }
    return out;
  }

  /// Omega(u, w) = <u', w> - <u, w'> evaluated at time t.
  double omega_at(const SolutionE& u, const SolutionE& w, double t) const {
    const PhaseState a = evaluate(u, t), b = evaluate(w, t);
    return model_.inner(a.du, b.u) - model_.inner(a.u, b.du);
  }

  double omega(const SolutionE& u, const SolutionE& w) const {
    require_dim(u);
    require_dim(w);
    return model_.inner(u.du0, w.u0) - model_.inner(u.u0, w.du0);
  }

  /// max - min of Omega(u, w)(t) over the given times.
  double omega_spread(const SolutionE& u, const SolutionE& w, std::span<const double> times) const {
    double lo = INFINITY, hi = -INFINITY;
    for (double t : times) {
      const double v = omega_at(u, w, t);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    return hi - lo;
  }

  /// Omega at t = 0 after checking constancy at ten times in [0, 3p].
  double omega_verified(const SolutionE& u, const SolutionE& w, double tolerance = 1e-10) const {
    std::vector<double> times;
    for (int k = 0; k < 10; ++k) times.push_back(3.0 * period() * k / 9.0);
    const double spread = omega_spread(u, w, times);
    if (!(spread < tolerance))
      throw ConservationError("Omega is not constant along solutions", spread);
    return omega(u, w);
  }

  /// T^k u, with (T u)(t) = u(t - p); on initial data T = M^{-1}.
  SolutionE translate(const SolutionE& u, long long k = 1) const {
    require_dim(u);
    SolutionE out = SolutionE::zero(m());
    for (int i = 0; i < m(); ++i) {
      const Eigen::Vector2d y =
          detail::power(period_map(i), -k) * Eigen::Vector2d(u.u0[i], u.du0[i]);
      out.u0[i] = y[0];
      out.du0[i] = y[1];
    }
    return out;
  }

  Monodromy monodromy() const {
    Monodromy mono;
    for (int i = 0; i < m(); ++i) {
      mono.blocks.push_back(period_map(i));
      mono.max_det_error = std::max(mono.max_det_error, std::abs(period_map(i).determinant() - 1.0));
    }
    return mono;
  }

  // First-order subspace, needs the model's curve B.

  PhaseState evaluate(const SolutionL& u, double t) const {
    const DiagonalCurve& B = model_.curve();
    PhaseState s{Eigen::VectorXd(m()), Eigen::VectorXd(m())};
    for (int i = 0; i < m(); ++i) {
      s.u[i] = std::exp(B.integral(i, t)) * u.x[i];
      s.du[i] = B.value(i, t) * s.u[i];
    }
    return s;
  }

  SolutionE embed(const SolutionL& u) const {
    const DiagonalCurve& B = model_.curve();
    SolutionE out{u.x, Eigen::VectorXd(m())};
    for (int i = 0; i < m(); ++i) out.du0[i] = B.sample(i, 0) * u.x[i];
    return out;
  }

  /// exp(int_0^t b_i), the map from channel data at 0 to values at t.
  Eigen::VectorXd growth(double t) const {
    const DiagonalCurve& B = model_.curve();
    Eigen::VectorXd g(m());
    for (int i = 0; i < m(); ++i) g[i] = std::exp(B.integral(i, t));
    return g;
  }

 private:
  void require_dim(const SolutionE& u) const {
    if (u.u0.size() != m() || u.du0.size() != m())
      throw DomainError("solution dimension does not match the model");
  }

  ModelData model_;
  int steps_;
  std::vector<std::vector<Eigen::Matrix2d>> grid_;
};

inline PhaseState evaluate_E(const SolutionSpace& space, const SolutionE& u, double t) {
  return space.evaluate(u, t);
}

inline double omega(const SolutionSpace& space, const SolutionE& u, const SolutionE& w) {
  return space.omega(u, w);
}

inline SolutionE translate(const SolutionSpace& space, const SolutionE& u) {
  return space.translate(u, 1);
}

/// Period maps by a direct RK4 sweep over one period, independent of any cached
/// grid. Throws IntegratorError if a block determinant drifts from 1 by more
/// than `det_tolerance`.
inline Monodromy monodromy_of(const ModelData& model, int steps = SolutionSpace::kDefaultSteps,
                              double det_tolerance = 1e-8) {
  Monodromy mono;
  const double h = model.period() / steps;
  for (int i = 0; i < model.m(); ++i) {
    auto q = [&model, i](double t) { return model.potential(i, t); };
    Eigen::Matrix2d y = Eigen::Matrix2d::Identity();
    for (int k = 0; k < steps; ++k) y = detail::hill_step(q, k * h, y, h);
    mono.blocks.push_back(y);
    mono.max_det_error = std::max(mono.max_det_error, std::abs(y.determinant() - 1.0));
  }
  if (mono.max_det_error > det_tolerance)
    throw IntegratorError("monodromy determinant drift " + std::to_string(mono.max_det_error));
  return mono;
}

/// Coefficients of prod (x - r_i), constant-first, from elementary symmetric
/// functions.
inline std::vector<double> monic_from_roots(std::span<const double> roots) {
  std::vector<double> c{1.0};
  for (double r : roots) {
    std::vector<double> next(c.size() + 1, 0.0);
    for (std::size_t j = 0; j < c.size(); ++j) {
      next[j + 1] += c[j];
      next[j] -= r * c[j];
    }
    c = std::move(next);
  }
  return c;
}

/// Monic normalisation (-1)^m P as doubles, constant-first.
inline std::vector<double> monic_coefficients(const GlzPolynomial& P) {
  const double sign = (P.degree() % 2 == 0) ? 1.0 : -1.0;
  std::vector<double> c;
  for (auto x : P.coefficients()) c.push_back(sign * static_cast<double>(x));
  return c;
}

/// Matrix of diag(mu) in the coordinates given by the columns of S.
inline Eigen::MatrixXd coordinate_matrix(const Eigen::MatrixXd& S, std::span<const double> mu) {
  Eigen::VectorXd d(static_cast<Eigen::Index>(mu.size()));
  for (std::size_t i = 0; i < mu.size(); ++i) d[i] = mu[i];
  return S.partialPivLu().solve(d.asDiagonal() * S);
}

inline double condition_number(const Eigen::MatrixXd& a) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& s = svd.singularValues();
  return s[0] / s[s.size() - 1];
}

/// Lattice in the first-order subspace on which T acts by the companion matrix
/// C of P. Generator j has channel data S(:, j) with S(i, j) = r_i^j, where r_i
/// is the root matched to channel i; then diag(r) S = S C.
struct LatticeBasis {
  GlzPolynomial P{{1, -3, 1}};
  Eigen::MatrixXd S;
  IntMatrix C;
  IntMatrix C_inverse;
  std::vector<double> roots;        ///< exact-root refinement, channel order
  std::vector<double> multipliers;  ///< measured exp(-int b_i), channel order
  Eigen::MatrixXd T_lattice;        ///< S^{-1} diag(multipliers) S
  double condition = 0.0;
  double integrality_defect = 0.0;  ///< max |T_lattice - C|
  double root_mismatch = 0.0;       ///< max |multiplier - root|

  int rank() const { return static_cast<int>(S.cols()); }

  SolutionL generator(int j) const { return {S.col(j)}; }

  Eigen::VectorXd channel_data(const Eigen::VectorXd& lattice_coords) const {
    return S * lattice_coords;
  }

  Eigen::VectorXd lattice_coords(const Eigen::VectorXd& channel) const {
    return S.partialPivLu().solve(channel);
  }
};

inline constexpr double kConditioningLimit = 1e12;

/// Builds the lattice for curve B and polynomial P. Every channel multiplier
/// must sit within `match_tolerance` (relative) of a distinct root of P.
inline LatticeBasis lattice_for(const DiagonalCurve& B, const GlzPolynomial& P,
                                double match_tolerance = 1e-8, double integrality = 1e-7) {
  const int m = B.channels();
  if (P.degree() != m)
    throw ConsistencyError("polynomial degree " + std::to_string(P.degree()) +
                           " differs from channel count " + std::to_string(m));
  LatticeBasis L;
  L.P = P;
  L.multipliers = channel_multipliers(B);
  const auto iso = isolate_roots(P, IsolationOptions::full_precision());
  const auto& r = iso.spectrum.values();
  std::vector<bool> used(m, false);
  for (int i = 0; i < m; ++i) {
    int best = -1;
    double gap = INFINITY;
    for (int j = 0; j < m; ++j) {
      const double d = std::abs(L.multipliers[i] - r[j]) / std::max(1.0, r[j]);
      if (!used[j] && d < gap) {
        gap = d;
        best = j;
      }
    }
    if (best < 0 || gap > match_tolerance)
      throw ConsistencyError("channel " + std::to_string(i) + " multiplier " +
                             std::to_string(L.multipliers[i]) + " matches no root of P");
    used[best] = true;
    L.roots.push_back(r[best]);
    L.root_mismatch = std::max(L.root_mismatch, std::abs(L.multipliers[i] - r[best]));
  }
  L.S.resize(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) L.S(i, j) = std::pow(L.roots[i], j);
  L.condition = condition_number(L.S);
  if (!(L.condition < kConditioningLimit))
    throw ConditioningError("lattice basis is ill-conditioned", L.condition);
  L.C = companion_matrix(P);
  L.C_inverse = unimodular_inverse(L.C);
  L.T_lattice = coordinate_matrix(L.S, L.multipliers);
  L.integrality_defect = (L.T_lattice - L.C.cast<double>()).cwiseAbs().maxCoeff();
  if (L.integrality_defect > integrality)
    throw ConsistencyError("T in lattice coordinates is not integral: defect " +
                           std::to_string(L.integrality_defect));
  return L;
}

namespace detail {

using BigMatrix = std::vector<std::vector<BigInt>>;

inline BigMatrix to_big(const IntMatrix& a) {
  BigMatrix out(a.rows(), std::vector<BigInt>(a.cols()));
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out[i][j] = a(i, j);
  return out;
}

inline BigMatrix multiply(const BigMatrix& a, const BigMatrix& b) {
  const std::size_t n = a.size(), k = b.size(), m = b.front().size();
  BigMatrix out(n, std::vector<BigInt>(m, 0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t l = 0; l < k; ++l)
      if (a[i][l] != 0)
        for (std::size_t j = 0; j < m; ++j) out[i][j] += a[i][l] * b[l][j];
  return out;
}

}  // namespace detail

/// Integer power C^k (k may be negative) with overflow detection.
inline IntMatrix integer_power(const IntMatrix& C, const IntMatrix& C_inverse, long long k) {
  const int n = static_cast<int>(C.rows());
  const IntMatrix& base = k >= 0 ? C : C_inverse;
  detail::BigMatrix acc = detail::to_big(IntMatrix::Identity(n, n));
  const detail::BigMatrix b = detail::to_big(base);
  for (long long e = 0; e < (k >= 0 ? k : -k); ++e) acc = detail::multiply(acc, b);
  IntMatrix out(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out(i, j) = detail::narrow(acc[i][j], "integer matrix power");
  return out;
}

/// T^k != Id for 1 <= |k| <= kmax: exact integer powers of the lattice matrix,
/// plus the eigenvalue reason (no multiplier is a root of unity).
inline Report check_T_nontrivial(const IntMatrix& C, std::span<const double> eigenvalues,
                                 int kmax) {
  Report r("T nontrivial");
  const int n = static_cast<int>(C.rows());
  const IntMatrix Cinv = unimodular_inverse(C);
  const detail::BigMatrix id = detail::to_big(IntMatrix::Identity(n, n));
  double weakest = INFINITY;
  for (int sign : {1, -1}) {
    const detail::BigMatrix step = detail::to_big(sign > 0 ? C : Cinv);
    detail::BigMatrix power = id;
    for (int k = 1; k <= kmax; ++k) {
      power = detail::multiply(power, step);
      BigInt dist = 0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          BigInt d = power[i][j] - id[i][j];
          if (d < 0) d = -d;
          if (d > dist) dist = d;
        }
      weakest = std::min(weakest, static_cast<double>(dist));
    }
  }
  r.above("min over 1<=|k|<=kmax of ||T^k - Id||_inf (exact integers)", weakest, 0.5);
  double min_log = INFINITY;
  for (double l : eigenvalues) min_log = std::min(min_log, std::abs(std::log(l)));
  r.above("min |log lambda_i| (no eigenvalue is a root of unity)", min_log, 0.0,
          "lambda^k = 1 with k != 0 would force |lambda| = 1 and real positive lambda = 1");
  double min_gap = INFINITY;
  for (int k = 1; k <= kmax; ++k)
    for (double l : eigenvalues)
      min_gap = std::min({min_gap, std::abs(std::pow(l, k) - 1.0), std::abs(std::pow(l, -k) - 1.0)});
  r.above("min |lambda_i^k - 1| over 1<=|k|<=kmax", min_gap, 0.0);
  return r;
}

inline Report check_T_nontrivial(const LatticeBasis& lattice, int kmax) {
  return check_T_nontrivial(lattice.C, lattice.roots, kmax);
}

}  // namespace ecs
