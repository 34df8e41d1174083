#pragma once

// Periodic diagonal Riccati curves B with B' + B^2 = f + A whose averaged
// multipliers exp(-int_0^p b_i) hit a prescribed spectrum.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ecs/error.hpp"
#include "ecs/integrators.hpp"
#include "ecs/periodic_profile.hpp"
#include "ecs/polynomial.hpp"
#include "ecs/report.hpp"

namespace ecs {

/// Diagonal entries a_1..a_m with zero sum.
class TracelessDiag {
 public:
  static constexpr double kTraceTolerance = 1e-13;
  static constexpr double kNonzeroFloor = 1e-8;

  TracelessDiag() = default;
  explicit TracelessDiag(std::vector<double> entries) : entries_(std::move(entries)) {
    if (entries_.empty()) throw ParameterDomainError("traceless matrix needs m >= 1 entries");
    if (std::abs(trace(entries_)) > kTraceTolerance)
      throw ParameterDomainError("matrix is not traceless: trace = " +
                                 std::to_string(trace(entries_)));
  }

  static double trace(std::span<const double> a) {
    return std::accumulate(a.begin(), a.end(), 0.0);
  }

  const std::vector<double>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  double operator[](std::size_t i) const { return entries_[i]; }

  double max_abs() const {
    double s = 0.0;
    for (double a : entries_) s = std::max(s, std::abs(a));
    return s;
  }
  bool is_nonzero(double floor = kNonzeroFloor) const { return max_abs() >= floor; }

 private:
  std::vector<double> entries_;
};

/// p-periodic diagonal curve stored as values and derivatives on a uniform
/// grid t_k = k p / N, k = 0..N, per channel. Between nodes it is the cubic
/// Hermite interpolant, integrated exactly.
class DiagonalCurve {
 public:
  DiagonalCurve() = default;
  DiagonalCurve(double period, std::vector<std::vector<double>> values,
                std::vector<std::vector<double>> derivatives)
      : period_(period), values_(std::move(values)), derivs_(std::move(derivatives)) {
    if (!(period_ > 0.0)) throw ParameterDomainError("curve period must be positive");
    if (values_.empty() || values_.size() != derivs_.size())
      throw ParameterDomainError("curve needs matching value/derivative channels");
    const std::size_t len = values_.front().size();
    if (len < 2) throw ParameterDomainError("curve needs at least one grid interval");
    for (std::size_t i = 0; i < values_.size(); ++i)
      if (values_[i].size() != len || derivs_[i].size() != len)
        throw ParameterDomainError("curve channels have inconsistent grids");
    build_cumulative();
  }

  /// Constant curve B = diag(c).
  static DiagonalCurve constant(double period, std::span<const double> c, int steps = 16) {
    std::vector<std::vector<double>> v, d;
    for (double ci : c) {
      v.emplace_back(steps + 1, ci);
      d.emplace_back(steps + 1, 0.0);
    }
    return DiagonalCurve(period, std::move(v), std::move(d));
  }

  /// Samples value(i, t) and derivative(i, t) on the grid.
  template <class Value, class Deriv>
  static DiagonalCurve sample(double period, int channels, int steps, const Value& value,
                              const Deriv& deriv) {
    std::vector<std::vector<double>> v(channels), d(channels);
    for (int i = 0; i < channels; ++i)
      for (int k = 0; k <= steps; ++k) {
        const double t = period * k / steps;
        v[i].push_back(value(i, t));
        d[i].push_back(deriv(i, t));
      }
    return DiagonalCurve(period, std::move(v), std::move(d));
  }

  double period() const { return period_; }
  int channels() const { return static_cast<int>(values_.size()); }
  int steps() const { return static_cast<int>(values_.front().size()) - 1; }
  double node(int k) const { return period_ * k / steps(); }
  double sample(int i, int k) const { return values_[i][k]; }
  double sample_derivative(int i, int k) const { return derivs_[i][k]; }
  const std::vector<double>& samples(int i) const { return values_[i]; }
  const std::vector<double>& sample_derivatives(int i) const { return derivs_[i]; }

  double value(int i, double t) const {
    auto [k, s, h] = locate(t);
    const double s2 = s * s, s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * values_[i][k] + (s3 - 2 * s2 + s) * h * derivs_[i][k] +
           (-2 * s3 + 3 * s2) * values_[i][k + 1] + (s3 - s2) * h * derivs_[i][k + 1];
  }

  double derivative(int i, double t) const {
    auto [k, s, h] = locate(t);
    const double s2 = s * s;
    return ((6 * s2 - 6 * s) * values_[i][k] + (3 * s2 - 4 * s + 1) * h * derivs_[i][k] +
            (-6 * s2 + 6 * s) * values_[i][k + 1] + (3 * s2 - 2 * s) * h * derivs_[i][k + 1]) /
           h;
  }

  Eigen::VectorXd values_at(double t) const {
    Eigen::VectorXd v(channels());
    for (int i = 0; i < channels(); ++i) v[i] = value(i, t);
    return v;
  }

  /// int_0^p b_i.
  double period_integral(int i) const { return cumulative_[i].back(); }

  /// int_0^t b_i for any real t (periodic extension).
  double integral(int i, double t) const {
    const double j = std::floor(t / period_);
    auto [k, s, h] = locate(t);
    const double s2 = s * s, s3 = s2 * s, s4 = s3 * s;
    const double partial =
        h * ((s4 / 2 - s3 + s) * values_[i][k] + (s4 / 4 - 2 * s3 / 3 + s2 / 2) * h * derivs_[i][k] +
             (-s4 / 2 + s3) * values_[i][k + 1] + (s4 / 4 - s3 / 3) * h * derivs_[i][k + 1]);
    return j * period_integral(i) + cumulative_[i][k] + partial;
  }

  /// |b_i(0) - b_i(p)|
  double periodicity_defect(int i) const {
    return std::abs(values_[i].front() - values_[i].back());
  }

 private:
  struct Location {
    int k;
    double s;
    double h;
  };

  Location locate(double t) const {
    const int n = steps();
    const double h = period_ / n;
    double tau = t - period_ * std::floor(t / period_);
    int k = static_cast<int>(std::floor(tau / h));
    if (k >= n) k = n - 1;
    if (k < 0) k = 0;
    return {k, (tau - k * h) / h, h};
  }

  void build_cumulative() {
    const int n = steps();
    const double h = period_ / n;
    cumulative_.assign(values_.size(), std::vector<double>(n + 1, 0.0));
    for (std::size_t i = 0; i < values_.size(); ++i)
      for (int k = 0; k < n; ++k)
        cumulative_[i][k + 1] =
            cumulative_[i][k] + h * 0.5 * (values_[i][k] + values_[i][k + 1]) +
            h * h / 12.0 * (derivs_[i][k] - derivs_[i][k + 1]);
  }

  double period_ = 1.0;
  std::vector<std::vector<double>> values_;
  std::vector<std::vector<double>> derivs_;
  std::vector<std::vector<double>> cumulative_;
};

/// Constant seed C = -diag(log lambda)/p with C^2 = h + A.
struct ConstantSeed {
  std::vector<double> c;
  double h = 0.0;
  TracelessDiag A;
};

inline ConstantSeed seed_constant(const Spectrum& target, double p) {
  if (!(p > 0.0)) throw ParameterDomainError("period must be positive");
  if (target.size() == 0) throw ParameterDomainError("empty target spectrum");
  if (!target.avoids_unit()) throw UnitRootError("target spectrum contains 1");
  if (!target.nondegenerate())
    throw DegenerateSpectrumError(
        "target spectrum has all |log lambda| equal (of the form {x} or {x, 1/x})");
  ConstantSeed seed;
  for (double l : target.values()) seed.c.push_back(-std::log(l) / p);
  double sum_sq = 0.0;
  for (double ci : seed.c) sum_sq += ci * ci;
  seed.h = sum_sq / static_cast<double>(seed.c.size());
  std::vector<double> a;
  for (double ci : seed.c) a.push_back(ci * ci - seed.h);
  // remove the O(eps) trace left by rounding
  const double drift = TracelessDiag::trace(a) / static_cast<double>(a.size());
  for (double& ai : a) ai -= drift;
  seed.A = TracelessDiag(std::move(a));
  if (!seed.A.is_nonzero()) throw DegenerateSpectrumError("seed traceless part vanishes");
  return seed;
}

/// Differential of (f + E) -> spectrum at the constant seed:
///   -exp(-pC) (2C)^{-1} [int_0^p f + p E], entrywise.
inline std::vector<double> spectral_differential(const ConstantSeed& seed, double p,
                                                 double f_integral,
                                                 std::span<const double> E) {
  std::vector<double> out;
  for (std::size_t i = 0; i < seed.c.size(); ++i) {
    const double c = seed.c[i];
    out.push_back(-std::exp(-p * c) / (2.0 * c) * (f_integral + p * E[i]));
  }
  return out;
}

struct RiccatiOptions {
  int min_steps = 2048;
  int max_steps = 1 << 17;
  double integral_tolerance = 1e-11;  ///< step doubling stops below this change in int b
  double shooting_tolerance = 1e-12;  ///< |b(p) - b(0)|
  int max_iterations = 50;
  double blowup = 1e8;
};

struct RiccatiDiagnostics {
  int steps = 0;
  std::vector<int> iterations;         ///< Newton iterations per channel
  std::vector<double> shooting_residual;
  std::vector<double> doubling_change;  ///< |int b(2N) - int b(N)| per channel
};

namespace detail {

struct ChannelRun {
  double end_value;
  double integral;
  double sensitivity;  ///< d b(p) / d b(0)
};

/// RK4 over one period of b' = q(t) - b^2 with the integral and the
/// variational equation d' = -2 b d carried along.
template <class Q>
ChannelRun integrate_riccati(const Q& q, double period, double b0, int steps, double blowup,
                             std::vector<double>* trace = nullptr) {
  using State = Eigen::Vector3d;
  auto rhs = [&q](double t, const State& y) {
    return State(q(t) - y[0] * y[0], y[0], -2.0 * y[0] * y[2]);
  };
  State y(b0, 0.0, 1.0);
  const double h = period / steps;
  if (trace) {
    trace->assign(1, b0);
    trace->reserve(steps + 1);
  }
  for (int k = 0; k < steps; ++k) {
    y = rk4_step(rhs, k * h, y, h);
    if (!std::isfinite(y[0]) || std::abs(y[0]) > blowup)
      throw BlowUpError("Riccati solution escapes near t = " + std::to_string((k + 1) * h),
                        (k + 1) * h);
    if (trace) trace->push_back(y[0]);
  }
  return {y[0], y[1], y[2]};
}

/// Newton on g(b0) = Phi(b0) - b0 with step halving on residual increase.
template <class Q>
double shoot_periodic(const Q& q, double period, double b0, int steps, const RiccatiOptions& opt,
                      int* iterations, double* residual) {
  double b = b0;
  ChannelRun run = integrate_riccati(q, period, b, steps, opt.blowup);
  double g = run.end_value - b;
  int it = 0;
  for (; it < opt.max_iterations && std::abs(g) > opt.shooting_tolerance; ++it) {
    const double dg = run.sensitivity - 1.0;
    if (std::abs(dg) < 1e-14)
      throw ConvergenceError("period map derivative equals 1; shooting is singular", g);
    const double step = -g / dg;
    double lambda = 1.0;
    bool accepted = false;
    for (int halving = 0; halving < 40; ++halving, lambda *= 0.5) {
      try {
        ChannelRun trial = integrate_riccati(q, period, b + lambda * step, steps, opt.blowup);
        const double gt = trial.end_value - (b + lambda * step);
        if (std::abs(gt) < std::abs(g) || std::abs(gt) <= opt.shooting_tolerance) {
          b += lambda * step;
          run = trial;
          g = gt;
          accepted = true;
          break;
        }
      } catch (const BlowUpError&) {
      }
    }
    if (!accepted) throw ConvergenceError("shooting Newton stalled", g);
  }
  if (std::abs(g) > opt.shooting_tolerance)
    throw ConvergenceError("shooting Newton hit the iteration cap", g);
  if (iterations) *iterations = it;
  if (residual) *residual = g;
  return b;
}

}  // namespace detail

/// Per channel, the periodic solution of b_i' + b_i^2 = f + constants[i] near
/// init[i]. Step count doubles from `min_steps` until int b changes by less
/// than `integral_tolerance`; the returned curve uses the final common grid.
inline DiagonalCurve solve_periodic_riccati(const PeriodicProfile& f,
                                            std::span<const double> constants,
                                            std::span<const double> init,
                                            const RiccatiOptions& opt = {},
                                            RiccatiDiagnostics* diag = nullptr) {
  const std::size_t m = constants.size();
  if (init.size() != m) throw ParameterDomainError("init and constants differ in size");
  const double p = f.period();
  std::vector<double> b0(init.begin(), init.end());
  RiccatiDiagnostics local;
  local.iterations.assign(m, 0);
  local.shooting_residual.assign(m, 0.0);
  local.doubling_change.assign(m, 0.0);

  int steps = opt.min_steps;
  for (std::size_t i = 0; i < m; ++i) {
    auto q = [&f, a = constants[i]](double t) { return f(t) + a; };
    int n = opt.min_steps;
    int its = 0;
    double res = 0.0;
    double b = detail::shoot_periodic(q, p, b0[i], n, opt, &its, &res);
    double integral = detail::integrate_riccati(q, p, b, n, opt.blowup).integral;
    for (;;) {
      if (2 * n > opt.max_steps)
        throw ConvergenceError("step doubling did not settle the period integral", integral);
      const double b2 = detail::shoot_periodic(q, p, b, 2 * n, opt, &its, &res);
      const double i2 = detail::integrate_riccati(q, p, b2, 2 * n, opt.blowup).integral;
      const double change = std::abs(i2 - integral);
      b = b2;
      integral = i2;
      n *= 2;
      if (change < opt.integral_tolerance) {
        local.doubling_change[i] = change;
        break;
      }
    }
    b0[i] = b;
    local.iterations[i] = its;
    local.shooting_residual[i] = res;
    steps = std::max(steps, n);
  }

  std::vector<std::vector<double>> values(m), derivs(m);
  for (std::size_t i = 0; i < m; ++i) {
    auto q = [&f, a = constants[i]](double t) { return f(t) + a; };
    if (steps != opt.min_steps) {
      int its = 0;
      double res = 0.0;
      b0[i] = detail::shoot_periodic(q, p, b0[i], steps, opt, &its, &res);
      local.shooting_residual[i] = res;
    }
    detail::integrate_riccati(q, p, b0[i], steps, opt.blowup, &values[i]);
    for (int k = 0; k <= steps; ++k) {
      const double t = p * k / steps;
      derivs[i].push_back(q(t) - values[i][k] * values[i][k]);
    }
  }
  local.steps = steps;
  if (diag) *diag = std::move(local);
  return DiagonalCurve(p, std::move(values), std::move(derivs));
}

inline DiagonalCurve solve_periodic_riccati(const PeriodicProfile& f, const TracelessDiag& A,
                                            std::span<const double> init,
                                            const RiccatiOptions& opt = {},
                                            RiccatiDiagnostics* diag = nullptr) {
  return solve_periodic_riccati(f, std::span<const double>(A.entries()), init, opt, diag);
}

/// exp(-int_0^p b_i) in channel order.
inline std::vector<double> channel_multipliers(const DiagonalCurve& B) {
  std::vector<double> out;
  for (int i = 0; i < B.channels(); ++i) out.push_back(std::exp(-B.period_integral(i)));
  return out;
}

inline Spectrum spectrum_of(const DiagonalCurve& B) { return Spectrum(channel_multipliers(B)); }

/// Max over grid nodes of |b' + b^2 - f - a| with b' from a periodic
/// fourth-order central difference of the samples (independent of the stored
/// derivative samples).
inline double riccati_residual(const DiagonalCurve& B, const PeriodicProfile& f,
                               std::span<const double> constants) {
  const int n = B.steps();
  const double h = B.period() / n;
  double worst = 0.0;
  for (int i = 0; i < B.channels(); ++i) {
    const auto& v = B.samples(i);
    auto at = [&](int k) { return v[((k % n) + n) % n]; };
    for (int k = 0; k < n; ++k) {
      const double d = (at(k - 2) - 8 * at(k - 1) + 8 * at(k + 1) - at(k + 2)) / (12 * h);
      const double t = B.node(k);
      worst = std::max(worst, std::abs(d + v[k] * v[k] - f(t) - constants[i]));
    }
  }
  return worst;
}

struct CalibrationOptions {
  double spectrum_tolerance = 1e-9;
  double log_tolerance = 1e-12;  ///< internal Newton target on int b
  int max_iterations = 50;
  double fd_step = 1e-6;
  RiccatiOptions riccati;
};

struct SpectralSolution {
  PeriodicProfile f{1.0, 0.0};
  TracelessDiag A;
  DiagonalCurve B;
  Spectrum target;
  Spectrum achieved;
  std::vector<double> multipliers;  ///< channel order, aligned with A
  std::vector<double> init;         ///< shooting start b(0) that reproduces B
  std::vector<double> history;      ///< max |int b - target| per Newton iteration
  int iterations = 0;
  int riccati_steps = 0;
  double spectrum_error = 0.0;      ///< max |achieved - target|
  double periodicity_defect = 0.0;
  double ode_residual = 0.0;
};

/// Newton over the m constants f + E (traceless E plus the mean of f). The
/// composite map is diagonal in these constants: channel i depends only on
/// kappa_i = mean(f) + E_i, with d(int b_i)/d kappa_i = p / (2 c_i) at the
/// seed. That analytic value starts the iteration; later steps use central
/// differences. The zero-mean part of f is kept fixed.
inline SpectralSolution calibrate(const PeriodicProfile& f, const Spectrum& target,
                                  const ConstantSeed& seed, const CalibrationOptions& opt = {}) {
  if (f.is_constant()) throw ParameterDomainError("f must be a nonconstant function");
  if (!target.nondegenerate())
    throw DegenerateSpectrumError("target spectrum has all |log lambda| equal");
  const std::size_t m = target.size();
  if (seed.c.size() != m) throw ParameterDomainError("seed and target differ in size");
  const double p = f.period();
  const PeriodicProfile wave = f.with_mean(0.0);

  std::vector<double> goal, kappa, b0 = seed.c;
  for (std::size_t i = 0; i < m; ++i) {
    goal.push_back(-std::log(target[i]));
    kappa.push_back(f.mean() + seed.A[i]);
  }

  RiccatiOptions fixed = opt.riccati;
  int steps = 0;
  std::vector<double> history;
  auto channel_integral = [&](double k, double start, double* periodic_b0) {
    auto q = [&wave, k](double t) { return wave(t) + k; };
    const double b = detail::shoot_periodic(q, p, start, steps, fixed, nullptr, nullptr);
    if (periodic_b0) *periodic_b0 = b;
    return detail::integrate_riccati(q, p, b, steps, fixed.blowup).integral;
  };

  try {
    // Fix the grid once at the starting constants.
    RiccatiDiagnostics d0;
    const DiagonalCurve start = solve_periodic_riccati(wave, kappa, b0, opt.riccati, &d0);
    steps = d0.steps;
    for (std::size_t i = 0; i < m; ++i) b0[i] = start.sample(i, 0);

    std::vector<double> integral(m), residual(m), slope(m);
    for (std::size_t i = 0; i < m; ++i) {
      integral[i] = channel_integral(kappa[i], b0[i], &b0[i]);
      residual[i] = integral[i] - goal[i];
      slope[i] = p / (2.0 * seed.c[i]);
    }
    int it = 0;
    for (;; ++it) {
      double worst = 0.0;
      for (double r : residual) worst = std::max(worst, std::abs(r));
      history.push_back(worst);
      if (worst < opt.log_tolerance) break;
      if (it >= opt.max_iterations)
        throw CalibrationError("calibration Newton did not converge", history);
      for (std::size_t i = 0; i < m; ++i) {
        if (std::abs(residual[i]) < opt.log_tolerance) continue;
        if (it > 0) {
          const double hi = channel_integral(kappa[i] + opt.fd_step, b0[i], nullptr);
          const double lo = channel_integral(kappa[i] - opt.fd_step, b0[i], nullptr);
          slope[i] = (hi - lo) / (2.0 * opt.fd_step);
        }
        if (slope[i] == 0.0 || !std::isfinite(slope[i]))
          throw CalibrationError("calibration Jacobian is singular", history);
        const double step = -residual[i] / slope[i];
        double lambda = 1.0;
        bool accepted = false;
        for (int halving = 0; halving < 30; ++halving, lambda *= 0.5) {
          double trial_b0 = b0[i];
          const double trial = channel_integral(kappa[i] + lambda * step, b0[i], &trial_b0);
          if (std::abs(trial - goal[i]) < std::abs(residual[i])) {
            kappa[i] += lambda * step;
            b0[i] = trial_b0;
            integral[i] = trial;
            residual[i] = trial - goal[i];
            accepted = true;
            break;
          }
        }
        if (!accepted) throw CalibrationError("calibration Newton stagnated", history);
      }
    }

    SpectralSolution sol;
    const double mean = std::accumulate(kappa.begin(), kappa.end(), 0.0) / m;
    std::vector<double> a;
    for (double k : kappa) a.push_back(k - mean);
    const double drift = TracelessDiag::trace(a) / static_cast<double>(m);
    for (double& ai : a) ai -= drift;
    sol.A = TracelessDiag(a);
    if (!sol.A.is_nonzero()) throw DegenerateSpectrumError("calibrated A vanishes");
    sol.f = f.with_mean(mean);
    RiccatiDiagnostics diag;
    sol.init = b0;
    sol.B = solve_periodic_riccati(sol.f, sol.A, b0, opt.riccati, &diag);
    sol.riccati_steps = diag.steps;
    sol.target = target;
    sol.multipliers = channel_multipliers(sol.B);
    sol.achieved = Spectrum(sol.multipliers);
    sol.history = std::move(history);
    sol.iterations = it;
    for (std::size_t i = 0; i < m; ++i) {
      sol.spectrum_error =
          std::max(sol.spectrum_error, std::abs(sol.multipliers[i] - target[i]));
      sol.periodicity_defect = std::max(sol.periodicity_defect, sol.B.periodicity_defect(i));
    }
    sol.ode_residual = riccati_residual(sol.B, sol.f, sol.A.entries());
    if (!(sol.spectrum_error < opt.spectrum_tolerance))
      throw CalibrationError("achieved spectrum misses target by " +
                                 std::to_string(sol.spectrum_error),
                             sol.history);
    return sol;
  } catch (const BlowUpError& e) {
    throw BasinError(std::string("profile outside the calibration basin (") + e.what() +
                     "); reduce the perturbation amplitude");
  } catch (const ConvergenceError& e) {
    throw BasinError(std::string("profile outside the calibration basin (") + e.what() +
                     "); reduce the perturbation amplitude");
  }
}

/// Necessary conditions on any solution: lambda_i in {lambda_j, 1/lambda_j}
/// forces a_i = a_j, and the moduli |log lambda_i| are not all equal.
inline Report necessity_check(std::span<const double> a, const DiagonalCurve& B,
                              double pair_tolerance = 1e-8, double a_tolerance = 1e-7) {
  Report r("necessity");
  const auto lam = channel_multipliers(B);
  const std::size_t m = lam.size();
  int pairs = 0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) {
      const bool equal = std::abs(lam[i] - lam[j]) <= pair_tolerance * std::max(lam[i], lam[j]);
      const bool reciprocal = std::abs(lam[i] * lam[j] - 1.0) <= pair_tolerance;
      if (!equal && !reciprocal) continue;
      ++pairs;
      r.below("paired channels share A entry (" + std::to_string(i) + "," + std::to_string(j) +
                  (equal ? ", equal)" : ", reciprocal)"),
              std::abs(a[i] - a[j]), a_tolerance);
    }
  double lo = INFINITY, hi = 0.0;
  for (double l : lam) {
    lo = std::min(lo, std::abs(std::log(l)));
    hi = std::max(hi, std::abs(std::log(l)));
  }
  r.above("|log lambda| moduli not all equal", hi - lo, 1e-12,
          pairs == 0 ? "no equal or reciprocal pairs" : "");
  return r;
}

inline Report necessity_check(const SpectralSolution& s) {
  return necessity_check(s.A.entries(), s.B);
}

}  // namespace ecs
