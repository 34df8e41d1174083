#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ecs/error.hpp"
#include "ecs/periodic_profile.hpp"
#include "ecs/spectral_solver.hpp"

namespace ecs {

/// Data of one model manifold R^2 x V: dimension n, period p, the signs of the
/// diagonal inner product on V (m = n - 2 of them), f, A, and optionally the
/// periodic Riccati curve B.
class ModelData {
 public:
  ModelData(int n, double p, std::vector<int> signature, PeriodicProfile f, TracelessDiag A,
            std::optional<DiagonalCurve> B = std::nullopt)
      : ModelData(n, p, std::move(signature), std::move(f), std::move(A), std::move(B), false) {}

  /// Same fields without the n >= 5, nonconstant f and nonzero A gates. Used for
  /// closed-form oracles (constant coefficients, free particle).
  static ModelData relaxed(int n, double p, std::vector<int> signature, PeriodicProfile f,
                           std::vector<double> a, std::optional<DiagonalCurve> B = std::nullopt) {
    ModelData d(n, p, std::move(signature), std::move(f), TracelessDiag(), std::move(B), true);
    d.a_ = std::move(a);
    d.check_shapes();
    return d;
  }

  int n() const { return n_; }
  int m() const { return n_ - 2; }
  double period() const { return p_; }
  const std::vector<int>& signature() const { return signature_; }
  const PeriodicProfile& f() const { return f_; }
  const std::vector<double>& a() const { return a_; }
  const std::optional<DiagonalCurve>& B() const { return B_; }
  bool has_B() const { return B_.has_value(); }
  const DiagonalCurve& curve() const {
    if (!B_) throw DomainError("model has no Riccati curve");
    return *B_;
  }

  ModelData with_B(DiagonalCurve B) const {
    ModelData d = *this;
    d.B_ = std::move(B);
    d.check_shapes();
    return d;
  }

  double eps(int i) const { return signature_[i]; }

  /// <x, y> = sum eps_i x_i y_i
  double inner(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
    double s = 0.0;
    for (int i = 0; i < m(); ++i) s += signature_[i] * x[i] * y[i];
    return s;
  }

  /// f(t) + a_i, the Hill coefficient of channel i.
  double potential(int i, double t) const { return f_(t) + a_[i]; }

  /// kappa(t, v) = f(t) <v, v> + <A v, v>
  double kappa(double t, const Eigen::VectorXd& v) const {
    const double ft = f_(t);
    double s = 0.0;
    for (int i = 0; i < m(); ++i) s += signature_[i] * (ft + a_[i]) * v[i] * v[i];
    return s;
  }

  /// "++-" style signature string.
  std::string signature_string() const {
    std::string s;
    for (int e : signature_) s += e > 0 ? '+' : '-';
    return s;
  }

  static std::vector<int> parse_signature(const std::string& s) {
    std::vector<int> out;
    for (char c : s) {
      if (c == '+') out.push_back(1);
      else if (c == '-') out.push_back(-1);
      else throw InputError("signature must consist of '+' and '-', got '" + s + "'");
    }
    return out;
  }

 private:
  ModelData(int n, double p, std::vector<int> signature, PeriodicProfile f, TracelessDiag A,
            std::optional<DiagonalCurve> B, bool relaxed)
      : n_(n), p_(p), signature_(std::move(signature)), f_(std::move(f)), a_(A.entries()),
        B_(std::move(B)) {
    if (relaxed) return;
    if (n_ < 5) throw ParameterDomainError("construction requires n >= 5, got n = " + std::to_string(n_));
    if (f_.is_constant()) throw ParameterDomainError("f must be nonconstant");
    if (!A.is_nonzero()) throw ParameterDomainError("A must be nonzero");
    check_shapes();
  }

  void check_shapes() const {
    if (n_ < 3) throw ParameterDomainError("n must be at least 3");
    if (!(p_ > 0.0)) throw ParameterDomainError("period must be positive");
    if (static_cast<int>(signature_.size()) != m())
      throw ParameterDomainError("signature length must be n - 2 = " + std::to_string(m()));
    for (int e : signature_)
      if (e != 1 && e != -1) throw ParameterDomainError("signature entries must be +1 or -1");
    if (static_cast<int>(a_.size()) != m())
      throw ParameterDomainError("A must have n - 2 diagonal entries");
    if (f_.period() != p_) throw ParameterDomainError("f period differs from model period");
    if (B_) {
      if (B_->channels() != m()) throw ParameterDomainError("B must have n - 2 channels");
      if (std::abs(B_->period() - p_) > 1e-15 * p_)
        throw ParameterDomainError("B period differs from model period");
    }
  }

  int n_;
  double p_;
  std::vector<int> signature_;
  PeriodicProfile f_;
  std::vector<double> a_;
  std::optional<DiagonalCurve> B_;
};

}  // namespace ecs
