#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include "ecs/error.hpp"

namespace ecs {

struct FourierTerm {
  int harmonic = 1;  ///< frequency index k >= 1, angular frequency 2 pi k / p
  double cos_amplitude = 0.0;
  double sin_amplitude = 0.0;

  friend bool operator==(const FourierTerm&, const FourierTerm&) = default;
};

/// Smooth p-periodic function given by a finite Fourier series
///   f(t) = mean + sum_k a_k cos(2 pi k t / p) + b_k sin(2 pi k t / p).
class PeriodicProfile {
 public:
  PeriodicProfile(double period, double mean, std::vector<FourierTerm> terms = {})
      : period_(period), mean_(mean), terms_(std::move(terms)) {
    if (!(period_ > 0.0) || !std::isfinite(period_))
      throw ParameterDomainError("period must be positive");
    if (!std::isfinite(mean_)) throw ParameterDomainError("mean must be finite");
    for (const auto& t : terms_) {
      if (t.harmonic < 1) throw ParameterDomainError("Fourier harmonic must be >= 1");
      if (!std::isfinite(t.cos_amplitude) || !std::isfinite(t.sin_amplitude))
        throw ParameterDomainError("Fourier amplitudes must be finite");
    }
  }

  static PeriodicProfile constant(double period, double value) {
    return PeriodicProfile(period, value);
  }

  /// h + amplitude * cos(2 pi t / p)
  static PeriodicProfile cosine(double period, double mean, double amplitude) {
    return PeriodicProfile(period, mean, {{1, amplitude, 0.0}});
  }

  double period() const { return period_; }
  double mean() const { return mean_; }
  const std::vector<FourierTerm>& terms() const { return terms_; }

  bool is_constant() const {
    for (const auto& t : terms_)
      if (t.cos_amplitude != 0.0 || t.sin_amplitude != 0.0) return false;
    return true;
  }

  double operator()(double t) const { return mean_ + sum(t, 0); }
  double derivative(double t) const { return sum(t, 1); }
  double second_derivative(double t) const { return sum(t, 2); }
  double integral_over_period() const { return mean_ * period_; }

  PeriodicProfile with_mean(double mean) const {
    return PeriodicProfile(period_, mean, terms_);
  }

  /// this + scale * other; both must share the period.
  PeriodicProfile plus(const PeriodicProfile& other, double scale = 1.0) const {
    if (other.period_ != period_) throw DomainError("profiles with different periods");
    std::vector<FourierTerm> out = terms_;
    for (const auto& t : other.terms_) {
      auto it = std::find_if(out.begin(), out.end(),
                             [&](const FourierTerm& o) { return o.harmonic == t.harmonic; });
      if (it == out.end()) {
        out.push_back({t.harmonic, scale * t.cos_amplitude, scale * t.sin_amplitude});
      } else {
        it->cos_amplitude += scale * t.cos_amplitude;
        it->sin_amplitude += scale * t.sin_amplitude;
      }
    }
    std::sort(out.begin(), out.end(),
              [](const FourierTerm& a, const FourierTerm& b) { return a.harmonic < b.harmonic; });
    return PeriodicProfile(period_, mean_ + scale * other.mean_, std::move(out));
  }

  /// L2 distance over one period (Parseval).
  double l2_distance(const PeriodicProfile& other) const {
    const PeriodicProfile d = plus(other, -1.0);
    double s = d.mean_ * d.mean_ * period_;
    for (const auto& t : d.terms_)
      s += 0.5 * period_ * (t.cos_amplitude * t.cos_amplitude + t.sin_amplitude * t.sin_amplitude);
    return std::sqrt(s);
  }

  friend bool operator==(const PeriodicProfile&, const PeriodicProfile&) = default;

 private:
  double sum(double t, int order) const {
    const double w = 2.0 * std::numbers::pi / period_;
    double s = 0.0;
    for (const auto& term : terms_) {
      const double k = w * term.harmonic;
      const double c = std::cos(k * t), sn = std::sin(k * t);
      switch (order) {
        case 0: s += term.cos_amplitude * c + term.sin_amplitude * sn; break;
        case 1: s += k * (-term.cos_amplitude * sn + term.sin_amplitude * c); break;
        default: s += -k * k * (term.cos_amplitude * c + term.sin_amplitude * sn); break;
      }
    }
    return s;
  }

  double period_;
  double mean_;
  std::vector<FourierTerm> terms_;
};

}  // namespace ecs
