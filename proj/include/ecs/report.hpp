#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace ecs {

/// How a measured value is compared against its tolerance.
enum class Relation { Below, Above, Holds };

inline const char* to_string(Relation r) {
  switch (r) {
    case Relation::Below: return "<";
    case Relation::Above: return ">";
    case Relation::Holds: return "holds";
  }
  return "?";
}

/// One verification entry: the measured extremum, the threshold it is held
/// to, and the verdict.
struct Check {
  std::string name;
  Relation relation = Relation::Holds;
  double tolerance = 0.0;
  double measured = 0.0;
  bool pass = false;
  std::string note;
};

/// An ordered list of checks. Merging is associative (concatenation).
class Report {
 public:
  Report() = default;
  explicit Report(std::string section) : section_(std::move(section)) {}

  const std::string& section() const { return section_; }
  const std::vector<Check>& checks() const { return checks_; }

  /// Records `measured < tolerance`. NaN fails.
  Check& below(std::string name, double measured, double tolerance,
               std::string note = {}) {
    bool ok = std::isfinite(measured) && measured < tolerance;
    return add({std::move(name), Relation::Below, tolerance, measured, ok,
                std::move(note)});
  }

  /// Records `measured > tolerance`.
  Check& above(std::string name, double measured, double tolerance,
               std::string note = {}) {
    bool ok = std::isfinite(measured) && measured > tolerance;
    return add({std::move(name), Relation::Above, tolerance, measured, ok,
                std::move(note)});
  }

  Check& holds(std::string name, bool ok, std::string note = {}) {
    return add({std::move(name), Relation::Holds, 0.0, ok ? 1.0 : 0.0, ok,
                std::move(note)});
  }

  Check& add(Check c) {
    checks_.push_back(std::move(c));
    return checks_.back();
  }

  void merge(const Report& other) {
    checks_.insert(checks_.end(), other.checks_.begin(), other.checks_.end());
  }

  bool passed() const {
    return std::all_of(checks_.begin(), checks_.end(),
                       [](const Check& c) { return c.pass; });
  }

  const Check* find(const std::string& name) const {
    for (const auto& c : checks_)
      if (c.name == name) return &c;
    return nullptr;
  }

  std::vector<const Check*> failures() const {
    std::vector<const Check*> out;
    for (const auto& c : checks_)
      if (!c.pass) out.push_back(&c);
    return out;
  }

 private:
  std::string section_;
  std::vector<Check> checks_;
};

}  // namespace ecs
