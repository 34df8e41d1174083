#pragma once

// Certificate file format (one JSON document plus a CSV sidecar holding the
// B samples), re-verification of a stored certificate, and parameter sweeps.

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

#include "ecs/error.hpp"
#include "ecs/report.hpp"
#include "ecs/verification.hpp"

namespace ecs {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kGenerator = "ecs 1.0";

struct SectionRecord {
  std::string name;
  bool pass = false;
  std::vector<Check> checks;
};

struct LatticeRecord {
  std::vector<double> roots;
  std::vector<std::vector<double>> S;
  std::vector<std::vector<std::int64_t>> T_integer;
  std::vector<std::vector<double>> T_measured;
  double condition = 0.0;
  double integrality_defect = 0.0;
};

struct Certificate {
  int schema_version = kSchemaVersion;
  Config config;

  // construction inputs
  int n = 5;
  double p = 1.0;
  double theta = 1.0;
  std::string signature;
  PolynomialSpec polynomial;
  std::vector<std::int64_t> coefficients;
  std::vector<double> target;
  double amplitude = 0.05;
  PeriodicProfile f_initial{1.0, 0.0};

  // solved artifacts
  PeriodicProfile f{1.0, 0.0};
  std::vector<double> A;
  std::vector<double> init;
  std::vector<double> multipliers;
  std::vector<double> achieved;
  std::vector<double> history;
  double spectrum_error = 0.0;
  double periodicity_defect = 0.0;
  double ode_residual = 0.0;
  int iterations = 0;
  int riccati_steps = 0;
  std::string B_file;  ///< sidecar CSV, relative to the certificate
  int B_steps = 0;
  LatticeRecord lattice;

  std::vector<SectionRecord> sections;
  bool pass = false;

  const SectionRecord* section(const std::string& name) const {
    for (const auto& s : sections)
      if (s.name == name) return &s;
    return nullptr;
  }
};

// --------------------------------------------------------------- assembling

inline SectionRecord record_of(const Report& r) { return {r.section(), r.passed(), r.checks()}; }

inline std::vector<std::vector<double>> rows_of(const Eigen::MatrixXd& M) {
  std::vector<std::vector<double>> out(M.rows());
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    for (Eigen::Index j = 0; j < M.cols(); ++j) out[i].push_back(M(i, j));
  return out;
}

inline Certificate make_certificate(const Construction& c, const std::vector<Report>& reports) {
  Certificate cert;
  const BuildInputs& in = c.inputs;
  cert.config = in.config;
  cert.n = in.n;
  cert.p = in.p;
  cert.theta = in.theta;
  cert.signature = c.model().signature_string();
  cert.polynomial = in.polynomial;
  cert.coefficients = c.P.coefficients();
  cert.target = c.target.values();
  cert.amplitude = in.amplitude;
  cert.f_initial = c.f_initial;
  const SpectralSolution& s = c.solution;
  cert.f = s.f;
  cert.A = s.A.entries();
  cert.init = s.init;
  cert.multipliers = s.multipliers;
  cert.achieved = s.achieved.values();
  cert.history = s.history;
  cert.spectrum_error = s.spectrum_error;
  cert.periodicity_defect = s.periodicity_defect;
  cert.ode_residual = s.ode_residual;
  cert.iterations = s.iterations;
  cert.riccati_steps = s.riccati_steps;
  cert.B_steps = s.B.steps();
  const LatticeBasis& L = c.lattice();
  cert.lattice.roots = L.roots;
  cert.lattice.S = rows_of(L.S);
  cert.lattice.T_integer.resize(L.C.rows());
  for (Eigen::Index i = 0; i < L.C.rows(); ++i)
    for (Eigen::Index j = 0; j < L.C.cols(); ++j) cert.lattice.T_integer[i].push_back(L.C(i, j));
  cert.lattice.T_measured = rows_of(L.T_lattice);
  cert.lattice.condition = L.condition;
  cert.lattice.integrality_defect = L.integrality_defect;
  cert.pass = true;
  for (const auto& r : reports) {
    cert.sections.push_back(record_of(r));
    cert.pass = cert.pass && r.passed();
  }
  return cert;
}

inline BuildInputs inputs_of(const Certificate& cert) {
  BuildInputs in;
  in.n = cert.n;
  in.p = cert.p;
  in.theta = cert.theta;
  in.signature = cert.signature;
  in.polynomial = cert.polynomial;
  in.amplitude = cert.amplitude;
  in.profile = cert.f_initial;
  in.config = cert.config;
  return in;
}

/// Re-solves B from the stored (f, A, b(0)) and rebuilds the lattice.
inline Construction rebuild(const Certificate& cert) {
  const GlzPolynomial P(cert.coefficients);
  return reconstruct(inputs_of(cert), P, Spectrum(cert.target), cert.f_initial, cert.f,
                     TracelessDiag(cert.A), cert.init);
}

// ----------------------------------------------------------------------- JSON

namespace detail {

inline Json number(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

inline Json numbers(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(number(x));
  return a;
}

inline Json matrix(const std::vector<std::vector<double>>& rows) {
  Json a = Json::array();
  for (const auto& r : rows) a.push_back(numbers(r));
  return a;
}

inline Json profile_json(const PeriodicProfile& f) {
  Json terms = Json::array();
  for (const auto& t : f.terms())
    terms.push_back({{"harmonic", t.harmonic}, {"cos", t.cos_amplitude}, {"sin", t.sin_amplitude}});
  return {{"period", f.period()}, {"mean", f.mean()}, {"terms", terms}};
}

/// Typed access with the JSON path in every error message.
class Reader {
 public:
  Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("expected an object");
  }

  const Json& raw(const std::string& key) const {
    if (!j_.contains(key)) throw SchemaError("missing field " + path_ + "." + key);
    return j_.at(key);
  }
  Reader object(const std::string& key) const { return Reader(raw(key), path_ + "." + key); }

  double real(const std::string& key) const { return as_real(raw(key), path_ + "." + key); }
  bool boolean(const std::string& key) const {
    const Json& v = raw(key);
    if (!v.is_boolean()) throw SchemaError(path_ + "." + key + ": expected a boolean");
    return v.get<bool>();
  }
  template <class Int = int>
  Int integer(const std::string& key) const {
    return as_integer<Int>(raw(key), path_ + "." + key);
  }
  std::string string(const std::string& key) const {
    const Json& v = raw(key);
    if (!v.is_string()) throw SchemaError(path_ + "." + key + ": expected a string");
    return v.get<std::string>();
  }
  std::vector<double> reals(const std::string& key) const {
    return real_array(raw(key), path_ + "." + key);
  }
  std::vector<std::vector<double>> real_matrix(const std::string& key) const {
    const Json& v = array(key);
    std::vector<std::vector<double>> out;
    for (std::size_t i = 0; i < v.size(); ++i)
      out.push_back(real_array(v[i], path_ + "." + key + "[" + std::to_string(i) + "]"));
    return out;
  }
  template <class Int>
  std::vector<Int> integers(const std::string& key) const {
    const Json& v = array(key);
    std::vector<Int> out;
    for (std::size_t i = 0; i < v.size(); ++i)
      out.push_back(as_integer<Int>(v[i], path_ + "." + key + "[" + std::to_string(i) + "]"));
    return out;
  }
  const Json& array(const std::string& key) const {
    const Json& v = raw(key);
    if (!v.is_array()) throw SchemaError(path_ + "." + key + ": expected an array");
    return v;
  }
  const std::string& path() const { return path_; }

  static double as_real(const Json& v, const std::string& where) {
    if (v.is_null()) return std::numeric_limits<double>::quiet_NaN();
    if (!v.is_number()) throw SchemaError(where + ": expected a number");
    return v.get<double>();
  }
  template <class Int>
  static Int as_integer(const Json& v, const std::string& where) {
    if (!v.is_number_integer()) throw SchemaError(where + ": expected an integer");
    return v.get<Int>();
  }
  static std::vector<double> real_array(const Json& v, const std::string& where) {
    if (!v.is_array()) throw SchemaError(where + ": expected an array");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i)
      out.push_back(as_real(v[i], where + "[" + std::to_string(i) + "]"));
    return out;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw SchemaError(path_ + ": " + what); }

  const Json& j_;
  std::string path_;
};

inline PeriodicProfile read_profile(const Reader& r) {
  std::vector<FourierTerm> terms;
  const Json& a = r.array("terms");
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Reader t(a[i], r.path() + ".terms[" + std::to_string(i) + "]");
    terms.push_back({t.integer("harmonic"), t.real("cos"), t.real("sin")});
  }
  try {
    return PeriodicProfile(r.real("period"), r.real("mean"), std::move(terms));
  } catch (const ParameterDomainError& e) {
    throw SchemaError(r.path() + ": " + e.what());
  }
}

inline Relation relation_from(const std::string& s, const std::string& where) {
  if (s == "<") return Relation::Below;
  if (s == ">") return Relation::Above;
  if (s == "holds") return Relation::Holds;
  throw SchemaError(where + ": unknown relation '" + s + "'");
}

}  // namespace detail

inline Json config_json(const Config& c) {
  const Tolerances& t = c.tol;
  const CurvatureTolerances& k = t.curvature;
  const SampleSizes& s = c.samples;
  return {
      {"seed", c.seed},
      {"solution_steps", c.solution_steps},
      {"tolerances",
       {{"spectrum", t.spectrum},
        {"reintegration", t.reintegration},
        {"periodicity", t.periodicity},
        {"ode_residual", t.ode_residual},
        {"fixed_point", t.fixed_point},
        {"trace", t.trace},
        {"a_floor", t.a_floor},
        {"root_residual", t.root_residual},
        {"monodromy_det", t.monodromy_det},
        {"omega_spread", t.omega_spread},
        {"omega_on_L", t.omega_on_L},
        {"embedding", t.embedding},
        {"translation", t.translation},
        {"charpoly", t.charpoly},
        {"integrality", t.integrality},
        {"metric_inverse", t.metric_inverse},
        {"christoffel_fd", t.christoffel_fd},
        {"metric_compatibility", t.metric_compatibility},
        {"curvature",
         {{"ricci_relative", k.ricci_relative},
          {"ricci_other", k.ricci_other},
          {"scalar", k.scalar},
          {"weyl_floor", k.weyl_floor},
          {"weyl_parallel_ratio", k.weyl_parallel_ratio},
          {"ricci_gradient_floor", k.ricci_gradient_floor},
          {"fdot_threshold", k.fdot_threshold},
          {"weyl_structure", k.weyl_structure},
          {"richardson", k.richardson},
          {"step", k.step}}},
        {"olszak", t.olszak},
        {"geodesic_agreement", t.geodesic_agreement},
        {"energy_drift", t.energy_drift},
        {"homogeneity", t.homogeneity},
        {"group", t.group},
        {"isometry", t.isometry},
        {"orbit", t.orbit},
        {"separation", t.separation},
        {"commutator", t.commutator}}},
      {"samples",
       {{"curvature_points", s.curvature_points},
        {"christoffel_points", s.christoffel_points},
        {"omega_pairs", s.omega_pairs},
        {"group_instances", s.group_instances},
        {"isometry_points", s.isometry_points},
        {"canonical_points", s.canonical_points},
        {"chart_box_periods", s.chart_box_periods},
        {"geodesics", s.geodesics},
        {"geodesic_span_periods", s.geodesic_span_periods},
        {"geodesic_samples", s.geodesic_samples},
        {"freeness_trials", s.freeness_trials},
        {"discontinuity_samples", s.discontinuity_samples},
        {"word_length", s.word_length},
        {"kmax", s.kmax},
        {"torus_times", s.torus_times}}},
      {"riccati",
       {{"min_steps", c.riccati.min_steps},
        {"max_steps", c.riccati.max_steps},
        {"integral_tolerance", c.riccati.integral_tolerance},
        {"shooting_tolerance", c.riccati.shooting_tolerance},
        {"max_iterations", c.riccati.max_iterations},
        {"blowup", c.riccati.blowup}}},
      {"calibration",
       {{"spectrum_tolerance", c.calibration.spectrum_tolerance},
        {"log_tolerance", c.calibration.log_tolerance},
        {"max_iterations", c.calibration.max_iterations},
        {"fd_step", c.calibration.fd_step}}}};
}

inline Config config_from(const detail::Reader& r) {
  Config c;
  c.seed = r.integer<std::uint64_t>("seed");
  c.solution_steps = r.integer("solution_steps");
  const auto t = r.object("tolerances");
  Tolerances& o = c.tol;
  o.spectrum = t.real("spectrum");
  o.reintegration = t.real("reintegration");
  o.periodicity = t.real("periodicity");
  o.ode_residual = t.real("ode_residual");
  o.fixed_point = t.real("fixed_point");
  o.trace = t.real("trace");
  o.a_floor = t.real("a_floor");
  o.root_residual = t.real("root_residual");
  o.monodromy_det = t.real("monodromy_det");
  o.omega_spread = t.real("omega_spread");
  o.omega_on_L = t.real("omega_on_L");
  o.embedding = t.real("embedding");
  o.translation = t.real("translation");
  o.charpoly = t.real("charpoly");
  o.integrality = t.real("integrality");
  o.metric_inverse = t.real("metric_inverse");
  o.christoffel_fd = t.real("christoffel_fd");
  o.metric_compatibility = t.real("metric_compatibility");
  const auto k = t.object("curvature");
  o.curvature.ricci_relative = k.real("ricci_relative");
  o.curvature.ricci_other = k.real("ricci_other");
  o.curvature.scalar = k.real("scalar");
  o.curvature.weyl_floor = k.real("weyl_floor");
  o.curvature.weyl_parallel_ratio = k.real("weyl_parallel_ratio");
  o.curvature.ricci_gradient_floor = k.real("ricci_gradient_floor");
  o.curvature.fdot_threshold = k.real("fdot_threshold");
  o.curvature.weyl_structure = k.real("weyl_structure");
  o.curvature.richardson = k.real("richardson");
  o.curvature.step = k.real("step");
  o.olszak = t.real("olszak");
  o.geodesic_agreement = t.real("geodesic_agreement");
  o.energy_drift = t.real("energy_drift");
  o.homogeneity = t.real("homogeneity");
  o.group = t.real("group");
  o.isometry = t.real("isometry");
  o.orbit = t.real("orbit");
  o.separation = t.real("separation");
  o.commutator = t.real("commutator");
  const auto s = r.object("samples");
  SampleSizes& z = c.samples;
  z.curvature_points = s.integer("curvature_points");
  z.christoffel_points = s.integer("christoffel_points");
  z.omega_pairs = s.integer("omega_pairs");
  z.group_instances = s.integer("group_instances");
  z.isometry_points = s.integer("isometry_points");
  z.canonical_points = s.integer("canonical_points");
  z.chart_box_periods = s.real("chart_box_periods");
  z.geodesics = s.integer("geodesics");
  z.geodesic_span_periods = s.real("geodesic_span_periods");
  z.geodesic_samples = s.integer("geodesic_samples");
  z.freeness_trials = s.integer("freeness_trials");
  z.discontinuity_samples = s.integer("discontinuity_samples");
  z.word_length = s.integer("word_length");
  z.kmax = s.integer("kmax");
  z.torus_times = s.integer("torus_times");
  const auto q = r.object("riccati");
  c.riccati.min_steps = q.integer("min_steps");
  c.riccati.max_steps = q.integer("max_steps");
  c.riccati.integral_tolerance = q.real("integral_tolerance");
  c.riccati.shooting_tolerance = q.real("shooting_tolerance");
  c.riccati.max_iterations = q.integer("max_iterations");
  c.riccati.blowup = q.real("blowup");
  const auto a = r.object("calibration");
  c.calibration.spectrum_tolerance = a.real("spectrum_tolerance");
  c.calibration.log_tolerance = a.real("log_tolerance");
  c.calibration.max_iterations = a.integer("max_iterations");
  c.calibration.fd_step = a.real("fd_step");
  c.calibration.riccati = c.riccati;
  return c;
}

inline Json to_json(const Certificate& c) {
  Json poly = {{"family", c.polynomial.family},
               {"k", c.polynomial.k},
               {"l", c.polynomial.l},
               {"mid", c.polynomial.mid},
               {"coefficients", c.coefficients}};
  Json sections = Json::array();
  for (const auto& s : c.sections) {
    Json checks = Json::array();
    for (const auto& k : s.checks)
      checks.push_back({{"name", k.name},
                        {"relation", to_string(k.relation)},
                        {"tolerance", detail::number(k.tolerance)},
                        {"measured", detail::number(k.measured)},
                        {"pass", k.pass},
                        {"note", k.note}});
    sections.push_back({{"name", s.name}, {"pass", s.pass}, {"checks", checks}});
  }
  return {
      {"schema_version", c.schema_version},
      {"config", config_json(c.config)},
      {"construction",
       {{"n", c.n},
        {"p", c.p},
        {"theta", c.theta},
        {"signature", c.signature},
        {"polynomial", poly},
        {"target_spectrum", detail::numbers(c.target)},
        {"amplitude", c.amplitude},
        {"f_initial", detail::profile_json(c.f_initial)}}},
      {"solution",
       {{"f", detail::profile_json(c.f)},
        {"A", detail::numbers(c.A)},
        {"b0", detail::numbers(c.init)},
        {"multipliers", detail::numbers(c.multipliers)},
        {"achieved_spectrum", detail::numbers(c.achieved)},
        {"spectrum_error", detail::number(c.spectrum_error)},
        {"periodicity_defect", detail::number(c.periodicity_defect)},
        {"ode_residual", detail::number(c.ode_residual)},
        {"B", {{"file", c.B_file}, {"steps", c.B_steps}}}}},
      {"lattice",
       {{"roots", detail::numbers(c.lattice.roots)},
        {"S", detail::matrix(c.lattice.S)},
        {"T_integer", c.lattice.T_integer},
        {"T_measured", detail::matrix(c.lattice.T_measured)},
        {"condition", detail::number(c.lattice.condition)},
        {"integrality_defect", detail::number(c.lattice.integrality_defect)}}},
      {"verification", sections},
      {"provenance",
       {{"generator", kGenerator},
        {"seed", c.config.seed},
        {"step_policy",
         "Riccati grid doubled from riccati.min_steps until int b changes less than "
         "riccati.integral_tolerance; Hill tables on solution_steps intervals per period"},
        {"calibration_iterations", c.iterations},
        {"calibration_history", detail::numbers(c.history)},
        {"riccati_steps", c.riccati_steps},
        {"fundamental_domain", "[0,p) x [0,theta) x half-open lattice cell"}}},
      {"pass", c.pass}};
}

inline Certificate certificate_from_json(const Json& j) {
  const detail::Reader root(j, "$");
  Certificate c;
  c.schema_version = root.integer("schema_version");
  if (c.schema_version != kSchemaVersion)
    throw SchemaError("unsupported schema_version " + std::to_string(c.schema_version));
  c.config = config_from(root.object("config"));

  const auto in = root.object("construction");
  c.n = in.integer("n");
  c.p = in.real("p");
  c.theta = in.real("theta");
  c.signature = in.string("signature");
  const auto poly = in.object("polynomial");
  c.polynomial.family = poly.string("family");
  c.polynomial.k = poly.integer<long long>("k");
  c.polynomial.l = poly.integer<long long>("l");
  c.polynomial.mid = poly.integer<long long>("mid");
  c.coefficients = poly.integers<std::int64_t>("coefficients");
  c.polynomial.coefficients = c.polynomial.family == "explicit" ? c.coefficients
                                                                : std::vector<std::int64_t>{};
  c.target = in.reals("target_spectrum");
  c.amplitude = in.real("amplitude");
  c.f_initial = detail::read_profile(in.object("f_initial"));

  const auto sol = root.object("solution");
  c.f = detail::read_profile(sol.object("f"));
  c.A = sol.reals("A");
  c.init = sol.reals("b0");
  c.multipliers = sol.reals("multipliers");
  c.achieved = sol.reals("achieved_spectrum");
  c.spectrum_error = sol.real("spectrum_error");
  c.periodicity_defect = sol.real("periodicity_defect");
  c.ode_residual = sol.real("ode_residual");
  const auto b = sol.object("B");
  c.B_file = b.string("file");
  c.B_steps = b.integer("steps");

  const auto lat = root.object("lattice");
  c.lattice.roots = lat.reals("roots");
  c.lattice.S = lat.real_matrix("S");
  const Json& T = lat.array("T_integer");
  for (std::size_t i = 0; i < T.size(); ++i) {
    if (!T[i].is_array()) throw SchemaError("$.lattice.T_integer: expected rows");
    std::vector<std::int64_t> row;
    for (std::size_t k = 0; k < T[i].size(); ++k)
      row.push_back(detail::Reader::as_integer<std::int64_t>(T[i][k], "$.lattice.T_integer"));
    c.lattice.T_integer.push_back(std::move(row));
  }
  c.lattice.T_measured = lat.real_matrix("T_measured");
  c.lattice.condition = lat.real("condition");
  c.lattice.integrality_defect = lat.real("integrality_defect");

  const Json& secs = root.array("verification");
  for (std::size_t i = 0; i < secs.size(); ++i) {
    const detail::Reader s(secs[i], "$.verification[" + std::to_string(i) + "]");
    SectionRecord rec{s.string("name"), s.boolean("pass"), {}};
    const Json& checks = s.array("checks");
    for (std::size_t k = 0; k < checks.size(); ++k) {
      const detail::Reader ck(checks[k], s.path() + ".checks[" + std::to_string(k) + "]");
      rec.checks.push_back({ck.string("name"), detail::relation_from(ck.string("relation"), ck.path()),
                            ck.real("tolerance"), ck.real("measured"), ck.boolean("pass"),
                            ck.string("note")});
    }
    c.sections.push_back(std::move(rec));
  }
  const auto prov = root.object("provenance");
  c.iterations = prov.integer("calibration_iterations");
  c.history = prov.reals("calibration_history");
  c.riccati_steps = prov.integer("riccati_steps");
  c.pass = root.boolean("pass");

  const std::size_t m = c.n >= 3 ? static_cast<std::size_t>(c.n - 2) : 0;
  if (c.n < 3 || c.A.size() != m || c.init.size() != m || c.target.size() != m ||
      c.coefficients.size() != m + 1)
    throw SchemaError("array lengths inconsistent with n = " + std::to_string(c.n));
  return c;
}

inline std::string serialize(const Certificate& c) { return to_json(c).dump(2) + "\n"; }

inline Certificate parse_certificate(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(std::string("certificate is not valid JSON: ") + e.what());
  }
  return certificate_from_json(j);
}

// ------------------------------------------------------------------------ files

/// Writes `content` to a sibling temporary file and renames it over `path`.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw InputError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw InputError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void append_real(std::string& out, double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  out.append(buf, res.ptr);
}

/// CSV with header t,b_1..b_m,db_1..db_m and one row per grid node.
inline std::string curve_csv(const DiagonalCurve& B) {
  std::string out = "t";
  const int m = B.channels();
  for (int i = 1; i <= m; ++i) out += ",b_" + std::to_string(i);
  for (int i = 1; i <= m; ++i) out += ",db_" + std::to_string(i);
  out += '\n';
  for (int k = 0; k <= B.steps(); ++k) {
    append_real(out, B.node(k));
    for (int i = 0; i < m; ++i) {
      out += ',';
      append_real(out, B.sample(i, k));
    }
    for (int i = 0; i < m; ++i) {
      out += ',';
      append_real(out, B.sample_derivative(i, k));
    }
    out += '\n';
  }
  return out;
}

inline DiagonalCurve parse_curve_csv(const std::string& text, double period, int channels) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("B sidecar is empty");
  std::vector<std::vector<double>> v(channels), d(channels);
  int row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++row;
    std::vector<double> cells;
    const char* p = line.data();
    const char* end = p + line.size();
    while (p <= end) {
      double x = 0.0;
      const auto res = std::from_chars(p, end, x);
      if (res.ec != std::errc()) throw SchemaError("B sidecar row " + std::to_string(row) + ": bad number");
      cells.push_back(x);
      p = res.ptr;
      if (p == end) break;
      if (*p != ',') throw SchemaError("B sidecar row " + std::to_string(row) + ": expected ','");
      ++p;
    }
    if (static_cast<int>(cells.size()) != 1 + 2 * channels)
      throw SchemaError("B sidecar row " + std::to_string(row) + ": wrong column count");
    for (int i = 0; i < channels; ++i) {
      v[i].push_back(cells[1 + i]);
      d[i].push_back(cells[1 + channels + i]);
    }
  }
  try {
    return DiagonalCurve(period, std::move(v), std::move(d));
  } catch (const ParameterDomainError& e) {
    throw SchemaError(std::string("B sidecar: ") + e.what());
  }
}

struct StoredCertificate {
  Certificate cert;
  std::optional<DiagonalCurve> B;  ///< present when the sidecar exists
  std::filesystem::path path;
};

/// Writes `<path>` and the sidecar `<stem>.B.csv` next to it.
inline Certificate save_certificate(Certificate cert, const DiagonalCurve& B,
                                    const std::filesystem::path& path) {
  const std::filesystem::path sidecar = path.stem().string() + ".B.csv";
  cert.B_file = sidecar.string();
  write_atomic(path.parent_path() / sidecar, curve_csv(B));
  write_atomic(path, serialize(cert));
  return cert;
}

inline StoredCertificate load_certificate(const std::filesystem::path& path) {
  StoredCertificate s{parse_certificate(read_file(path)), std::nullopt, path};
  if (!s.cert.B_file.empty()) {
    const auto side = path.parent_path() / s.cert.B_file;
    if (std::filesystem::exists(side))
      s.B = parse_curve_csv(read_file(side), s.cert.p, s.cert.n - 2);
  }
  return s;
}

/// Full pipeline: construct, run every suite, assemble the certificate.
struct BuildResult {
  Construction construction;
  std::vector<Report> reports;
  Certificate certificate;
};

inline BuildResult build_certificate(const BuildInputs& in) {
  BuildResult r;
  r.construction = construct(in);
  r.reports = verify_all(r.construction);
  r.certificate = make_certificate(r.construction, r.reports);
  return r;
}

// ---------------------------------------------------------------------- verify

struct VerifyOutcome {
  Report gates{"gates"};
  std::vector<Report> sections;
  Report reproduction{"reproduction"};
  bool pass = false;
};

/// Invariants every stored certificate must satisfy before anything is re-run.
inline Report certificate_gates(const Certificate& c) {
  Report r("gates");
  r.holds("n >= 5", c.n >= 5);
  bool sig_ok = static_cast<int>(c.signature.size()) == c.n - 2;
  for (char ch : c.signature) sig_ok = sig_ok && (ch == '+' || ch == '-');
  r.holds("signature has n - 2 entries in {+,-}", sig_ok);
  r.below("|trace A| (A traceless)", std::abs(TracelessDiag::trace(c.A)), c.config.tol.trace);
  double amax = 0.0;
  for (double a : c.A) amax = std::max(amax, std::abs(a));
  r.above("max |a_i| (A nonzero)", amax, c.config.tol.a_floor);
  r.holds("f nonconstant", !c.f.is_constant());
  r.holds("f and f_initial have period p", c.f.period() == c.p && c.f_initial.period() == c.p);
  r.above("theta", c.theta, 0.0);
  bool finite = std::all_of(c.A.begin(), c.A.end(), [](double x) { return std::isfinite(x); }) &&
                std::all_of(c.init.begin(), c.init.end(), [](double x) { return std::isfinite(x); });
  r.holds("A and b0 finite", finite);
  try {
    const GlzPolynomial P(c.coefficients);
    const Report poly = verify_polynomial(P, c.config.tol);
    r.holds("polynomial passes the GL(m,Z) checks", poly.passed());
    const auto iso = isolate_roots(P, IsolationOptions::full_precision());
    double gap = 0.0;
    for (std::size_t i = 0; i < c.target.size() && i < iso.spectrum.size(); ++i)
      gap = std::max(gap, std::abs(iso.spectrum[i] - c.target[i]) / iso.spectrum[i]);
    r.below("stored target spectrum vs roots of the polynomial (relative)", gap, 1e-12);
  } catch (const Error& e) {
    r.holds("polynomial passes the GL(m,Z) checks", false, e.what());
  }
  return r;
}

/// Allowed drift between a stored and a recomputed measurement.
inline bool reproduces(const Check& stored, const Check& fresh) {
  if (stored.relation == Relation::Holds) return stored.measured == fresh.measured;
  if (std::isnan(stored.measured) || std::isnan(fresh.measured))
    return std::isnan(stored.measured) && std::isnan(fresh.measured);
  if (stored.measured == fresh.measured) return true;
  const double allowed = stored.tolerance > 0.0 ? 10.0 * stored.tolerance
                                                : 1e-9 * std::max(1.0, std::abs(stored.measured));
  return std::abs(stored.measured - fresh.measured) <= allowed;
}

inline VerifyOutcome verify_certificate(const StoredCertificate& stored) {
  VerifyOutcome out;
  const Certificate& c = stored.cert;
  out.gates = certificate_gates(c);
  if (!out.gates.passed()) return out;

  const BuildResult fresh = [&] {
    BuildResult r;
    r.construction = rebuild(c);
    r.reports = verify_all(r.construction);
    r.certificate = make_certificate(r.construction, r.reports);
    return r;
  }();
  out.sections = fresh.reports;

  Report& rep = out.reproduction;
  int drifted = 0, missing = 0;
  std::string first;
  for (const auto& sec : c.sections) {
    const SectionRecord* now = fresh.certificate.section(sec.name);
    if (!now || now->checks.size() != sec.checks.size()) {
      ++missing;
      continue;
    }
    for (std::size_t i = 0; i < sec.checks.size(); ++i) {
      const bool same_name = sec.checks[i].name == now->checks[i].name;
      if (!same_name) ++missing;
      else if (!reproduces(sec.checks[i], now->checks[i])) {
        ++drifted;
        if (first.empty()) first = sec.name + ": " + sec.checks[i].name;
      }
    }
  }
  rep.holds("stored sections match the recomputed layout", missing == 0);
  rep.below("checks drifting beyond 10x tolerance", drifted, 0.5, first);
  rep.holds("stored pass flag is the conjunction of section flags",
            c.pass == std::all_of(c.sections.begin(), c.sections.end(),
                                  [](const SectionRecord& s) { return s.pass; }));
  if (stored.B) {
    const DiagonalCurve& B = fresh.construction.solution.B;
    double gap = INFINITY;
    if (stored.B->steps() == B.steps() && stored.B->channels() == B.channels()) {
      gap = 0.0;
      for (int i = 0; i < B.channels(); ++i)
        for (int k = 0; k <= B.steps(); ++k)
          gap = std::max(gap, std::abs(stored.B->sample(i, k) - B.sample(i, k)));
    }
    rep.below("stored B samples vs re-solved B", gap, 10.0 * c.config.tol.fixed_point);
  }
  out.pass = out.gates.passed() && rep.passed() &&
             std::all_of(out.sections.begin(), out.sections.end(), [](const Report& r) { return r.passed(); });
  return out;
}

// ----------------------------------------------------------------------- sweep

struct SweepSpec {
  std::vector<PeriodicProfile> directions;
  std::vector<double> amplitudes;
};

/// {"directions": [{"mean": 0, "terms": [{"harmonic": 2, "cos": 1, "sin": 0}]}],
///  "amplitudes": [0, 0.02]}. Directions inherit the base period and must have
/// zero mean.
inline SweepSpec parse_sweep_spec(const std::string& text, double period) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(std::string("sweep spec is not valid JSON: ") + e.what());
  }
  const detail::Reader root(j, "$");
  SweepSpec spec;
  const Json& dirs = root.array("directions");
  if (dirs.empty()) throw InputError("sweep spec needs at least one direction");
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    Json d = dirs[i];
    if (!d.is_object()) throw InputError("direction " + std::to_string(i) + " must be an object");
    if (!d.contains("mean")) d["mean"] = 0.0;
    d["period"] = period;
    const PeriodicProfile phi = detail::read_profile(detail::Reader(d, "$.directions[" + std::to_string(i) + "]"));
    if (phi.mean() != 0.0)
      throw InputError("direction " + std::to_string(i) + " has nonzero mean " +
                       std::to_string(phi.mean()) + "; perturbations must integrate to zero");
    if (phi.is_constant()) throw InputError("direction " + std::to_string(i) + " is zero");
    spec.directions.push_back(phi);
  }
  spec.amplitudes = root.reals("amplitudes");
  if (spec.amplitudes.empty()) throw InputError("sweep spec needs at least one amplitude");
  for (double a : spec.amplitudes)
    if (!std::isfinite(a)) throw InputError("amplitudes must be finite");
  return spec;
}

struct SweepCell {
  int direction = 0;
  int amplitude_index = 0;
  double amplitude = 0.0;
  bool built = false;
  bool pass = false;
  std::string error;
  std::optional<BuildResult> result;
};

struct SweepResult {
  std::vector<SweepCell> cells;
  std::vector<std::vector<double>> distances;  ///< L2 distance of achieved f, built cells only
  std::vector<int> distance_index;             ///< cell index per row of `distances`
  int passing() const {
    return static_cast<int>(std::count_if(cells.begin(), cells.end(), [](const SweepCell& c) { return c.pass; }));
  }
};

/// Recalibrates from f_initial + amplitude * direction for every grid cell.
/// Cells run concurrently; failures are recorded per cell.
inline SweepResult run_sweep(const Certificate& base, const SweepSpec& spec) {
  SweepResult out;
  std::vector<std::future<SweepCell>> jobs;
  for (int d = 0; d < static_cast<int>(spec.directions.size()); ++d)
    for (int a = 0; a < static_cast<int>(spec.amplitudes.size()); ++a)
      jobs.push_back(std::async(std::launch::async, [&, d, a] {
        SweepCell cell;
        cell.direction = d;
        cell.amplitude_index = a;
        cell.amplitude = spec.amplitudes[a];
        BuildInputs in = inputs_of(base);
        if (cell.amplitude != 0.0) in.profile = base.f_initial.plus(spec.directions[d], cell.amplitude);
        try {
          cell.result = build_certificate(in);
          cell.built = true;
          cell.pass = cell.result->certificate.pass;
        } catch (const Error& e) {
          cell.error = e.what();
        }
        return cell;
      }));
  for (auto& j : jobs) out.cells.push_back(j.get());
  for (int i = 0; i < static_cast<int>(out.cells.size()); ++i)
    if (out.cells[i].built) out.distance_index.push_back(i);
  for (int i : out.distance_index) {
    std::vector<double> row;
    for (int j : out.distance_index)
      row.push_back(out.cells[i].result->construction.solution.f.l2_distance(
          out.cells[j].result->construction.solution.f));
    out.distances.push_back(std::move(row));
  }
  return out;
}

inline Json sweep_summary(const SweepResult& r, const std::vector<std::string>& files) {
  Json cells = Json::array();
  for (std::size_t i = 0; i < r.cells.size(); ++i) {
    const SweepCell& c = r.cells[i];
    Json j = {{"direction", c.direction},
              {"amplitude", c.amplitude},
              {"status", c.built ? (c.pass ? "pass" : "fail") : "error"},
              {"file", i < files.size() ? files[i] : ""}};
    if (!c.error.empty()) j["error"] = c.error;
    if (c.built) j["f"] = detail::profile_json(c.result->construction.solution.f);
    cells.push_back(j);
  }
  Json dist = Json::array();
  for (const auto& row : r.distances) dist.push_back(detail::numbers(row));
  return {{"cells", cells},
          {"passing", r.passing()},
          {"total", r.cells.size()},
          {"l2_distance_cells", r.distance_index},
          {"l2_distance", dist}};
}

}  // namespace ecs
