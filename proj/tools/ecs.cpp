// Command-line front end. Exit status: 0 all checks pass, 1 a check failed,
// 2 bad input (arguments, files, parameter domain).

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "ecs/certificate.hpp"

namespace fs = std::filesystem;
using namespace ecs;

namespace {

constexpr int kPass = 0;
constexpr int kFail = 1;
constexpr int kInput = 2;

void print_report(const Report& r) {
  for (const auto& c : r.checks()) {
    std::printf("[%s] %s: %s", c.pass ? "PASS" : "FAIL", r.section().c_str(), c.name.c_str());
    if (c.relation == Relation::Holds)
      std::printf("\n");
    else
      std::printf("  measured %.6g %s %.3g\n", c.measured, to_string(c.relation), c.tolerance);
    if (!c.note.empty()) std::printf("       %s\n", c.note.c_str());
  }
}

bool print_all(const std::vector<Report>& reports) {
  bool ok = true;
  for (const auto& r : reports) {
    print_report(r);
    ok = ok && r.passed();
  }
  return ok;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw InputError("not a number: '" + item + "'");
    }
  }
  return out;
}

/// t,s,v1..vm as typed on the command line
ManifoldPoint point_arg(const std::vector<double>& x) {
  const int m = static_cast<int>(x.size()) - 2;
  return {x[0], x[1], Eigen::Map<const Eigen::VectorXd>(x.data() + 2, m)};
}

Config default_config() {
  Config c;
  c.seed = seed_from_env();
  return c;
}

struct PolyArgs {
  std::string family = "compose";
  long long k = 0, l = 0, mid = 0;
};

void add_poly_options(CLI::App* cmd, PolyArgs& a) {
  cmd->add_option("--family", a.family, "compose | cubic | quadratic | quartic")->capture_default_str();
  cmd->add_option("--k", a.k, "family parameter k");
  cmd->add_option("--l", a.l, "family parameter l");
  cmd->add_option("--mid", a.mid, "middle parameter of the quartic family");
}

PolynomialSpec spec_of(const PolyArgs& a) {
  PolynomialSpec s;
  s.family = a.family;
  s.k = a.k;
  s.l = a.l;
  s.mid = a.mid;
  return s;
}

void emit(const std::string& text, const std::string& out) {
  if (out.empty() || out == "-")
    std::cout << text;
  else
    write_atomic(out, text);
}

// ------------------------------------------------------------------ commands

int cmd_gen_poly(int m, const PolyArgs& a, const std::string& out) {
  const GlzPolynomial P = spec_of(a).make(m);
  const auto iso = isolate_roots(P, IsolationOptions::full_precision());
  Json brackets = Json::array();
  for (const auto& b : iso.brackets) brackets.push_back({b.lower_d(), b.upper_d()});
  const Json j = {{"family", a.family}, {"k", a.k}, {"l", a.l}, {"mid", a.mid},
                  {"coefficients", P.coefficients()}, {"roots", iso.spectrum.values()},
                  {"brackets", brackets}};
  emit(j.dump(2) + "\n", out);
  const Report r = verify_polynomial(P, Tolerances{});
  if (!out.empty() && out != "-") print_report(r);
  return r.passed() ? kPass : kFail;
}

int cmd_solve_spectrum(const std::string& poly_file, double p, double amplitude, const std::string& out) {
  const Json j = [&] {
    try {
      return Json::parse(read_file(poly_file));
    } catch (const nlohmann::json::parse_error& e) {
      throw InputError(poly_file + ": " + e.what());
    }
  }();
  if (!j.contains("coefficients") || !j["coefficients"].is_array())
    throw InputError(poly_file + ": expected a 'coefficients' array");
  std::vector<std::int64_t> coeffs;
  for (const auto& c : j["coefficients"]) {
    if (!c.is_number_integer()) throw InputError(poly_file + ": coefficients must be integers");
    coeffs.push_back(c.get<std::int64_t>());
  }
  const GlzPolynomial P(coeffs);
  const Spectrum target = isolate_roots(P, IsolationOptions::full_precision()).spectrum;
  const ConstantSeed seed = seed_constant(target, p);
  const PeriodicProfile f0 = PeriodicProfile::cosine(p, seed.h, amplitude);
  const SpectralSolution s = calibrate(f0, target, seed);
  Report r("spectral");
  r.below("max |exp(-int b_i) - lambda_i|", s.spectrum_error, 1e-9);
  r.below("max |b_i(p) - b_i(0)|", s.periodicity_defect, 1e-10);
  r.below("max |B' + B^2 - f - A|", s.ode_residual, 1e-8);
  const Json res = {{"p", p},
                    {"target_spectrum", target.values()},
                    {"achieved_spectrum", s.achieved.values()},
                    {"multipliers", s.multipliers},
                    {"A", s.A.entries()},
                    {"f_mean", s.f.mean()},
                    {"b0", s.init},
                    {"iterations", s.iterations},
                    {"spectrum_error", s.spectrum_error}};
  emit(res.dump(2) + "\n", out);
  if (!out.empty() && out != "-") print_report(r);
  return r.passed() ? kPass : kFail;
}

int cmd_build(BuildInputs in, const std::string& out) {
  const BuildResult r = build_certificate(in);
  const bool ok = print_all(r.reports);
  const fs::path path = out.empty() ? fs::path("ecs_n" + std::to_string(in.n) + ".json") : fs::path(out);
  save_certificate(r.certificate, r.construction.solution.B, path);
  std::printf("certificate %s: %s\n", path.string().c_str(), ok ? "PASS" : "FAIL");
  return ok ? kPass : kFail;
}

int cmd_verify(const std::string& cert) {
  const StoredCertificate s = load_certificate(cert);
  const VerifyOutcome v = verify_certificate(s);
  print_report(v.gates);
  print_all(v.sections);
  print_report(v.reproduction);
  std::printf("verify %s: %s\n", cert.c_str(), v.pass ? "PASS" : "FAIL");
  return v.pass ? kPass : kFail;
}

int cmd_suite(const std::string& cert, bool group) {
  const StoredCertificate s = load_certificate(cert);
  const Report gates = certificate_gates(s.cert);
  if (!gates.passed()) {
    print_report(gates);
    return kFail;
  }
  const Construction c = rebuild(s.cert);
  const Config& cfg = c.inputs.config;
  const bool ok = print_all({group ? verify_group_laws(c, cfg) : verify_quotient(c, cfg)});
  return ok ? kPass : kFail;
}

int cmd_geodesic(const std::string& cert, std::uint64_t seed, double span, int samples,
                 const std::string& point, const std::string& velocity, const std::string& out) {
  const StoredCertificate s = load_certificate(cert);
  const Construction c = rebuild(s.cert);
  const ModelData& md = c.model();
  const int m = md.m();
  Rng rng(seed);
  ManifoldPoint q{rng.uniform(0.0, md.period()), rng.uniform(-1.0, 1.0), Eigen::VectorXd(m)};
  TangentVector w{rng.uniform(0.5, 1.5), rng.uniform(-1.0, 1.0), Eigen::VectorXd(m)};
  for (int i = 0; i < m; ++i) {
    q.v[i] = rng.uniform(-1.0, 1.0);
    w.dv[i] = rng.uniform(-1.0, 1.0);
  }
  if (!point.empty()) {
    const auto x = parse_list(point);
    if (static_cast<int>(x.size()) != m + 2) throw InputError("--point needs t,s,v1..vm");
    q = point_arg(x);
  }
  if (!velocity.empty()) {
    const auto x = parse_list(velocity);
    if (static_cast<int>(x.size()) != m + 2) throw InputError("--velocity needs dt,ds,dv1..dvm");
    w.dt = x[0];
    w.ds = x[1];
    for (int i = 0; i < m; ++i) w.dv[i] = x[2 + i];
  }
  GeodesicOptions opt;
  opt.samples = samples;
  opt.agreement_tolerance = INFINITY;
  const double half = span * md.period();
  const Trajectory tr = geodesic(c.space(), q, w, -half, half, opt);

  std::string csv = "sigma,t,s";
  for (int i = 1; i <= m; ++i) csv += ",v_" + std::to_string(i);
  csv += ",energy\n";
  for (const auto& smp : tr.samples) {
    append_real(csv, smp.sigma);
    csv += ',';
    append_real(csv, smp.point.t);
    csv += ',';
    append_real(csv, smp.point.s);
    for (int i = 0; i < m; ++i) {
      csv += ',';
      append_real(csv, smp.point.v[i]);
    }
    csv += ',';
    append_real(csv, smp.energy);
    csv += '\n';
  }
  emit(csv, out);
  const Tolerances& tol = s.cert.config.tol;
  Report r("geodesic");
  r.below("structured vs generic (relative)", tr.max_disagreement, tol.geodesic_agreement);
  r.below("energy drift, structured (relative)", tr.max_energy_drift, tol.energy_drift);
  r.below("energy drift, generic RK (relative)", tr.max_generic_energy_drift, tol.energy_drift);
  if (!out.empty() && out != "-") print_report(r);
  return r.passed() ? kPass : kFail;
}

int cmd_canonicalize(const std::string& cert, const std::string& point) {
  const StoredCertificate s = load_certificate(cert);
  const Construction c = rebuild(s.cert);
  const int m = c.model().m();
  const auto x = parse_list(point);
  if (static_cast<int>(x.size()) != m + 2)
    throw InputError("--point needs " + std::to_string(m + 2) + " values t,s,v1..vm");
  const ManifoldPoint q = point_arg(x);
  const CanonicalForm cf = c.quotient->canonicalize(q);
  std::vector<std::int64_t> n(cf.gamma.n.data(), cf.gamma.n.data() + m);
  std::vector<double> v(cf.point.v.data(), cf.point.v.data() + m);
  std::vector<double> z(cf.fiber.data(), cf.fiber.data() + m);
  const Json j = {{"gamma", {{"k", cf.gamma.k}, {"ell", cf.gamma.ell}, {"n", n}}},
                  {"point", {{"t", cf.point.t}, {"s", cf.point.s}, {"v", v}}},
                  {"lattice_coordinates", z},
                  {"in_domain", c.quotient->in_domain(cf.point)}};
  std::cout << j.dump(2) << "\n";
  return c.quotient->in_domain(cf.point) ? kPass : kFail;
}

int cmd_sweep(const std::string& cert, const std::string& spec_file, const std::string& out_dir) {
  const StoredCertificate base = load_certificate(cert);
  const SweepSpec spec = parse_sweep_spec(read_file(spec_file), base.cert.p);
  const SweepResult r = run_sweep(base.cert, spec);
  std::vector<std::string> files;
  for (const auto& cell : r.cells) {
    std::string name;
    if (cell.built) {
      name = "cell_d" + std::to_string(cell.direction) + "_a" + std::to_string(cell.amplitude_index) + ".json";
      save_certificate(cell.result->certificate, cell.result->construction.solution.B, fs::path(out_dir) / name);
    }
    files.push_back(name);
    std::printf("[%s] direction %d amplitude %g%s%s\n",
                cell.pass ? "PASS" : (cell.built ? "FAIL" : "ERROR"), cell.direction, cell.amplitude,
                cell.error.empty() ? "" : ": ", cell.error.c_str());
  }
  write_atomic(fs::path(out_dir) / "sweep.json", sweep_summary(r, files).dump(2) + "\n");
  std::printf("sweep: %d of %zu cells pass\n", r.passing(), r.cells.size());
  return r.passing() == static_cast<int>(r.cells.size()) ? kPass : kFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compact ECS manifold construction and certificates"};
  app.require_subcommand(1);

  int m = 3;
  PolyArgs poly;
  std::string out;
  auto* gen = app.add_subcommand("gen-poly", "GL(m,Z) characteristic polynomial and its roots");
  gen->add_option("--m", m, "degree m = n - 2")->required();
  add_poly_options(gen, poly);
  gen->add_option("--out", out, "output JSON (default stdout)");

  std::string poly_file;
  double p = 1.0, theta = 1.0, amplitude = 0.05;
  auto* solve = app.add_subcommand("solve-spectrum", "calibrate (f, A, B) to the roots of a polynomial");
  solve->add_option("--poly", poly_file, "polynomial JSON from gen-poly")->required();
  solve->add_option("--p", p, "period")->capture_default_str();
  solve->add_option("--amplitude", amplitude, "cosine amplitude of the initial f")->capture_default_str();
  solve->add_option("--out", out, "output JSON (default stdout)");

  int n = 5;
  std::string signature;
  auto* build = app.add_subcommand("build", "run the full pipeline and write a certificate");
  build->add_option("--n", n, "dimension, n >= 5")->capture_default_str();
  build->add_option("--signature", signature, "n - 2 signs, e.g. ++- (default all +)");
  build->add_option("--p", p, "period")->capture_default_str();
  build->add_option("--theta", theta, "period of s")->capture_default_str();
  build->add_option("--amplitude", amplitude, "cosine amplitude of the initial f")->capture_default_str();
  add_poly_options(build, poly);
  build->add_option("--out", out, "certificate path (default ecs_n<n>.json)");

  std::string cert;
  auto* verify = app.add_subcommand("verify", "re-run every check of a stored certificate");
  verify->add_option("cert", cert, "certificate JSON")->required();

  auto* vgroup = app.add_subcommand("verify-group", "group law, actions and isometry checks");
  vgroup->add_option("cert", cert, "certificate JSON")->required();
  auto* vquot = app.add_subcommand("verify-quotient", "fundamental domain, freeness, discreteness, fibres");
  vquot->add_option("cert", cert, "certificate JSON")->required();

  std::uint64_t seed = 0;
  double span = 100.0;
  int samples = 201;
  std::string point, velocity;
  auto* geo = app.add_subcommand("geodesic", "integrate one geodesic and write a CSV trace");
  geo->add_option("cert", cert, "certificate JSON")->required();
  auto* seed_opt = geo->add_option("--seed", seed, "initial data seed (default ECS_SEED)");
  geo->add_option("--span", span, "half-span in periods")->capture_default_str();
  geo->add_option("--samples", samples, "output samples")->capture_default_str();
  geo->add_option("--point", point, "t,s,v1..vm (default random)");
  geo->add_option("--velocity", velocity, "dt,ds,dv1..dvm (default random)");
  geo->add_option("--out", out, "CSV path (default stdout)");

  auto* canon = app.add_subcommand("canonicalize", "representative of a point in the fundamental domain");
  canon->add_option("cert", cert, "certificate JSON")->required();
  canon->add_option("--point", point, "t,s,v1..vm")->required();

  std::string spec_file, out_dir = "sweep";
  auto* sweep = app.add_subcommand("sweep", "recalibrate along zero-mean Fourier perturbations of f");
  sweep->add_option("cert", cert, "base certificate JSON")->required();
  sweep->add_option("--spec", spec_file, "sweep spec JSON")->required();
  sweep->add_option("--out-dir", out_dir, "directory for cell certificates")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kInput;
  }

  try {
    if (*gen) return cmd_gen_poly(m, poly, out);
    if (*solve) return cmd_solve_spectrum(poly_file, p, amplitude, out);
    if (*build) {
      BuildInputs in;
      in.n = n;
      in.p = p;
      in.theta = theta;
      in.signature = signature;
      in.polynomial = spec_of(poly);
      in.amplitude = amplitude;
      in.config = default_config();
      return cmd_build(in, out);
    }
    if (*verify) return cmd_verify(cert);
    if (*vgroup) return cmd_suite(cert, true);
    if (*vquot) return cmd_suite(cert, false);
    if (*geo) return cmd_geodesic(cert, seed_opt->count() ? seed : seed_from_env(), span, samples, point, velocity, out);
    if (*canon) return cmd_canonicalize(cert, point);
    if (*sweep) return cmd_sweep(cert, spec_file, out_dir);
  } catch (const StageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.input_error() ? kInput : kFail;
  } catch (const InputError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kInput;
  } catch (const ParameterDomainError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kInput;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFail;
  }
  return kInput;
}
