#include "cdlab/commands.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "cdlab/cdcheck.hpp"
#include "cdlab/convexity.hpp"
#include "cdlab/error.hpp"
#include "cdlab/measure.hpp"
#include "cdlab/profiles.hpp"
#include "cdlab/transport.hpp"

namespace cdlab {

using json = nlohmann::json;
using Eigen::Index;

namespace {

// Non-finite values have no JSON representation; keep them readable.
json num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

json point_json(const Point2& p) { return json::array({num(p.x()), num(p.y())}); }

class ReportBuilder {
 public:
  ReportBuilder(std::string_view command, std::string_view variant, const Config& cfg) {
    r_["schema"] = kReportSchema;
    r_["command"] = std::string(command);
    if (!variant.empty()) r_["variant"] = std::string(variant);
    json echo = json::object();
    for (const auto& [k, v] : cfg.entries()) {
      if (k != "output.dir") echo[k] = v;  // where results go does not change them
    }
    r_["config"] = echo;
    r_["parameters"] = json::object();
    r_["checks"] = json::array();
  }

  void param(const std::string& key, json value) { r_["parameters"][key] = std::move(value); }

  void check(const std::string& id, bool passed, json metrics) {
    r_["checks"].push_back({{"id", id}, {"passed", passed}, {"metrics", std::move(metrics)}});
    all_passed_ = all_passed_ && passed;
  }

  void file(std::string name, std::string content) {
    files_.push_back({std::move(name), std::move(content)});
  }

  /// Evidence-grade outcomes override the pass/fail verdict.
  void verdict(std::string v) { verdict_ = std::move(v); }

  RunReport finish() {
    RunReport out;
    json names = json::array();
    for (const auto& f : files_) names.push_back(f.name);
    r_["artifacts"] = names;
    if (verdict_.empty()) verdict_ = all_passed_ ? "pass" : "fail";
    r_["verdict"] = verdict_;
    out.exit_code = all_passed_ ? kExitPass : kExitFailure;
    out.report = std::move(r_);
    out.files = std::move(files_);
    return out;
  }

 private:
  json r_;
  std::vector<SideFile> files_;
  bool all_passed_ = true;
  std::string verdict_;
};

struct Settings {
  double k;
  double K;
  int nx;
  int nu;
  double nprime;
  std::uint64_t seed;
};

Settings settings(const Config& cfg, double default_k, int default_nx, int default_nu) {
  Settings s{cfg.get_double("profile.k", default_k),
             cfg.get_double("space.K", 16.0),
             static_cast<int>(cfg.get_int("space.nx", default_nx)),
             static_cast<int>(cfg.get_int("space.nu", default_nu)),
             cfg.get_double("cd.nprime", 515.0),
             static_cast<std::uint64_t>(cfg.get_int("seed", 1))};
  if (!(s.k > 0.0 && s.k < 0.25)) throw PreconditionError("k must lie in (0, 1/4)");
  if (!(s.K >= 1.0)) throw PreconditionError("K must be at least 1");
  if (s.nx < 2 || s.nx > 4096) throw PreconditionError("nx must lie in [2, 4096]");
  if (s.nu < 2 || s.nu > 1024) throw PreconditionError("nu must lie in [2, 1024]");
  if (!(s.nprime > 1.0)) throw PreconditionError("nprime must exceed 1");
  return s;
}

void echo_settings(ReportBuilder& b, const Settings& s) {
  b.param("k", s.k);
  b.param("K", s.K);
  b.param("nx", s.nx);
  b.param("nu", s.nu);
  b.param("nprime", s.nprime);
  b.param("seed", s.seed);
}

ProfileFn resolve_profile(const Config& cfg, double k, std::string_view default_preset) {
  if (const auto expr = cfg.raw("profile.expression")) {
    if (cfg.has("profile.preset")) throw PreconditionError("give either profile.preset or profile.expression");
    return parse_profile(*expr, ParamMap{{"k", k}});
  }
  const std::string name = cfg.get_string("profile.preset", default_preset);
  const auto& names = preset_names();
  if (std::find(names.begin(), names.end(), name) == names.end()) {
    throw PreconditionError("unknown profile preset '" + name + "'");
  }
  return preset_profile(name, k);
}

std::pair<double, double> range(const Config& cfg, std::string_view key, std::pair<double, double> fallback) {
  const auto v = cfg.get_list(key, {fallback.first, fallback.second});
  if (v.size() != 2 || !(v[0] < v[1])) throw PreconditionError(std::string(key) + " must be 'lo, hi' with lo < hi");
  return {v[0], v[1]};
}

std::string csv_text(const std::function<void(std::ostream&)>& writer) {
  std::ostringstream os;
  writer(os);
  return os.str();
}

json certificate_json(const ConvexityCertificate& c) {
  return {{"K", num(c.K)}, {"N", num(c.N)}, {"min_slack", num(c.min_slack)}, {"argmin_t", num(c.argmin_t)},
          {"tol", num(c.tol)}, {"passed", c.passed}};
}

json histogram_json(const std::array<long, 4>& h) {
  return {{"V", h[0]}, {"D", h[1]}, {"H0", h[2]}, {"H1", h[3]}};
}

// ---------------------------------------------------------------------------

RunReport cmd_validate_profile(const Config& cfg) {
  ReportBuilder b("validate-profile", "", cfg);
  const Settings s = settings(cfg, kDefaultK, 128, 16);
  const ProfileFn f = resolve_profile(cfg, s.k, "valley");
  const bool allow_closure = cfg.get_bool("profile.singular", false);
  const int audit_n = static_cast<int>(cfg.get_int("profile.audit_samples", 4096));
  b.param("k", s.k);
  b.param("profile", f.description());
  b.param("allow_closure", allow_closure);

  const MembershipReport m = validate_membership(f, s.k, audit_n);
  json metrics = {{"class", std::string(to_string(m.profile_class))},
                  {"samples", m.sample_count},
                  {"min_f", num(m.min_f)},
                  {"max_f", num(m.max_f)},
                  {"max_abs_d1", num(m.max_abs_d1)},
                  {"max_abs_d2", num(m.max_abs_d2)}};
  if (m.violation) {
    metrics["violation"] = {{"bound", std::string(to_string(m.violation->bound))},
                            {"x", num(m.violation->x)},
                            {"value", num(m.violation->value)}};
  }
  const bool ok = m.profile_class == ProfileClass::Fk || (allow_closure && m.profile_class == ProfileClass::ClosureOnly);
  b.check("profile-class-membership", ok, metrics);

  b.file("profile.csv", csv_text([&](std::ostream& os) {
           os << "x,f,d1,d2\n";
           os.precision(17);
           for (int i = 0; i <= 256; ++i) {
             const double x = -1.0 + 2.0 * i / 256;
             os << x << ',' << f(x) << ',' << f.d1(x) << ',' << f.d2(x) << '\n';
           }
         }));
  return b.finish();
}

// ---------------------------------------------------------------------------

RunReport cmd_verify_cd(const Config& cfg) {
  ReportBuilder b("verify-cd", "", cfg);
  const Settings s = settings(cfg, kDefaultK, 128, 16);
  echo_settings(b, s);
  const ProfileFn f = resolve_profile(cfg, s.k, "valley");
  const auto src = range(cfg, "cd.source", {-0.875, -0.5});
  const auto dst = range(cfg, "cd.target", {0.125, 0.875});
  const double tol = cfg.get_double("cd.tol", 1e-4);
  const double etol = cfg.get_double("cd.entropy_tol", 1e-9);
  b.param("profile", f.description());
  b.param("source", {src.first, src.second});
  b.param("target", {dst.first, dst.second});

  SpaceParams sp = make_compact_space(f, s.k, s.K, false);
  sp.validate();
  const auto grid = build_grid(sp, s.nx, s.nu);
  const DiscreteMeasure mu0 = uniform_block(grid, src.first, src.second);
  const DiscreteMeasure mu1 = uniform_block(grid, dst.first, dst.second);
  const StructuredMapResult sm = build_structured_map(mu0, mu1);

  const double n1 = s.nprime, n2 = 2.0 * s.nprime;
  const CdReport r1 = pointwise_cd_check(mu0, sm.grid_map, n1, tol);
  const CdReport r2 = pointwise_cd_check(mu0, sm.grid_map, n2, tol);
  auto cd_metrics = [](const CdReport& r) {
    return json{{"N_prime", num(r.N_prime)},       {"min_slack", num(r.min_slack)},
                {"argmin", point_json(r.argmin)},   {"tol", num(r.tol)},
                {"points", r.points},               {"boundary_points", r.boundary_points},
                {"degenerate_points", r.degenerate_points}, {"cases", histogram_json(r.case_counts)}};
  };
  b.check("pointwise-jacobi-criterion", r1.pass, cd_metrics(r1));
  b.check("pointwise-jacobi-criterion-doubled-dimension", r2.pass, cd_metrics(r2));
  b.check("dimension-monotonicity", !r1.pass || r2.pass,
          {{"pass_at_N", r1.pass}, {"pass_at_2N", r2.pass}});

  const MidpointEntropyReport me = midpoint_entropy_test(mu0, mu1, sm.map, {n1, n2}, etol);
  json verdicts = json::array();
  for (const auto& v : me.verdicts) {
    verdicts.push_back({{"N", std::isinf(v.N) ? json("boltzmann") : json(v.N)},
                        {"S0", num(v.S0)},
                        {"S1", num(v.S1)},
                        {"S_half", num(v.S_half)},
                        {"slack", num(v.slack)},
                        {"passed", v.passed}});
  }
  b.check("midpoint-entropy-convexity", me.pass, {{"mass_loss", num(me.mass_loss)}, {"verdicts", verdicts}});

  const JacobiResidual jr = jacobi_residual(mu0, mu1, sm.grid_map);
  b.check("jacobi-equation-residual", jr.max_residual <= 1e-2,
          {{"max_residual", num(jr.max_residual)},
           {"mean_residual", num(jr.mean_residual)},
           {"interior_points", jr.interior_points},
           {"bound", 1e-2}});

  b.file("slack.csv", csv_text([&](std::ostream& os) { write_slack_csv(os, r1); }));
  b.file("map.csv", csv_text([&](std::ostream& os) { write_map_csv(os, sm.grid_map); }));
  b.file("midpoint_marginal.csv",
         csv_text([&](std::ostream& os) { write_marginal_csv(os, *me.midpoint_measure); }));
  return b.finish();
}

// ---------------------------------------------------------------------------

SampledFunction quadratic(double a, double bb, double c, int n) {
  return SampledFunction::sample([=](double t) { return a * t * t + bb * t + c; },
                                 [=](double t) { return 2.0 * a * t + bb; }, [=](double) { return 2.0 * a; }, 0.0, 1.0,
                                 n);
}

CaseData random_case(CaseKind kind, const ProfileFn& f, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (;;) {
    CaseData d;
    const double x = -0.9 + 1.2 * U(rng);
    const double fx = f(x);
    switch (kind) {
      case CaseKind::H0: {
        const double T1 = x + 0.01 + 0.5 * U(rng);
        d.z = {x, U(rng) * fx};
        d.T = {T1, U(rng) * f(T1)};
        break;
      }
      case CaseKind::V: {
        const double y0 = 0.5 * U(rng) * fx;
        const double dy = (0.3 + 0.7 * U(rng)) * (fx - y0) * 0.9;
        const double dx = (2.0 * U(rng) - 1.0) * dy * 0.9;
        d.z = {x, y0};
        d.T = {x + dx, y0 + dy};
        if (U(rng) < 0.5) std::swap(d.z, d.T);
        break;
      }
      case CaseKind::H1: {
        const double y0 = 0.3 * U(rng) * fx;
        const double dx = 0.8 * (fx - y0) * U(rng) + 1e-3 * fx;
        const double dy = dx * (0.55 + 0.4 * U(rng));
        d.z = {x, y0};
        d.T = {x + dx, y0 + dy};
        break;
      }
    }
    d.dT1dx = 0.25 + 4.0 * U(rng);
    d.dT2dy = 0.25 + 4.0 * U(rng);
    if (d.T.y() <= f(d.T.x()) && d.z.y() <= f(d.z.x())) return d;
  }
}

RunReport cmd_convexity(const Config& cfg) {
  ReportBuilder b("convexity", "", cfg);
  const Settings s = settings(cfg, kDefaultK, 128, 16);
  echo_settings(b, s);
  const int pairs = static_cast<int>(cfg.get_int("convexity.additivity_pairs", 200));
  const int lines = static_cast<int>(cfg.get_int("convexity.lines", 50));
  const int cases = static_cast<int>(cfg.get_int("convexity.case_samples", 40));
  const int cubics = static_cast<int>(cfg.get_int("convexity.cubics", 100));
  if (pairs < 1 || lines < 5 || cases < 1 || cubics < 1) throw PreconditionError("convexity suite sizes too small");
  std::mt19937_64 rng(s.seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const double K = s.K;
  constexpr double kExampleTol = 1e-9;

  // Reference examples.
  const SampledFunction neglog = SampledFunction::sample([](double t) { return -std::log(t); },
                                                         [](double t) { return -1.0 / t; },
                                                         [](double t) { return 1.0 / (t * t); }, 1.0, 2.0, 1025);
  const SampledFunction quad = quadratic(K, 0.0, 0.0, 1025);
  const SampledFunction cubic = SampledFunction::sample([](double t) { return t * t * t; },
                                                        [](double t) { return 3.0 * t * t; },
                                                        [](double t) { return 6.0 * t; }, -1.0, -0.1, 1025);
  const auto c_log = kn_certificate(neglog, 0.0, 1.0, kExampleTol);
  const auto c_quad = kn_certificate(quad, 0.0, 2.0 * K, kExampleTol);
  const auto c_cubic = kn_certificate(cubic, 0.0, 1.0, kExampleTol);
  b.check("neg-log-is-(0,1)-convex", c_log.passed, certificate_json(c_log));
  b.check("quadratic-is-(0,2K)-convex", c_quad.passed, certificate_json(c_quad));
  b.check("concave-cubic-rejected", !c_cubic.passed, certificate_json(c_cubic));

  // e^{-g/N} characterization on the examples and random cubics.
  int agree = 0, total = 0;
  auto tally = [&](const SampledFunction& g, double Kc, double N) {
    ++total;
    if (gN_characterization_check(g, Kc, N, kExampleTol).agree) ++agree;
  };
  tally(neglog, 0.0, 1.0);
  tally(quad, 0.0, 2.0 * K);
  tally(cubic, 0.0, 1.0);
  for (int i = 0; i < cubics; ++i) {
    const double a3 = 2.0 * U(rng) - 1.0, a2 = 2.0 * U(rng) - 1.0, a1 = 2.0 * U(rng) - 1.0;
    tally(SampledFunction::sample([=](double t) { return ((a3 * t + a2) * t + a1) * t; },
                                  [=](double t) { return (3.0 * a3 * t + 2.0 * a2) * t + a1; },
                                  [=](double t) { return 6.0 * a3 * t + 2.0 * a2; }, 0.0, 1.0, 257),
          0.0, 2.0);
  }
  b.check("exponential-characterization-agreement", agree == total, {{"agree", agree}, {"trials", total}});

  // Additivity over random certified quadratics.
  int held = 0;
  double min_excess = std::numeric_limits<double>::infinity();
  auto certified_quadratic = [&](double& Kq, double& Nq) {
    const double a = 0.1 + 2.0 * U(rng), bb = 4.0 * U(rng) - 2.0;
    Kq = a;  // half of g'' = 2a, leaving room for the gradient term
    const double gmax = std::max(std::abs(bb), std::abs(2.0 * a + bb));
    Nq = 1.01 * gmax * gmax / a + 1e-3;
    return quadratic(a, bb, 0.0, 257);
  };
  for (int i = 0; i < pairs; ++i) {
    double K1, N1, K2, N2;
    const SampledFunction g = certified_quadratic(K1, N1);
    const SampledFunction h = certified_quadratic(K2, N2);
    const AdditivityReport a = additivity_check(g, h, K1, N1, K2, N2, kExampleTol);
    if (a.first.passed && a.second.passed && a.sum.passed && a.implication_holds) ++held;
    min_excess = std::min(min_excess, a.min_excess);
  }
  b.check("additivity-random-pairs", held == pairs, {{"held", held}, {"pairs", pairs}, {"min_excess", num(min_excess)}});

  // The bump construction over a 20 x 20 grid in (A, delta).
  const PhiAudit& phi = phi_audit();
  double bump_min = std::numeric_limits<double>::infinity();
  int bump_pass = 0;
  for (int i = 0; i < 20; ++i) {
    for (int j = 0; j < 20; ++j) {
      const double A = 4.0 * i / 19.0;
      const double delta = 0.9 * kMaxBumpDelta * (2.0 * j / 19.0 - 1.0);
      const ConvexityCertificate c = bump_certificate(A, delta);
      bump_min = std::min(bump_min, c.min_slack);
      if (c.passed) ++bump_pass;
    }
  }
  b.check("bump-certificate-grid", bump_pass == 400,
          {{"passed", bump_pass},
           {"grid", 400},
           {"min_slack", num(bump_min)},
           {"phi_max_abs_d1", num(phi.max_abs_d1)},
           {"phi_max_abs_d2", num(phi.max_abs_d2)}});

  // Line estimate on random increasing curves across the F_k presets.
  const std::vector<std::string> presets{"constant", "valley", "wave", "tilt", "bump"};
  int line_pass = 0;
  double line_min = std::numeric_limits<double>::infinity();
  for (int i = 0; i < lines; ++i) {
    const ProfileFn f = preset_profile(presets[static_cast<std::size_t>(i) % presets.size()], s.k);
    const SpaceParams sp = make_compact_space(f, s.k, K, false);
    const double x0 = -0.9 + 1.6 * U(rng);
    const double f0 = f(x0);
    const double y0 = 0.3 * U(rng) * f0;
    const double slope = 0.25 + 0.65 * U(rng);
    const double L = 0.5 * (f0 - y0);
    const double curv = 0.5 * U(rng) * s.k / (3.0 * s.k);  // below k / f since f < 3k
    const SampledFunction y = SampledFunction::sample(
        [=](double x) { return y0 + slope * (x - x0) + 0.5 * curv * (x - x0) * (x - x0); },
        [=](double x) { return slope + curv * (x - x0); }, [=](double) { return curv; }, x0, x0 + L, 257);
    const LineProfileReport lr = line_profile_check(sp, y, 1.0, 1e-6);
    if (lr.certificate.passed) ++line_pass;
    line_min = std::min(line_min, lr.certificate.min_slack);
  }
  b.check("line-restriction-estimate", line_pass == lines,
          {{"passed", line_pass}, {"lines", lines}, {"min_slack", num(line_min)}});

  // Interpolation profiles of the three horizontal/vertical cases.
  json per_case = json::object();
  bool cases_ok = true;
  for (CaseKind kind : {CaseKind::H0, CaseKind::V, CaseKind::H1}) {
    int ok = 0;
    double worst = std::numeric_limits<double>::infinity();
    for (int i = 0; i < cases; ++i) {
      const ProfileFn f = preset_profile(presets[static_cast<std::size_t>(i) % presets.size()], s.k);
      const SpaceParams sp = make_compact_space(f, s.k, K, false);
      const CaseProfile p = case_profile(kind, random_case(kind, f, rng), sp);
      const ConvexityCertificate c = certify_case(p, 1e-6);
      if (c.passed) ++ok;
      worst = std::min(worst, c.min_slack);
    }
    cases_ok = cases_ok && ok == cases;
    per_case[std::string(to_string(kind))] = {{"passed", ok}, {"samples", cases}, {"min_slack", num(worst)}};
  }
  b.check("case-profile-certificates", cases_ok, per_case);
  return b.finish();
}

// ---------------------------------------------------------------------------

std::vector<double> dyadic(int from, int to) {
  std::vector<double> out;
  for (int e = from; e <= to; ++e) out.push_back(std::ldexp(1.0, -e));
  return out;
}

DiscreteMeasure fiber_measure(const std::shared_ptr<const Grid>& g, double x) {
  const Index col = g->column_of(x);
  if (col < 0 || g->singular_column(col)) throw PreconditionError("target fiber must lie in the two-dimensional part");
  const double xc = g->x_centers()(col);
  return uniform_block(g, xc - 0.25 * g->dx(), xc + 0.25 * g->dx());
}

json witness_json(const BranchingReport& r) {
  json j = {{"verified", r.verified},
            {"forced_for_every_source", r.forced_for_every_source},
            {"family_size", r.family_size},
            {"splitting_sources", r.splitting_sources},
            {"plan_cost", num(r.plan_cost)},
            {"duality_gap", num(r.duality_gap)}};
  if (r.witness) {
    j["t_star"] = num(r.witness->t_star);
    j["branch_point"] = point_json(r.witness->branch_point);
    j["separation"] = num(r.witness->separation);
    j["agreement_defect"] = num(r.witness->agreement_defect);
  }
  return j;
}

RunReport cmd_counterexample(std::string_view variant, const Config& cfg) {
  ReportBuilder b("counterexample", variant, cfg);
  const Settings s = settings(cfg, 0.2, 64, 8);
  echo_settings(b, s);
  const bool closure_expr = cfg.has("profile.expression");
  const ProfileFn f = resolve_profile(cfg, s.k, "ramp-smoothed");
  b.param("profile", f.description());
  const SpaceParams sp = make_compact_space(f, s.k, s.K, true);
  if (!closure_expr) sp.validate();

  if (variant == "branching") {
    const int depth = static_cast<int>(cfg.get_int("counterexample.depth", 6));
    const auto src = range(cfg, "counterexample.source", {-0.6, -0.4});
    const double fiber = cfg.get_double("counterexample.fiber", 0.5);

    const auto gs = build_grid(sp, s.nx, s.nu);
    const BranchingReport singular =
        branching_demo(uniform_block(gs, src.first, src.second), fiber_measure(gs, fiber), depth);
    b.check("branching-witness-singular-space", singular.verified && singular.forced_for_every_source,
            witness_json(singular));

    const double R = 4.0;
    const SpaceParams cone = make_cone_space(s.k, s.K, R);
    const auto gc = build_grid(cone, static_cast<int>(std::lround(s.nx * R / 1.6)), s.nu);
    const BranchingReport conic =
        branching_demo(uniform_block(gc, src.first, src.second), fiber_measure(gc, fiber), depth);
    b.check("branching-witness-cone-space", conic.verified && conic.forced_for_every_source, witness_json(conic));

    const SpaceParams flat = make_compact_space(preset_profile("constant", kDefaultK), kDefaultK, s.K, false);
    const auto gf = build_grid(flat, s.nx, s.nu);
    const BranchingReport control =
        branching_demo(uniform_block(gf, src.first, src.second), fiber_measure(gf, fiber), depth);
    b.check("control-without-singular-part-has-no-witness", !control.witness, witness_json(control));

    if (singular.witness) {
      b.file("witness_first.csv", csv_text([&](std::ostream& os) { write_curve_csv(os, singular.witness->first); }));
      b.file("witness_second.csv", csv_text([&](std::ostream& os) { write_curve_csv(os, singular.witness->second); }));
    }
  } else if (variant == "no-map") {
    const double fiber = cfg.get_double("counterexample.fiber", 0.5);
    const double h = f(fiber);
    auto spread = [&](int n) {
      std::vector<double> ys, ms;
      double tot = 0.0;
      for (int j = 0; j < n; ++j) {
        const double u = (j + 0.5) / n;
        ys.push_back(u * h);
        ms.push_back(std::exp(-s.K * u * u));
        tot += ms.back();
      }
      for (double& m : ms) m /= tot;
      return std::pair{ys, ms};
    };
    json runs = json::array();
    bool ok = true;
    double residual = 0.0;
    const std::vector<std::pair<std::vector<double>, int>> instances{{{-0.5}, 2}, {{-0.6, -0.55, -0.5, -0.45}, 8}};
    for (const auto& [xs, nt] : instances) {
      const auto [ys, ms] = spread(nt);
      const std::vector<double> sm(xs.size(), 1.0 / static_cast<double>(xs.size()));
      const NoMapReport r = no_map_demo(f, xs, sm, fiber, ys, ms);
      ok = ok && r.pass;
      residual = std::max(residual, r.cost_residual);
      runs.push_back({{"sources", r.sources},
                      {"targets", r.targets},
                      {"maps_enumerated", r.maps_enumerated},
                      {"feasible_maps", r.feasible_maps},
                      {"solver_plan_is_map", r.solver_plan_is_map},
                      {"optimal_cost", num(r.optimal_cost)},
                      {"cost_residual", num(r.cost_residual)}});
    }
    b.check("cost-constant-over-fiber", residual <= 1e-15, {{"max_residual", num(residual)}, {"bound", 1e-15}});
    b.check("no-optimal-plan-is-a-map", ok, {{"instances", runs}});
  } else if (variant == "dimension") {
    const std::vector<double> eps = cfg.get_list("counterexample.eps", dyadic(5, 10));
    struct Expect {
      BoxRegion region;
      double lo, hi;
    };
    json rows = json::array();
    std::ostringstream csv;
    csv << "region,eps,count\n";
    csv.precision(17);
    for (const Expect& e : {Expect{BoxRegion::Left, 0.85, 1.15}, Expect{BoxRegion::Right, 1.7, 2.15},
                            Expect{BoxRegion::UnitSquare, 1.9, 2.1}}) {
      const BoxDimensionReport r = box_dimension(sp, e.region, eps);
      b.check("box-dimension-" + std::string(to_string(e.region)), r.slope >= e.lo && r.slope <= e.hi,
              {{"slope", num(r.slope)}, {"intercept", num(r.intercept)}, {"expected", {e.lo, e.hi}},
               {"scales", eps.size()}});
      for (std::size_t i = 0; i < eps.size(); ++i) {
        csv << to_string(e.region) << ',' << eps[i] << ',' << r.counts[i] << '\n';
      }
    }
    b.file("box_counts.csv", csv.str());
  } else if (variant == "strict") {
    const auto src = range(cfg, "counterexample.source", {-0.375, -0.125});
    const auto dst = range(cfg, "counterexample.target", {0.5, 0.75});
    const double tol = cfg.get_double("counterexample.tol", 1e-9);
    const auto g = build_grid(sp, s.nx, s.nu);
    const DiscreteMeasure mu0 = uniform_block(g, src.first, src.second);
    const DiscreteMeasure mu1 = uniform_block(g, dst.first, dst.second);
    const OtSolution sol = solve_discrete_ot(mu0, mu1, CostKind::DistInfSquared);
    const GeodesicFamily fam = plan_family(sol.plan, 4);
    const RestrictionSearchReport rep =
        strict_cd_restriction_search(fam, g, default_restrictions(fam, *g), s.nprime, tol);

    json results = json::array();
    for (const auto& r : rep.results) {
      results.push_back({{"name", r.name},
                         {"curves", r.curves},
                         {"S0", num(r.S0)},
                         {"S_half", num(r.S_half)},
                         {"S1", num(r.S1)},
                         {"slack", num(r.slack)},
                         {"degenerate", r.degenerate}});
    }
    const RestrictionResult& best = rep.results[rep.best];
    b.check("restriction-search-completed", true,
            {{"N", num(rep.N)}, {"tol", num(rep.tol)}, {"family_size", fam.size()}, {"results", results}});
    b.check("unrestricted-family-convex", rep.results.front().slack >= -tol,
            {{"slack", num(rep.results.front().slack)}});
    b.param("best_restriction", best.name);
    b.param("best_slack", num(best.slack));
    b.verdict(rep.violation_found ? "violation-found" : "inconclusive");
    b.file("restrictions.csv", csv_text([&](std::ostream& os) {
             os << "name,curves,S0,S_half,S1,slack\n";
             os.precision(17);
             for (const auto& r : rep.results) {
               os << r.name << ',' << r.curves << ',' << r.S0 << ',' << r.S_half << ',' << r.S1 << ',' << r.slack
                  << '\n';
             }
           }));
  } else {
    throw PreconditionError("unknown counterexample '" + std::string(variant) +
                            "' (expected branching, no-map, dimension or strict)");
  }
  return b.finish();
}

// ---------------------------------------------------------------------------

RunReport cmd_mgh(const Config& cfg) {
  ReportBuilder b("mgh", "", cfg);
  const Settings s = settings(cfg, 0.2, 256, 8);
  echo_settings(b, s);
  const ProfileFn f = resolve_profile(cfg, s.k, "ramp-smoothed");
  const std::vector<double> eps = cfg.get_list("mgh.eps", dyadic(4, 9));
  b.param("profile", f.description());

  const MghTrace t = mgh_harness(f, eps, s.k, s.K, s.nx, s.nu);
  json rows = json::array();
  for (std::size_t i = 0; i < t.epsilons.size(); ++i) {
    rows.push_back({{"eps", num(t.epsilons[i])}, {"hausdorff", num(t.hausdorff[i])}, {"w1", num(t.w1[i])}});
  }
  b.check("hausdorff-within-epsilon", t.hausdorff_bounded, {{"trace", rows}});
  b.check("w1-strictly-decreasing", t.w1_decreasing, json::object());
  b.check("w1-extrapolated-limit", std::abs(t.extrapolated_limit) < 1e-3,
          {{"limit", num(t.extrapolated_limit)}, {"bound", 1e-3}});
  b.file("mgh_trace.csv", csv_text([&](std::ostream& os) {
           os << "eps,hausdorff,w1\n";
           os.precision(17);
           for (std::size_t i = 0; i < t.epsilons.size(); ++i) {
             os << t.epsilons[i] << ',' << t.hausdorff[i] << ',' << t.w1[i] << '\n';
           }
         }));
  return b.finish();
}

}  // namespace

const std::vector<std::string>& known_options() {
  static const std::vector<std::string> keys{
      "seed",
      "profile.preset",
      "profile.expression",
      "profile.k",
      "profile.singular",
      "profile.audit_samples",
      "space.K",
      "space.nx",
      "space.nu",
      "cd.nprime",
      "cd.tol",
      "cd.entropy_tol",
      "cd.source",
      "cd.target",
      "convexity.additivity_pairs",
      "convexity.lines",
      "convexity.case_samples",
      "convexity.cubics",
      "counterexample.depth",
      "counterexample.source",
      "counterexample.target",
      "counterexample.fiber",
      "counterexample.eps",
      "counterexample.tol",
      "mgh.eps",
      "output.dir",
  };
  return keys;
}

RunReport run_command(std::string_view command, std::string_view variant, const Config& config) {
  config.require_known(known_options());
  if (command != "counterexample" && !variant.empty()) {
    throw PreconditionError("command '" + std::string(command) + "' takes no variant");
  }
  if (command == "validate-profile") return cmd_validate_profile(config);
  if (command == "verify-cd") return cmd_verify_cd(config);
  if (command == "convexity") return cmd_convexity(config);
  if (command == "counterexample") return cmd_counterexample(variant, config);
  if (command == "mgh") return cmd_mgh(config);
  throw PreconditionError("unknown command '" + std::string(command) + "'");
}

std::string report_text(const RunReport& run) { return run.report.dump(2) + "\n"; }

void write_run(const RunReport& run, const std::filesystem::path& dir, double wall_seconds) {
  std::filesystem::create_directories(dir);
  auto put = [&](const std::string& name, const std::string& content) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw Error("cannot write '" + (dir / name).string() + "'");
    out << content;
  };
  put("report.json", report_text(run));
  for (const auto& f : run.files) put(f.name, f.content);
  json meta = {{"schema", kReportSchema}, {"wall_seconds", wall_seconds}, {"exit_code", run.exit_code}};
  put("run_meta.json", meta.dump(2) + "\n");
}

}  // namespace cdlab
