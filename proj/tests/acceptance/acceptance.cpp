// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "brute_force.hpp"
#include "cdlab/cdcheck.hpp"
#include "cdlab/commands.hpp"
#include "cdlab/convexity.hpp"
#include "cdlab/network_simplex.hpp"
#include "cdlab/transport.hpp"

using namespace cdlab;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
  std::printf("[%s] %2d %-28s %s\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const nlohmann::json& check(const RunReport& r, const std::string& id) {
  for (const auto& c : r.report["checks"]) {
    if (c["id"] == id) return c;
  }
  throw Error("report has no check '" + id + "'");
}

// Smallest pairwise refinement order log2(e_coarse / e_fine). Errors that are
// already zero at the coarser level count as converged.
double min_order(const std::vector<double>& e) {
  double order = INFINITY;
  for (std::size_t i = 0; i + 1 < e.size(); ++i) {
    if (e[i] == 0.0) continue;
    order = std::min(order, e[i + 1] == 0.0 ? INFINITY : std::log2(e[i] / e[i + 1]));
  }
  return order;
}

struct Instance {
  std::string name;
  std::function<double(double, double)> source, target;
};

const std::vector<Instance>& instances() {
  static const std::vector<Instance> list{
      {"blocks",
       [](double x, double) { return x >= -0.875 && x <= -0.5 ? 1.0 : 0.0; },
       [](double x, double) { return x >= 0.125 && x <= 0.875 ? 1.0 : 0.0; }},
      {"smooth",
       [](double x, double u) {
         return x >= -0.875 && x <= -0.375 ? (1 + 0.3 * std::sin(3 * x)) * (1 + 0.2 * std::cos(3 * u)) : 0.0;
       },
       [](double x, double u) { return x >= 0.125 && x <= 0.875 ? (1 + 0.3 * std::cos(2 * x)) * (1 + 0.2 * u) : 0.0; }},
  };
  return list;
}

std::shared_ptr<const Grid> main_grid(int nx, int nu) {
  return build_grid(make_compact_space(preset_profile("valley", kDefaultK), kDefaultK, 16.0), nx, nu);
}

void marginal_identity() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (const char* name : {"constant", "valley", "wave", "tilt", "bump"}) {
    for (int nx : {64, 128, 256}) {
      const auto grid = build_grid(make_compact_space(preset_profile(name, kDefaultK), kDefaultK, 16.0), nx, 16);
      for (Eigen::Index i = 0; i < nx; ++i) {
        worst = std::max(worst, std::abs(grid->column_mass(i) / grid->dx() - grid->ck()));
      }
    }
  }
  const double t = seconds_since(t0);
  report(1, "marginal-identity", worst <= 1e-10 && t < 1.0, fmt("max deviation %.2e, %.2f s", worst, t));
}

void convexity_calculus(const RunReport& conv, double t) {
  bool ok = t < 30.0;
  std::string failed;
  for (const char* id : {"neg-log-is-(0,1)-convex", "quadratic-is-(0,2K)-convex", "additivity-random-pairs",
                         "bump-certificate-grid"}) {
    if (!check(conv, id)["passed"].get<bool>()) {
      ok = false;
      failed += std::string(" ") + id;
    }
  }
  report(2, "convexity-calculus", ok, fmt("suite %.1f s%s", t, failed.empty() ? "" : (" failed:" + failed).c_str()));
}

void line_estimate(const RunReport& conv) {
  const auto& c = check(conv, "line-restriction-estimate");
  report(3, "line-estimate", c["passed"].get<bool>(), c["metrics"].dump());
}

struct CdOutcome {
  bool ok = true;
  bool monotone = true;
  std::string detail;
};

CdOutcome main_cd_verification() {
  CdOutcome out;
  double t256 = 0.0;
  for (const Instance& inst : instances()) {
    std::vector<double> deficits;
    double worst = INFINITY;
    bool entropy_ok = true;
    for (int nx : {64, 128, 256}) {
      const auto t0 = Clock::now();
      const auto g = main_grid(nx, 16);
      const DiscreteMeasure mu0 = DiscreteMeasure::from_shape(g, inst.source);
      const DiscreteMeasure mu1 = DiscreteMeasure::from_shape(g, inst.target);
      const StructuredMapResult sm = build_structured_map(mu0, mu1);
      const CdReport r1 = pointwise_cd_check(mu0, sm.grid_map, 515.0);
      const CdReport r2 = pointwise_cd_check(mu0, sm.grid_map, 1030.0);
      const MidpointEntropyReport me = midpoint_entropy_test(mu0, mu1, sm.map, {515.0, 1030.0});
      if (nx == 256) t256 += seconds_since(t0);
      deficits.push_back(slack_deficit(r1));
      worst = std::min(worst, r1.min_slack);
      entropy_ok = entropy_ok && me.pass && me.verdicts.size() == 3;
      out.ok = out.ok && r1.pass;
      out.monotone = out.monotone && (!r1.pass || r2.pass);
    }
    const double order = min_order(deficits);
    out.ok = out.ok && entropy_ok && order >= 1.0;
    out.detail += fmt("%s: min slack %.2e, deficit order %s, entropy %s; ", inst.name.c_str(), worst,
                      std::isinf(order) ? "converged" : fmt("%.2f", order).c_str(), entropy_ok ? "ok" : "FAILED");
  }
  out.ok = out.ok && t256 < 120.0;
  out.detail += fmt("nx=256 %.1f s", t256);
  return out;
}

void transport_exactness() {
  std::mt19937_64 rng(20241019);
  std::uniform_int_distribution<int> size(1, 4);
  std::uniform_real_distribution<double> U(0.05, 1.0);
  int matched = 0;
  double worst_gap = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int m = size(rng), n = size(rng);
    Eigen::ArrayXd a(m), b(n);
    for (int i = 0; i < m; ++i) a(i) = U(rng);
    for (int j = 0; j < n; ++j) b(j) = U(rng);
    b *= a.sum() / b.sum();
    Eigen::MatrixXd c(m, n);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) c(i, j) = trial % 2 ? U(rng) : std::floor(8 * U(rng)) / 8;
    const TransportationResult r = solve_transportation(a, b, c);
    const double oracle = testing::brute_force_transport(a, b, c);
    if (std::abs(r.cost - oracle) <= 1e-12 * std::max(1.0, std::abs(oracle))) ++matched;
    worst_gap = std::max(worst_gap, std::abs(r.cost - r.dual_objective) / std::max(1.0, std::abs(r.cost)));
  }
  // Grid-scale solves.
  for (int nx : {16, 32}) {
    const auto g = main_grid(nx, 4);
    const OtSolution s = solve_discrete_ot(uniform_block(g, -0.9, -0.2), uniform_block(g, 0.1, 0.9, 0.0, 0.5),
                                           CostKind::DistInfSquared);
    worst_gap = std::max(worst_gap, std::abs(s.duality_gap) / std::max(1.0, std::abs(s.plan.cost)));
  }
  report(6, "transport-exactness", matched == 100 && worst_gap <= 1e-9,
         fmt("%d/100 match enumeration, max relative duality gap %.2e", matched, worst_gap));
}

void jacobi_residual_order() {
  const Instance& inst = instances()[1];
  std::vector<double> means, maxes;
  for (int nx : {64, 128, 256}) {
    const auto g = main_grid(nx, nx / 4);
    const DiscreteMeasure mu0 = DiscreteMeasure::from_shape(g, inst.source);
    const DiscreteMeasure mu1 = DiscreteMeasure::from_shape(g, inst.target);
    const StructuredMapResult sm = build_structured_map(mu0, mu1);
    const JacobiResidual jr = jacobi_residual(mu0, mu1, sm.grid_map);
    means.push_back(jr.mean_residual);
    maxes.push_back(jr.max_residual);
  }
  const double order = min_order(means);
  report(7, "jacobi-residual", order >= 1.0 && maxes.back() <= 1e-2,
         fmt("mean %.2e %.2e %.2e (order %.2f), max %.2e %.2e %.2e", means[0], means[1], means[2], order, maxes[0],
             maxes[1], maxes[2]));
}

void box_dimension_criterion() {
  const SpaceParams sp = make_compact_space(preset_profile("ramp-smoothed", 0.2), 0.2, 16.0, true);
  std::vector<double> eps;
  for (int e = 5; e <= 10; ++e) eps.push_back(std::ldexp(1.0, -e));
  const double l = box_dimension(sp, BoxRegion::Left, eps).slope;
  const double r = box_dimension(sp, BoxRegion::Right, eps).slope;
  const double s = box_dimension(sp, BoxRegion::UnitSquare, eps).slope;
  const bool ok = std::abs(l - 1.0) <= 0.15 && std::abs(r - 2.0) <= 0.3 && std::abs(s - 2.0) <= 0.1;
  report(8, "non-constant-dimension", ok,
         fmt("slopes left %.3f, right %.3f, square %.3f over %zu scales", l, r, s, eps.size()));
}

void branching_no_map() {
  const Config cfg;
  const RunReport br = run_command("counterexample", "branching", cfg);
  const RunReport nm = run_command("counterexample", "no-map", cfg);
  const bool singular = check(br, "branching-witness-singular-space")["passed"].get<bool>();
  const bool cone = check(br, "branching-witness-cone-space")["passed"].get<bool>();
  const bool no_map = check(nm, "no-optimal-plan-is-a-map")["passed"].get<bool>();
  const auto& cost = check(nm, "cost-constant-over-fiber");
  report(9, "branching-and-no-map", singular && cone && no_map && cost["passed"].get<bool>(),
         fmt("witness singular %s, cone %s; no map %s; cost residual %s", singular ? "yes" : "no", cone ? "yes" : "no",
             no_map ? "yes" : "no", cost["metrics"]["max_residual"].dump().c_str()));
}

void mgh_criterion() {
  const RunReport r = run_command("mgh", "", Config{});
  const bool h = check(r, "hausdorff-within-epsilon")["passed"].get<bool>();
  const bool w = check(r, "w1-strictly-decreasing")["passed"].get<bool>();
  const auto& lim = check(r, "w1-extrapolated-limit");
  report(10, "mgh-approximation", h && w && lim["passed"].get<bool>(),
         fmt("hausdorff bounded %s, W1 decreasing %s, limit %s", h ? "yes" : "no", w ? "yes" : "no",
             lim["metrics"]["limit"].dump().c_str()));
}

void strict_search() {
  const RunReport r = run_command("counterexample", "strict", Config{});
  const bool done = check(r, "restriction-search-completed")["passed"].get<bool>();
  const auto& p = r.report["parameters"];
  report(11, "strict-cd-search", done,
         fmt("%s; best restriction %s with slack %s", r.report["verdict"].get<std::string>().c_str(),
             p["best_restriction"].get<std::string>().c_str(), p["best_slack"].dump().c_str()));
}

void determinism() {
  bool same = true;
  for (const auto& [cmd, variant] : std::vector<std::pair<std::string, std::string>>{
           {"convexity", ""}, {"verify-cd", ""}, {"counterexample", "strict"}}) {
    Config c;
    c.set("seed", "99");
    if (cmd == "verify-cd") c.set("space.nx", "64");
    same = same && report_text(run_command(cmd, variant, c)) == report_text(run_command(cmd, variant, c));
  }
  report(12, "determinism", same, same ? "byte-identical reports" : "reports differ");
}

}  // namespace

int main() {
  try {
    marginal_identity();

    const auto t0 = Clock::now();
    const RunReport conv = run_command("convexity", "", Config{});
    const double t_conv = seconds_since(t0);
    convexity_calculus(conv, t_conv);
    line_estimate(conv);

    const CdOutcome cd = main_cd_verification();
    report(4, "main-cd-verification", cd.ok, cd.detail);
    report(5, "power-mean-monotonicity", cd.monotone, "pass at N' implies pass at 2N' on every instance");

    transport_exactness();
    jacobi_residual_order();
    box_dimension_criterion();
    branching_no_map();
    mgh_criterion();
    strict_search();
    determinism();
  } catch (const std::exception& e) {
    std::printf("[FAIL] acceptance aborted: %s\n", e.what());
    return 1;
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
