#include "cdlab/cdcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>

#include "cdlab/error.hpp"

namespace cdlab {

using Eigen::Index;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double fiber_u(const ProfileFn& f, const Point2& p) {
  const double fx = f(p.x());
  return fx > 0.0 ? p.y() / fx : 0.0;
}

}  // namespace

// ---------------------------------------------------------------------------

CdReport pointwise_cd_check(const DiscreteMeasure& mu0, const MonotoneMapGrid& map, double N_prime, double tol) {
  if (!(N_prime > 1.0) || !std::isfinite(N_prime)) throw PreconditionError("pointwise_cd_check: N' must be finite and > 1");
  if (mu0.grid_ptr() != map.grid_ptr()) throw PreconditionError("pointwise_cd_check: map and measure use different grids");
  const Grid& g = mu0.grid();
  const SpaceParams& params = g.params();

  // The midpoint map sampled on the same cells, so its Jacobian uses the same
  // stencils as the one of T.
  Eigen::ArrayXd S1 = Eigen::ArrayXd::Constant(g.cell_count(), std::nan(""));
  Eigen::ArrayXd S2 = S1;
  for (Index c : map.support()) {
    const Point2 s = midpoint(g.cell(c).center, map.image(c), params.f);
    S1(c) = s.x();
    S2(c) = s.y();
  }
  const MonotoneMapGrid smap(map.grid_ptr(), map.support(), S1, S2);

  CdReport r;
  r.N_prime = N_prime;
  r.tol = tol;
  r.min_slack = kInf;
  const double inv = 1.0 / N_prime;
  for (Index c : map.support()) {
    const Point2 z = g.cell(c).center;
    const Point2 w = map.image(c);
    const Point2 s(S1(c), S2(c));
    ++r.case_counts[static_cast<std::size_t>(classify_pair(z, w))];
    const JacobianValue JT = jacobian(map, c);
    const JacobianValue JS = jacobian(smap, c);
    if (!(JT.value > 0.0) || !(JS.value > 0.0)) {
      ++r.degenerate_points;
      continue;
    }
    if (JT.boundary || JS.boundary) ++r.boundary_points;
    const double slack = std::pow(density_m(s, params) * JS.value, inv) -
                         0.5 * std::pow(density_m(w, params) * JT.value, inv) -
                         0.5 * std::pow(density_m(z, params), inv);
    r.slacks.push_back({z.x(), z.y(), slack});
    ++r.points;
    if (slack < r.min_slack) {
      r.min_slack = slack;
      r.argmin = z;
    }
  }
  if (r.points == 0) throw PreconditionError("pointwise_cd_check: no cell with a positive Jacobian");
  r.pass = r.min_slack >= -tol;
  return r;
}

void write_slack_csv(std::ostream& os, const CdReport& report) {
  os << "x,y,slack\n";
  os.precision(17);
  for (const auto& p : report.slacks) os << p.x << ',' << p.y << ',' << p.slack << '\n';
}

namespace {

// Bilinear interpolation in (x, u) of a cell-centered density; neighbors
// outside the support fall back to the value of the containing cell.
double interpolate_density(const DiscreteMeasure& mu, const Point2& p) {
  const Grid& g = mu.grid();
  const Index c = g.locate(p);
  if (c < 0) return std::nan("");
  const Cell& cell = g.cell(c);
  if (cell.is_atom()) return mu.rho()(c);
  const double u = fiber_u(g.params().f, p);
  const Index i = cell.column;
  const int j = cell.level;
  const Index in = p.x() >= cell.center.x() ? i + 1 : i - 1;
  const int jn = u >= cell.u_center ? j + 1 : j - 1;
  auto value = [&](Index col, int lev) {
    if (col < 0 || col >= g.nx() || lev < 0 || lev >= g.nu() || g.singular_column(col)) return mu.rho()(c);
    const double v = mu.rho()(g.cell_index(col, lev));
    return v > 0.0 ? v : mu.rho()(c);
  };
  const double sx = std::abs(p.x() - cell.center.x()) / g.dx();
  const double su = std::abs(u - cell.u_center) * g.nu();
  return (1 - sx) * (1 - su) * value(i, j) + sx * (1 - su) * value(in, j) + (1 - sx) * su * value(i, jn) +
         sx * su * value(in, jn);
}

}  // namespace

JacobiResidual jacobi_residual(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1, const MonotoneMapGrid& map) {
  const Grid& g = mu0.grid();
  const SpaceParams& params = g.params();
  const Eigen::ArrayXd mass = mu0.masses();
  JacobiResidual out;
  double sum = 0.0, wsum = 0.0;
  for (Index c : map.support()) {
    const JacobianValue J = jacobian(map, c);
    const double r1 = interpolate_density(mu1, map.image(c));
    if (J.boundary || !std::isfinite(r1)) {
      ++out.boundary_points;
      continue;
    }
    const Point2 z = g.cell(c).center;
    const double lhs = r1 * density_m(map.image(c), params) * J.value;
    const double rhs = mu0.rho()(c) * density_m(z, params);
    const double res = std::abs(lhs - rhs) / rhs;
    out.max_residual = std::max(out.max_residual, res);
    sum += mass(c) * res;
    wsum += mass(c);
    ++out.interior_points;
  }
  if (out.interior_points == 0) throw PreconditionError("jacobi_residual: no interior cell");
  out.mean_residual = sum / wsum;
  return out;
}

// ---------------------------------------------------------------------------

namespace {

// Spreads `mass` over the (x, u)-box [xa, xb] x [ua, ub] in proportion to m.
// A degenerate side acts as a point. Returns the mass that fell outside.
double deposit_box(const Grid& g, double xa, double xb, double ua, double ub, double mass, Eigen::ArrayXd& out) {
  const double K = g.params().K;
  const auto& xe = g.x_edges();
  const auto& ue = g.u_edges();
  const int nu = g.nu();
  ua = std::clamp(ua, 0.0, 1.0);
  ub = std::clamp(ub, 0.0, 1.0);
  const bool point_x = !(xb > xa);
  const double Ea = gaussian_primitive(ua, K), Eb = gaussian_primitive(ub, K);
  const bool point_u = !(Eb > Ea);

  auto level_share = [&](int j) {
    if (point_u) {
      const int jp = std::clamp(static_cast<int>(std::floor(ua * nu)), 0, nu - 1);
      return j == jp ? 1.0 : 0.0;
    }
    const double lo = std::max(ua, ue(j)), hi = std::min(ub, ue(j + 1));
    return hi > lo ? (gaussian_primitive(hi, K) - gaussian_primitive(lo, K)) / (Eb - Ea) : 0.0;
  };

  double placed = 0.0;
  Index i0 = g.column_of(point_x ? xa : std::max(xa, xe(0)));
  Index i1 = g.column_of(point_x ? xa : std::min(xb, xe(g.nx())));
  if (i0 < 0 || i1 < 0) return mass;
  for (Index i = i0; i <= i1; ++i) {
    double share = 1.0;
    if (!point_x) {
      const double lo = std::max(xa, xe(i)), hi = std::min(xb, xe(i + 1));
      if (!(hi > lo)) continue;
      share = (hi - lo) / (xb - xa);
    }
    if (g.singular_column(i)) {
      out(g.column_begin(i)) += mass * share;
      placed += mass * share;
      continue;
    }
    for (int j = 0; j < nu; ++j) {
      const double s = share * level_share(j);
      if (s > 0.0) {
        out(g.cell_index(i, j)) += mass * s;
        placed += mass * s;
      }
    }
  }
  return mass - placed;
}

}  // namespace

MidpointEntropyReport midpoint_entropy_test(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1,
                                            const StructuredMap& T, const std::vector<double>& N_list, double tol) {
  if (mu0.grid_ptr() != mu1.grid_ptr()) throw PreconditionError("midpoint_entropy_test: measures must share a grid");
  const Grid& g = mu0.grid();
  const ProfileFn& f = g.params().f;

  auto S = [&](double x, double u) {
    const Point2 z(x, u * f(x));
    const auto [t1, U] = T.map_xu(x, u);
    const Point2 m = midpoint(z, Point2(t1, U * f(t1)), f);
    return std::pair{m.x(), fiber_u(f, m)};
  };

  const Eigen::ArrayXd masses = mu0.masses();
  Eigen::ArrayXd out = Eigen::ArrayXd::Zero(g.cell_count());
  double lost = 0.0;
  for (Index c : mu0.support()) {
    const Cell& cell = g.cell(c);
    if (cell.is_atom()) throw PreconditionError("midpoint_entropy_test: source mass on a singular column");
    const Index i = cell.column;
    const double xl = g.x_edges()(i);
    const double xr = std::nextafter(g.x_edges()(i + 1), xl);  // left limit inside column i
    const double xa = S(xl, cell.u_center).first, xb = S(xr, cell.u_center).first;
    const double ua = S(cell.center.x(), g.u_edges()(cell.level)).second;
    const double ub = S(cell.center.x(), g.u_edges()(cell.level + 1)).second;
    lost += deposit_box(g, std::min(xa, xb), std::max(xa, xb), std::min(ua, ub), std::max(ua, ub), masses(c), out);
  }
  if (std::abs(lost) > 1e-8) {
    throw AuditError("midpoint_entropy_test: re-binning lost mass " + std::to_string(lost));
  }
  out /= out.sum();

  MidpointEntropyReport r;
  r.mass_loss = lost;
  r.midpoint_measure = std::make_shared<const DiscreteMeasure>(DiscreteMeasure::from_masses(mu0.grid_ptr(), out));
  const DiscreteMeasure& mh = *r.midpoint_measure;
  r.pass = true;
  auto add = [&](double N, double s0, double s1, double sh) {
    EntropyVerdict v{N, s0, s1, sh, 0.5 * s0 + 0.5 * s1 - sh, false};
    v.passed = v.slack >= -tol;
    r.pass = r.pass && v.passed;
    r.verdicts.push_back(v);
  };
  for (double N : N_list) add(N, renyi_entropy(mu0, N), renyi_entropy(mu1, N), renyi_entropy(mh, N));
  add(kInf, boltzmann_entropy(mu0), boltzmann_entropy(mu1), boltzmann_entropy(mh));
  return r;
}

// ---------------------------------------------------------------------------

namespace {

double hausdorff_to_subgraph(const ProfileFn& f, double eps, double x_min, double x_max) {
  // X_f is inside X_{f+eps}, so only points of the larger set count, and the
  // farthest ones lie on its top boundary.
  constexpr int kOuter = 2049;
  constexpr int kInner = 64;
  double worst = 0.0;
  for (int a = 0; a < kOuter; ++a) {
    const double x = x_min + (x_max - x_min) * a / (kOuter - 1);
    const double y = f(x) + eps;
    double best = eps;
    for (int b = -kInner; b <= kInner; ++b) {
      const double xp = x + eps * b / kInner;
      if (xp < x_min || xp > x_max) continue;
      best = std::min(best, std::max(std::abs(x - xp), std::max(0.0, y - f(xp))));
    }
    worst = std::max(worst, best);
  }
  return worst;
}

DiscreteMeasure normalized_reference(std::shared_ptr<const Grid> g) {
  Eigen::ArrayXd w = g->weights();
  w /= w.sum();
  return DiscreteMeasure::from_masses(std::move(g), w);
}

}  // namespace

MghTrace mgh_harness(const ProfileFn& f_singular, const std::vector<double>& eps_list, double k, double K, int nx,
                     int nu) {
  if (eps_list.size() < 2) throw PreconditionError("mgh_harness: need at least two epsilons");
  for (std::size_t i = 0; i < eps_list.size(); ++i) {
    if (!(eps_list[i] > 0.0) || (i > 0 && !(eps_list[i] < eps_list[i - 1]))) {
      throw PreconditionError("mgh_harness: epsilons must be positive and strictly decreasing");
    }
  }
  if (validate_membership(f_singular, k).profile_class == ProfileClass::Rejected) {
    throw PreconditionError("mgh_harness: profile is not in the closure of the class");
  }
  for (double eps : eps_list) {
    if (validate_membership(f_singular.shifted(eps), k).profile_class != ProfileClass::Fk) {
      throw PreconditionError("mgh_harness: f + " + std::to_string(eps) + " leaves the profile class");
    }
  }

  const auto gs = build_grid(make_compact_space(f_singular, k, K, true), nx, nu);
  const DiscreteMeasure ref = normalized_reference(gs);

  MghTrace t;
  t.epsilons = eps_list;
  for (double eps : eps_list) {
    const ProfileFn fe = f_singular.shifted(eps);
    t.hausdorff.push_back(hausdorff_to_subgraph(f_singular, eps, -1.0, 1.0));
    const auto gr = build_grid(make_compact_space(fe, k, K, false), nx, nu);
    t.w1.push_back(w1_distance(normalized_reference(gr), ref));
  }
  const std::size_t n = eps_list.size();
  t.extrapolated_limit = 2.0 * t.w1[n - 1] - t.w1[n - 2];
  t.hausdorff_bounded = true;
  t.w1_decreasing = true;
  for (std::size_t i = 0; i < n; ++i) {
    if (t.hausdorff[i] > eps_list[i] * (1.0 + 1e-12)) {
      throw AuditError("mgh_harness: Hausdorff distance exceeds epsilon");
    }
    if (i > 0 && !(t.w1[i] < t.w1[i - 1])) t.w1_decreasing = false;
  }
  return t;
}

// ---------------------------------------------------------------------------

std::string_view to_string(BoxRegion r) {
  switch (r) {
    case BoxRegion::Left: return "left";
    case BoxRegion::Right: return "right";
    case BoxRegion::UnitSquare: return "unit-square";
  }
  return "?";
}

namespace {

// Boxes [i e, (i+1) e) x [j e, (j+1) e) meeting {a <= x <= b, 0 <= y <= top(x)}.
double count_subgraph(const std::function<double(double)>& top, double a, double b, double eps) {
  constexpr int kSamples = 33;
  const long i0 = static_cast<long>(std::floor(a / eps));
  const long i1 = static_cast<long>(std::floor(b / eps));
  double n = 0.0;
  for (long i = i0; i <= i1; ++i) {
    const double lo = std::max(a, static_cast<double>(i) * eps);
    const double hi = std::min(b, static_cast<double>(i + 1) * eps);
    if (lo > hi) continue;
    double h = 0.0;
    for (int s = 0; s < kSamples; ++s) h = std::max(h, top(lo + (hi - lo) * s / (kSamples - 1)));
    n += std::floor(h / eps) + 1.0;
  }
  return n;
}

}  // namespace

BoxDimensionReport box_dimension(const SpaceParams& params, BoxRegion region, const std::vector<double>& eps_list) {
  if (eps_list.size() < 3) throw PreconditionError("box_dimension: need at least three scales");
  for (double e : eps_list) {
    if (!(e > 0.0)) throw PreconditionError("box_dimension: scales must be positive");
  }
  const ProfileFn& f = params.f;
  const double x_min = params.x_min(), x_max = params.x_max();
  if (region != BoxRegion::UnitSquare) {
    constexpr int kAudit = 4096;
    for (int a = 0; a <= kAudit; ++a) {
      const double xl = x_min * a / kAudit;            // [x_min, 0]
      const double xr = x_max * (a + 1) / (kAudit + 1);  // (0, x_max)
      if (f(xl) != 0.0 || !(f(xr) > 0.0)) {
        throw PreconditionError("box_dimension: f must vanish exactly on [x_min, 0] and nowhere else");
      }
    }
  }

  BoxDimensionReport r;
  r.region = region;
  r.epsilons = eps_list;
  for (double e : eps_list) {
    switch (region) {
      case BoxRegion::Left: r.counts.push_back(count_subgraph([](double) { return 0.0; }, x_min, 0.0, e)); break;
      case BoxRegion::Right: r.counts.push_back(count_subgraph([&](double x) { return f(x); }, 0.0, x_max, e)); break;
      case BoxRegion::UnitSquare: r.counts.push_back(count_subgraph([](double) { return 1.0; }, 0.0, 1.0, e)); break;
    }
  }

  const Index n = static_cast<Index>(eps_list.size());
  Eigen::MatrixXd A(n, 2);
  Eigen::VectorXd b(n);
  for (Index i = 0; i < n; ++i) {
    A(i, 0) = std::log(1.0 / eps_list[static_cast<std::size_t>(i)]);
    A(i, 1) = 1.0;
    b(i) = std::log(r.counts[static_cast<std::size_t>(i)]);
  }
  const Eigen::Vector2d sol = A.colPivHouseholderQr().solve(b);
  r.slope = sol(0);
  r.intercept = sol(1);
  return r;
}

// ---------------------------------------------------------------------------

GeodesicFamily plan_family(const TransportPlan& plan, int depth) {
  const ProfileFn& f = plan.source_grid->params().f;
  GeodesicFamily fam;
  for (const PlanEntry& e : plan.entries) {
    const Point2 p = plan.source_grid->cell(e.source).center;
    const Point2 q = plan.target_grid->cell(e.target).center;
    fam.curves.push_back(geodesic_refine(p, q, f, depth));
    fam.weights.push_back(e.mass);
    fam.source_cells.push_back(e.source);
    fam.target_cells.push_back(e.target);
  }
  return fam;
}

namespace {

constexpr double kAgreementTol = 1e-10;

// Last stored time up to which two curves agree, or -1 if they differ at 0.
Index agreement_end(const SampledCurve& a, const SampledCurve& b, double& defect) {
  defect = 0.0;
  Index last = -1;
  for (Index i = 0; i < a.size(); ++i) {
    const double d = dist_inf(a.point(i), b.point(i));
    if (d > kAgreementTol) break;
    defect = std::max(defect, d);
    last = i;
  }
  return last;
}

}  // namespace

BranchingReport branching_demo(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1, int depth) {
  const OtSolution sol = solve_discrete_ot(mu0, mu1, CostKind::DistInfSquared);
  const GeodesicFamily fam = plan_family(sol.plan, depth);
  const ProfileFn& f = mu0.grid().params().f;

  BranchingReport r;
  r.plan_cost = sol.plan.cost;
  r.duality_gap = sol.duality_gap;
  r.family_size = static_cast<long>(fam.size());

  // Curves are grouped by source since plan entries are sorted.
  std::size_t a = 0;
  while (a < fam.size()) {
    std::size_t b = a;
    while (b < fam.size() && fam.source_cells[b] == fam.source_cells[a]) ++b;
    if (b - a >= 2) {
      ++r.splitting_sources;
      // Extreme targets of this source give the largest separation.
      std::size_t lo = a, hi = a;
      for (std::size_t c = a; c < b; ++c) {
        if (fam.curves[c].back().y() < fam.curves[lo].back().y()) lo = c;
        if (fam.curves[c].back().y() > fam.curves[hi].back().y()) hi = c;
      }
      double defect = 0.0;
      const Index end = agreement_end(fam.curves[lo], fam.curves[hi], defect);
      const double sep = dist_inf(fam.curves[lo].back(), fam.curves[hi].back());
      if (end > 0 && sep > 0.0 && (!r.witness || fam.curves[lo].ts(end) > r.witness->t_star)) {
        BranchingWitness w;
        w.t_star = fam.curves[lo].ts(end);
        w.branch_point = fam.curves[lo].point(end);
        w.first = fam.curves[lo];
        w.second = fam.curves[hi];
        w.separation = sep;
        w.agreement_defect = defect;
        r.witness = std::move(w);
        r.witness_source = fam.source_cells[a];
      }
    }
    a = b;
  }
  r.verified = r.witness && r.witness->t_star > 0.0 && r.witness->separation > 0.0 &&
               r.witness->agreement_defect <= kAgreementTol;

  // Plan independence: every source reaches the lowest and highest cell of a
  // target column through the same forced segment.
  const Grid& tg = mu1.grid();
  const std::vector<Index> tsupp = mu1.support();
  if (!tsupp.empty()) {
    const Index col = tg.cell(tsupp.front()).column;
    Index qlo = -1, qhi = -1;
    for (Index c : tsupp) {
      if (tg.cell(c).column != col) continue;
      if (qlo < 0 || tg.cell(c).center.y() < tg.cell(qlo).center.y()) qlo = c;
      if (qhi < 0 || tg.cell(c).center.y() > tg.cell(qhi).center.y()) qhi = c;
    }
    bool all = qlo != qhi;
    for (Index s : mu0.support()) {
      if (!all) break;
      try {
        const BranchingWitness w = forced_segment_witness(f, mu0.grid().cell(s).center, tg.cell(qlo).center,
                                                          tg.cell(qhi).center, depth);
        all = w.t_star > 0.0 && w.agreement_defect <= kAgreementTol && w.separation > 0.0;
      } catch (const PreconditionError&) {
        all = false;
      }
    }
    r.forced_for_every_source = all;
  }
  return r;
}

// ---------------------------------------------------------------------------

NoMapReport no_map_demo(const ProfileFn& f, const std::vector<double>& source_x, const std::vector<double>& source_mass,
                        double x_fiber, const std::vector<double>& target_y, const std::vector<double>& target_mass) {
  const std::size_t ns = source_x.size(), nt = target_y.size();
  if (ns == 0 || nt == 0 || source_mass.size() != ns || target_mass.size() != nt) {
    throw PreconditionError("no_map_demo: empty input or size mismatch");
  }
  const double height = f(x_fiber);
  double gap = kInf, top = 0.0;
  for (double x : source_x) {
    if (f(x) != 0.0) throw PreconditionError("no_map_demo: source atoms must lie on {f = 0}");
    gap = std::min(gap, std::abs(x - x_fiber));
  }
  for (double y : target_y) {
    if (y < 0.0 || y > height) throw PreconditionError("no_map_demo: target point outside the fiber");
    top = std::max(top, y);
  }
  if (!(top < gap)) throw PreconditionError("no_map_demo: the fiber must be shorter than the horizontal gap");
  const double log_maps = static_cast<double>(ns) * std::log2(static_cast<double>(nt));
  if (log_maps > 20.0) throw PreconditionError("no_map_demo: more than 2^20 assignments to enumerate");

  NoMapReport r;
  r.sources = static_cast<long>(ns);
  r.targets = static_cast<long>(nt);

  Eigen::Matrix<double, Eigen::Dynamic, 2> P(static_cast<Index>(ns), 2), Q(static_cast<Index>(nt), 2);
  Eigen::ArrayXd a(static_cast<Index>(ns)), b(static_cast<Index>(nt));
  for (std::size_t i = 0; i < ns; ++i) {
    P.row(static_cast<Index>(i)) << source_x[i], 0.0;
    a(static_cast<Index>(i)) = source_mass[i];
    double cmin = kInf, cmax = -kInf;
    for (std::size_t j = 0; j < nt; ++j) {
      const double d = dist_inf(Point2(source_x[i], 0.0), Point2(x_fiber, target_y[j]));
      cmin = std::min(cmin, d * d);
      cmax = std::max(cmax, d * d);
    }
    r.cost_residual = std::max(r.cost_residual, cmax - cmin);
  }
  for (std::size_t j = 0; j < nt; ++j) {
    Q.row(static_cast<Index>(j)) << x_fiber, target_y[j];
    b(static_cast<Index>(j)) = target_mass[j];
  }

  // Odometer over all assignments sigma: sources -> targets.
  std::vector<std::size_t> sigma(ns, 0);
  std::vector<double> load(nt);
  for (;;) {
    ++r.maps_enumerated;
    std::fill(load.begin(), load.end(), 0.0);
    for (std::size_t i = 0; i < ns; ++i) load[sigma[i]] += source_mass[i];
    bool feasible = true;
    for (std::size_t j = 0; j < nt && feasible; ++j) feasible = std::abs(load[j] - target_mass[j]) <= 1e-12;
    if (feasible) ++r.feasible_maps;
    std::size_t pos = 0;
    while (pos < ns && ++sigma[pos] == nt) sigma[pos++] = 0;
    if (pos == ns) break;
  }

  const TransportationResult sol = solve_transportation(a, b, P, Q, PointCost::DistInfSquared);
  r.optimal_cost = sol.cost;
  std::vector<int> outdeg(ns, 0);
  for (const FlowEntry& e : sol.flows) {
    if (e.mass > 1e-12 * source_mass[static_cast<std::size_t>(e.i)]) ++outdeg[static_cast<std::size_t>(e.i)];
  }
  r.solver_plan_is_map = std::all_of(outdeg.begin(), outdeg.end(), [](int d) { return d == 1; });
  r.pass = r.cost_residual <= 1e-15 && r.feasible_maps == 0 && !r.solver_plan_is_map;
  return r;
}

// ---------------------------------------------------------------------------

std::vector<Restriction> default_restrictions(const GeodesicFamily& family, const Grid& target_grid) {
  const std::size_t n = family.size();
  if (family.target_cells.size() != n || family.source_cells.size() != n) {
    throw PreconditionError("default_restrictions: family lacks cell indices");
  }
  std::vector<Restriction> out;
  out.push_back({"all", std::vector<double>(n, 1.0)});
  Restriction upper{"upper-half-targets", std::vector<double>(n, 0.0)};
  Restriction lower{"lower-half-targets", std::vector<double>(n, 0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    (target_grid.cell(family.target_cells[i]).u_center > 0.5 ? upper : lower).weights[i] = 1.0;
  }
  out.push_back(std::move(upper));
  out.push_back(std::move(lower));

  std::vector<double> xs;
  for (const auto& c : family.curves) xs.push_back(c.front().x());
  std::vector<double> sorted = xs;
  std::sort(sorted.begin(), sorted.end());
  const double median = sorted.empty() ? 0.0 : sorted[sorted.size() / 2];
  Restriction left{"left-half-sources", std::vector<double>(n, 0.0)};
  for (std::size_t i = 0; i < n; ++i) left.weights[i] = xs[i] < median ? 1.0 : 0.0;
  out.push_back(std::move(left));

  Restriction single{"single-curve", std::vector<double>(n, 0.0)};
  if (n > 0) {
    const auto heaviest = std::max_element(family.weights.begin(), family.weights.end()) - family.weights.begin();
    single.weights[static_cast<std::size_t>(heaviest)] = 1.0;
  }
  out.push_back(std::move(single));
  return out;
}

RestrictionSearchReport strict_cd_restriction_search(const GeodesicFamily& family, std::shared_ptr<const Grid> grid,
                                                     const std::vector<Restriction>& restrictions, double N,
                                                     double tol) {
  if (restrictions.empty()) throw PreconditionError("strict_cd_restriction_search: empty dictionary");
  const Eigen::ArrayXd weights = grid->weights();
  RestrictionSearchReport rep;
  rep.N = N;
  rep.tol = tol;

  auto entropy_at = [&](const std::vector<double>& w, double t) {
    Eigen::ArrayXd mass = Eigen::ArrayXd::Zero(grid->cell_count());
    for (std::size_t i = 0; i < family.size(); ++i) {
      if (w[i] == 0.0) continue;
      const Index c = grid->locate(family.curves[i].at(t));
      if (c < 0) throw AuditError("strict_cd_restriction_search: curve point outside the grid");
      mass(c) += w[i];
    }
    return renyi_entropy(mass / weights, weights, N);
  };

  for (const Restriction& res : restrictions) {
    if (res.weights.size() != family.size()) {
      throw PreconditionError("strict_cd_restriction_search: restriction '" + res.name + "' has the wrong length");
    }
    std::vector<double> w(family.size());
    double total = 0.0;
    long count = 0;
    for (std::size_t i = 0; i < family.size(); ++i) {
      if (res.weights[i] < 0.0) throw PreconditionError("strict_cd_restriction_search: negative weight");
      w[i] = res.weights[i] * family.weights[i];
      total += w[i];
      if (w[i] > 0.0) ++count;
    }
    if (!(total > 0.0)) {
      throw PreconditionError("strict_cd_restriction_search: restriction '" + res.name + "' has no mass");
    }
    for (double& x : w) x /= total;

    RestrictionResult rr;
    rr.name = res.name;
    rr.curves = count;
    if (count == 1) {
      // Dirac marginals are singular to m and carry zero entropy.
      rr.degenerate = true;
    } else {
      rr.S0 = entropy_at(w, 0.0);
      rr.S_half = entropy_at(w, 0.5);
      rr.S1 = entropy_at(w, 1.0);
      rr.slack = 0.5 * rr.S0 + 0.5 * rr.S1 - rr.S_half;
    }
    rep.results.push_back(rr);
  }
  for (std::size_t i = 1; i < rep.results.size(); ++i) {
    if (rep.results[i].slack < rep.results[rep.best].slack) rep.best = i;
  }
  rep.violation_found = rep.results[rep.best].slack < -tol;
  return rep;
}

}  // namespace cdlab
