#include "cdlab/transport.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>

#include "cdlab/error.hpp"

namespace cdlab {

using Eigen::Index;

double pair_cost(const Point2& p, const Point2& q, CostKind kind) {
  const double d = dist_inf(p, q);
  return kind == CostKind::DistInfSquared ? d * d : d;
}

double plan_cost(const TransportPlan& plan) {
  double c = 0.0;
  for (const PlanEntry& e : plan.entries) {
    c += e.mass * pair_cost(plan.source_grid->cell(e.source).center, plan.target_grid->cell(e.target).center, plan.kind);
  }
  return c;
}

double TransportPlan::marginal_error(const DiscreteMeasure& mu, const DiscreteMeasure& nu) const {
  Eigen::ArrayXd a = mu.masses(), b = nu.masses();
  for (const PlanEntry& e : entries) {
    a(e.source) -= e.mass;
    b(e.target) -= e.mass;
  }
  return std::max(a.abs().maxCoeff(), b.abs().maxCoeff());
}

namespace {

TransportPlan make_plan(std::shared_ptr<const Grid> sg, std::shared_ptr<const Grid> tg,
                        const std::map<std::pair<Index, Index>, double>& acc, CostKind kind) {
  TransportPlan plan;
  plan.source_grid = std::move(sg);
  plan.target_grid = std::move(tg);
  plan.kind = kind;
  for (const auto& [key, mass] : acc) {
    if (mass > 0.0) plan.entries.push_back(PlanEntry{key.first, key.second, mass});
  }
  plan.cost = plan_cost(plan);
  return plan;
}

}  // namespace

// ---------------------------------------------------------------------------

double Coupling1D::cost(const Atoms1D& mu, const Atoms1D& nu, const std::function<double(double)>& c) const {
  double s = 0.0;
  for (const FlowEntry& e : entries) s += e.mass * c(nu.positions(e.j) - mu.positions(e.i));
  return s;
}

Coupling1D quantile_coupling_1d(const Atoms1D& mu, const Atoms1D& nu) {
  const Index n = mu.positions.size(), m = nu.positions.size();
  if (mu.masses.size() != n || nu.masses.size() != m) throw PreconditionError("quantile_coupling_1d: size mismatch");
  if (n == 0 || m == 0) throw PreconditionError("quantile_coupling_1d: empty measure");
  if (!(mu.masses > 0.0).all() || !(nu.masses > 0.0).all()) {
    throw PreconditionError("quantile_coupling_1d: masses must be positive");
  }
  const double sa = mu.masses.sum(), sb = nu.masses.sum();
  if (std::abs(sa - sb) > 1e-12 * std::max(sa, sb)) throw PreconditionError("quantile_coupling_1d: mass mismatch");

  auto order = [](const Eigen::ArrayXd& pos) {
    std::vector<Index> o(static_cast<std::size_t>(pos.size()));
    std::iota(o.begin(), o.end(), Index{0});
    std::stable_sort(o.begin(), o.end(), [&](Index a, Index b) { return pos(a) < pos(b); });
    return o;
  };
  const std::vector<Index> oa = order(mu.positions), ob = order(nu.positions);

  Coupling1D c;
  const double floor = 1e-14 * sa;
  std::size_t i = 0, j = 0;
  double ra = mu.masses(oa[0]), rb = nu.masses(ob[0]) * (sa / sb);
  while (i < oa.size() && j < ob.size()) {
    const double t = std::min(ra, rb);
    if (t > floor) c.entries.push_back(FlowEntry{oa[i], ob[j], t});
    ra -= t;
    rb -= t;
    // Advance whichever side is exhausted; both when they tie.
    const bool next_a = ra <= floor, next_b = rb <= floor;
    if (next_a && ++i < oa.size()) ra = mu.masses(oa[i]);
    if (next_b && ++j < ob.size()) rb = nu.masses(ob[j]) * (sa / sb);
    if (!next_a && !next_b) break;  // unreachable with exact arithmetic
  }

  c.map.assign(static_cast<std::size_t>(n), -1);
  std::vector<int> count(static_cast<std::size_t>(n), 0);
  for (const FlowEntry& e : c.entries) {
    ++count[static_cast<std::size_t>(e.i)];
    c.map[static_cast<std::size_t>(e.i)] = e.j;
  }
  c.is_map = std::all_of(count.begin(), count.end(), [](int k) { return k == 1; });
  if (!c.is_map) std::fill(c.map.begin(), c.map.end(), -1);
  return c;
}

// ---------------------------------------------------------------------------

namespace {

void column_data(const DiscreteMeasure& mu, Eigen::MatrixXd& rho, Eigen::ArrayXd& Z, Eigen::MatrixXd& G,
                 Eigen::ArrayXd& F) {
  const Grid& g = mu.grid();
  const int nx = g.nx(), nu = g.nu();
  rho = Eigen::MatrixXd::Zero(nx, nu);
  Z = Eigen::ArrayXd::Zero(nx);
  G = Eigen::MatrixXd::Zero(nx, nu + 1);
  F = Eigen::ArrayXd::Zero(nx + 1);
  const Eigen::ArrayXd& lm = g.level_masses();
  for (int i = 0; i < nx; ++i) {
    if (g.singular_column(i)) {
      if (mu.rho()(g.column_begin(i)) > 0.0) {
        throw PreconditionError("structured map: marginals must avoid singular columns");
      }
      F(i + 1) = F(i);
      continue;
    }
    for (int j = 0; j < nu; ++j) {
      rho(i, j) = mu.rho()(g.cell_index(i, j));
      Z(i) += rho(i, j) * lm(j);
    }
    for (int j = 0; j < nu; ++j) G(i, j + 1) = Z(i) > 0.0 ? G(i, j) + rho(i, j) * lm(j) / Z(i) : 0.0;
    if (Z(i) > 0.0) G(i, nu) = 1.0;
    F(i + 1) = F(i) + Z(i) * (g.x_edges()(i + 1) - g.x_edges()(i));
  }
}

}  // namespace

StructuredMap::StructuredMap(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1)
    : grid_(mu0.grid_ptr()), K_(mu0.grid().params().K) {
  if (mu0.grid_ptr() != mu1.grid_ptr()) throw PreconditionError("structured map: measures must share a grid");
  column_data(mu0, rho0_, Z0_, G0_, F0_);
  column_data(mu1, rho1_, Z1_, G1_, F1_);
  p0_ = Z0_;
  p1_ = Z1_;
}

Index StructuredMap::target_column(double q) const {
  const int nx = grid_->nx();
  // Smallest k with F1(k+1) >= q, then skip massless columns.
  Index lo = 0, hi = nx - 1;
  while (lo < hi) {
    const Index mid = (lo + hi) / 2;
    if (F1_(mid + 1) >= q) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  while (lo < nx - 1 && !(p1_(lo) > 0.0)) ++lo;
  while (lo > 0 && !(p1_(lo) > 0.0)) --lo;
  return lo;
}

double StructuredMap::T1(double x) const {
  const Index i = grid_->column_of(x);
  if (i < 0) throw DomainError("structured map: x outside the space");
  const double q = F0_(i) + p0_(i) * (x - grid_->x_edges()(i));
  const Index k = target_column(q);
  return grid_->x_edges()(k) + (q - F1_(k)) / p1_(k);
}

double StructuredMap::dT1dx(double x) const {
  const Index i = grid_->column_of(x);
  if (i < 0) throw DomainError("structured map: x outside the space");
  const double q = F0_(i) + p0_(i) * (x - grid_->x_edges()(i));
  return p0_(i) / p1_(target_column(q));
}

double StructuredMap::fiber_cdf(const Eigen::MatrixXd& rho, const Eigen::MatrixXd& G, const Eigen::ArrayXd& Z, Index i,
                                double u) const {
  const int nu = grid_->nu();
  u = std::clamp(u, 0.0, 1.0);
  const int j = std::clamp(static_cast<int>(std::floor(u * nu)), 0, nu - 1);
  const double ul = grid_->u_edges()(j);
  return G(i, j) + rho(i, j) * (gaussian_primitive(u, K_) - gaussian_primitive(ul, K_)) / Z(i);
}

double StructuredMap::fiber_quantile(const Eigen::MatrixXd& rho, const Eigen::MatrixXd& G, const Eigen::ArrayXd& Z,
                                     Index i, double q) const {
  const int nu = grid_->nu();
  q = std::clamp(q, 0.0, 1.0);
  int j = 0;
  while (j < nu - 1 && G(i, j + 1) < q) ++j;
  while (j < nu - 1 && !(rho(i, j) > 0.0)) ++j;
  while (j > 0 && !(rho(i, j) > 0.0)) --j;
  const double E = gaussian_primitive(grid_->u_edges()(j), K_) + (q - G(i, j)) * Z(i) / rho(i, j);
  const double u = gaussian_primitive_inverse(E, K_);
  return std::clamp(u, grid_->u_edges()(j), grid_->u_edges()(j + 1));
}

std::pair<double, double> StructuredMap::map_xu(double x, double u) const {
  const Index i = grid_->column_of(x);
  if (i < 0 || !(Z0_(i) > 0.0)) throw DomainError("structured map: point outside the source support");
  const double q = F0_(i) + p0_(i) * (x - grid_->x_edges()(i));
  const Index k = target_column(q);
  const double t1 = grid_->x_edges()(k) + (q - F1_(k)) / p1_(k);
  const double U = fiber_quantile(rho1_, G1_, Z1_, k, fiber_cdf(rho0_, G0_, Z0_, i, u));
  return {t1, U};
}

Point2 StructuredMap::operator()(const Point2& z) const {
  const double u = z.y() / grid_->params().f(z.x());
  const auto [t1, U] = map_xu(z.x(), u);
  return {t1, U * grid_->params().f(t1)};
}

double StructuredMap::dUdu(double x, double u) const {
  const Index i = grid_->column_of(x);
  const int nu = grid_->nu();
  const double U = map_xu(x, u).second;
  const double q = F0_(i) + p0_(i) * (x - grid_->x_edges()(i));
  const Index k = target_column(q);
  const int j0 = std::clamp(static_cast<int>(std::floor(u * nu)), 0, nu - 1);
  const int j1 = std::clamp(static_cast<int>(std::floor(U * nu)), 0, nu - 1);
  const double g0 = rho0_(i, j0) * std::exp(-K_ * u * u) / Z0_(i);
  const double g1 = rho1_(k, j1) * std::exp(-K_ * U * U) / Z1_(k);
  return g0 / g1;
}

// ---------------------------------------------------------------------------

MonotoneMapGrid::MonotoneMapGrid(std::shared_ptr<const Grid> grid, std::vector<Index> support, Eigen::ArrayXd T1,
                                 Eigen::ArrayXd T2)
    : grid_(std::move(grid)), support_(std::move(support)), T1_(std::move(T1)), T2_(std::move(T2)) {
  in_support_.assign(static_cast<std::size_t>(grid_->cell_count()), false);
  for (Index c : support_) in_support_[static_cast<std::size_t>(c)] = true;
}

MonotoneMapGrid::Derivative MonotoneMapGrid::dT1dx(Index cell) const {
  const Cell& c = grid_->cell(cell);
  const Index i = c.column;
  auto neighbor = [&](Index col) -> Index {
    if (col < 0 || col >= grid_->nx() || grid_->singular_column(col)) return -1;
    const Index n = grid_->cell_index(col, c.level);
    return in_support(n) ? n : -1;
  };
  const Index l = neighbor(i - 1), r = neighbor(i + 1);
  const auto& xc = grid_->x_centers();
  if (l >= 0 && r >= 0) return {(T1_(r) - T1_(l)) / (xc(i + 1) - xc(i - 1)), false};
  if (r >= 0) return {(T1_(r) - T1_(cell)) / (xc(i + 1) - xc(i)), true};
  if (l >= 0) return {(T1_(cell) - T1_(l)) / (xc(i) - xc(i - 1)), true};
  throw PreconditionError("dT1/dx: cell has no support neighbor in x");
}

MonotoneMapGrid::Derivative MonotoneMapGrid::dT2dy(Index cell) const {
  const Cell& c = grid_->cell(cell);
  if (c.is_atom()) throw PreconditionError("dT2/dy: atoms have no fiber direction");
  const int j = c.level, nu = grid_->nu();
  const Index b = grid_->column_begin(c.column);
  const Index lo = j > 0 && in_support(b + j - 1) ? b + j - 1 : -1;
  const Index hi = j + 1 < nu && in_support(b + j + 1) ? b + j + 1 : -1;
  const double fx = grid_->f_centers()(c.column);
  auto y = [&](Index k) { return grid_->cell(k).u_center * fx; };
  if (lo >= 0 && hi >= 0) return {(T2_(hi) - T2_(lo)) / (y(hi) - y(lo)), false};
  if (hi >= 0) return {(T2_(hi) - T2_(cell)) / (y(hi) - y(cell)), true};
  if (lo >= 0) return {(T2_(cell) - T2_(lo)) / (y(cell) - y(lo)), true};
  throw PreconditionError("dT2/dy: cell has no support neighbor in y");
}

JacobianValue jacobian(const MonotoneMapGrid& map, Index cell) {
  if (!map.in_support(cell)) throw PreconditionError("jacobian: cell outside the support");
  const auto a = map.dT1dx(cell), b = map.dT2dy(cell);
  return {a.value * b.value, a.one_sided || b.one_sided};
}

StructuredMapResult build_structured_map(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1) {
  StructuredMap T(mu0, mu1);
  const Grid& g = mu0.grid();
  std::vector<Index> support = mu0.support();
  Eigen::ArrayXd T1 = Eigen::ArrayXd::Constant(g.cell_count(), std::nan(""));
  Eigen::ArrayXd T2 = T1;
  std::array<long, 4> counts{};
  for (Index c : support) {
    const Point2 z = g.cell(c).center;
    const Point2 w = T(z);
    T1(c) = w.x();
    T2(c) = w.y();
    ++counts[static_cast<std::size_t>(classify_pair(z, w))];
  }
  if (counts[0] + counts[1] > 0) {
    throw AuditError("structured map: " + std::to_string(counts[0] + counts[1]) +
                     " support pairs are not horizontal; the marginal geometry is unsupported");
  }
  MonotoneMapGrid gm(mu0.grid_ptr(), std::move(support), std::move(T1), std::move(T2));
  double min1 = std::numeric_limits<double>::infinity(), min2 = min1;
  for (Index c : gm.support()) {
    min1 = std::min(min1, gm.dT1dx(c).value);
    min2 = std::min(min2, gm.dT2dy(c).value);
  }
  if (min1 < -1e-12 || min2 < -1e-12) throw AuditError("structured map: monotonicity audit failed");
  return StructuredMapResult{std::move(T), std::move(gm), counts, min1, min2};
}

TransportPlan plan_from_map(const DiscreteMeasure& mu0, const MonotoneMapGrid& map, CostKind kind) {
  const Eigen::ArrayXd mass = mu0.masses();
  std::map<std::pair<Index, Index>, double> acc;
  for (Index c : map.support()) {
    const Index t = map.grid().locate(map.image(c));
    if (t < 0) throw AuditError("plan_from_map: image outside the space");
    acc[{c, t}] += mass(c);
  }
  return make_plan(mu0.grid_ptr(), map.grid_ptr(), acc, kind);
}

TransportPlan structured_plan(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1, CostKind kind) {
  const Grid& g0 = mu0.grid();
  const Grid& g1 = mu1.grid();
  const Eigen::ArrayXd m0 = mu0.masses(), m1 = mu1.masses();

  auto columns = [](const Grid& g, const Eigen::ArrayXd& m, std::vector<Index>& ids) {
    std::vector<double> pos, mass;
    for (int i = 0; i < g.nx(); ++i) {
      double s = 0.0;
      for (Index c = g.column_begin(i); c < g.column_end(i); ++c) s += m(c);
      if (s > 0.0) {
        ids.push_back(i);
        pos.push_back(g.x_centers()(i));
        mass.push_back(s);
      }
    }
    return Atoms1D{Eigen::Map<Eigen::ArrayXd>(pos.data(), static_cast<Index>(pos.size())),
                   Eigen::Map<Eigen::ArrayXd>(mass.data(), static_cast<Index>(mass.size()))};
  };
  std::vector<Index> ca, cb;
  const Atoms1D A = columns(g0, m0, ca), B = columns(g1, m1, cb);
  const Coupling1D outer = quantile_coupling_1d(A, B);

  auto fiber = [](const Grid& g, const Eigen::ArrayXd& m, Index col, double scale, std::vector<Index>& ids) {
    std::vector<double> pos, mass;
    double total = 0.0;
    for (Index c = g.column_begin(col); c < g.column_end(col); ++c) total += m(c);
    for (Index c = g.column_begin(col); c < g.column_end(col); ++c) {
      if (m(c) > 0.0) {
        ids.push_back(c);
        pos.push_back(g.cell(c).u_center);
        mass.push_back(m(c) / total * scale);
      }
    }
    return Atoms1D{Eigen::Map<Eigen::ArrayXd>(pos.data(), static_cast<Index>(pos.size())),
                   Eigen::Map<Eigen::ArrayXd>(mass.data(), static_cast<Index>(mass.size()))};
  };

  std::map<std::pair<Index, Index>, double> acc;
  for (const FlowEntry& e : outer.entries) {
    std::vector<Index> ia, ib;
    const Atoms1D fa = fiber(g0, m0, ca[static_cast<std::size_t>(e.i)], e.mass, ia);
    const Atoms1D fb = fiber(g1, m1, cb[static_cast<std::size_t>(e.j)], e.mass, ib);
    const Coupling1D inner = quantile_coupling_1d(fa, fb);
    for (const FlowEntry& f : inner.entries) {
      acc[{ia[static_cast<std::size_t>(f.i)], ib[static_cast<std::size_t>(f.j)]}] += f.mass;
    }
  }
  return make_plan(mu0.grid_ptr(), mu1.grid_ptr(), acc, kind);
}

// ---------------------------------------------------------------------------

OtSolution solve_discrete_ot(const DiscreteMeasure& mu, const DiscreteMeasure& nu, CostKind kind) {
  const std::vector<Index> sa = mu.support(), sb = nu.support();
  if (static_cast<Index>(sa.size()) > kMaxAtoms || static_cast<Index>(sb.size()) > kMaxAtoms) {
    throw PreconditionError("solve_discrete_ot: support exceeds " + std::to_string(kMaxAtoms) + " atoms");
  }
  const Eigen::ArrayXd ma = mu.masses(), mb = nu.masses();
  Eigen::ArrayXd a(static_cast<Index>(sa.size())), b(static_cast<Index>(sb.size()));
  Eigen::Matrix<double, Eigen::Dynamic, 2> P(a.size(), 2), Q(b.size(), 2);
  for (Index k = 0; k < a.size(); ++k) {
    a(k) = ma(sa[static_cast<std::size_t>(k)]);
    P.row(k) = mu.grid().cell(sa[static_cast<std::size_t>(k)]).center.transpose();
  }
  for (Index k = 0; k < b.size(); ++k) {
    b(k) = mb(sb[static_cast<std::size_t>(k)]);
    Q.row(k) = nu.grid().cell(sb[static_cast<std::size_t>(k)]).center.transpose();
  }
  const TransportationResult r =
      solve_transportation(a, b, P, Q, kind == CostKind::DistInf ? PointCost::DistInf : PointCost::DistInfSquared);

  OtSolution s;
  s.plan.source_grid = mu.grid_ptr();
  s.plan.target_grid = nu.grid_ptr();
  s.plan.kind = kind;
  for (const FlowEntry& f : r.flows) {
    s.plan.entries.push_back(PlanEntry{sa[static_cast<std::size_t>(f.i)], sb[static_cast<std::size_t>(f.j)], f.mass});
  }
  s.plan.cost = r.cost;
  s.dual_objective = r.dual_objective;
  s.duality_gap = r.cost - r.dual_objective;
  s.min_reduced_cost = r.min_reduced_cost;
  s.max_slackness = r.max_support_reduced_cost;
  s.pivots = r.pivots;
  return s;
}

double w1_distance(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  return solve_discrete_ot(mu, nu, CostKind::DistInf).plan.cost;
}

MapVerdict is_map_induced(const TransportPlan& plan, double tol) {
  MapVerdict v;
  std::size_t k = 0;
  const auto& es = plan.entries;
  while (k < es.size()) {
    std::size_t end = k;
    double total = 0.0, top = 0.0;
    while (end < es.size() && es[end].source == es[k].source) {
      total += es[end].mass;
      top = std::max(top, es[end].mass);
      ++end;
    }
    int targets = 0;
    for (std::size_t q = k; q < end; ++q) targets += es[q].mass > tol * total ? 1 : 0;
    if (targets > 1) v.witnesses.push_back(Splitter{es[k].source, targets, 1.0 - top / total});
    k = end;
  }
  v.map_induced = v.witnesses.empty();
  std::stable_sort(v.witnesses.begin(), v.witnesses.end(),
                   [](const Splitter& a, const Splitter& b) { return a.secondary_fraction > b.secondary_fraction; });
  if (v.witnesses.size() > 16) v.witnesses.resize(16);
  return v;
}

void write_plan_csv(std::ostream& os, const TransportPlan& plan) {
  os.precision(17);
  os << "i,j,mass\n";
  for (const PlanEntry& e : plan.entries) os << e.source << ',' << e.target << ',' << e.mass << '\n';
}

void write_map_csv(std::ostream& os, const MonotoneMapGrid& map) {
  os.precision(17);
  os << "x,y,T1,T2\n";
  for (Index c : map.support()) {
    const Point2 z = map.grid().cell(c).center, w = map.image(c);
    os << z.x() << ',' << z.y() << ',' << w.x() << ',' << w.y() << '\n';
  }
}

}  // namespace cdlab
