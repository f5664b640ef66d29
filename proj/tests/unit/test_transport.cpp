#include <cmath>
#include <random>
#include <sstream>

#include "brute_force.hpp"
#include "cdlab/error.hpp"
#include "cdlab/transport.hpp"
#include "doctest.h"

using namespace cdlab;

namespace {

std::shared_ptr<const Grid> valley_grid(int nx, int nu) {
  return build_grid(make_compact_space(preset_profile("valley", kDefaultK), kDefaultK, 16.0), nx, nu);
}

}  // namespace

TEST_CASE("network simplex matches exhaustive enumeration") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> size(1, 4);
  std::uniform_real_distribution<double> U(0.1, 1.0);
  for (int trial = 0; trial < 60; ++trial) {
    const int m = size(rng), n = size(rng);
    Eigen::ArrayXd a(m), b(n);
    for (int i = 0; i < m; ++i) a(i) = U(rng);
    for (int j = 0; j < n; ++j) b(j) = U(rng);
    b *= a.sum() / b.sum();
    Eigen::MatrixXd c(m, n);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) c(i, j) = std::floor(10 * U(rng)) / 4;  // ties on purpose
    const TransportationResult r = solve_transportation(a, b, c);
    CAPTURE(trial);
    CHECK(r.cost == doctest::Approx(testing::brute_force_transport(a, b, c)).epsilon(1e-10));
    CHECK(std::abs(r.cost - r.dual_objective) <= 1e-10);
    CHECK(r.min_reduced_cost >= -1e-10);
    CHECK(r.max_support_reduced_cost <= 1e-10);
    Eigen::ArrayXd rows = Eigen::ArrayXd::Zero(m), cols = Eigen::ArrayXd::Zero(n);
    for (const FlowEntry& e : r.flows) {
      CHECK(e.mass > 0.0);
      rows(e.i) += e.mass;
      cols(e.j) += e.mass;
    }
    CHECK(((rows - a).abs().maxCoeff()) <= 1e-12);
    CHECK(((cols - b).abs().maxCoeff()) <= 1e-12);
  }
}

TEST_CASE("transportation preconditions") {
  const Eigen::MatrixXd c = Eigen::MatrixXd::Zero(2, 2);
  CHECK_THROWS_AS(solve_transportation(Eigen::ArrayXd::Ones(2), Eigen::ArrayXd::Constant(2, 2.0), c),
                  PreconditionError);
  Eigen::ArrayXd a(2);
  a << 1.0, 0.0;
  CHECK_THROWS_AS(solve_transportation(a, a, c), PreconditionError);
}

TEST_CASE("point costs") {
  CHECK(pair_cost({0, 0}, {0.3, -0.5}, CostKind::DistInf) == doctest::Approx(0.5));
  CHECK(pair_cost({0, 0}, {0.3, -0.5}, CostKind::DistInfSquared) == doctest::Approx(0.25));
}

TEST_CASE("one-dimensional monotone coupling") {
  Atoms1D mu{Eigen::ArrayXd(3), Eigen::ArrayXd(3)}, nu{Eigen::ArrayXd(2), Eigen::ArrayXd(2)};
  mu.positions << 2.0, 0.0, 1.0;
  mu.masses << 0.25, 0.25, 0.5;
  nu.positions << 5.0, 4.0;
  nu.masses << 0.5, 0.5;
  const Coupling1D c = quantile_coupling_1d(mu, nu);
  CHECK_FALSE(c.is_map);  // the middle atom splits
  CHECK(c.entries.size() == 4);
  CHECK(c.cost(mu, nu, [](double d) { return d * d; }) ==
        doctest::Approx(0.25 * 16 + 0.25 * 9 + 0.25 * 16 + 0.25 * 9));

  Atoms1D same = mu;
  const Coupling1D id = quantile_coupling_1d(mu, same);
  REQUIRE(id.is_map);
  CHECK(id.map == std::vector<Eigen::Index>{0, 1, 2});
  nu.masses << 0.5, 0.6;
  CHECK_THROWS_AS(quantile_coupling_1d(mu, nu), PreconditionError);
}

TEST_CASE("structured map of a translated block") {
  const auto g = valley_grid(64, 16);
  const DiscreteMeasure mu0 = uniform_block(g, -0.75, -0.25);
  const DiscreteMeasure mu1 = uniform_block(g, 0.25, 0.75);
  const StructuredMapResult r = build_structured_map(mu0, mu1);
  for (double x : {-0.7, -0.5, -0.3}) {
    CHECK(r.map.T1(x) == doctest::Approx(x + 1.0).epsilon(1e-12));
    CHECK(r.map.dT1dx(x) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.map.dUdu(x, 0.4) == doctest::Approx(1.0).epsilon(1e-10));
    const auto [T1, U] = r.map.map_xu(x, 0.4);
    CHECK(U == doctest::Approx(0.4).epsilon(1e-10));
    CHECK(T1 == doctest::Approx(x + 1.0));
  }
  CHECK(r.class_counts[2] + r.class_counts[3] == static_cast<long>(mu0.support().size()));
  CHECK(r.min_dT1dx > 0.0);
  CHECK(r.min_dT2dy > 0.0);
}

TEST_CASE("structured map derivatives agree with differences") {
  const auto g = valley_grid(64, 16);
  const DiscreteMeasure mu0 = DiscreteMeasure::from_shape(
      g, [](double x, double u) { return (x > -0.9 && x < -0.4) ? (1.0 + 0.3 * std::sin(3 * x)) * (1 + 0.2 * u) : 0.0; });
  const DiscreteMeasure mu1 =
      DiscreteMeasure::from_shape(g, [](double x, double u) { return (x > 0.2 && x < 0.8) ? (1.0 + 0.5 * u * u) : 0.0; });
  const StructuredMap T(mu0, mu1);
  const double h = 1e-6;
  for (double x : {-0.83, -0.61, -0.47}) {
    CHECK(T.dT1dx(x) == doctest::Approx((T.T1(x + h) - T.T1(x - h)) / (2 * h)).epsilon(1e-5));
    for (double u : {0.11, 0.47, 0.77}) {  // off the level edges
      const double fd = (T.map_xu(x, u + h).second - T.map_xu(x, u - h).second) / (2 * h);
      CHECK(T.dUdu(x, u) == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("structured plan has exact marginals") {
  const auto g = valley_grid(32, 8);
  const DiscreteMeasure mu0 = uniform_block(g, -0.8, -0.3);
  const DiscreteMeasure mu1 = uniform_block(g, 0.2, 0.9, 0.0, 0.5);
  const TransportPlan p = structured_plan(mu0, mu1, CostKind::DistInfSquared);
  CHECK(p.marginal_error(mu0, mu1) <= 1e-13);
  CHECK(plan_cost(p) == doctest::Approx(p.cost));
}

TEST_CASE("exact solver on grid measures") {
  const auto g = valley_grid(16, 4);
  const DiscreteMeasure mu0 = uniform_block(g, -0.75, -0.25);
  const DiscreteMeasure mu1 = uniform_block(g, 0.25, 0.75);
  const OtSolution s = solve_discrete_ot(mu0, mu1, CostKind::DistInfSquared);
  CHECK(s.plan.marginal_error(mu0, mu1) <= 1e-12);
  CHECK(std::abs(s.duality_gap) <= 1e-12);
  CHECK(s.min_reduced_cost >= -1e-12);
  // A horizontal translation by 1 is optimal and costs 1 per unit mass.
  CHECK(s.plan.cost == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(w1_distance(mu0, mu1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(w1_distance(mu0, mu0) == doctest::Approx(0.0));
}

TEST_CASE("map-induced plans") {
  const auto g = valley_grid(8, 2);
  TransportPlan p;
  p.source_grid = p.target_grid = g;
  p.entries = {{0, 3, 0.5}, {1, 4, 0.3}, {1, 5, 0.2}};
  const MapVerdict v = is_map_induced(p);
  CHECK_FALSE(v.map_induced);
  REQUIRE(v.witnesses.size() == 1);
  CHECK(v.witnesses[0].source == 1);
  CHECK(v.witnesses[0].targets == 2);
  CHECK(v.witnesses[0].secondary_fraction == doctest::Approx(0.4));
  p.entries[2].mass = 1e-12;
  CHECK(is_map_induced(p).map_induced);

  std::ostringstream os;
  write_plan_csv(os, p);
  CHECK(os.str().rfind("i,j,mass\n", 0) == 0);
}

TEST_CASE("grid map jacobian") {
  const auto g = valley_grid(32, 8);
  const DiscreteMeasure mu0 = uniform_block(g, -0.75, -0.25);
  const DiscreteMeasure mu1 = uniform_block(g, 0.25, 0.75);
  const StructuredMapResult r = build_structured_map(mu0, mu1);
  for (Eigen::Index c : r.grid_map.support()) {
    const JacobianValue j = jacobian(r.grid_map, c);
    const Point2 z = g->cell(c).center;
    // the fiber of the image column is rescaled by f(T1) / f(x)
    CHECK(j.value == doctest::Approx(g->params().f(z.x() + 1.0) / g->params().f(z.x())).epsilon(1e-2));
  }
  const Eigen::Index off = g->cell_index(31, 0);
  CHECK_FALSE(r.grid_map.in_support(off));
  CHECK_THROWS_AS(jacobian(r.grid_map, off), PreconditionError);
}
