#include <cmath>
#include <sstream>

#include "cdlab/cdcheck.hpp"
#include "cdlab/error.hpp"
#include "doctest.h"

using namespace cdlab;

namespace {

std::shared_ptr<const Grid> valley_grid(int nx, int nu) {
  return build_grid(make_compact_space(preset_profile("valley", kDefaultK), kDefaultK, 16.0), nx, nu);
}

SpaceParams ramp_space() { return make_compact_space(preset_profile("ramp-smoothed", 0.2), 0.2, 16.0, true); }

std::vector<double> dyadic(int from, int to) {
  std::vector<double> out;
  for (int e = from; e <= to; ++e) out.push_back(std::ldexp(1.0, -e));
  return out;
}

}  // namespace

TEST_CASE("the identity map has zero slack") {
  const auto g = valley_grid(32, 8);
  const DiscreteMeasure mu = uniform_block(g, -0.5, 0.5);
  Eigen::ArrayXd T1(g->cell_count()), T2(g->cell_count());
  for (Eigen::Index c = 0; c < g->cell_count(); ++c) {
    T1(c) = g->cell(c).center.x();
    T2(c) = g->cell(c).center.y();
  }
  const MonotoneMapGrid id(g, mu.support(), T1, T2);
  const CdReport r = pointwise_cd_check(mu, id, 10.0);
  CHECK(r.pass);
  CHECK(std::abs(r.min_slack) <= 1e-12);
  CHECK(r.points == static_cast<long>(mu.support().size()));
  CHECK(slack_deficit(r) <= 1e-12);
}

TEST_CASE("pointwise criterion on separated blocks") {
  const auto g = valley_grid(64, 16);
  const DiscreteMeasure mu0 = uniform_block(g, -0.875, -0.5);
  const DiscreteMeasure mu1 = uniform_block(g, 0.125, 0.875);
  const StructuredMapResult sm = build_structured_map(mu0, mu1);
  const CdReport r = pointwise_cd_check(mu0, sm.grid_map, 515.0);
  CHECK(r.pass);
  CHECK(r.degenerate_points == 0);
  CHECK(r.case_counts[0] + r.case_counts[1] == 0);
  CHECK(r.slacks.size() == static_cast<std::size_t>(r.points));
  // A larger dimension only relaxes the criterion.
  CHECK(pointwise_cd_check(mu0, sm.grid_map, 1030.0).pass);

  std::ostringstream os;
  write_slack_csv(os, r);
  CHECK(os.str().rfind("x,y,slack\n", 0) == 0);

  const JacobiResidual jr = jacobi_residual(mu0, mu1, sm.grid_map);
  CHECK(jr.interior_points > 0);
  CHECK(jr.max_residual < 0.1);
  CHECK(jr.mean_residual <= jr.max_residual);
}

TEST_CASE("midpoint entropy convexity") {
  const auto g = valley_grid(64, 16);
  const DiscreteMeasure mu0 = uniform_block(g, -0.875, -0.5);
  const DiscreteMeasure mu1 = uniform_block(g, 0.125, 0.875);
  const StructuredMap T(mu0, mu1);
  const MidpointEntropyReport r = midpoint_entropy_test(mu0, mu1, T, {515.0, 1030.0});
  REQUIRE(r.verdicts.size() == 3);
  CHECK(std::isinf(r.verdicts.back().N));
  CHECK(r.pass);
  CHECK(r.mass_loss <= 1e-8);
  REQUIRE(r.midpoint_measure);
  CHECK(r.midpoint_measure->total_mass() == doctest::Approx(1.0));
  for (const auto& v : r.verdicts) CHECK(v.slack == doctest::Approx(0.5 * v.S0 + 0.5 * v.S1 - v.S_half));
}

TEST_CASE("box-counting dimensions") {
  const SpaceParams sp = ramp_space();
  const auto eps = dyadic(5, 10);
  const BoxDimensionReport left = box_dimension(sp, BoxRegion::Left, eps);
  CHECK(left.slope == doctest::Approx(1.0).epsilon(0.05));
  const BoxDimensionReport right = box_dimension(sp, BoxRegion::Right, eps);
  CHECK(right.slope > 1.7);
  CHECK(right.slope < 2.15);
  const BoxDimensionReport square = box_dimension(sp, BoxRegion::UnitSquare, eps);
  CHECK(square.slope == doctest::Approx(2.0).epsilon(0.02));
  CHECK(square.counts.front() == 33.0 * 33.0);  // the closed square touches the 33rd row and column
  CHECK(to_string(BoxRegion::UnitSquare) == "unit-square");
  CHECK_THROWS_AS(box_dimension(sp, BoxRegion::Left, {0.1, 0.05}), PreconditionError);
  const SpaceParams regular = make_compact_space(preset_profile("valley", kDefaultK), kDefaultK, 16.0);
  CHECK_THROWS_AS(box_dimension(regular, BoxRegion::Left, eps), PreconditionError);
}

TEST_CASE("no transport map from the singular segment onto a fiber") {
  const ProfileFn f = preset_profile("ramp-smoothed", 0.2);
  const double h = f(0.5);
  const NoMapReport r = no_map_demo(f, {-0.5}, {1.0}, 0.5, {0.25 * h, 0.75 * h}, {0.5, 0.5});
  CHECK(r.pass);
  CHECK(r.cost_residual <= 1e-15);
  CHECK(r.maps_enumerated == 2);
  CHECK(r.feasible_maps == 0);
  CHECK_FALSE(r.solver_plan_is_map);
  CHECK(r.optimal_cost == doctest::Approx(1.0));

  // Two sources onto two equal targets: a map exists.
  const NoMapReport even = no_map_demo(f, {-0.6, -0.5}, {0.5, 0.5}, 0.5, {0.25 * h, 0.75 * h}, {0.5, 0.5});
  CHECK(even.feasible_maps == 2);
  CHECK_FALSE(even.pass);

  CHECK_THROWS_AS(no_map_demo(f, {0.5}, {1.0}, 0.6, {0.0}, {1.0}), PreconditionError);
  CHECK_THROWS_AS(no_map_demo(f, {-0.5}, {1.0}, 0.5, {2.0 * h}, {1.0}), PreconditionError);
}

TEST_CASE("branching through the singular part") {
  const auto g = build_grid(ramp_space(), 32, 4);
  const DiscreteMeasure mu0 = uniform_block(g, -0.6, -0.4);
  const Eigen::Index col = g->column_of(0.5);
  const double xc = g->x_centers()(col);
  const DiscreteMeasure mu1 = uniform_block(g, xc - 0.25 * g->dx(), xc + 0.25 * g->dx());
  const BranchingReport r = branching_demo(mu0, mu1, 5);
  REQUIRE(r.witness);
  CHECK(r.verified);
  CHECK(r.forced_for_every_source);
  CHECK(r.witness->agreement_defect <= 1e-10);
  CHECK(std::abs(r.duality_gap) <= 1e-12);

  const auto flat = build_grid(make_compact_space(preset_profile("constant", kDefaultK), kDefaultK, 16.0), 32, 4);
  const BranchingReport control =
      branching_demo(uniform_block(flat, -0.6, -0.4),
                     uniform_block(flat, flat->x_centers()(col) - 0.25 * flat->dx(),
                                   flat->x_centers()(col) + 0.25 * flat->dx()),
                     5);
  CHECK_FALSE(control.witness);
}

TEST_CASE("restriction search over a geodesic family") {
  const auto g = build_grid(ramp_space(), 32, 4);
  const DiscreteMeasure mu0 = uniform_block(g, -0.375, -0.125);
  const DiscreteMeasure mu1 = uniform_block(g, 0.5, 0.75);
  const OtSolution sol = solve_discrete_ot(mu0, mu1, CostKind::DistInfSquared);
  const GeodesicFamily fam = plan_family(sol.plan, 4);
  CHECK(fam.size() == sol.plan.entries.size());
  const auto restrictions = default_restrictions(fam, *g);
  REQUIRE(restrictions.size() == 5);
  const RestrictionSearchReport rep = strict_cd_restriction_search(fam, g, restrictions, 10.0);
  REQUIRE(rep.results.size() == 5);
  CHECK(rep.results.front().name == "all");
  CHECK(rep.results.back().degenerate);
  CHECK(rep.results.back().slack == 0.0);
  CHECK(rep.best < rep.results.size());
  for (const auto& r : rep.results) CHECK(rep.results[rep.best].slack <= r.slack);
  CHECK(rep.violation_found == (rep.results[rep.best].slack < -rep.tol));

  Restriction empty{"empty", std::vector<double>(fam.size(), 0.0)};
  CHECK_THROWS_AS(strict_cd_restriction_search(fam, g, {empty}, 10.0), PreconditionError);
}

TEST_CASE("regular spaces approach the singular one") {
  const ProfileFn f = preset_profile("ramp-smoothed", 0.2);
  const MghTrace t = mgh_harness(f, dyadic(3, 6), 0.2, 16.0, 64, 4);
  REQUIRE(t.w1.size() == 4);
  CHECK(t.hausdorff_bounded);
  CHECK(t.w1_decreasing);
  for (std::size_t i = 0; i < t.epsilons.size(); ++i) CHECK(t.hausdorff[i] <= t.epsilons[i]);
  CHECK(t.extrapolated_limit == doctest::Approx(2 * t.w1[3] - t.w1[2]));
  CHECK_THROWS_AS(mgh_harness(f, {0.1, 0.2}, 0.2, 16.0, 64, 4), PreconditionError);
}
