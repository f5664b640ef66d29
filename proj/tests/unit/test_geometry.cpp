#include <sstream>

#include "cdlab/error.hpp"
#include "cdlab/geometry.hpp"
#include "doctest.h"

using namespace cdlab;

namespace {

const double k = kDefaultK;
const ProfileFn valley = preset_profile("valley", k);

void check_midpoint(const Point2& p, const Point2& q, const Point2& m, const ProfileFn& f) {
  const double d = dist_inf(p, q);
  CHECK(dist_inf(p, m) == doctest::Approx(0.5 * d).epsilon(1e-9));
  CHECK(dist_inf(m, q) == doctest::Approx(0.5 * d).epsilon(1e-9));
  CHECK(m.y() >= -1e-15);
  CHECK(m.y() <= f(m.x()) + 1e-15);
}

}  // namespace

TEST_CASE("pair classes") {
  CHECK(classify_pair({0, 0}, {0.1, 0.2}) == PairClass::V);
  CHECK(classify_pair({0, 0}, {0.25, 0.25}) == PairClass::D);
  CHECK(classify_pair({0, 0}, {1.0, 0.5}) == PairClass::H0);
  CHECK(classify_pair({0, 0}, {1.0, 0.7}) == PairClass::H1);
  CHECK(is_horizontal(PairClass::H1));
  CHECK_FALSE(is_horizontal(PairClass::D));
  CHECK(to_string(PairClass::H0) == "H0");
}

TEST_CASE("vertical pairs use the Euclidean midpoint") {
  const double f0 = valley(0.0);
  const Point2 p(0.0, 0.1 * f0), q(0.2 * f0, 0.9 * f0);
  const Point2 m = midpoint(p, q, valley);
  CHECK(m.x() == doctest::Approx(0.5 * (p.x() + q.x())));
  CHECK(m.y() == doctest::Approx(0.5 * (p.y() + q.y())));
  check_midpoint(p, q, m, valley);
}

TEST_CASE("flat horizontal pairs use the fiber-proportional midpoint") {
  const Point2 p(-0.5, 0.2 * valley(-0.5)), q(0.5, 0.6 * valley(0.5));
  const Point2 m = midpoint(p, q, valley);
  CHECK(m.x() == doctest::Approx(0.0));
  CHECK(m.y() / valley(0.0) == doctest::Approx(0.4));
  check_midpoint(p, q, m, valley);
}

TEST_CASE("steep horizontal pairs in every orientation") {
  const double f0 = valley(0.1);
  const double dx = 0.5 * f0;
  const Point2 p(0.1, 0.1 * f0), q(0.1 + dx, 0.1 * f0 + 0.7 * dx);
  REQUIRE(classify_pair(p, q) == PairClass::H1);
  check_midpoint(p, q, midpoint(p, q, valley), valley);
  check_midpoint(q, p, midpoint(q, p, valley), valley);
  const Point2 p2(p.x(), q.y()), q2(q.x(), p.y());
  REQUIRE(classify_pair(p2, q2) == PairClass::H1);
  check_midpoint(p2, q2, midpoint(p2, q2, valley), valley);
  // The selection is symmetric in the endpoints.
  CHECK(dist_inf(midpoint(p, q, valley), midpoint(q, p, valley)) < 1e-15);
}

TEST_CASE("ytilde derivative matches a difference quotient") {
  const double x0 = -0.3, x1 = 0.4, y0 = 0.2 * valley(x0), h = 1e-3 * valley(x0);
  const double fd = (ytilde(x0, x1, y0 + h, valley) - ytilde(x0, x1, y0 - h, valley)) / (2 * h);
  CHECK(ytilde_dy(x0, x1, valley) == doctest::Approx(fd).epsilon(1e-8));
  const ProfileFn ramp = preset_profile("ramp-smoothed", 0.2);
  CHECK_THROWS_AS(ytilde(-0.5, 0.5, 0.0, ramp), DomainError);
}

TEST_CASE("singular columns take the fiber coordinate from the other endpoint") {
  const ProfileFn ramp = preset_profile("ramp-smoothed", 0.2);
  const Point2 p(-0.5, 0.0), q(0.9, 0.5 * ramp(0.9));
  const Point2 m = midpoint(p, q, ramp);
  CHECK(m.x() == doctest::Approx(0.2));
  CHECK(m.y() == doctest::Approx(0.5 * ramp(0.2)));
  check_midpoint(p, q, m, ramp);
}

TEST_CASE("points outside the space are rejected") {
  CHECK_THROWS_AS(midpoint({0.0, 1.0}, {0.5, 0.0}, valley), PreconditionError);
  CHECK_THROWS_AS(midpoint({0.0, -1e-3}, {0.5, 0.0}, valley), PreconditionError);
}

TEST_CASE("dyadic geodesics have constant speed") {
  const Point2 p(-0.8, 0.3 * valley(-0.8)), q(0.7, 0.9 * valley(0.7));
  const SampledCurve c = geodesic_refine(p, q, valley, 6);
  CHECK(c.size() == 65);
  CHECK(c.front() == p);
  CHECK(c.back() == q);
  CHECK(constant_speed_defect(c) < 1e-9 * dist_inf(p, q));
  CHECK(c.at(0.5).x() == doctest::Approx(-0.05));
  CHECK_THROWS_AS(c.at(0.3), PreconditionError);
  CHECK_THROWS_AS(geodesic_refine(p, q, valley, 13), PreconditionError);

  std::ostringstream os;
  write_curve_csv(os, c);
  CHECK(os.str().rfind("t,x,y\n", 0) == 0);
}

TEST_CASE("forced segment witness on the singular space") {
  const ProfileFn ramp = preset_profile("ramp-smoothed", 0.2);
  const double h = ramp(0.5);
  const Point2 p(-0.5, 0.0), q1(0.5, 0.1 * h), q2(0.5, 0.9 * h);
  const BranchingWitness w = forced_segment_witness(ramp, p, q1, q2, 8);
  CHECK(w.t_star == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(w.agreement_defect <= 1e-10);
  CHECK(w.separation == doctest::Approx(0.8 * h));
  CHECK(w.first.at(0.5) == w.second.at(0.5));
  CHECK(dist_inf(w.first.at(0.75), w.second.at(0.75)) > 0.0);

  CHECK_THROWS_AS(forced_segment_witness(ramp, {0.2, 0.0}, q1, q2), PreconditionError);
  CHECK_THROWS_AS(forced_segment_witness(ramp, p, q1, q1), PreconditionError);
  CHECK_THROWS_AS(forced_segment_witness(ramp, p, q1, {0.6, 0.0}), PreconditionError);
}
