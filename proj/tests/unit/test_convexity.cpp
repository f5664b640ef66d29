#include <cmath>
#include <random>

#include "cdlab/convexity.hpp"
#include "cdlab/error.hpp"
#include "doctest.h"

using namespace cdlab;

namespace {

SampledFunction analytic(std::function<double(double)> g, std::function<double(double)> g1,
                         std::function<double(double)> g2, double a, double b, int n = 257) {
  return SampledFunction::sample(g, g1, g2, a, b, n);
}

}  // namespace

TEST_CASE("-log t is (0,1)-convex and no better") {
  const auto g = analytic([](double t) { return -std::log(t); }, [](double t) { return -1.0 / t; },
                          [](double t) { return 1.0 / (t * t); }, 0.5, 4.0);
  const ConvexityCertificate c = kn_certificate(g, 0.0, 1.0);
  CHECK(c.passed);
  CHECK(std::abs(c.min_slack) < 1e-12);
  CHECK_FALSE(kn_certificate(g, 0.0, 0.9).passed);
  CHECK_FALSE(kn_certificate(g, 0.01, 1.0).passed);
}

TEST_CASE("quadratics and cubics") {
  const double K = 3.0;
  const auto q = analytic([=](double t) { return K * t * t; }, [=](double t) { return 2 * K * t; },
                          [=](double) { return 2 * K; }, -1.0, 1.0);
  CHECK(kn_certificate(q, 2 * K, INFINITY).passed);
  CHECK_FALSE(kn_certificate(q, 2 * K + 0.1, INFINITY).passed);
  CHECK_FALSE(kn_certificate(q, 0.0, 2.0).passed);  // needs 2K >= 4K^2 t^2 / 2

  const auto cubic = analytic([](double t) { return -t * t * t; }, [](double t) { return -3 * t * t; },
                              [](double t) { return -6 * t; }, 0.1, 1.0);
  const ConvexityCertificate c = kn_certificate(cubic, 0.0, INFINITY);
  CHECK_FALSE(c.passed);
  CHECK(c.argmin_t == doctest::Approx(1.0));
  CHECK_THROWS_AS(kn_certificate(q, 0.0, 0.0), PreconditionError);
}

TEST_CASE("finite differences agree with analytic derivatives") {
  auto g = [](double t) { return std::exp(t) + t * t; };
  const SampledFunction fd = SampledFunction::sample(g, -1.0, 1.0, 401);
  const auto [d1, d2] = derivatives(fd);
  CHECK(std::isnan(d1(0)));
  CHECK(std::isnan(d2(400)));
  for (Eigen::Index i = 1; i < 400; ++i) {
    const double t = fd.ts(i);
    CHECK(d1(i) == doctest::Approx(std::exp(t) + 2 * t).epsilon(1e-4));
    CHECK(d2(i) == doctest::Approx(std::exp(t) + 2).epsilon(1e-4));
  }
  CHECK(kn_certificate(fd, 1.0, INFINITY).passed);
}

TEST_CASE("sampled function preconditions") {
  SampledFunction s;
  s.ts = Eigen::ArrayXd::LinSpaced(4, 0.0, 1.0);
  s.gs = s.ts;
  CHECK_THROWS_AS(s.validate(), PreconditionError);
  s.ts = Eigen::ArrayXd::LinSpaced(6, 0.0, 1.0);
  s.gs = Eigen::ArrayXd::Zero(5);
  CHECK_THROWS_AS(s.validate(), PreconditionError);
  s.gs = Eigen::ArrayXd::Zero(6);
  s.ts(2) = 0.21;  // non-uniform without derivatives
  CHECK_THROWS_AS(s.validate(), PreconditionError);
}

TEST_CASE("exponential characterization agrees with the direct certificate") {
  const auto q = analytic([](double t) { return t * t; }, [](double t) { return 2 * t; }, [](double) { return 2.0; },
                          -1.0, 1.0);
  const CharacterizationReport good = gN_characterization_check(q, 0.0, 2.0);
  CHECK(good.direct.passed);
  CHECK(good.gN_passed);
  CHECK(good.agree);
  const CharacterizationReport bad = gN_characterization_check(q, 0.0, 0.5);
  CHECK_FALSE(bad.direct.passed);
  CHECK_FALSE(bad.gN_passed);
  CHECK(bad.agree);
}

TEST_CASE("affine reparametrization scales K by beta squared") {
  const auto g = analytic([](double s) { return std::cosh(s); }, [](double s) { return std::sinh(s); },
                          [](double s) { return std::cosh(s); }, -2.0, 2.0, 401);
  const ReparametrizationReport r = reparametrize_check(g, 0.5, 2.0, 0.5, 8.0);
  CHECK(r.agree);
  CHECK(r.reparametrized.K == doctest::Approx(2.0));
  CHECK_THROWS_AS(reparametrize_check(g, 0.0, 0.0, 0.5, 8.0), PreconditionError);
  CHECK_THROWS_AS(reparametrize_check(g, 0.0, 1.0, 0.5, 8.0, std::make_pair(-5.0, 5.0)), PreconditionError);
}

TEST_CASE("additivity of (K,N) convexity") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(0.5, 3.0);
  for (int i = 0; i < 20; ++i) {
    const double a = U(rng), c = U(rng);
    const auto g = analytic([=](double t) { return a * t * t / 2; }, [=](double t) { return a * t; },
                            [=](double) { return a; }, -1.0, 1.0, 65);
    const auto h = analytic([=](double t) { return c * t * t / 2 + t; }, [=](double t) { return c * t + 1; },
                            [=](double) { return c; }, -1.0, 1.0, 65);
    const double N1 = 2.02 * a + 1e-3, N2 = 2.02 * (c + 1) * (c + 1) / c + 1e-3;
    const AdditivityReport r = additivity_check(g, h, a / 2, N1, c / 2, N2);
    CHECK(r.first.passed);
    CHECK(r.second.passed);
    CHECK(r.sum.passed);
    CHECK(r.min_excess >= -1e-12);
    CHECK(r.implication_holds);
  }
  const auto g = analytic([](double t) { return t; }, [](double) { return 1.0; }, [](double) { return 0.0; }, 0.0,
                          1.0, 33);
  const auto h = analytic([](double t) { return t; }, [](double) { return 1.0; }, [](double) { return 0.0; }, 0.0,
                          2.0, 33);
  CHECK_THROWS_AS(additivity_check(g, h, 0, 1, 0, 1), PreconditionError);
}

TEST_CASE("bump function values and bounds") {
  CHECK(phi_bump(0.0) == 0.0);
  CHECK(phi_bump(0.2) == 0.0);
  CHECK(phi_bump(0.5) == 1.0);
  CHECK(phi_bump(0.9) == 0.0);
  CHECK(phi_bump_d1(0.5) == 0.0);
  const PhiAudit& a = phi_audit();
  CHECK(a.max_abs_d1 <= 16.0);
  CHECK(a.max_abs_d2 <= 128.0);
  CHECK(a.samples == 4096);
}

TEST_CASE("h interpolates 1 and A with a bump in the middle") {
  const double delta = 0x1p-12;
  const SampledFunction h = build_h(2.0, delta, 5);
  CHECK(h.gs(0) == 1.0);
  CHECK(h.gs(2) == doctest::Approx(1.5 + 0x1p-12).epsilon(1e-15));
  CHECK(h.gs(4) == 2.0);
  CHECK_THROWS_AS(build_h(-1.0, delta, 5), PreconditionError);
  CHECK_THROWS_AS(build_h(2.0, kMaxBumpDelta, 5), PreconditionError);
  CHECK_THROWS_AS(build_h(2.0, delta, 4), PreconditionError);
  CHECK_THROWS_AS(neg_log(build_h(0.0, 0.0, 5)), DomainError);
}

TEST_CASE("bump certificates over the parameter range") {
  for (double A : {0.0, 0.5, 1.0, 2.0, 4.0}) {
    for (double delta : {-0x1p-12, 0.0, 0x1p-12, 0.9 * 0x1p-11}) {
      CAPTURE(A);
      CAPTURE(delta);
      CHECK(bump_certificate(A, delta).passed);
    }
  }
}

TEST_CASE("line estimate on a gentle line") {
  const double k = 0.01;
  const SpaceParams sp = make_compact_space(preset_profile("constant", k), k, 16.0);
  const auto y = analytic([=](double x) { return 0.3 * (x + 0.5); }, [](double) { return 0.3; },
                          [](double) { return 0.0; }, -0.5, -0.5 + k / 0.3 * 0.9, 129);
  const LineProfileReport r = line_profile_check(sp, y, 1.0);
  CHECK(r.certificate.passed);
  CHECK(r.f_I == doctest::Approx(k));
  CHECK(r.min_dy == doctest::Approx(0.3));
  CHECK(r.certificate.N == doctest::Approx(32 * 16.0));

  const auto shallow = analytic([](double x) { return 0.1 * (x + 0.5); }, [](double) { return 0.1; },
                                [](double) { return 0.0; }, -0.5, -0.45, 33);
  CHECK_THROWS_AS(line_profile_check(sp, shallow, 1.0), PreconditionError);
  const auto too_high = analytic([](double x) { return 0.3 * (x + 0.5); }, [](double) { return 0.3; },
                                 [](double) { return 0.0; }, -0.5, 0.0, 33);
  CHECK_THROWS_AS(line_profile_check(sp, too_high, 1.0), PreconditionError);
}

TEST_CASE("case profiles certify the pointwise criterion") {
  const double k = kDefaultK;
  const SpaceParams sp = make_compact_space(preset_profile("valley", k), k, 16.0);
  const ProfileFn& f = sp.f;

  CaseData h0;
  h0.z = {-0.5, 0.3 * f(-0.5)};
  h0.T = {0.4, 0.7 * f(0.4)};
  h0.dT1dx = 1.5;
  h0.dT2dy = 0.7;
  const CaseProfile p0 = case_profile(CaseKind::H0, h0, sp);
  CHECK(p0.N_required == doctest::Approx(2 * 16.0 + 2));
  CHECK(certify_case(p0).passed);

  CaseData v;
  v.z = {0.1, 0.1 * f(0.1)};
  v.T = {0.1 + 0.2 * f(0.1), 0.8 * f(0.1)};
  v.dT1dx = 0.5;
  v.dT2dy = 3.0;
  const CaseProfile pv = case_profile(CaseKind::V, v, sp);
  CHECK(pv.N_required == doctest::Approx(32 * 16.0 + 2));
  CHECK(certify_case(pv).passed);

  CaseData h1;
  h1.z = {0.2, 0.05 * f(0.2)};
  h1.T = {0.2 + 0.5 * f(0.2), 0.05 * f(0.2) + 0.35 * f(0.2)};
  h1.dT1dx = 2.0;
  h1.dT2dy = 0.4;
  const CaseProfile p1 = case_profile(CaseKind::H1, h1, sp);
  CHECK(p1.N_required == doctest::Approx(32 * 16.0 + 3));
  CHECK(std::abs(p1.bump_delta) < kMaxBumpDelta);
  CHECK(certify_case(p1).passed);

  CaseData neg = h0;
  neg.dT1dx = -1.0;
  CHECK_THROWS_AS(case_profile(CaseKind::H0, neg, sp), PreconditionError);
  CHECK_THROWS_AS(case_profile(CaseKind::V, h0, sp), PreconditionError);
  CHECK(to_string(CaseKind::H1) == "H1");
}
