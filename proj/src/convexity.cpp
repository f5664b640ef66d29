#include "cdlab/convexity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cdlab/error.hpp"

namespace cdlab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double inv_N(double N) { return std::isinf(N) ? 0.0 : 1.0 / N; }

ConvexityCertificate certificate_from_slack(const SampledFunction& g, const Eigen::ArrayXd& slack, double K, double N,
                                            double tol) {
  ConvexityCertificate c;
  c.K = K;
  c.N = N;
  c.tol = tol;
  c.min_slack = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < slack.size(); ++i) {
    if (std::isnan(slack(i))) continue;
    if (slack(i) < c.min_slack) {
      c.min_slack = slack(i);
      c.argmin = i;
    }
  }
  c.argmin_t = g.ts(c.argmin);
  c.passed = c.min_slack >= -tol;
  return c;
}

}  // namespace

void SampledFunction::validate() const {
  if (ts.size() < 5) throw PreconditionError("sampled function needs at least 5 samples");
  if (gs.size() != ts.size()) throw PreconditionError("sampled function: value count differs from sample count");
  if ((d1 && d1->size() != ts.size()) || (d2 && d2->size() != ts.size())) {
    throw PreconditionError("sampled function: derivative count differs from sample count");
  }
  const Eigen::ArrayXd steps = ts.tail(ts.size() - 1) - ts.head(ts.size() - 1);
  if ((steps <= 0.0).any()) throw PreconditionError("sample times must be strictly increasing");
  if (!analytic()) {
    const double h = (ts(ts.size() - 1) - ts(0)) / static_cast<double>(ts.size() - 1);
    if (((steps - h).abs() > 1e-9 * h).any()) {
      throw PreconditionError("finite differences need uniformly spaced samples");
    }
  }
}

SampledFunction SampledFunction::sample(const std::function<double(double)>& g, double a, double b, int n) {
  SampledFunction s;
  s.ts = Eigen::ArrayXd::LinSpaced(n, a, b);
  s.gs = s.ts.unaryExpr(g);
  s.validate();
  return s;
}

SampledFunction SampledFunction::sample(const std::function<double(double)>& g, const std::function<double(double)>& g1,
                                        const std::function<double(double)>& g2, double a, double b, int n) {
  SampledFunction s;
  s.ts = Eigen::ArrayXd::LinSpaced(n, a, b);
  s.gs = s.ts.unaryExpr(g);
  s.d1 = s.ts.unaryExpr(g1);
  s.d2 = s.ts.unaryExpr(g2);
  s.validate();
  return s;
}

SampledFunction SampledFunction::slice(Eigen::Index first, Eigen::Index last) const {
  const Eigen::Index n = last - first + 1;
  SampledFunction s;
  s.ts = ts.segment(first, n);
  s.gs = gs.segment(first, n);
  if (d1) s.d1 = d1->segment(first, n);
  if (d2) s.d2 = d2->segment(first, n);
  s.validate();
  return s;
}

SampledFunction operator+(const SampledFunction& a, const SampledFunction& b) {
  if (a.size() != b.size() || ((a.ts - b.ts).abs() > 1e-14 * (1.0 + a.ts.abs())).any()) {
    throw PreconditionError("sampled functions live on different grids");
  }
  SampledFunction s;
  s.ts = a.ts;
  s.gs = a.gs + b.gs;
  if (a.analytic() && b.analytic()) {
    s.d1 = *a.d1 + *b.d1;
    s.d2 = *a.d2 + *b.d2;
  }
  return s;
}

std::pair<Eigen::ArrayXd, Eigen::ArrayXd> derivatives(const SampledFunction& g) {
  g.validate();
  if (g.analytic()) return {*g.d1, *g.d2};
  const Eigen::Index n = g.size();
  const double h = (g.ts(n - 1) - g.ts(0)) / static_cast<double>(n - 1);
  Eigen::ArrayXd d1 = Eigen::ArrayXd::Constant(n, kNaN);
  Eigen::ArrayXd d2 = Eigen::ArrayXd::Constant(n, kNaN);
  for (Eigen::Index i = 1; i + 1 < n; ++i) {
    d1(i) = (g.gs(i + 1) - g.gs(i - 1)) / (2.0 * h);
    d2(i) = (g.gs(i + 1) - 2.0 * g.gs(i) + g.gs(i - 1)) / (h * h);
  }
  return {d1, d2};
}

Eigen::ArrayXd kn_slack(const SampledFunction& g, double K, double N) {
  const auto [d1, d2] = derivatives(g);
  return d2 - K - d1.square() * inv_N(N);
}

double default_tolerance(const SampledFunction& g) {
  if (g.analytic()) return 1e-6;
  const double h = (g.ts(g.size() - 1) - g.ts(0)) / static_cast<double>(g.size() - 1);
  return 1e-6 + 1e2 * h * h * g.gs.abs().maxCoeff();
}

ConvexityCertificate kn_certificate(const SampledFunction& g, double K, double N, double tol) {
  if (!(N > 0.0)) throw PreconditionError("kn_certificate: N must be positive");
  if (tol < 0.0) tol = default_tolerance(g);
  return certificate_from_slack(g, kn_slack(g, K, N), K, N, tol);
}

CharacterizationReport gN_characterization_check(const SampledFunction& g, double K, double N, double tol) {
  if (!(N > 0.0) || std::isinf(N)) throw PreconditionError("gN_characterization_check: N must be positive and finite");
  if (tol < 0.0) tol = default_tolerance(g);
  CharacterizationReport r;
  r.direct = kn_certificate(g, K, N, tol);

  SampledFunction gN;
  gN.ts = g.ts;
  gN.gs = (-g.gs / N).exp();
  Eigen::ArrayXd d1, d2;
  if (g.analytic()) {
    d1 = -(*g.d1) / N * gN.gs;
    d2 = ((*g.d1).square() / (N * N) - (*g.d2) / N) * gN.gs;
  } else {
    std::tie(d1, d2) = derivatives(gN);
  }
  // Normalized so that the slack is comparable with g'' - K - g'^2/N.
  const Eigen::ArrayXd slack = (-(K / N) * gN.gs - d2) * N / gN.gs;
  const ConvexityCertificate c = certificate_from_slack(gN, slack, K, N, tol);
  r.gN_min_slack = c.min_slack;
  r.gN_passed = c.passed;
  r.agree = r.gN_passed == r.direct.passed;
  return r;
}

ReparametrizationReport reparametrize_check(const SampledFunction& g, double alpha, double beta, double K, double N,
                                            std::optional<std::pair<double, double>> t_range, double tol) {
  if (beta == 0.0) throw PreconditionError("reparametrize_check: beta must be nonzero");
  g.validate();
  if (tol < 0.0) tol = default_tolerance(g);
  const Eigen::Index n = g.size();

  SampledFunction src = g;
  if (t_range) {
    const double s0 = alpha + beta * t_range->first, s1 = alpha + beta * t_range->second;
    const double lo = std::min(s0, s1), hi = std::max(s0, s1);
    const double eps = 1e-12 * (1.0 + std::abs(g.ts(n - 1)) + std::abs(g.ts(0)));
    if (lo < g.ts(0) - eps || hi > g.ts(n - 1) + eps) {
      throw PreconditionError("reparametrize_check: alpha + beta t leaves the sampled domain");
    }
    Eigen::Index first = 0, last = n - 1;
    while (first < n && g.ts(first) < lo - eps) ++first;
    while (last >= 0 && g.ts(last) > hi + eps) --last;
    if (last - first + 1 < 5) throw PreconditionError("reparametrize_check: fewer than 5 samples in the range");
    src = g.slice(first, last);
  }

  SampledFunction r;
  r.ts = (src.ts - alpha) / beta;
  r.gs = src.gs;
  if (src.analytic()) {
    r.d1 = *src.d1 * beta;
    r.d2 = *src.d2 * (beta * beta);
  }
  if (beta < 0.0) {
    r.ts.reverseInPlace();
    r.gs.reverseInPlace();
    if (r.d1) r.d1->reverseInPlace();
    if (r.d2) r.d2->reverseInPlace();
  }

  ReparametrizationReport rep;
  rep.original = kn_certificate(src, K, N, tol);
  rep.reparametrized = kn_certificate(r, beta * beta * K, N, tol * beta * beta);
  rep.agree = rep.original.passed == rep.reparametrized.passed;
  return rep;
}

AdditivityReport additivity_check(const SampledFunction& g, const SampledFunction& h, double K1, double N1, double K2,
                                  double N2, double tol) {
  const SampledFunction sum = g + h;
  if (tol < 0.0) tol = std::max(default_tolerance(g), default_tolerance(h));
  AdditivityReport r;
  r.first = kn_certificate(g, K1, N1, tol);
  r.second = kn_certificate(h, K2, N2, tol);
  r.sum = kn_certificate(sum, K1 + K2, N1 + N2, tol);
  const Eigen::ArrayXd excess = kn_slack(sum, K1 + K2, N1 + N2) - kn_slack(g, K1, N1) - kn_slack(h, K2, N2);
  r.min_excess = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < excess.size(); ++i) {
    if (!std::isnan(excess(i))) r.min_excess = std::min(r.min_excess, excess(i));
  }
  r.implication_holds = !(r.first.passed && r.second.passed) || r.sum.passed;
  return r;
}

// ---------------------------------------------------------------------------

namespace {

double smoothstep(double u) { return u * u * u * (10.0 + u * (-15.0 + 6.0 * u)); }
double smoothstep_d1(double u) { return 30.0 * u * u * (1.0 - u) * (1.0 - u); }
double smoothstep_d2(double u) { return 60.0 * u * (1.0 - u) * (1.0 - 2.0 * u); }

struct BumpParts {
  double a, da, b, db;
};

BumpParts bump_parts(double t) {
  const double ra = 4.0 * (t - 0.25), rb = 4.0 * (0.75 - t);
  BumpParts p{};
  p.a = std::clamp(ra, 0.0, 1.0);
  p.da = (ra > 0.0 && ra < 1.0) ? 4.0 : 0.0;
  p.b = std::clamp(rb, 0.0, 1.0);
  p.db = (rb > 0.0 && rb < 1.0) ? -4.0 : 0.0;
  return p;
}

}  // namespace

double phi_bump(double t) {
  const BumpParts p = bump_parts(t);
  return smoothstep(p.a) * smoothstep(p.b);
}

double phi_bump_d1(double t) {
  const BumpParts p = bump_parts(t);
  return smoothstep_d1(p.a) * p.da * smoothstep(p.b) + smoothstep(p.a) * smoothstep_d1(p.b) * p.db;
}

double phi_bump_d2(double t) {
  const BumpParts p = bump_parts(t);
  return smoothstep_d2(p.a) * p.da * p.da * smoothstep(p.b) +
         2.0 * smoothstep_d1(p.a) * p.da * smoothstep_d1(p.b) * p.db + smoothstep(p.a) * smoothstep_d2(p.b) * p.db * p.db;
}

const PhiAudit& phi_audit() {
  static const PhiAudit audit = [] {
    PhiAudit a;
    a.samples = 4096;
    for (int i = 0; i < a.samples; ++i) {
      const double t = static_cast<double>(i) / (a.samples - 1);
      a.max_abs_d1 = std::max(a.max_abs_d1, std::abs(phi_bump_d1(t)));
      a.max_abs_d2 = std::max(a.max_abs_d2, std::abs(phi_bump_d2(t)));
    }
    if (a.max_abs_d1 > 16.0 || a.max_abs_d2 > 128.0) throw AuditError("bump derivative bounds violated");
    return a;
  }();
  return audit;
}

SampledFunction build_h(double A, double delta, int samples) {
  if (!(A >= 0.0)) throw PreconditionError("build_h: A must be nonnegative");
  if (!(std::abs(delta) < kMaxBumpDelta)) throw PreconditionError("build_h: |delta| must be below 2^-11");
  if (samples < 5) throw PreconditionError("build_h: at least 5 samples");
  phi_audit();
  const double c = A - 1.0;
  SampledFunction h;
  h.ts = Eigen::ArrayXd::LinSpaced(samples, 0.0, 1.0);
  h.gs = h.ts.unaryExpr([&](double t) { return 1.0 + c * (t + delta * phi_bump(t)); });
  h.d1 = h.ts.unaryExpr([&](double t) { return c * (1.0 + delta * phi_bump_d1(t)); });
  h.d2 = h.ts.unaryExpr([&](double t) { return c * delta * phi_bump_d2(t); });
  // Endpoint and midpoint identities hold exactly.
  h.gs(0) = 1.0;
  h.gs(samples - 1) = A;
  if (samples % 2 == 1) h.gs(samples / 2) = 1.0 + (0.5 + delta) * c;
  return h;
}

SampledFunction neg_log(const SampledFunction& h) {
  if ((h.gs <= 0.0).any()) throw DomainError("neg_log: function must be positive");
  SampledFunction g;
  g.ts = h.ts;
  g.gs = -h.gs.log();
  if (h.analytic()) {
    g.d1 = -(*h.d1) / h.gs;
    g.d2 = (*h.d1).square() / h.gs.square() - (*h.d2) / h.gs;
  }
  return g;
}

ConvexityCertificate bump_certificate(double A, double delta, int samples, double tol) {
  SampledFunction h = build_h(A, delta, samples);
  if (A == 0.0) {
    Eigen::Index last = h.size() - 1;
    while (last > 0 && h.ts(last) > 1.0 - 1e-3) --last;
    h = h.slice(0, last);
  }
  return kn_certificate(neg_log(h), -0x1p21 * delta * delta, 2.0, tol);
}

// ---------------------------------------------------------------------------

namespace {

// -log m along a curve, from pointwise position and derivative data.
struct NegLogDensity {
  double g, d1, d2;
};

NegLogDensity neg_log_density_point(const SpaceParams& params, double X, double dX, double ddX, double Y, double dY,
                                    double ddY) {
  const ProfileFn& f = params.f;
  const double F = f(X);
  if (!(F > 0.0)) throw DomainError("-log m along a curve: the profile vanishes");
  const double F1 = f.d1(X) * dX;
  const double F2 = f.d2(X) * dX * dX + f.d1(X) * ddX;
  const double v = Y / F;
  const double v1 = dY / F - Y * F1 / (F * F);
  const double v2 = ddY / F - 2.0 * dY * F1 / (F * F) - Y * F2 / (F * F) + 2.0 * Y * F1 * F1 / (F * F * F);
  const double K = params.K;
  return {std::log(F) + K * v * v, F1 / F + 2.0 * K * v * v1, (F2 * F - F1 * F1) / (F * F) + 2.0 * K * (v1 * v1 + v * v2)};
}

}  // namespace

SampledFunction neg_log_density_along(const SpaceParams& params, const CurveData& c, double a, double b, int n) {
  SampledFunction g;
  g.ts = Eigen::ArrayXd::LinSpaced(n, a, b);
  g.gs.resize(n);
  Eigen::ArrayXd d1(n), d2(n);
  for (int i = 0; i < n; ++i) {
    const double t = g.ts(i);
    const NegLogDensity p = neg_log_density_point(params, c.x(t), c.dx(t), c.ddx(t), c.y(t), c.dy(t), c.ddy(t));
    g.gs(i) = p.g;
    d1(i) = p.d1;
    d2(i) = p.d2;
  }
  g.d1 = std::move(d1);
  g.d2 = std::move(d2);
  g.validate();
  return g;
}

LineProfileReport line_profile_check(const SpaceParams& params, const SampledFunction& y, double H, double tol) {
  y.validate();
  if (!y.analytic()) throw PreconditionError("line_profile_check: y needs analytic derivatives");
  const ProfileFn& f = params.f;
  LineProfileReport rep;
  rep.min_dy = std::numeric_limits<double>::infinity();
  SampledFunction g;
  g.ts = y.ts;
  g.gs.resize(y.size());
  Eigen::ArrayXd d1(y.size()), d2(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double x = y.ts(i), fx = f(x);
    const double yi = y.gs(i), dy = (*y.d1)(i), ddy = (*y.d2)(i);
    const std::string at = " at x = " + std::to_string(x);
    if (dy < 0.25) throw PreconditionError("line_profile_check: y' < 1/4" + at);
    if (ddy > H * params.k / fx) throw PreconditionError("line_profile_check: y'' above H k / f" + at);
    if (yi < -1e-12 || yi > fx + 1e-12) throw PreconditionError("line_profile_check: curve leaves the space" + at);
    rep.f_I = std::max(rep.f_I, fx);
    rep.min_dy = std::min(rep.min_dy, dy);
    rep.max_curvature_ratio = std::max(rep.max_curvature_ratio, ddy * fx / params.k);
    const NegLogDensity p = neg_log_density_point(params, x, 1.0, 0.0, yi, dy, ddy);
    g.gs(i) = p.g;
    d1(i) = p.d1;
    d2(i) = p.d2;
  }
  g.d1 = std::move(d1);
  g.d2 = std::move(d2);
  rep.certificate = kn_certificate(g, params.K / (32.0 * rep.f_I * rep.f_I), 32.0 * params.K, tol);
  return rep;
}

// ---------------------------------------------------------------------------

std::string_view to_string(CaseKind kind) {
  switch (kind) {
    case CaseKind::H0: return "H0";
    case CaseKind::V: return "V";
    case CaseKind::H1: return "H1";
  }
  return "?";
}

namespace {

// -log of an affine function (1-t) p + t q on the samples.
SampledFunction neg_log_affine(const Eigen::ArrayXd& ts, double p, double q) {
  SampledFunction s;
  s.ts = ts;
  const Eigen::ArrayXd L = (1.0 - ts) * p + ts * q;
  if ((L <= 0.0).any()) throw DomainError("interpolated Jacobian factor is not positive");
  s.gs = -L.log();
  s.d1 = -(q - p) / L;
  s.d2 = (q - p) * (q - p) / L.square();
  return s;
}

}  // namespace

CaseProfile case_profile(CaseKind kind, const CaseData& d, const SpaceParams& params, int samples) {
  if (!(d.dT1dx > 0.0) || !(d.dT2dy > 0.0)) throw PreconditionError("case_profile: derivative data must be positive");
  if (samples < 5) throw PreconditionError("case_profile: at least 5 samples");
  const PairClass cls = classify_pair(d.z, d.T);
  const bool class_ok = (kind == CaseKind::H0 && cls == PairClass::H0) ||
                        (kind == CaseKind::V && (cls == PairClass::V || cls == PairClass::D)) ||
                        (kind == CaseKind::H1 && cls == PairClass::H1);
  if (!class_ok) {
    throw PreconditionError("case_profile: pair is of class " + std::string(to_string(cls)) + ", not " +
                            std::string(to_string(kind)));
  }
  const ProfileFn& f = params.f;
  const double K = params.K;
  const double x = d.z.x(), y = d.z.y(), T1 = d.T.x(), T2 = d.T.y();
  const Eigen::ArrayXd ts = Eigen::ArrayXd::LinSpaced(samples, 0.0, 1.0);

  CaseProfile out;
  out.kind = kind;
  const SampledFunction first = neg_log_affine(ts, 1.0, d.dT1dx);

  switch (kind) {
    case CaseKind::H0: {
      const double f0 = f(x), f1 = f(T1);
      const double u0 = y / f0, u1 = T2 / f1;
      SampledFunction quad;
      quad.ts = ts;
      const Eigen::ArrayXd q = (1.0 - ts) * u0 + ts * u1;
      quad.gs = K * q.square();
      quad.d1 = 2.0 * K * q * (u1 - u0);
      quad.d2 = Eigen::ArrayXd::Constant(samples, 2.0 * K * (u1 - u0) * (u1 - u0));
      out.g = first + neg_log_affine(ts, 1.0 / f0, d.dT2dy / f1) + quad;
      out.N_required = 2.0 * K + 2.0;
      break;
    }
    case CaseKind::V: {
      const double dx = T1 - x, dy = T2 - y;
      CurveData c{[=](double t) { return x + t * dx; }, [=](double) { return dx; }, [](double) { return 0.0; },
                  [=](double t) { return y + t * dy; }, [=](double) { return dy; }, [](double) { return 0.0; }};
      out.g = first + neg_log_affine(ts, 1.0, d.dT2dy) + neg_log_density_along(params, c, 0.0, 1.0, samples);
      out.N_required = 32.0 * K + 2.0;
      break;
    }
    case CaseKind::H1: {
      if (!(x < T1 && y < T2)) throw PreconditionError("case_profile: H1 data must satisfy x < T1 and y < T2");
      const double dx = T1 - x;
      const double yt = ytilde(x, T1, y, f);
      out.bump_delta = -(yt - 0.25 * dx) / (0.5 * dx);
      const SampledFunction h = build_h(d.dT2dy, out.bump_delta, samples);
      const Point2 M = midpoint(d.z, d.T, f);
      // Quadratic through z, M and T(z), parametrized over [0, 1].
      const double c1 = 4.0 * (M.y() - y) - (T2 - y);
      const double c2 = (T2 - y) - c1;
      CurveData c{[=](double t) { return x + t * dx; },    [=](double) { return dx; },
                  [](double) { return 0.0; },              [=](double t) { return y + t * (c1 + t * c2); },
                  [=](double t) { return c1 + 2.0 * c2 * t; }, [=](double) { return 2.0 * c2; }};
      out.g = first + neg_log(h) + neg_log_density_along(params, c, 0.0, 1.0, samples);
      out.N_required = 32.0 * K + 3.0;
      break;
    }
  }
  return out;
}

ConvexityCertificate certify_case(const CaseProfile& profile, double tol) {
  return kn_certificate(profile.g, 0.0, profile.N_required, tol);
}

}  // namespace cdlab
