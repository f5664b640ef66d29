#include "cdlab/geometry.hpp"

#include <cmath>
#include <ostream>

#include "cdlab/error.hpp"

namespace cdlab {

std::string_view to_string(PairClass c) {
  switch (c) {
    case PairClass::V: return "V";
    case PairClass::D: return "D";
    case PairClass::H0: return "H0";
    case PairClass::H1: return "H1";
  }
  return "?";
}

PairClass classify_pair(const Point2& p, const Point2& q) {
  const double ax = std::abs(p.x() - q.x());
  const double ay = std::abs(p.y() - q.y());
  if (ax < ay) return PairClass::V;
  if (ax == ay) return PairClass::D;
  if (0.5 * ax >= ay) return PairClass::H0;
  return PairClass::H1;
}

namespace {

// Canonical steep-horizontal midpoint for x0 < x1, y0 < y1. `fe` evaluates the
// profile, possibly through a reflection.
template <class F>
Point2 steep_midpoint(double x0, double y0, double x1, double y1, const F& fe) {
  const double f0 = fe(x0), f1 = fe(x1);
  if (!(f0 > 0.0 && f1 > 0.0)) throw DomainError("steep-horizontal midpoint requires f > 0 at both endpoints");
  const double dx = x1 - x0;
  const double xm = 0.5 * (x0 + x1);
  const double yt = 0.5 * (y0 / f0 + (y0 + 0.5 * dx) / f1) * fe(xm) - y0;
  const double slope_excess = 2.0 * (y1 - y0) / dx - 1.0;
  return {xm, y0 + yt + (0.5 * dx - yt) * slope_excess};
}

}  // namespace

double ytilde(double x0, double x1, double y0, const ProfileFn& f) {
  const double f0 = f(x0), f1 = f(x1);
  if (!(f0 > 0.0 && f1 > 0.0)) throw DomainError("ytilde requires f > 0 at both endpoints");
  const double xm = 0.5 * (x0 + x1);
  return 0.5 * (y0 / f0 + (y0 + 0.5 * (x1 - x0)) / f1) * f(xm) - y0;
}

double ytilde_dy(double x0, double x1, const ProfileFn& f) {
  const double f0 = f(x0), f1 = f(x1);
  if (!(f0 > 0.0 && f1 > 0.0)) throw DomainError("ytilde requires f > 0 at both endpoints");
  const double fm = f(0.5 * (x0 + x1));
  return 0.5 * fm / f0 + 0.5 * fm / f1 - 1.0;
}

Point2 midpoint(const Point2& p, const Point2& q, const ProfileFn& f, const MidpointOptions& opts) {
  const double fp = f(p.x()), fq = f(q.x());
  const double slack = opts.membership_slack;
  if (p.y() < -slack || p.y() > fp + slack || q.y() < -slack || q.y() > fq + slack) {
    throw PreconditionError("midpoint: endpoint outside the space");
  }

  const PairClass cls = classify_pair(p, q);
  Point2 m;
  switch (cls) {
    case PairClass::V:
    case PairClass::D: m = 0.5 * (p + q); break;
    case PairClass::H0: {
      double up = fp > 0.0 ? p.y() / fp : -1.0;
      double uq = fq > 0.0 ? q.y() / fq : -1.0;
      if (up < 0.0 && uq < 0.0) {
        up = uq = 0.0;
      } else if (up < 0.0) {
        up = uq;
      } else if (uq < 0.0) {
        uq = up;
      }
      const double xm = 0.5 * (p.x() + q.x());
      m = Point2(xm, 0.5 * (up + uq) * f(xm));
      break;
    }
    case PairClass::H1: {
      const Point2& lo = p.y() < q.y() ? p : q;
      const Point2& hi = p.y() < q.y() ? q : p;
      if (lo.x() < hi.x()) {
        m = steep_midpoint(lo.x(), lo.y(), hi.x(), hi.y(), f);
      } else {
        auto reflected = [&f](double x) { return f(-x); };
        const Point2 r = steep_midpoint(-lo.x(), lo.y(), -hi.x(), hi.y(), reflected);
        m = Point2(-r.x(), r.y());
      }
      break;
    }
  }

  const double d = dist_inf(p, q);
  const double tol = opts.property_tol * d + 1e-15;
  if (std::abs(dist_inf(m, p) - 0.5 * d) > tol || std::abs(dist_inf(m, q) - 0.5 * d) > tol) {
    throw AuditError("midpoint property violated for a " + std::string(to_string(cls)) + " pair");
  }
  if (m.y() < -slack || m.y() > f(m.x()) + slack) {
    throw AuditError("midpoint of a " + std::string(to_string(cls)) + " pair leaves the space");
  }
  return m;
}

Point2 SampledCurve::at(double t) const {
  const Eigen::Index n = size() - 1;
  const double pos = t * static_cast<double>(n);
  const double r = std::round(pos);
  if (n <= 0 || std::abs(pos - r) > 1e-9 || r < 0 || r > static_cast<double>(n)) {
    throw PreconditionError("time is not a stored dyadic time");
  }
  return point(static_cast<Eigen::Index>(r));
}

double constant_speed_defect(const SampledCurve& c) {
  const Eigen::Index n = c.size();
  if (n < 2) return 0.0;
  const double d = dist_inf(c.front(), c.back());
  const Eigen::Index stride = n > 257 ? (n - 1) / 256 : 1;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < n; i += stride) {
    for (Eigen::Index j = i + stride; j < n; j += stride) {
      const double expect = std::abs(c.ts(j) - c.ts(i)) * d;
      worst = std::max(worst, std::abs(dist_inf(c.point(i), c.point(j)) - expect));
    }
  }
  return worst;
}

SampledCurve geodesic_refine(const Point2& p, const Point2& q, const ProfileFn& f, int depth, double speed_tol) {
  if (depth < 0 || depth > 12) throw PreconditionError("geodesic_refine: depth must lie in [0, 12]");
  const Eigen::Index n = Eigen::Index{1} << depth;
  SampledCurve c;
  c.ts = Eigen::ArrayXd::LinSpaced(n + 1, 0.0, 1.0);
  c.points.resize(n + 1, 2);
  c.points.row(0) = p.transpose();
  c.points.row(n) = q.transpose();
  for (Eigen::Index step = n / 2; step >= 1; step /= 2) {
    for (Eigen::Index i = step; i < n; i += 2 * step) {
      c.points.row(i) = midpoint(c.point(i - step), c.point(i + step), f).transpose();
    }
  }
  const double d = dist_inf(p, q);
  const double tol = speed_tol >= 0.0 ? speed_tol : 1e-9 * d + 1e-15;
  if (constant_speed_defect(c) > tol) throw AuditError("geodesic_refine: constant-speed defect above tolerance");
  return c;
}

BranchingWitness forced_segment_witness(const ProfileFn& f, const Point2& p, const Point2& q1, const Point2& q2,
                                        int depth) {
  if (f(p.x()) != 0.0 || std::abs(p.y()) > 1e-12) {
    throw PreconditionError("forced_segment_witness: p must lie on the one-dimensional part");
  }
  if (q1 == q2) throw PreconditionError("forced_segment_witness: targets coincide, no branching");
  if (q1.x() != q2.x()) throw PreconditionError("forced_segment_witness: targets must share their x-coordinate");
  if (!(f(q1.x()) > 0.0)) throw PreconditionError("forced_segment_witness: targets must lie in the two-dimensional part");
  if (!is_horizontal(classify_pair(p, q1)) || !is_horizontal(classify_pair(p, q2))) {
    throw PreconditionError("forced_segment_witness: pairs must be horizontal");
  }

  // Leave {f = 0} along the segment from p.x towards q.x: coarse scan for the
  // first positive sample, then bisection on the boundary.
  const double x0 = p.x(), x1 = q1.x();
  constexpr int kScan = 4096;
  double lo = x0, hi = x1;
  for (int i = 1; i <= kScan; ++i) {
    const double x = x0 + (x1 - x0) * i / kScan;
    if (f(x) > 0.0) {
      hi = x;
      break;
    }
    lo = x;
  }
  for (int it = 0; it < 200 && lo != hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (f(mid) > 0.0 ? hi : lo) = mid;
  }
  const double x_exit = lo;

  BranchingWitness w;
  w.t_star = (x_exit - x0) / (x1 - x0);
  w.branch_point = Point2(x_exit, 0.0);
  w.first = geodesic_refine(p, q1, f, depth);
  w.second = geodesic_refine(p, q2, f, depth);
  w.separation = dist_inf(q1, q2);
  for (Eigen::Index i = 0; i < w.first.size(); ++i) {
    if (w.first.ts(i) > w.t_star) break;
    if (std::abs(w.first.points(i, 1)) > 1e-12 || std::abs(w.second.points(i, 1)) > 1e-12) {
      throw AuditError("forced_segment_witness: a geodesic leaves y = 0 inside the one-dimensional part");
    }
    w.agreement_defect = std::max(w.agreement_defect, dist_inf(w.first.point(i), w.second.point(i)));
  }
  return w;
}

void write_curve_csv(std::ostream& os, const SampledCurve& c) {
  os << "t,x,y\n";
  os.precision(17);
  for (Eigen::Index i = 0; i < c.size(); ++i) os << c.ts(i) << ',' << c.points(i, 0) << ',' << c.points(i, 1) << '\n';
}

}  // namespace cdlab
