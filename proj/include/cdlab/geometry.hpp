#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <vector>

#include "cdlab/profiles.hpp"

namespace cdlab {

using Point2 = Eigen::Vector2d;

/// l-infinity distance max(|dx|, |dy|).
inline double dist_inf(const Point2& p, const Point2& q) { return (p - q).cwiseAbs().maxCoeff(); }

/// Pair classes by displacement: V vertical-dominant, D diagonal, H0 flat
/// horizontal (|dy| <= |dx|/2), H1 steep horizontal (|dx|/2 < |dy| < |dx|).
enum class PairClass { V, D, H0, H1 };

std::string_view to_string(PairClass c);

PairClass classify_pair(const Point2& p, const Point2& q);

inline bool is_horizontal(PairClass c) { return c == PairClass::H0 || c == PairClass::H1; }

/// Vertical offset used by the steep-horizontal midpoint, for x0 < x1:
///   1/2 (y0/f(x0) + (y0 + (x1-x0)/2)/f(x1)) f((x0+x1)/2) - y0.
/// Throws DomainError if f vanishes at either endpoint.
double ytilde(double x0, double x1, double y0, const ProfileFn& f);

/// Partial derivative of ytilde with respect to y0.
double ytilde_dy(double x0, double x1, const ProfileFn& f);

struct MidpointOptions {
  /// Allowed deviation |d(M,p) - d(p,q)/2|, relative to d(p,q).
  double property_tol = 1e-9;
  /// Absolute slack on 0 <= y <= f(x) for inputs and output.
  double membership_slack = 1e-12;
};

/// The region-dependent midpoint selection on X_f:
///   V, D  -> Euclidean midpoint;
///   H0    -> fiber-proportional midpoint ((x0+x1)/2, (u0+u1)/2 f((x0+x1)/2));
///   H1    -> ytilde-corrected midpoint, other orientations by reflection.
/// On a singular column (f(x) = 0) the fiber coordinate is free and is taken
/// from the other endpoint. Throws PreconditionError for points outside X_f
/// and AuditError if the result is not a d-infinity midpoint inside X_f.
Point2 midpoint(const Point2& p, const Point2& q, const ProfileFn& f, const MidpointOptions& opts = {});

/// A curve stored at the dyadic times j / 2^depth.
struct SampledCurve {
  Eigen::ArrayXd ts;
  Eigen::Matrix<double, Eigen::Dynamic, 2> points;

  Eigen::Index size() const { return ts.size(); }
  Point2 point(Eigen::Index i) const { return points.row(i).transpose(); }
  Point2 front() const { return point(0); }
  Point2 back() const { return point(size() - 1); }
  /// Point at a stored dyadic time; throws PreconditionError otherwise.
  Point2 at(double t) const;
};

/// max over stored pairs of |d(g(s), g(t)) - |s-t| d(g(0), g(1))|.
double constant_speed_defect(const SampledCurve& c);

/// Dyadic refinement of the midpoint map: 2^depth + 1 samples, depth <= 12.
/// Throws AuditError if the constant-speed defect exceeds `speed_tol`
/// (default 1e-9 d(p,q)).
SampledCurve geodesic_refine(const Point2& p, const Point2& q, const ProfileFn& f, int depth,
                             double speed_tol = -1.0);

/// Probability measure on sampled geodesics. Optional cell indices record
/// which grid cells the endpoints came from.
struct GeodesicFamily {
  std::vector<SampledCurve> curves;
  std::vector<double> weights;
  std::vector<Eigen::Index> source_cells;
  std::vector<Eigen::Index> target_cells;

  std::size_t size() const { return curves.size(); }
};

/// Two geodesics that coincide up to time t_star and then separate.
struct BranchingWitness {
  double t_star = 0.0;
  Point2 branch_point = Point2::Zero();
  SampledCurve first;
  SampledCurve second;
  double separation = 0.0;        // d(first(1), second(1))
  double agreement_defect = 0.0;  // max d(first(t), second(t)) over stored t <= t_star
};

/// Branching forced by the one-dimensional part of a singular space: any
/// geodesic from p (with f(p.x) = 0) to a point q in H-position moves with
/// |x'| = d(p,q), so it must stay on y = 0 until it leaves {f = 0}. Returns
/// geodesics to q1 and q2 that share that initial segment. Throws
/// PreconditionError if p is not on the singular part, q1 == q2, q1.x != q2.x,
/// or a pair is not horizontal.
BranchingWitness forced_segment_witness(const ProfileFn& f, const Point2& p, const Point2& q1, const Point2& q2,
                                        int depth = 8);

void write_curve_csv(std::ostream& os, const SampledCurve& c);

}  // namespace cdlab
