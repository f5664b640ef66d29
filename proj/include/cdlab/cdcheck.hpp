#pragma once

#include <Eigen/Dense>
#include <array>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cdlab/geometry.hpp"
#include "cdlab/measure.hpp"
#include "cdlab/transport.hpp"

namespace cdlab {

// ---------------------------------------------------------------------------
// Pointwise Jacobi criterion

struct PointSlack {
  double x = 0.0;
  double y = 0.0;
  double slack = 0.0;
};

struct CdReport {
  double N_prime = 0.0;
  double tol = 0.0;
  std::vector<PointSlack> slacks;  // one per evaluated support cell
  double min_slack = 0.0;
  Point2 argmin = Point2::Zero();
  bool pass = false;               // min_slack >= -tol
  long points = 0;                 // evaluated cells
  long boundary_points = 0;        // evaluated with a one-sided difference
  long degenerate_points = 0;      // excluded: non-positive Jacobian
  std::array<long, 4> case_counts{};  // V, D, H0, H1
};

/// At every support cell z of mu0 evaluates
///   (m(S) J_S)^(1/N') - 1/2 (m(T) J_T)^(1/N') - 1/2 m(z)^(1/N')
/// with S = midpoint(z, T(z)). Both Jacobians are grid-neighbor differences
/// in (x, u): dS1/dx along the same level, dS2/dy along the same column.
/// Cells with a non-positive Jacobian are excluded and counted.
CdReport pointwise_cd_check(const DiscreteMeasure& mu0, const MonotoneMapGrid& map, double N_prime,
                            double tol = 1e-4);

/// Worst slack deficit max(0, -min_slack).
inline double slack_deficit(const CdReport& r) { return r.min_slack < 0.0 ? -r.min_slack : 0.0; }

/// CSV columns: x,y,slack.
void write_slack_csv(std::ostream& os, const CdReport& report);

// ---------------------------------------------------------------------------
// Jacobi residual of the structured map

struct JacobiResidual {
  double max_residual = 0.0;   // interior cells
  double mean_residual = 0.0;
  long interior_points = 0;
  long boundary_points = 0;
};

/// Relative residual |rho1(T) m(T) J_T - rho0 m| / (rho0 m) with J_T from the
/// grid differences of `map`, over cells whose stencils are two-sided.
JacobiResidual jacobi_residual(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1, const MonotoneMapGrid& map);

// ---------------------------------------------------------------------------
// Midpoint entropy convexity

struct EntropyVerdict {
  double N = 0.0;  // +infinity for the Boltzmann entropy
  double S0 = 0.0;
  double S1 = 0.0;
  double S_half = 0.0;
  double slack = 0.0;  // S0/2 + S1/2 - S_half
  bool passed = false;
};

struct MidpointEntropyReport {
  std::vector<EntropyVerdict> verdicts;
  double mass_loss = 0.0;
  std::shared_ptr<const DiscreteMeasure> midpoint_measure;
  bool pass = false;
};

/// Pushes mu0 through z -> midpoint(z, T(z)). Each source cell is mapped to
/// the (x, u)-box spanned by the images of its edges and its mass is spread
/// over the grid in proportion to m inside that box. Evaluates S_N for every
/// N in `N_list` and the Boltzmann entropy. Throws AuditError when the
/// re-binning loses more than 1e-8 of mass.
MidpointEntropyReport midpoint_entropy_test(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1,
                                            const StructuredMap& T, const std::vector<double>& N_list,
                                            double tol = 1e-9);

// ---------------------------------------------------------------------------
// Approximation of the singular space by regular ones

struct MghTrace {
  std::vector<double> epsilons;   // strictly decreasing
  std::vector<double> hausdorff;  // d_H(X_{f+eps}, X_f)
  std::vector<double> w1;         // between normalized reference measures
  /// 2 W(eps_last) - W(eps_prev), the linear extrapolation to eps = 0.
  double extrapolated_limit = 0.0;
  bool hausdorff_bounded = false;  // hausdorff[i] <= eps[i] for all i
  bool w1_decreasing = false;
};

/// Throws PreconditionError if f is not in the closure of F_k, if eps_list is
/// not strictly decreasing and positive, or if some f + eps leaves F_k.
MghTrace mgh_harness(const ProfileFn& f_singular, const std::vector<double>& eps_list, double k, double K, int nx,
                     int nu);

// ---------------------------------------------------------------------------
// Box-counting dimension

enum class BoxRegion { Left, Right, UnitSquare };

std::string_view to_string(BoxRegion r);

struct BoxDimensionReport {
  BoxRegion region = BoxRegion::Left;
  std::vector<double> epsilons;
  std::vector<double> counts;
  double slope = 0.0;
  double intercept = 0.0;
};

/// Least-squares slope of log N(eps) against log(1/eps), where N(eps) counts
/// the eps-boxes of the dyadic lattice meeting the region. Left is the
/// segment {f = 0}, Right the subgraph of f over [0, x_max], UnitSquare the
/// control [0,1]^2. Throws PreconditionError for fewer than 3 scales or if f
/// does not vanish exactly on [x_min, 0].
BoxDimensionReport box_dimension(const SpaceParams& params, BoxRegion region, const std::vector<double>& eps_list);

// ---------------------------------------------------------------------------
// Branching and the absence of transport maps

/// Dyadic midpoint geodesics along every entry of a plan between grid cells.
GeodesicFamily plan_family(const TransportPlan& plan, int depth);

struct BranchingReport {
  std::optional<BranchingWitness> witness;  // from the family of the computed plan
  Eigen::Index witness_source = -1;
  double plan_cost = 0.0;
  double duality_gap = 0.0;
  long family_size = 0;
  long splitting_sources = 0;
  /// Every source atom branches through the forced segment towards the
  /// lowest and highest target cells, so any optimal family contains it.
  bool forced_for_every_source = false;
  bool verified = false;  // witness sound: agreement <= 1e-10, separation > 0
};

/// Solves the quadratic problem from mu0 to mu1 and searches the resulting
/// geodesic family for two curves from one source that agree on an initial
/// segment and then separate.
BranchingReport branching_demo(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1, int depth = 6);

struct NoMapReport {
  double cost_residual = 0.0;  // max over sources of (max - min) cost to the fiber
  long sources = 0;
  long targets = 0;
  long maps_enumerated = 0;
  long feasible_maps = 0;  // maps whose push-forward equals the target measure
  bool solver_plan_is_map = true;
  double optimal_cost = 0.0;
  bool pass = false;  // residual <= 1e-15, no feasible map, solver plan splits
};

/// Source atoms at (x, 0) on {f = 0} with the given masses; targets at
/// (x_fiber, y_j) with the given masses. Every assignment sources -> targets
/// is enumerated (at most 2^20). Throws PreconditionError if a source is not
/// on the singular part, a target leaves X_f or the fiber is not shorter than
/// the horizontal gap.
NoMapReport no_map_demo(const ProfileFn& f, const std::vector<double>& source_x, const std::vector<double>& source_mass,
                        double x_fiber, const std::vector<double>& target_y, const std::vector<double>& target_mass);

// ---------------------------------------------------------------------------
// Restrictions of a geodesic plan

struct Restriction {
  std::string name;
  std::vector<double> weights;  // per curve, nonnegative
};

struct RestrictionResult {
  std::string name;
  long curves = 0;  // curves with positive weight
  double S0 = 0.0;
  double S_half = 0.0;
  double S1 = 0.0;
  double slack = 0.0;  // S0/2 + S1/2 - S_half
  bool degenerate = false;  // a single curve: Dirac marginals, S_N = 0
};

struct RestrictionSearchReport {
  double N = 0.0;
  double tol = 0.0;
  std::vector<RestrictionResult> results;
  std::size_t best = 0;  // index of the smallest slack
  bool violation_found = false;
};

/// The dictionary used by default: all curves, targets in the upper or lower
/// half of their fiber, sources in the left half, and the heaviest curve.
std::vector<Restriction> default_restrictions(const GeodesicFamily& family, const Grid& target_grid);

/// For each restriction, re-weights the family, pushes it to t = 0, 1/2, 1 by
/// cell location and evaluates S_N. Throws PreconditionError for a
/// restriction with no positive weight and AuditError if a curve point falls
/// outside the grid.
RestrictionSearchReport strict_cd_restriction_search(const GeodesicFamily& family,
                                                     std::shared_ptr<const Grid> grid,
                                                     const std::vector<Restriction>& restrictions, double N,
                                                     double tol = 1e-9);

}  // namespace cdlab
