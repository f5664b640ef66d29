#pragma once

#include <Eigen/Dense>
#include <array>
#include <functional>
#include <iosfwd>
#include <memory>
#include <vector>

#include "cdlab/measure.hpp"
#include "cdlab/network_simplex.hpp"

namespace cdlab {

enum class CostKind { DistInf, DistInfSquared };

double pair_cost(const Point2& p, const Point2& q, CostKind kind);

struct PlanEntry {
  Eigen::Index source = 0;  // cell index in the source grid
  Eigen::Index target = 0;  // cell index in the target grid
  double mass = 0.0;
};

/// Sparse coupling between two grid measures; entries sorted by (source, target).
struct TransportPlan {
  std::shared_ptr<const Grid> source_grid;
  std::shared_ptr<const Grid> target_grid;
  std::vector<PlanEntry> entries;
  CostKind kind = CostKind::DistInfSquared;
  double cost = 0.0;

  /// Largest marginal deviation from (mu, nu), in absolute mass.
  double marginal_error(const DiscreteMeasure& mu, const DiscreteMeasure& nu) const;
};

/// Recomputes sum mass * cost over the entries.
double plan_cost(const TransportPlan& plan);

// ---------------------------------------------------------------------------
// One-dimensional monotone rearrangement

struct Atoms1D {
  Eigen::ArrayXd positions;
  Eigen::ArrayXd masses;
};

struct Coupling1D {
  std::vector<FlowEntry> entries;  // indices into the inputs as given
  bool is_map = false;
  /// Target index per source atom when is_map; -1 otherwise.
  std::vector<Eigen::Index> map;

  double cost(const Atoms1D& mu, const Atoms1D& nu, const std::function<double(double)>& c) const;
};

/// The monotone (north-west corner on sorted atoms) coupling. Atoms are sorted
/// by position with ties kept in input order. Throws PreconditionError on a
/// total mass mismatch above 1e-12 relative or non-positive masses.
Coupling1D quantile_coupling_1d(const Atoms1D& mu, const Atoms1D& nu);

// ---------------------------------------------------------------------------
// Structured monotone map for horizontally separated marginals

/// T = (T1, T2) with T1 the monotone rearrangement of the x-marginals (piecewise
/// linear inside columns) and T2 = f(T1) G1^{-1}(G0(u)), where G0 and G1 are the
/// conditional fiber CDFs in u = y / f(x) of the source column and of the
/// target column containing T1. Evaluable at any point of the source support.
class StructuredMap {
 public:
  StructuredMap(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1);

  Point2 operator()(const Point2& z) const;
  /// Image in fiber coordinates: (T1, U) with T2 = U f(T1).
  std::pair<double, double> map_xu(double x, double u) const;

  double T1(double x) const;
  /// Exact derivatives: dT1/dx = p0(x) / p1(T1) and dU/du = g0(u) / g1(U).
  double dT1dx(double x) const;
  double dUdu(double x, double u) const;

  const Grid& grid() const { return *grid_; }

 private:
  std::shared_ptr<const Grid> grid_;
  Eigen::ArrayXd p0_, p1_;      // x-marginal densities per column
  Eigen::ArrayXd F0_, F1_;      // CDF at left column edges (nx + 1)
  Eigen::MatrixXd rho0_, rho1_; // per (column, level) densities w.r.t. m
  Eigen::MatrixXd G0_, G1_;     // conditional fiber CDF at level edges (nx x nu + 1)
  Eigen::ArrayXd Z0_, Z1_;      // fiber normalizers per column
  double K_;

  double fiber_cdf(const Eigen::MatrixXd& rho, const Eigen::MatrixXd& G, const Eigen::ArrayXd& Z, Eigen::Index i,
                   double u) const;
  double fiber_quantile(const Eigen::MatrixXd& rho, const Eigen::MatrixXd& G, const Eigen::ArrayXd& Z, Eigen::Index i,
                        double q) const;
  Eigen::Index target_column(double x) const;
};

/// T sampled on the cells of a grid, with grid-neighbor finite differences.
class MonotoneMapGrid {
 public:
  MonotoneMapGrid(std::shared_ptr<const Grid> grid, std::vector<Eigen::Index> support, Eigen::ArrayXd T1,
                  Eigen::ArrayXd T2);

  const Grid& grid() const { return *grid_; }
  const std::shared_ptr<const Grid>& grid_ptr() const { return grid_; }
  const std::vector<Eigen::Index>& support() const { return support_; }
  bool in_support(Eigen::Index cell) const { return in_support_[static_cast<std::size_t>(cell)]; }
  Point2 image(Eigen::Index cell) const { return {T1_(cell), T2_(cell)}; }

  struct Derivative {
    double value = 0.0;
    bool one_sided = false;
  };

  /// dT1/dx from the same level in the neighboring columns; centered when
  /// both neighbors are in the support, one-sided (flagged) otherwise.
  Derivative dT1dx(Eigen::Index cell) const;
  /// dT2/dy from the neighboring levels of the same column, with y-spacing
  /// f(x) times the u-spacing.
  Derivative dT2dy(Eigen::Index cell) const;

 private:
  std::shared_ptr<const Grid> grid_;
  std::vector<Eigen::Index> support_;
  std::vector<bool> in_support_;
  Eigen::ArrayXd T1_, T2_;
};

struct JacobianValue {
  double value = 0.0;
  bool boundary = false;  // a one-sided difference was used
};

/// dT1/dx * dT2/dy at a support cell. Throws PreconditionError off the support.
JacobianValue jacobian(const MonotoneMapGrid& map, Eigen::Index cell);

struct StructuredMapResult {
  StructuredMap map;
  MonotoneMapGrid grid_map;
  /// Pair class histogram over the support (V, D, H0, H1).
  std::array<long, 4> class_counts{};
  double min_dT1dx = 0.0;
  double min_dT2dy = 0.0;
};

/// Builds the structured map and samples it at the support cells of mu0.
/// Both measures must live on the same regular grid. Throws AuditError if a
/// support pair is not horizontal or a monotonicity audit fails.
StructuredMapResult build_structured_map(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1);

/// Plan sending each source cell to the cell containing T(center).
TransportPlan plan_from_map(const DiscreteMeasure& mu0, const MonotoneMapGrid& map, CostKind kind);

/// Discrete analogue of the structured coupling: the monotone coupling of
/// column masses followed, for each column pair, by the monotone coupling of
/// the two fiber distributions in u. Its marginals are exact.
TransportPlan structured_plan(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1, CostKind kind);

// ---------------------------------------------------------------------------
// Exact solver on grid measures

struct OtSolution {
  TransportPlan plan;
  double dual_objective = 0.0;
  double duality_gap = 0.0;        // primal - dual
  double min_reduced_cost = 0.0;   // dual feasibility
  double max_slackness = 0.0;      // complementary slackness on the support
  long pivots = 0;
};

/// Exact optimal plan between the supports of mu and nu. Throws
/// PreconditionError when a support exceeds kMaxAtoms cells.
OtSolution solve_discrete_ot(const DiscreteMeasure& mu, const DiscreteMeasure& nu, CostKind kind);

/// W1 with the d_inf cost, by the exact solver.
double w1_distance(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

struct Splitter {
  Eigen::Index source = 0;
  int targets = 0;
  double secondary_fraction = 0.0;  // mass share not sent to the main target
};

struct MapVerdict {
  bool map_induced = true;
  std::vector<Splitter> witnesses;  // worst first, at most 16
};

/// A plan is map-induced when every source sends more than tol times its mass
/// to at most one target.
MapVerdict is_map_induced(const TransportPlan& plan, double tol = 1e-9);

/// CSV columns: i,j,mass.
void write_plan_csv(std::ostream& os, const TransportPlan& plan);
/// CSV columns: x,y,T1,T2.
void write_map_csv(std::ostream& os, const MonotoneMapGrid& map);

}  // namespace cdlab
