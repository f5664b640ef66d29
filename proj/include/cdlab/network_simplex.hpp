#pragma once

#include <Eigen/Dense>
#include <vector>

namespace cdlab {

/// Positive flow on the real arc (i, j) of a transportation problem.
struct FlowEntry {
  Eigen::Index i = 0;
  Eigen::Index j = 0;
  double mass = 0.0;
};

/// Optimal basic solution together with its dual certificate.
struct TransportationResult {
  std::vector<FlowEntry> flows;  // sorted by (i, j)
  double cost = 0.0;
  Eigen::ArrayXd alpha;          // source potentials
  Eigen::ArrayXd beta;           // target potentials
  double dual_objective = 0.0;
  double min_reduced_cost = 0.0;           // min over all arcs of c - alpha - beta
  double max_support_reduced_cost = 0.0;   // max |c - alpha - beta| over arcs with flow
  long pivots = 0;
};

enum class PointCost { DistInf, DistInfSquared };

/// Maximum number of atoms per side accepted by the solvers.
inline constexpr Eigen::Index kMaxAtoms = 5000;

/// Exact transportation problem min sum c_ij p_ij with row sums a and column
/// sums b, solved by the primal network simplex method on a strongly feasible
/// spanning tree with block-search pricing. Pivot choice is deterministic:
/// ties in the entering arc go to the lowest (i, j) in scan order, ties in the
/// leaving arc follow the strongly feasible rule. Throws PreconditionError on
/// mass mismatch beyond 1e-10 relative, non-positive supplies or more than
/// kMaxAtoms atoms per side.
TransportationResult solve_transportation(const Eigen::ArrayXd& a, const Eigen::ArrayXd& b, const Eigen::MatrixXd& cost);

/// Same with the cost d_inf(p_i, q_j) or its square computed on the fly, so
/// memory stays linear in the number of atoms.
TransportationResult solve_transportation(const Eigen::ArrayXd& a, const Eigen::ArrayXd& b,
                                          const Eigen::Matrix<double, Eigen::Dynamic, 2>& sources,
                                          const Eigen::Matrix<double, Eigen::Dynamic, 2>& targets, PointCost cost);

}  // namespace cdlab
