#include "cdlab/network_simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cdlab/error.hpp"

namespace cdlab {

namespace {

using Index = Eigen::Index;

struct DenseCost {
  const Eigen::MatrixXd& c;
  double operator()(Index i, Index j) const { return c(i, j); }
};

struct PointCostFn {
  const Eigen::Matrix<double, Eigen::Dynamic, 2>& p;
  const Eigen::Matrix<double, Eigen::Dynamic, 2>& q;
  bool squared;
  double operator()(Index i, Index j) const {
    const double d = std::max(std::abs(p(i, 0) - q(j, 0)), std::abs(p(i, 1) - q(j, 1)));
    return squared ? d * d : d;
  }
};

// Primal network simplex for the uncapacitated transportation problem.
// Nodes 0..n-1 are sources, n..n+m-1 targets and n+m the artificial root.
// The spanning tree is stored as its list of n+m edges; parent pointers,
// depths and potentials are rebuilt by a traversal from the root after each
// pivot, which keeps the update logic short at O(n+m) per pivot.
template <class Cost>
class Solver {
 public:
  Solver(const Eigen::ArrayXd& a, const Eigen::ArrayXd& b, Cost cost)
      : n_(a.size()), m_(b.size()), nodes_(n_ + m_ + 1), root_(n_ + m_), cost_(cost) {
    double cmax = 0.0;
    for (Index i = 0; i < n_; ++i) {
      for (Index j = 0; j < m_; ++j) cmax = std::max(cmax, std::abs(cost_(i, j)));
    }
    cmax_ = cmax;
    art_cost_ = (cmax + 1.0) * static_cast<double>(nodes_);
    eps_ = 64.0 * std::numeric_limits<double>::epsilon() * art_cost_;

    edges_.reserve(static_cast<std::size_t>(n_ + m_));
    for (Index i = 0; i < n_; ++i) edges_.push_back(Edge{i, root_, 0.0, a(i), -1});
    for (Index j = 0; j < m_; ++j) edges_.push_back(Edge{root_, n_ + j, art_cost_, b(j), -1});
    parent_.assign(static_cast<std::size_t>(nodes_), -1);
    pred_.assign(static_cast<std::size_t>(nodes_), -1);
    up_.assign(static_cast<std::size_t>(nodes_), false);
    depth_.assign(static_cast<std::size_t>(nodes_), 0);
    pi_.assign(static_cast<std::size_t>(nodes_), 0.0);
    rebuild();

    const double arcs = static_cast<double>(n_) * static_cast<double>(m_);
    block_ = std::max<Index>(10, static_cast<Index>(std::sqrt(arcs)));
  }

  TransportationResult run() {
    long pivots = 0;
    const long limit = 50L * (n_ + m_) * (n_ + m_) + 1000;
    while (true) {
      Index i = 0, j = 0;
      if (!find_entering(i, j)) break;
      pivot(i, j);
      if (++pivots > limit) throw AuditError("network simplex: pivot limit exceeded");
    }
    return result(pivots);
  }

 private:
  struct Edge {
    Index tail, head;
    double cost, flow;
    Index arc;  // i * m + j for real arcs, -1 for artificial ones
  };

  double reduced(Index i, Index j) const { return cost_(i, j) + pi_[idx(i)] - pi_[idx(n_ + j)]; }
  static std::size_t idx(Index u) { return static_cast<std::size_t>(u); }

  // Block search over arcs in id order i * m + j, starting after the last
  // entering arc. Within a block the first arc attaining the minimum wins.
  bool find_entering(Index& out_i, Index& out_j) {
    const Index total = n_ * m_;
    double best = 0.0;
    Index best_arc = -1, count = block_;
    for (Index step = 0; step < total; ++step) {
      Index e = next_arc_ + step;
      if (e >= total) e -= total;
      const Index i = e / m_, j = e % m_;
      const double rc = reduced(i, j);
      if (rc < best) {
        best = rc;
        best_arc = e;
      }
      if (--count == 0) {
        if (best < -eps_) break;
        count = block_;
      }
    }
    if (best_arc < 0 || !(best < -eps_)) return false;
    out_i = best_arc / m_;
    out_j = best_arc % m_;
    next_arc_ = best_arc + 1 < total ? best_arc + 1 : 0;
    return true;
  }

  void pivot(Index i, Index j) {
    const Index first = i, second = n_ + j;
    Index u = first, v = second;
    while (u != v) {
      if (depth_[idx(u)] >= depth_[idx(v)]) {
        u = parent_[idx(u)];
      } else {
        v = parent_[idx(v)];
      }
    }
    const Index join = u;

    // Cycle orientation: first -> second on the entering arc, then up from
    // second to join, then down from join to first.
    const double inf = std::numeric_limits<double>::infinity();
    double delta = inf;
    Index leave_node = -1;
    for (Index w = first; w != join; w = parent_[idx(w)]) {
      const double d = up_[idx(w)] ? edges_[idx(pred_[idx(w)])].flow : inf;
      if (d < delta) {
        delta = d;
        leave_node = w;
      }
    }
    for (Index w = second; w != join; w = parent_[idx(w)]) {
      const double d = up_[idx(w)] ? inf : edges_[idx(pred_[idx(w)])].flow;
      if (d <= delta) {
        delta = d;
        leave_node = w;
      }
    }
    if (leave_node < 0 || std::isinf(delta)) throw AuditError("network simplex: unbounded cycle");

    for (Index w = first; w != join; w = parent_[idx(w)]) {
      Edge& e = edges_[idx(pred_[idx(w)])];
      e.flow += up_[idx(w)] ? -delta : delta;
    }
    for (Index w = second; w != join; w = parent_[idx(w)]) {
      Edge& e = edges_[idx(pred_[idx(w)])];
      e.flow += up_[idx(w)] ? delta : -delta;
    }
    Edge& out = edges_[idx(pred_[idx(leave_node)])];
    out = Edge{first, second, cost_(i, j), delta, i * m_ + j};
    for (Edge& e : edges_) e.flow = std::max(e.flow, 0.0);
    rebuild();
  }

  void rebuild() {
    const std::size_t N = idx(nodes_);
    std::vector<Index> start(N + 1, 0), adj(2 * edges_.size());
    for (const Edge& e : edges_) {
      ++start[idx(e.tail) + 1];
      ++start[idx(e.head) + 1];
    }
    for (std::size_t k = 0; k < N; ++k) start[k + 1] += start[k];
    std::vector<Index> fill(start.begin(), start.end() - 1);
    for (std::size_t k = 0; k < edges_.size(); ++k) {
      adj[idx(fill[idx(edges_[k].tail)]++)] = static_cast<Index>(k);
      adj[idx(fill[idx(edges_[k].head)]++)] = static_cast<Index>(k);
    }
    std::vector<Index> queue;
    queue.reserve(N);
    queue.push_back(root_);
    parent_[idx(root_)] = -1;
    pred_[idx(root_)] = -1;
    depth_[idx(root_)] = 0;
    pi_[idx(root_)] = 0.0;
    std::vector<char> seen(N, 0);
    seen[idx(root_)] = 1;
    for (std::size_t qi = 0; qi < queue.size(); ++qi) {
      const Index p = queue[qi];
      for (Index k = start[idx(p)]; k < start[idx(p) + 1]; ++k) {
        const Index ei = adj[idx(k)];
        const Edge& e = edges_[idx(ei)];
        const Index c = e.tail == p ? e.head : e.tail;
        if (seen[idx(c)]) continue;
        seen[idx(c)] = 1;
        parent_[idx(c)] = p;
        pred_[idx(c)] = ei;
        up_[idx(c)] = e.tail == c;
        depth_[idx(c)] = depth_[idx(p)] + 1;
        // Tree arcs have zero reduced cost: cost + pi[tail] - pi[head] = 0.
        pi_[idx(c)] = up_[idx(c)] ? pi_[idx(p)] - e.cost : pi_[idx(p)] + e.cost;
        queue.push_back(c);
      }
    }
    if (static_cast<Index>(queue.size()) != nodes_) throw AuditError("network simplex: basis is not a spanning tree");
  }

  TransportationResult result(long pivots) const {
    TransportationResult r;
    r.pivots = pivots;
    for (const Edge& e : edges_) {
      if (e.arc >= 0 && e.flow > 0.0) r.flows.push_back(FlowEntry{e.arc / m_, e.arc % m_, e.flow});
    }
    std::sort(r.flows.begin(), r.flows.end(),
              [](const FlowEntry& x, const FlowEntry& y) { return x.i != y.i ? x.i < y.i : x.j < y.j; });
    r.alpha.resize(n_);
    r.beta.resize(m_);
    for (Index i = 0; i < n_; ++i) r.alpha(i) = -pi_[idx(i)];
    for (Index j = 0; j < m_; ++j) r.beta(j) = pi_[idx(n_ + j)];
    const double shift = r.beta.minCoeff();
    r.alpha += shift;
    r.beta -= shift;
    for (const FlowEntry& f : r.flows) {
      const double c = cost_(f.i, f.j);
      r.cost += c * f.mass;
      r.max_support_reduced_cost = std::max(r.max_support_reduced_cost, std::abs(c - r.alpha(f.i) - r.beta(f.j)));
    }
    r.min_reduced_cost = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < n_; ++i) {
      for (Index j = 0; j < m_; ++j) {
        r.min_reduced_cost = std::min(r.min_reduced_cost, cost_(i, j) - r.alpha(i) - r.beta(j));
      }
    }
    return r;
  }

 public:
  double eps() const { return eps_; }
  double cmax() const { return cmax_; }

 private:
  Index n_, m_, nodes_, root_;
  Cost cost_;
  double cmax_ = 0.0, art_cost_ = 0.0, eps_ = 0.0;
  std::vector<Edge> edges_;
  std::vector<Index> parent_, pred_, depth_;
  std::vector<bool> up_;
  std::vector<double> pi_;
  Index block_ = 10, next_arc_ = 0;
};

Eigen::ArrayXd balanced_targets(const Eigen::ArrayXd& a, const Eigen::ArrayXd& b) {
  if (a.size() == 0 || b.size() == 0) throw PreconditionError("transportation: empty marginal");
  if (a.size() > kMaxAtoms || b.size() > kMaxAtoms) {
    throw PreconditionError("transportation: more than " + std::to_string(kMaxAtoms) + " atoms on one side");
  }
  if (!(a > 0.0).all() || !(b > 0.0).all() || !a.allFinite() || !b.allFinite()) {
    throw PreconditionError("transportation: masses must be positive and finite");
  }
  const double sa = a.sum(), sb = b.sum();
  if (std::abs(sa - sb) > 1e-10 * std::max(sa, sb)) throw PreconditionError("transportation: mass mismatch");
  return b * (sa / sb);
}

template <class Cost>
TransportationResult solve(const Eigen::ArrayXd& a, const Eigen::ArrayXd& b, Cost cost) {
  const Eigen::ArrayXd bb = balanced_targets(a, b);
  Solver<Cost> s(a, bb, cost);
  TransportationResult r = s.run();
  r.dual_objective = (a * r.alpha).sum() + (bb * r.beta).sum();
  // Certificate: dual feasibility and complementary slackness up to the
  // solver's rounding scale.
  const double tol = 1e3 * s.eps() + 1e-12 * s.cmax();
  if (r.min_reduced_cost < -tol || r.max_support_reduced_cost > tol) {
    throw AuditError("transportation: optimality certificate failed");
  }
  return r;
}

}  // namespace

TransportationResult solve_transportation(const Eigen::ArrayXd& a, const Eigen::ArrayXd& b, const Eigen::MatrixXd& cost) {
  if (cost.rows() != a.size() || cost.cols() != b.size()) throw PreconditionError("transportation: cost shape mismatch");
  return solve(a, b, DenseCost{cost});
}

TransportationResult solve_transportation(const Eigen::ArrayXd& a, const Eigen::ArrayXd& b,
                                          const Eigen::Matrix<double, Eigen::Dynamic, 2>& sources,
                                          const Eigen::Matrix<double, Eigen::Dynamic, 2>& targets, PointCost cost) {
  if (sources.rows() != a.size() || targets.rows() != b.size()) {
    throw PreconditionError("transportation: point count mismatch");
  }
  return solve(a, b, PointCostFn{sources, targets, cost == PointCost::DistInfSquared});
}

}  // namespace cdlab
