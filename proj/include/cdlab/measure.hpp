#pragma once

#include <Eigen/Dense>
#include <functional>
#include <iosfwd>
#include <memory>
#include <vector>

#include "cdlab/geometry.hpp"
#include "cdlab/profiles.hpp"

namespace cdlab {

enum class SpaceVariant { Compact, NonCompact };

/// The metric measure space (X_f, d_inf, m_{f,K}). The non-compact cone
/// L u C^k is represented by the wedge profile on [-R, R].
struct SpaceParams {
  ProfileFn f;
  double k = kDefaultK;
  double K = 16.0;
  SpaceVariant variant = SpaceVariant::Compact;
  double R = 4.0;
  bool singular = false;

  double x_min() const { return variant == SpaceVariant::Compact ? -1.0 : -R; }
  double x_max() const { return variant == SpaceVariant::Compact ? 1.0 : R; }

  /// Throws PreconditionError unless k in (0, 1/4), K >= 1 and, for a regular
  /// compact space, f passes the membership audit for F_k.
  void validate() const;
};

SpaceParams make_compact_space(ProfileFn f, double k, double K, bool singular = false);

/// L u C^k truncated to [-R, R].
SpaceParams make_cone_space(double k, double K, double R = 4.0);

/// m_{f,K}(x, y) = exp(-K (y/f(x))^2) / f(x). Throws DomainError when f(x) = 0,
/// where the measure is the segment part C_K H^1 instead.
double density_m(const Point2& p, const SpaceParams& params);

/// C_K = int_0^1 exp(-K u^2) du by adaptive Gauss-Kronrod quadrature.
double c_K(double K);

/// int_0^u exp(-K s^2) ds in closed form.
double gaussian_primitive(double u, double K);

/// Inverse of gaussian_primitive on [0, 1].
double gaussian_primitive_inverse(double value, double K);

/// A cell of the fiber-coordinate discretization. Regular columns are split
/// in u = y / f(x); a singular column (f = 0 at its center) is a single atom
/// on y = 0 with `level == -1`.
struct Cell {
  Eigen::Index column = 0;
  int level = -1;
  Point2 center = Point2::Zero();
  double u_center = 0.0;
  double weight = 0.0;

  bool is_atom() const { return level < 0; }
};

class Grid {
 public:
  Grid(SpaceParams params, int nx, int nu);

  const SpaceParams& params() const { return params_; }
  int nx() const { return nx_; }
  int nu() const { return nu_; }
  double ck() const { return ck_; }
  double dx() const { return dx_; }

  const Eigen::ArrayXd& x_edges() const { return x_edges_; }
  const Eigen::ArrayXd& x_centers() const { return x_centers_; }
  const Eigen::ArrayXd& f_centers() const { return f_centers_; }
  const Eigen::ArrayXd& u_edges() const { return u_edges_; }
  /// int over each u-cell of exp(-K u^2) du.
  const Eigen::ArrayXd& level_masses() const { return level_masses_; }

  bool singular_column(Eigen::Index i) const { return singular_[static_cast<std::size_t>(i)]; }
  Eigen::Index cell_count() const { return static_cast<Eigen::Index>(cells_.size()); }
  const Cell& cell(Eigen::Index c) const { return cells_[static_cast<std::size_t>(c)]; }
  const std::vector<Cell>& cells() const { return cells_; }

  /// First cell of column i; the column holds cells [begin(i), begin(i+1)).
  Eigen::Index column_begin(Eigen::Index i) const { return offsets_[static_cast<std::size_t>(i)]; }
  Eigen::Index column_end(Eigen::Index i) const { return offsets_[static_cast<std::size_t>(i) + 1]; }

  /// Index of cell (column, level), or the atom of a singular column.
  Eigen::Index cell_index(Eigen::Index column, int level) const;

  Eigen::Index column_of(double x) const;

  /// Cell containing p, or -1 outside the space.
  Eigen::Index locate(const Point2& p) const;

  Eigen::ArrayXd weights() const;
  double column_mass(Eigen::Index i) const;
  double total_mass() const;

 private:
  SpaceParams params_;
  int nx_, nu_;
  double ck_, dx_;
  Eigen::ArrayXd x_edges_, x_centers_, f_centers_, u_edges_, level_masses_;
  std::vector<bool> singular_;
  std::vector<Cell> cells_;
  std::vector<Eigen::Index> offsets_;
};

/// Builds the grid; throws PreconditionError for nx < 2 or nu < 2.
std::shared_ptr<const Grid> build_grid(const SpaceParams& params, int nx, int nu);

/// Probability measure rho * m on a grid; rho is stored for every cell.
class DiscreteMeasure {
 public:
  DiscreteMeasure(std::shared_ptr<const Grid> grid, Eigen::ArrayXd rho);

  /// Density from cell masses.
  static DiscreteMeasure from_masses(std::shared_ptr<const Grid> grid, const Eigen::ArrayXd& masses);

  /// Density proportional to `shape(x, u)` at cell centers, normalized.
  static DiscreteMeasure from_shape(std::shared_ptr<const Grid> grid,
                                    const std::function<double(double, double)>& shape);

  const Grid& grid() const { return *grid_; }
  const std::shared_ptr<const Grid>& grid_ptr() const { return grid_; }
  const Eigen::ArrayXd& rho() const { return rho_; }
  Eigen::ArrayXd masses() const;
  double total_mass() const;
  std::vector<Eigen::Index> support() const;

 private:
  std::shared_ptr<const Grid> grid_;
  Eigen::ArrayXd rho_;
};

/// Uniform density (w.r.t. m) on cells whose center has x in [x_lo, x_hi] and
/// u in [u_lo, u_hi]; atoms are selected by x alone.
DiscreteMeasure uniform_block(std::shared_ptr<const Grid> grid, double x_lo, double x_hi, double u_lo = 0.0,
                              double u_hi = 1.0);

/// -sum rho^(1 - 1/N) w over cells with rho > 0. Throws PreconditionError for N <= 1.
double renyi_entropy(const Eigen::ArrayXd& rho, const Eigen::ArrayXd& weights, double N);
double renyi_entropy(const DiscreteMeasure& mu, double N);

/// sum rho log(rho) w with 0 log 0 = 0.
double boltzmann_entropy(const Eigen::ArrayXd& rho, const Eigen::ArrayXd& weights);
double boltzmann_entropy(const DiscreteMeasure& mu);

/// JSON layout: {"nx","nu","ck","cells":[{"index","column","level","x","y","weight","density"}]}.
void write_measure_json(std::ostream& os, const DiscreteMeasure& mu);

/// CSV columns: x,width,reference_mass,reference_density,mu_mass.
void write_marginal_csv(std::ostream& os, const DiscreteMeasure& mu);

}  // namespace cdlab
