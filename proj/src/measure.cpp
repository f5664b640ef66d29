#include "cdlab/measure.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numbers>
#include <ostream>

#include "cdlab/error.hpp"
#include "json.hpp"

namespace cdlab {

void SpaceParams::validate() const {
  if (!(k > 0.0 && k < 0.25)) throw PreconditionError("k must lie in (0, 1/4)");
  if (!(K >= 1.0)) throw PreconditionError("K must be at least 1");
  if (variant == SpaceVariant::NonCompact && !(R > 0.0)) throw PreconditionError("truncation radius must be positive");
  if (variant == SpaceVariant::Compact && !singular) {
    const MembershipReport rep = validate_membership(f, k);
    if (rep.profile_class != ProfileClass::Fk) {
      throw PreconditionError("profile '" + f.description() + "' is not in F_k (" +
                              std::string(to_string(rep.profile_class)) + ")");
    }
  }
}

SpaceParams make_compact_space(ProfileFn f, double k, double K, bool singular) {
  SpaceParams p{std::move(f), k, K, SpaceVariant::Compact, 4.0, singular};
  p.validate();
  return p;
}

SpaceParams make_cone_space(double k, double K, double R) {
  SpaceParams p{wedge_profile(k), k, K, SpaceVariant::NonCompact, R, true};
  p.validate();
  return p;
}

double density_m(const Point2& p, const SpaceParams& params) {
  const double f = params.f(p.x());
  if (!(f > 0.0)) throw DomainError("density_m: singular column, use the segment atoms");
  const double u = p.y() / f;
  return std::exp(-params.K * u * u) / f;
}

double c_K(double K) {
  using boost::math::quadrature::gauss_kronrod;
  auto integrand = [K](double u) { return std::exp(-K * u * u); };
  double err = 0.0;
  const double v = gauss_kronrod<double, 15>::integrate(integrand, 0.0, 1.0, 15, 1e-13, &err);
  if (err > 1e-12) throw AuditError("c_K: quadrature error estimate above 1e-12");
  return v;
}

double gaussian_primitive(double u, double K) {
  const double s = std::sqrt(K);
  return 0.5 * std::sqrt(std::numbers::pi) / s * std::erf(s * u);
}

double gaussian_primitive_inverse(double value, double K) {
  // Monotone on [0,1]; bisection bracket plus Newton polish.
  double lo = 0.0, hi = 1.0;
  if (value <= 0.0) return 0.0;
  if (value >= gaussian_primitive(1.0, K)) return 1.0;
  double u = value;  // the integrand is <= 1, so u >= value
  if (u > 1.0) u = 0.5;
  for (int it = 0; it < 100; ++it) {
    const double g = gaussian_primitive(u, K) - value;
    if (g > 0.0) {
      hi = u;
    } else {
      lo = u;
    }
    const double step = g / std::exp(-K * u * u);
    double next = u - step;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - u) <= 1e-16 * std::max(1.0, u)) return next;
    u = next;
  }
  return u;
}

// ---------------------------------------------------------------------------

Grid::Grid(SpaceParams params, int nx, int nu) : params_(std::move(params)), nx_(nx), nu_(nu) {
  if (nx < 2 || nu < 2) throw PreconditionError("build_grid: nx and nu must be at least 2");
  const double K = params_.K;
  ck_ = c_K(K);
  const double a = params_.x_min(), b = params_.x_max();
  dx_ = (b - a) / nx;
  x_edges_ = Eigen::ArrayXd::LinSpaced(nx + 1, a, b);
  x_centers_ = 0.5 * (x_edges_.head(nx) + x_edges_.tail(nx));
  f_centers_ = x_centers_.unaryExpr([this](double x) { return params_.f(x); });
  u_edges_ = Eigen::ArrayXd::LinSpaced(nu + 1, 0.0, 1.0);
  level_masses_.resize(nu);
  for (int j = 0; j < nu; ++j) {
    level_masses_(j) = gaussian_primitive(u_edges_(j + 1), K) - gaussian_primitive(u_edges_(j), K);
  }

  singular_.resize(static_cast<std::size_t>(nx));
  offsets_.reserve(static_cast<std::size_t>(nx) + 1);
  for (int i = 0; i < nx; ++i) {
    offsets_.push_back(static_cast<Eigen::Index>(cells_.size()));
    const double x = x_centers_(i);
    const double fx = f_centers_(i);
    const double w = x_edges_(i + 1) - x_edges_(i);
    if (!(fx > 0.0)) {
      if (!params_.singular) throw PreconditionError("build_grid: profile vanishes on a regular space");
      singular_[static_cast<std::size_t>(i)] = true;
      cells_.push_back(Cell{i, -1, Point2(x, 0.0), 0.0, ck_ * w});
      continue;
    }
    for (int j = 0; j < nu; ++j) {
      const double u = 0.5 * (u_edges_(j) + u_edges_(j + 1));
      cells_.push_back(Cell{i, j, Point2(x, u * fx), u, w * level_masses_(j)});
    }
  }
  offsets_.push_back(static_cast<Eigen::Index>(cells_.size()));
}

Eigen::Index Grid::cell_index(Eigen::Index column, int level) const {
  const Eigen::Index b = column_begin(column);
  if (singular_column(column)) return b;
  return b + level;
}

Eigen::Index Grid::column_of(double x) const {
  const double a = params_.x_min();
  if (x < a || x > params_.x_max()) return -1;
  auto i = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::floor((x - a) / dx_)), 0, nx_ - 1);
  // Settle rounding against the stored edges: column i is [x_i, x_{i+1}).
  while (i > 0 && x < x_edges_(i)) --i;
  while (i < nx_ - 1 && x >= x_edges_(i + 1)) ++i;
  return i;
}

Eigen::Index Grid::locate(const Point2& p) const {
  const Eigen::Index i = column_of(p.x());
  if (i < 0) return -1;
  if (singular_column(i)) return std::abs(p.y()) <= 1e-12 ? column_begin(i) : -1;
  const double f = params_.f(p.x());
  if (!(f > 0.0)) return std::abs(p.y()) <= 1e-12 ? column_begin(i) : -1;
  const double u = p.y() / f;
  if (u < -1e-9 || u > 1.0 + 1e-9) return -1;
  const int j = std::clamp(static_cast<int>(std::floor(u * nu_)), 0, nu_ - 1);
  return column_begin(i) + j;
}

Eigen::ArrayXd Grid::weights() const {
  Eigen::ArrayXd w(cell_count());
  for (Eigen::Index c = 0; c < cell_count(); ++c) w(c) = cells_[static_cast<std::size_t>(c)].weight;
  return w;
}

double Grid::column_mass(Eigen::Index i) const {
  double s = 0.0;
  for (Eigen::Index c = column_begin(i); c < column_end(i); ++c) s += cell(c).weight;
  return s;
}

double Grid::total_mass() const {
  double s = 0.0;
  for (int i = 0; i < nx_; ++i) s += column_mass(i);
  return s;
}

std::shared_ptr<const Grid> build_grid(const SpaceParams& params, int nx, int nu) {
  return std::make_shared<const Grid>(params, nx, nu);
}

// ---------------------------------------------------------------------------

DiscreteMeasure::DiscreteMeasure(std::shared_ptr<const Grid> grid, Eigen::ArrayXd rho)
    : grid_(std::move(grid)), rho_(std::move(rho)) {
  if (rho_.size() != grid_->cell_count()) throw PreconditionError("DiscreteMeasure: density size mismatch");
  if (!rho_.allFinite() || (rho_ < 0.0).any()) throw PreconditionError("DiscreteMeasure: densities must be finite and >= 0");
  if (std::abs(total_mass() - 1.0) > 1e-12) throw PreconditionError("DiscreteMeasure: total mass must be 1");
}

DiscreteMeasure DiscreteMeasure::from_masses(std::shared_ptr<const Grid> grid, const Eigen::ArrayXd& masses) {
  const Eigen::ArrayXd w = grid->weights();
  const double total = masses.sum();
  if (!(total > 0.0)) throw PreconditionError("DiscreteMeasure: zero total mass");
  Eigen::ArrayXd rho = masses / (total * w);
  return DiscreteMeasure(std::move(grid), std::move(rho));
}

DiscreteMeasure DiscreteMeasure::from_shape(std::shared_ptr<const Grid> grid,
                                            const std::function<double(double, double)>& shape) {
  Eigen::ArrayXd rho(grid->cell_count());
  for (Eigen::Index c = 0; c < grid->cell_count(); ++c) {
    const Cell& cell = grid->cell(c);
    rho(c) = shape(cell.center.x(), cell.u_center);
  }
  const double total = (rho * grid->weights()).sum();
  if (!(total > 0.0)) throw PreconditionError("DiscreteMeasure: shape has zero mass");
  rho /= total;
  return DiscreteMeasure(std::move(grid), std::move(rho));
}

Eigen::ArrayXd DiscreteMeasure::masses() const { return rho_ * grid_->weights(); }

double DiscreteMeasure::total_mass() const { return masses().sum(); }

std::vector<Eigen::Index> DiscreteMeasure::support() const {
  std::vector<Eigen::Index> s;
  for (Eigen::Index c = 0; c < rho_.size(); ++c) {
    if (rho_(c) > 0.0) s.push_back(c);
  }
  return s;
}

DiscreteMeasure uniform_block(std::shared_ptr<const Grid> grid, double x_lo, double x_hi, double u_lo, double u_hi) {
  return DiscreteMeasure::from_shape(grid, [&](double x, double u) {
    const bool in_x = x >= x_lo && x <= x_hi;
    const bool in_u = u >= u_lo && u <= u_hi;
    return in_x && in_u ? 1.0 : 0.0;
  });
}

double renyi_entropy(const Eigen::ArrayXd& rho, const Eigen::ArrayXd& weights, double N) {
  if (!(N > 1.0)) throw PreconditionError("renyi_entropy: N must exceed 1");
  const double e = 1.0 - 1.0 / N;
  double s = 0.0;
  for (Eigen::Index c = 0; c < rho.size(); ++c) {
    if (rho(c) > 0.0) s += std::pow(rho(c), e) * weights(c);
  }
  return -s;
}

double renyi_entropy(const DiscreteMeasure& mu, double N) { return renyi_entropy(mu.rho(), mu.grid().weights(), N); }

double boltzmann_entropy(const Eigen::ArrayXd& rho, const Eigen::ArrayXd& weights) {
  double s = 0.0;
  for (Eigen::Index c = 0; c < rho.size(); ++c) {
    if (rho(c) > 0.0) s += rho(c) * std::log(rho(c)) * weights(c);
  }
  return s;
}

double boltzmann_entropy(const DiscreteMeasure& mu) { return boltzmann_entropy(mu.rho(), mu.grid().weights()); }

void write_measure_json(std::ostream& os, const DiscreteMeasure& mu) {
  const Grid& g = mu.grid();
  nlohmann::json cells = nlohmann::json::array();
  for (Eigen::Index c = 0; c < g.cell_count(); ++c) {
    const Cell& cell = g.cell(c);
    cells.push_back({{"index", c},
                     {"column", cell.column},
                     {"level", cell.level},
                     {"x", cell.center.x()},
                     {"y", cell.center.y()},
                     {"weight", cell.weight},
                     {"density", mu.rho()(c)}});
  }
  nlohmann::json j{{"nx", g.nx()}, {"nu", g.nu()}, {"ck", g.ck()}, {"cells", std::move(cells)}};
  os << j.dump(1) << '\n';
}

void write_marginal_csv(std::ostream& os, const DiscreteMeasure& mu) {
  const Grid& g = mu.grid();
  const Eigen::ArrayXd m = mu.masses();
  os.precision(17);
  os << "x,width,reference_mass,reference_density,mu_mass\n";
  for (int i = 0; i < g.nx(); ++i) {
    const double w = g.x_edges()(i + 1) - g.x_edges()(i);
    const double ref = g.column_mass(i);
    double mm = 0.0;
    for (Eigen::Index c = g.column_begin(i); c < g.column_end(i); ++c) mm += m(c);
    os << g.x_centers()(i) << ',' << w << ',' << ref << ',' << ref / w << ',' << mm << '\n';
  }
}

}  // namespace cdlab
