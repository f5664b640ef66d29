#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>

#include "cdlab/geometry.hpp"
#include "cdlab/measure.hpp"

namespace cdlab {

/// Samples of a real function g on an increasing grid, with optional exact
/// first and second derivatives. Without them, centered differences on a
/// uniform grid are used and only interior samples are certified.
struct SampledFunction {
  Eigen::ArrayXd ts;
  Eigen::ArrayXd gs;
  std::optional<Eigen::ArrayXd> d1;
  std::optional<Eigen::ArrayXd> d2;

  Eigen::Index size() const { return ts.size(); }
  bool analytic() const { return d1.has_value() && d2.has_value(); }

  /// Throws PreconditionError on fewer than 5 samples, non-increasing times,
  /// size mismatches, or a non-uniform grid without analytic derivatives.
  void validate() const;

  /// Uniform samples of g on [a, b]; no derivative data.
  static SampledFunction sample(const std::function<double(double)>& g, double a, double b, int n);

  /// Uniform samples with exact derivatives.
  static SampledFunction sample(const std::function<double(double)>& g, const std::function<double(double)>& g1,
                                const std::function<double(double)>& g2, double a, double b, int n);

  /// Samples restricted to the index range [first, last].
  SampledFunction slice(Eigen::Index first, Eigen::Index last) const;
};

SampledFunction operator+(const SampledFunction& a, const SampledFunction& b);

/// First and second derivative arrays, analytic or centered differences.
/// Entries at the two ends are NaN in the finite-difference case.
std::pair<Eigen::ArrayXd, Eigen::ArrayXd> derivatives(const SampledFunction& g);

/// Pointwise slack g'' - K - g'^2/N; NaN where derivatives are unavailable.
/// N may be +infinity.
Eigen::ArrayXd kn_slack(const SampledFunction& g, double K, double N);

struct ConvexityCertificate {
  double K = 0.0;
  double N = 0.0;
  double min_slack = 0.0;
  Eigen::Index argmin = 0;
  double argmin_t = 0.0;
  double tol = 0.0;
  bool passed = false;
};

/// Default tolerance 1e-6 + 100 h^2 max|g| for finite differences, 1e-6 for
/// analytic derivatives.
double default_tolerance(const SampledFunction& g);

/// Certifies g'' >= K + g'^2 / N at every sample where derivatives exist.
/// tol < 0 selects default_tolerance. Throws PreconditionError for N <= 0.
ConvexityCertificate kn_certificate(const SampledFunction& g, double K, double N, double tol = -1.0);

struct CharacterizationReport {
  ConvexityCertificate direct;
  /// min over samples of (-(K/N) g_N - g_N'') * N / g_N, with g_N = exp(-g/N).
  double gN_min_slack = 0.0;
  bool gN_passed = false;
  bool agree = false;
};

/// Checks g_N'' <= -(K/N) g_N for g_N = exp(-g/N), computed from its own
/// samples, and compares the verdict with kn_certificate. Requires finite N.
CharacterizationReport gN_characterization_check(const SampledFunction& g, double K, double N, double tol = -1.0);

struct ReparametrizationReport {
  ConvexityCertificate original;
  ConvexityCertificate reparametrized;  // t -> g(alpha + beta t) at (beta^2 K, N)
  bool agree = false;
};

/// Compares g at (K, N) with t -> g(alpha + beta t) at (beta^2 K, N) on the
/// matched samples t_i = (s_i - alpha) / beta. When [t_lo, t_hi] is given it
/// must map into the sampled domain (PreconditionError otherwise) and both
/// certificates are restricted to it. Throws PreconditionError for beta = 0.
ReparametrizationReport reparametrize_check(const SampledFunction& g, double alpha, double beta, double K, double N,
                                            std::optional<std::pair<double, double>> t_range = std::nullopt,
                                            double tol = -1.0);

struct AdditivityReport {
  ConvexityCertificate first;
  ConvexityCertificate second;
  ConvexityCertificate sum;
  /// min over samples of slack(sum) - slack(first) - slack(second); the
  /// Cauchy-Schwarz step makes this nonnegative.
  double min_excess = 0.0;
  /// False only if both inputs pass and the sum does not.
  bool implication_holds = true;
};

/// Throws PreconditionError if the sample grids differ.
AdditivityReport additivity_check(const SampledFunction& g, const SampledFunction& h, double K1, double N1, double K2,
                                  double N2, double tol = -1.0);

// ---------------------------------------------------------------------------
// The bump construction

/// phi(t) = s(clamp(4(t - 1/4))) s(clamp(4(3/4 - t))), s(u) = 6u^5 - 15u^4 + 10u^3.
double phi_bump(double t);
double phi_bump_d1(double t);
double phi_bump_d2(double t);

struct PhiAudit {
  double max_abs_d1 = 0.0;
  double max_abs_d2 = 0.0;
  int samples = 0;
};

/// Bound audit of |phi'| <= 16 and |phi''| <= 128 on 4096 points, run once on
/// first use. Throws AuditError if a bound fails.
const PhiAudit& phi_audit();

/// Largest |delta| accepted by build_h.
inline constexpr double kMaxBumpDelta = 0x1p-11;

/// h(t) = 1 + t (A - 1) + delta phi(t) (A - 1) sampled on [0, 1] with exact
/// derivatives. Throws PreconditionError for A < 0, |delta| >= 2^-11 or
/// samples < 5.
SampledFunction build_h(double A, double delta, int samples);

/// -log of a positive sampled function, carrying exact derivatives along.
/// Throws DomainError if a sample is not positive.
SampledFunction neg_log(const SampledFunction& h);

/// Certifies -log h at (-2^21 delta^2, 2). For A = 0 the window [1 - 1e-3, 1]
/// where h reaches 0 is excluded.
ConvexityCertificate bump_certificate(double A, double delta, int samples = 2049, double tol = 1e-6);

// ---------------------------------------------------------------------------
// Restrictions of -log m to curves

/// g = -log m(x(t), y(t)) = log f(x) + K (y/f(x))^2 along a C^2 curve with
/// exact derivatives of x and y. Sampled on [a, b].
struct CurveData {
  std::function<double(double)> x, dx, ddx;
  std::function<double(double)> y, dy, ddy;
};
SampledFunction neg_log_density_along(const SpaceParams& params, const CurveData& curve, double a, double b, int n);

struct LineProfileReport {
  ConvexityCertificate certificate;
  double f_I = 0.0;
  double min_dy = 0.0;
  double max_curvature_ratio = 0.0;  // max y'' f / k
};

/// The line estimate: for y on [x0, x1] with y' >= 1/4, y'' <= H k / f and
/// 0 <= y <= f, -log m(x, y(x)) is certified at (K / (32 f_I^2), 32 K) with
/// f_I = max f on the interval. `y` must carry analytic derivatives. Throws
/// PreconditionError naming the first sample where a hypothesis fails.
LineProfileReport line_profile_check(const SpaceParams& params, const SampledFunction& y, double H, double tol = 1e-6);

// ---------------------------------------------------------------------------
// Interpolation profiles of the pointwise criterion

enum class CaseKind { H0, V, H1 };

/// A point z, its image T(z) and the monotone partial derivatives there.
struct CaseData {
  Point2 z = Point2::Zero();
  Point2 T = Point2::Zero();
  double dT1dx = 1.0;
  double dT2dy = 1.0;
};

struct CaseProfile {
  CaseKind kind = CaseKind::H0;
  SampledFunction g;
  double N_required = 0.0;  // 2K+2, 32K+2 or 32K+3
  double bump_delta = 0.0;  // H1 only
};

/// The t-interpolated function whose (0, N) convexity yields the pointwise
/// criterion for the pair (z, T(z)):
///   H0: -log((1-t) + t a) - log((1-t)/f(x) + t b/f(T1)) + K((1-t)u0 + t u1)^2;
///   V:  -log((1-t) + t a) - log((1-t) + t b) - log m along the segment z -> T;
///   H1: -log((1-t) + t a) - log h(t) - log m along the quadratic through z,
///       the midpoint and T, with h built from A = b and the ytilde excess.
/// Here a = dT1/dx and b = dT2/dy. The D class uses the V profile.
/// H1 data must satisfy x < T1, y < T2. Throws PreconditionError on negative
/// derivative data or a pair of the wrong class.
CaseProfile case_profile(CaseKind kind, const CaseData& data, const SpaceParams& params, int samples = 513);

/// kn_certificate of the case profile at (0, N_required).
ConvexityCertificate certify_case(const CaseProfile& profile, double tol = 1e-6);

std::string_view to_string(CaseKind kind);

}  // namespace cdlab
