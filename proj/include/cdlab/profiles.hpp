#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cdlab {

/// Default thickness parameter of the profile class: the smallest power of two
/// with 2k^2 + 4k < 2^-12 and comfortable margin.
inline constexpr double kDefaultK = 0x1p-15;

// ---------------------------------------------------------------------------
// Expression trees
// ---------------------------------------------------------------------------

struct ExprNode;
using ExprPtr = std::shared_ptr<const ExprNode>;

/// Node of an immutable expression tree in the single variable x.
/// Named parameters are substituted by their values at parse time.
struct ExprNode {
  enum class Kind { Constant, Variable, Add, Sub, Mul, Div, Neg, Pow, Sin, Cos, Exp, Tanh, Sqrt };

  Kind kind = Kind::Constant;
  double value = 0.0;  // Constant
  int exponent = 0;    // Pow
  ExprPtr lhs;         // operand of unary nodes, left operand of binary nodes
  ExprPtr rhs;
};

using ParamMap = std::map<std::string, double, std::less<>>;

/// Parses `src` with the grammar: real literals, named parameters, the variable
/// x, + - * /, unary minus, parentheses, sin cos exp tanh sqrt, and `^` with a
/// nonnegative integer literal exponent. Throws ParseError with the byte offset
/// of the offending token.
ExprPtr parse_expression(std::string_view src, const ParamMap& params);

/// Symbolic derivative with respect to x, with constant folding.
ExprPtr differentiate(const ExprPtr& e);

double evaluate(const ExprNode& e, double x);

/// Fully parenthesized rendering; equal strings imply equal trees.
std::string to_string(const ExprNode& e);

// ---------------------------------------------------------------------------
// Profiles
// ---------------------------------------------------------------------------

/// A C^2 profile f on [-1,1] together with its exact first and second
/// derivatives. Cheap to copy, immutable, safe to share between threads.
class ProfileFn {
 public:
  using Fn = std::function<double(double)>;

  ProfileFn(Fn f, Fn d1, Fn d2, std::string description);

  static ProfileFn from_expression(const ExprPtr& ast, std::string description);

  double operator()(double x) const { return f_(x); }
  double d1(double x) const { return d1_(x); }
  double d2(double x) const { return d2_(x); }

  const std::string& description() const { return description_; }

  /// Parsed tree of f, when the profile came from an expression.
  const ExprPtr& ast() const { return ast_; }

  /// x -> f(x) + eps.
  ProfileFn shifted(double eps) const;

  /// x -> f(-x); conjugation by the isometry (x, y) -> (-x, y).
  ProfileFn reflected() const;

 private:
  Fn f_, d1_, d2_;
  std::string description_;
  ExprPtr ast_;
};

/// Parses a profile and derives f', f'' symbolically. Throws ParseError on
/// malformed input and DomainError if f, f' or f'' is non-finite on [-1,1].
ProfileFn parse_profile(std::string_view src, const ParamMap& params);

/// Named families: "constant", "valley", "wave", "tilt", "bump" (all in F_k)
/// and "ramp-smoothed" (closure only, vanishing exactly on [-1,0]).
ProfileFn preset_profile(std::string_view name, double k);
const std::vector<std::string>& preset_names();

/// f(x) = k * max(x, 0): the cone profile of the non-compact space L u C^k.
ProfileFn wedge_profile(double k);

// ---------------------------------------------------------------------------
// Membership audit
// ---------------------------------------------------------------------------

enum class ProfileClass { Fk, ClosureOnly, Rejected };
enum class Bound { Positivity, Upper, FirstDerivative, SecondDerivative };

std::string_view to_string(ProfileClass c);
std::string_view to_string(Bound b);

struct BoundViolation {
  Bound bound;
  double x;
  double value;
};

struct MembershipReport {
  ProfileClass profile_class = ProfileClass::Rejected;
  std::optional<BoundViolation> violation;
  int sample_count = 0;
  double min_f = 0.0;
  double max_f = 0.0;
  double max_abs_d1 = 0.0;
  double max_abs_d2 = 0.0;
};

/// Dense-sampling audit of 0 < f < 3k, |f'| <= k, |f''| <= 1 on a uniform grid of
/// [-1,1] including both endpoints. Throws PreconditionError unless
/// 0 < k < 1/4 and audit_n >= 1000.
MembershipReport validate_membership(const ProfileFn& f, double k, int audit_n = 4096);

}  // namespace cdlab
