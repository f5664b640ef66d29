#include "cdlab/profiles.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "cdlab/error.hpp"

namespace cdlab {

namespace {

using Kind = ExprNode::Kind;

ExprPtr make_const(double v) {
  auto n = std::make_shared<ExprNode>();
  n->kind = Kind::Constant;
  n->value = v;
  return n;
}

ExprPtr make_var() {
  auto n = std::make_shared<ExprNode>();
  n->kind = Kind::Variable;
  return n;
}

bool is_const(const ExprPtr& e, double v) { return e->kind == Kind::Constant && e->value == v; }
bool is_const(const ExprPtr& e) { return e->kind == Kind::Constant; }

ExprPtr make_unary(Kind kind, ExprPtr a) {
  if (is_const(a)) {
    const double v = a->value;
    switch (kind) {
      case Kind::Neg: return make_const(-v);
      case Kind::Sin: return make_const(std::sin(v));
      case Kind::Cos: return make_const(std::cos(v));
      case Kind::Exp: return make_const(std::exp(v));
      case Kind::Tanh: return make_const(std::tanh(v));
      case Kind::Sqrt:
        if (v >= 0.0) return make_const(std::sqrt(v));
        break;
      default: break;
    }
  }
  if (kind == Kind::Neg && a->kind == Kind::Neg) return a->lhs;
  auto n = std::make_shared<ExprNode>();
  n->kind = kind;
  n->lhs = std::move(a);
  return n;
}

ExprPtr make_binary(Kind kind, ExprPtr a, ExprPtr b) {
  if (is_const(a) && is_const(b)) {
    switch (kind) {
      case Kind::Add: return make_const(a->value + b->value);
      case Kind::Sub: return make_const(a->value - b->value);
      case Kind::Mul: return make_const(a->value * b->value);
      case Kind::Div:
        if (b->value != 0.0) return make_const(a->value / b->value);
        break;
      default: break;
    }
  }
  switch (kind) {
    case Kind::Add:
      if (is_const(a, 0.0)) return b;
      if (is_const(b, 0.0)) return a;
      break;
    case Kind::Sub:
      if (is_const(b, 0.0)) return a;
      if (is_const(a, 0.0)) return make_unary(Kind::Neg, b);
      break;
    case Kind::Mul:
      if (is_const(a, 0.0) || is_const(b, 0.0)) return make_const(0.0);
      if (is_const(a, 1.0)) return b;
      if (is_const(b, 1.0)) return a;
      break;
    case Kind::Div:
      if (is_const(a, 0.0) && !is_const(b, 0.0)) return make_const(0.0);
      if (is_const(b, 1.0)) return a;
      break;
    default: break;
  }
  auto n = std::make_shared<ExprNode>();
  n->kind = kind;
  n->lhs = std::move(a);
  n->rhs = std::move(b);
  return n;
}

ExprPtr make_pow(ExprPtr a, int n) {
  if (n == 0) return make_const(1.0);
  if (n == 1) return a;
  if (is_const(a)) {
    double r = 1.0;
    for (int i = 0; i < n; ++i) r *= a->value;
    return make_const(r);
  }
  auto node = std::make_shared<ExprNode>();
  node->kind = Kind::Pow;
  node->exponent = n;
  node->lhs = std::move(a);
  return node;
}

ExprPtr add(ExprPtr a, ExprPtr b) { return make_binary(Kind::Add, std::move(a), std::move(b)); }
ExprPtr sub(ExprPtr a, ExprPtr b) { return make_binary(Kind::Sub, std::move(a), std::move(b)); }
ExprPtr mul(ExprPtr a, ExprPtr b) { return make_binary(Kind::Mul, std::move(a), std::move(b)); }
ExprPtr div(ExprPtr a, ExprPtr b) { return make_binary(Kind::Div, std::move(a), std::move(b)); }
ExprPtr neg(ExprPtr a) { return make_unary(Kind::Neg, std::move(a)); }

// Recursive-descent parser over a byte string.
class Parser {
 public:
  Parser(std::string_view src, const ParamMap& params) : src_(src), params_(params) {}

  ExprPtr parse() {
    ExprPtr e = parse_sum();
    skip_ws();
    if (pos_ != src_.size()) fail("unexpected character '" + std::string(1, src_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError("syntax error: " + msg, pos_); }

  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) {
      if (pos_ >= src_.size()) fail(std::string("expected '") + c + "' but input ended");
      fail(std::string("expected '") + c + "'");
    }
  }

  ExprPtr parse_sum() {
    ExprPtr lhs = parse_product();
    for (;;) {
      if (accept('+')) {
        lhs = add(lhs, parse_product());
      } else if (accept('-')) {
        lhs = sub(lhs, parse_product());
      } else {
        return lhs;
      }
    }
  }

  ExprPtr parse_product() {
    ExprPtr lhs = parse_unary();
    for (;;) {
      if (accept('*')) {
        lhs = mul(lhs, parse_unary());
      } else if (accept('/')) {
        lhs = div(lhs, parse_unary());
      } else {
        return lhs;
      }
    }
  }

  ExprPtr parse_unary() {
    if (accept('-')) return neg(parse_unary());
    if (accept('+')) return parse_unary();
    return parse_power();
  }

  ExprPtr parse_power() {
    ExprPtr base = parse_primary();
    if (accept('^')) {
      skip_ws();
      const std::size_t start = pos_;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      if (start == pos_) {
        pos_ = start;
        fail("exponent must be a nonnegative integer literal");
      }
      if (pos_ < src_.size() && (src_[pos_] == '.' || src_[pos_] == 'e' || src_[pos_] == 'E')) {
        fail("exponent must be a nonnegative integer literal");
      }
      const std::string digits(src_.substr(start, pos_ - start));
      if (digits.size() > 4) {
        pos_ = start;
        fail("exponent too large");
      }
      return make_pow(base, std::stoi(digits));
    }
    return base;
  }

  ExprPtr parse_primary() {
    skip_ws();
    if (pos_ >= src_.size()) fail("unexpected end of input");
    const char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      ExprPtr e = parse_sum();
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
    fail("unexpected character '" + std::string(1, c) + "'");
  }

  ExprPtr parse_number() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() && (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.')) ++pos_;
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t p = pos_ + 1;
      if (p < src_.size() && (src_[p] == '+' || src_[p] == '-')) ++p;
      if (p < src_.size() && std::isdigit(static_cast<unsigned char>(src_[p]))) {
        while (p < src_.size() && std::isdigit(static_cast<unsigned char>(src_[p]))) ++p;
        pos_ = p;
      }
    }
    const std::string text(src_.substr(start, pos_ - start));
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(text, &used);
    } catch (const std::exception&) {
      pos_ = start;
      fail("malformed number '" + text + "'");
    }
    if (used != text.size()) {
      pos_ = start;
      fail("malformed number '" + text + "'");
    }
    return make_const(v);
  }

  ExprPtr parse_identifier() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
      ++pos_;
    }
    const std::string name(src_.substr(start, pos_ - start));

    static const std::vector<std::string> non_c2 = {"abs", "max", "min", "floor", "ceil",
                                                     "sign", "step", "round", "fabs"};
    if (std::find(non_c2.begin(), non_c2.end(), name) != non_c2.end()) {
      throw ParseError("'" + name + "' is not a C^2 primitive", start);
    }

    static const std::vector<std::pair<std::string, Kind>> functions = {
        {"sin", Kind::Sin}, {"cos", Kind::Cos}, {"exp", Kind::Exp}, {"tanh", Kind::Tanh}, {"sqrt", Kind::Sqrt}};
    for (const auto& [fname, kind] : functions) {
      if (name == fname) {
        expect('(');
        ExprPtr arg = parse_sum();
        expect(')');
        return make_unary(kind, arg);
      }
    }
    if (name == "x") return make_var();
    if (auto it = params_.find(name); it != params_.end()) return make_const(it->second);
    throw ParseError("unknown identifier '" + name + "'", start);
  }

  std::string_view src_;
  const ParamMap& params_;
  std::size_t pos_ = 0;
};

void render(const ExprNode& e, std::ostringstream& os) {
  switch (e.kind) {
    case Kind::Constant: os << e.value; return;
    case Kind::Variable: os << 'x'; return;
    case Kind::Add:
    case Kind::Sub:
    case Kind::Mul:
    case Kind::Div: {
      const char op = e.kind == Kind::Add ? '+' : e.kind == Kind::Sub ? '-' : e.kind == Kind::Mul ? '*' : '/';
      os << '(';
      render(*e.lhs, os);
      os << ' ' << op << ' ';
      render(*e.rhs, os);
      os << ')';
      return;
    }
    case Kind::Neg:
      os << "(-";
      render(*e.lhs, os);
      os << ')';
      return;
    case Kind::Pow:
      os << '(';
      render(*e.lhs, os);
      os << '^' << e.exponent << ')';
      return;
    case Kind::Sin:
    case Kind::Cos:
    case Kind::Exp:
    case Kind::Tanh:
    case Kind::Sqrt: {
      const char* name = e.kind == Kind::Sin    ? "sin"
                         : e.kind == Kind::Cos  ? "cos"
                         : e.kind == Kind::Exp  ? "exp"
                         : e.kind == Kind::Tanh ? "tanh"
                                                : "sqrt";
      os << name << '(';
      render(*e.lhs, os);
      os << ')';
      return;
    }
  }
}

}  // namespace

ExprPtr parse_expression(std::string_view src, const ParamMap& params) { return Parser(src, params).parse(); }

ExprPtr differentiate(const ExprPtr& e) {
  switch (e->kind) {
    case Kind::Constant: return make_const(0.0);
    case Kind::Variable: return make_const(1.0);
    case Kind::Add: return add(differentiate(e->lhs), differentiate(e->rhs));
    case Kind::Sub: return sub(differentiate(e->lhs), differentiate(e->rhs));
    case Kind::Mul:
      return add(mul(differentiate(e->lhs), e->rhs), mul(e->lhs, differentiate(e->rhs)));
    case Kind::Div:
      return div(sub(mul(differentiate(e->lhs), e->rhs), mul(e->lhs, differentiate(e->rhs))), make_pow(e->rhs, 2));
    case Kind::Neg: return neg(differentiate(e->lhs));
    case Kind::Pow:
      return mul(mul(make_const(e->exponent), make_pow(e->lhs, e->exponent - 1)), differentiate(e->lhs));
    case Kind::Sin: return mul(make_unary(Kind::Cos, e->lhs), differentiate(e->lhs));
    case Kind::Cos: return neg(mul(make_unary(Kind::Sin, e->lhs), differentiate(e->lhs)));
    case Kind::Exp: return mul(e, differentiate(e->lhs));
    case Kind::Tanh: return mul(sub(make_const(1.0), make_pow(e, 2)), differentiate(e->lhs));
    case Kind::Sqrt: return div(differentiate(e->lhs), mul(make_const(2.0), e));
  }
  return make_const(0.0);
}

double evaluate(const ExprNode& e, double x) {
  switch (e.kind) {
    case Kind::Constant: return e.value;
    case Kind::Variable: return x;
    case Kind::Add: return evaluate(*e.lhs, x) + evaluate(*e.rhs, x);
    case Kind::Sub: return evaluate(*e.lhs, x) - evaluate(*e.rhs, x);
    case Kind::Mul: return evaluate(*e.lhs, x) * evaluate(*e.rhs, x);
    case Kind::Div: return evaluate(*e.lhs, x) / evaluate(*e.rhs, x);
    case Kind::Neg: return -evaluate(*e.lhs, x);
    case Kind::Pow: {
      const double b = evaluate(*e.lhs, x);
      double r = 1.0;
      for (int i = 0; i < e.exponent; ++i) r *= b;
      return r;
    }
    case Kind::Sin: return std::sin(evaluate(*e.lhs, x));
    case Kind::Cos: return std::cos(evaluate(*e.lhs, x));
    case Kind::Exp: return std::exp(evaluate(*e.lhs, x));
    case Kind::Tanh: return std::tanh(evaluate(*e.lhs, x));
    case Kind::Sqrt: return std::sqrt(evaluate(*e.lhs, x));
  }
  return 0.0;
}

std::string to_string(const ExprNode& e) {
  std::ostringstream os;
  os.precision(17);
  render(e, os);
  return os.str();
}

// ---------------------------------------------------------------------------

ProfileFn::ProfileFn(Fn f, Fn d1, Fn d2, std::string description)
    : f_(std::move(f)), d1_(std::move(d1)), d2_(std::move(d2)), description_(std::move(description)) {}

ProfileFn ProfileFn::from_expression(const ExprPtr& ast, std::string description) {
  ExprPtr d1 = differentiate(ast);
  ExprPtr d2 = differentiate(d1);
  ProfileFn p([ast](double x) { return evaluate(*ast, x); }, [d1](double x) { return evaluate(*d1, x); },
              [d2](double x) { return evaluate(*d2, x); }, std::move(description));
  p.ast_ = ast;
  return p;
}

ProfileFn ProfileFn::shifted(double eps) const {
  auto f = f_;
  return ProfileFn([f, eps](double x) { return f(x) + eps; }, d1_, d2_, description_ + " + " + std::to_string(eps));
}

ProfileFn ProfileFn::reflected() const {
  auto f = f_;
  auto d1 = d1_;
  auto d2 = d2_;
  return ProfileFn([f](double x) { return f(-x); }, [d1](double x) { return -d1(-x); },
                   [d2](double x) { return d2(-x); }, description_ + " (reflected)");
}

ProfileFn parse_profile(std::string_view src, const ParamMap& params) {
  ExprPtr ast = parse_expression(src, params);
  ProfileFn p = ProfileFn::from_expression(ast, std::string(src));
  constexpr int kProbe = 257;
  for (int i = 0; i < kProbe; ++i) {
    const double x = -1.0 + 2.0 * i / (kProbe - 1);
    if (!std::isfinite(p(x)) || !std::isfinite(p.d1(x)) || !std::isfinite(p.d2(x))) {
      throw DomainError("profile '" + std::string(src) + "' is not finite at x = " + std::to_string(x));
    }
  }
  return p;
}

namespace {

// C^2 ramp: zero on (-inf, 0], slope one beyond `width`, smoothstep-blended
// derivative in between.
struct SmoothedRamp {
  double width;

  double value(double x) const {
    if (x <= 0.0) return 0.0;
    if (x >= width) return x - 0.5 * width;
    const double u = x / width;
    return width * (u * u * u - 0.5 * u * u * u * u);
  }
  double d1(double x) const {
    if (x <= 0.0) return 0.0;
    if (x >= width) return 1.0;
    const double u = x / width;
    return 3.0 * u * u - 2.0 * u * u * u;
  }
  double d2(double x) const {
    if (x <= 0.0 || x >= width) return 0.0;
    const double u = x / width;
    return (6.0 * u - 6.0 * u * u) / width;
  }
};

}  // namespace

ProfileFn preset_profile(std::string_view name, double k) {
  const ParamMap params{{"k", k}};
  if (name == "constant") return parse_profile("k", params);
  if (name == "valley") return parse_profile("k*(2+x^2)/2", params);
  if (name == "wave") return parse_profile("k*(2+sin(x))/2", params);
  if (name == "tilt") return parse_profile("k*(2+tanh(x))/2", params);
  if (name == "bump") return parse_profile("k*(1.5+exp(-x^2))", params);
  if (name == "ramp-smoothed") {
    const SmoothedRamp r{0.5};
    return ProfileFn([r, k](double x) { return k * r.value(x); }, [r, k](double x) { return k * r.d1(x); },
                     [r, k](double x) { return k * r.d2(x); }, "ramp-smoothed");
  }
  throw PreconditionError("unknown profile preset '" + std::string(name) + "'");
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"constant", "valley", "wave", "tilt", "bump", "ramp-smoothed"};
  return names;
}

ProfileFn wedge_profile(double k) {
  return ProfileFn([k](double x) { return x > 0.0 ? k * x : 0.0; }, [k](double x) { return x > 0.0 ? k : 0.0; },
                   [](double) { return 0.0; }, "wedge");
}

// ---------------------------------------------------------------------------

std::string_view to_string(ProfileClass c) {
  switch (c) {
    case ProfileClass::Fk: return "F_k";
    case ProfileClass::ClosureOnly: return "closure-only";
    case ProfileClass::Rejected: return "rejected";
  }
  return "?";
}

std::string_view to_string(Bound b) {
  switch (b) {
    case Bound::Positivity: return "positivity";
    case Bound::Upper: return "upper";
    case Bound::FirstDerivative: return "first-derivative";
    case Bound::SecondDerivative: return "second-derivative";
  }
  return "?";
}

MembershipReport validate_membership(const ProfileFn& f, double k, int audit_n) {
  if (!(k > 0.0 && k < 0.25)) throw PreconditionError("k must lie in (0, 1/4), got " + std::to_string(k));
  if (audit_n < 1000) throw PreconditionError("audit_n must be at least 1000");

  MembershipReport rep;
  rep.sample_count = audit_n;
  rep.min_f = INFINITY;
  rep.max_f = -INFINITY;
  for (int i = 0; i < audit_n; ++i) {
    const double x = i == audit_n - 1 ? 1.0 : -1.0 + 2.0 * i / (audit_n - 1);
    const double v = f(x), v1 = f.d1(x), v2 = f.d2(x);
    rep.min_f = std::min(rep.min_f, v);
    rep.max_f = std::max(rep.max_f, v);
    rep.max_abs_d1 = std::max(rep.max_abs_d1, std::abs(v1));
    rep.max_abs_d2 = std::max(rep.max_abs_d2, std::abs(v2));
    if (rep.violation) continue;
    if (!(v >= 0.0)) {
      rep.violation = BoundViolation{Bound::Positivity, x, v};
    } else if (!(v < 3.0 * k)) {
      rep.violation = BoundViolation{Bound::Upper, x, v};
    } else if (!(std::abs(v1) <= k)) {
      rep.violation = BoundViolation{Bound::FirstDerivative, x, v1};
    } else if (!(std::abs(v2) <= 1.0)) {
      rep.violation = BoundViolation{Bound::SecondDerivative, x, v2};
    }
  }
  if (rep.violation) {
    rep.profile_class = ProfileClass::Rejected;
  } else {
    rep.profile_class = rep.min_f > 0.0 ? ProfileClass::Fk : ProfileClass::ClosureOnly;
  }
  return rep;
}

}  // namespace cdlab
