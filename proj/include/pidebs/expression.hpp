#ifndef PIDEBS_EXPRESSION_HPP
#define PIDEBS_EXPRESSION_HPP

#include <cctype>
#include <cmath>
#include <memory>
#include <numbers>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pidebs/errors.hpp"

namespace pidebs {

/// Values bound to the free variables of an expression.
struct Bindings {
  double z = 0.0;
  double zeta = 0.0;
  double eta = 0.0;
};

/// Parsed arithmetic expression over z, zeta and eta.
///
/// Grammar: sums and products of terms, right-associative `^`, unary
/// sign, parentheses, decimal literals, the constant `pi` and the functions
/// sin, cos, exp, sqrt, log. Copies share the immutable syntax tree.
class Expression {
 public:
  Expression() = default;

  static Expression parse(std::string_view text);

  double eval(const Bindings& b) const { return root_ ? eval(*root_, b) : 0.0; }
  double operator()(double z, double zeta = 0.0, double eta = 0.0) const { return eval(Bindings{z, zeta, eta}); }

  const std::string& text() const { return text_; }
  bool uses(std::string_view variable) const;
  bool is_literal_zero() const { return root_ && root_->kind == Kind::number && root_->value == 0.0; }

 private:
  enum class Kind { number, variable, negate, add, sub, mul, div, pow, call };
  enum class Var { z, zeta, eta };
  enum class Fn { sin, cos, exp, sqrt, log };

  struct Node {
    Kind kind = Kind::number;
    double value = 0.0;
    Var var = Var::z;
    Fn fn = Fn::sin;
    std::unique_ptr<Node> lhs, rhs;
  };

  class Parser;

  static double eval(const Node& n, const Bindings& b) {
    switch (n.kind) {
      case Kind::number: return n.value;
      case Kind::variable:
        return n.var == Var::z ? b.z : (n.var == Var::zeta ? b.zeta : b.eta);
      case Kind::negate: return -eval(*n.lhs, b);
      case Kind::add: return eval(*n.lhs, b) + eval(*n.rhs, b);
      case Kind::sub: return eval(*n.lhs, b) - eval(*n.rhs, b);
      case Kind::mul: return eval(*n.lhs, b) * eval(*n.rhs, b);
      case Kind::div: {
        const double d = eval(*n.rhs, b);
        if (d == 0.0) throw ExpressionDomainError("division by zero");
        return eval(*n.lhs, b) / d;
      }
      case Kind::pow: {
        const double r = std::pow(eval(*n.lhs, b), eval(*n.rhs, b));
        if (!std::isfinite(r)) throw ExpressionDomainError("power is not a finite real number");
        return r;
      }
      case Kind::call: {
        const double x = eval(*n.lhs, b);
        switch (n.fn) {
          case Fn::sin: return std::sin(x);
          case Fn::cos: return std::cos(x);
          case Fn::exp: return std::exp(x);
          case Fn::sqrt:
            if (x < 0.0) throw ExpressionDomainError("sqrt of negative argument " + std::to_string(x));
            return std::sqrt(x);
          case Fn::log:
            if (x <= 0.0) throw ExpressionDomainError("log of nonpositive argument " + std::to_string(x));
            return std::log(x);
        }
      }
    }
    return 0.0;
  }

  static bool uses(const Node& n, Var v) {
    if (n.kind == Kind::variable) return n.var == v;
    return (n.lhs && uses(*n.lhs, v)) || (n.rhs && uses(*n.rhs, v));
  }

  std::shared_ptr<const Node> root_;
  std::string text_;
};

class Expression::Parser {
 public:
  explicit Parser(std::string_view s) : s_(s) {}

  std::unique_ptr<Node> parse_all() {
    auto n = expr();
    skip();
    if (pos_ != s_.size()) fail("unexpected character '" + std::string(1, s_[pos_]) + "'");
    return n;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError("expression \"" + std::string(s_) + "\" at position " + std::to_string(pos_) + ": " + what);
  }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  static std::unique_ptr<Node> binary(Kind k, std::unique_ptr<Node> a, std::unique_ptr<Node> b) {
    auto n = std::make_unique<Node>();
    n->kind = k;
    n->lhs = std::move(a);
    n->rhs = std::move(b);
    return n;
  }

  std::unique_ptr<Node> expr() {
    auto n = term();
    for (;;) {
      if (accept('+')) n = binary(Kind::add, std::move(n), term());
      else if (accept('-')) n = binary(Kind::sub, std::move(n), term());
      else return n;
    }
  }

  std::unique_ptr<Node> term() {
    auto n = unary();
    for (;;) {
      if (accept('*')) n = binary(Kind::mul, std::move(n), unary());
      else if (accept('/')) n = binary(Kind::div, std::move(n), unary());
      else return n;
    }
  }

  std::unique_ptr<Node> unary() {
    if (accept('-')) {
      auto n = std::make_unique<Node>();
      n->kind = Kind::negate;
      n->lhs = unary();
      return n;
    }
    if (accept('+')) return unary();
    return power();
  }

  std::unique_ptr<Node> power() {
    auto base = primary();
    if (accept('^')) return binary(Kind::pow, std::move(base), unary());
    return base;
  }

  std::unique_ptr<Node> primary() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    const char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      auto n = expr();
      if (!accept(')')) fail("expected ')'");
      return n;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    fail("unexpected character '" + std::string(1, c) + "'");
  }

  std::unique_ptr<Node> number() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.')) ++pos_;
    if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
      std::size_t p = pos_ + 1;
      if (p < s_.size() && (s_[p] == '+' || s_[p] == '-')) ++p;
      if (p < s_.size() && std::isdigit(static_cast<unsigned char>(s_[p]))) {
        pos_ = p;
        while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      }
    }
    const std::string lit(s_.substr(start, pos_ - start));
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(lit, &used);
    } catch (const std::exception&) {
      pos_ = start;
      fail("malformed number '" + lit + "'");
    }
    if (used != lit.size()) {
      pos_ = start;
      fail("malformed number '" + lit + "'");
    }
    auto n = std::make_unique<Node>();
    n->value = v;
    return n;
  }

  std::unique_ptr<Node> identifier() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
    const std::string_view name = s_.substr(start, pos_ - start);
    auto n = std::make_unique<Node>();
    if (name == "pi") {
      n->value = std::numbers::pi;
      return n;
    }
    if (name == "z" || name == "zeta" || name == "eta") {
      n->kind = Kind::variable;
      n->var = name == "z" ? Var::z : (name == "zeta" ? Var::zeta : Var::eta);
      return n;
    }
    static constexpr std::pair<std::string_view, Fn> fns[] = {
        {"sin", Fn::sin}, {"cos", Fn::cos}, {"exp", Fn::exp}, {"sqrt", Fn::sqrt}, {"log", Fn::log}};
    for (auto [fname, fn] : fns) {
      if (name != fname) continue;
      if (!accept('(')) fail("expected '(' after function " + std::string(name));
      n->kind = Kind::call;
      n->fn = fn;
      n->lhs = expr();
      if (!accept(')')) fail("expected ')' closing call of " + std::string(name));
      return n;
    }
    pos_ = start;
    fail("unknown identifier '" + std::string(name) + "'");
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

inline Expression Expression::parse(std::string_view text) {
  Expression e;
  e.root_ = std::shared_ptr<const Node>(Parser(text).parse_all());
  e.text_ = std::string(text);
  return e;
}

inline bool Expression::uses(std::string_view variable) const {
  if (!root_) return false;
  if (variable == "z") return uses(*root_, Var::z);
  if (variable == "zeta") return uses(*root_, Var::zeta);
  if (variable == "eta") return uses(*root_, Var::eta);
  return false;
}

}  // namespace pidebs

#endif  // PIDEBS_EXPRESSION_HPP
