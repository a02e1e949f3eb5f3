#include "levyavg/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <vector>

#include "levyavg/error.hpp"

namespace levyavg {

struct Expression::Node {
  enum class Op { kConst, kVar, kNeg, kAdd, kSub, kMul, kDiv, kPow, kCall };
  enum class Fn { kSin, kCos, kTanh, kExp, kAbs, kSqrt, kLog };

  Op op = Op::kConst;
  double value = 0.0;
  int var = 0;  // 0 = x, 1 = y, 2 = z
  Fn fn = Fn::kSin;
  std::shared_ptr<const Node> lhs, rhs;

  double eval(const double* vars) const {
    switch (op) {
      case Op::kConst: return value;
      case Op::kVar: return vars[var];
      case Op::kNeg: return -lhs->eval(vars);
      case Op::kAdd: return lhs->eval(vars) + rhs->eval(vars);
      case Op::kSub: return lhs->eval(vars) - rhs->eval(vars);
      case Op::kMul: return lhs->eval(vars) * rhs->eval(vars);
      case Op::kDiv: return lhs->eval(vars) / rhs->eval(vars);
      case Op::kPow: return std::pow(lhs->eval(vars), rhs->eval(vars));
      case Op::kCall: {
        const double a = lhs->eval(vars);
        switch (fn) {
          case Fn::kSin: return std::sin(a);
          case Fn::kCos: return std::cos(a);
          case Fn::kTanh: return std::tanh(a);
          case Fn::kExp: return std::exp(a);
          case Fn::kAbs: return std::abs(a);
          case Fn::kSqrt: return std::sqrt(a);
          case Fn::kLog: return std::log(a);
        }
      }
    }
    return 0.0;
  }

  bool uses(int v) const {
    if (op == Op::kVar) return var == v;
    return (lhs && lhs->uses(v)) || (rhs && rhs->uses(v));
  }
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Node = Expression::Node;

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {}

  NodePtr parse() {
    NodePtr n = expr();
    skip();
    if (pos_ != src_.size()) fail("unexpected trailing input");
    return n;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorCode::kInvalidConfig,
                "expression '" + std::string(src_) + "' at column " + std::to_string(pos_ + 1) + ": " + what);
  }

  void skip() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  static NodePtr binary(Node::Op op, NodePtr a, NodePtr b) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->lhs = std::move(a);
    n->rhs = std::move(b);
    return n;
  }

  // expr := term (('+'|'-') term)*
  NodePtr expr() {
    NodePtr n = term();
    for (;;) {
      if (accept('+')) n = binary(Node::Op::kAdd, n, term());
      else if (accept('-')) n = binary(Node::Op::kSub, n, term());
      else return n;
    }
  }

  // term := unary (('*'|'/') unary)*
  NodePtr term() {
    NodePtr n = unary();
    for (;;) {
      if (accept('*')) n = binary(Node::Op::kMul, n, unary());
      else if (accept('/')) n = binary(Node::Op::kDiv, n, unary());
      else return n;
    }
  }

  // unary := ('-'|'+') unary | power
  NodePtr unary() {
    if (accept('-')) {
      auto n = std::make_shared<Node>();
      n->op = Node::Op::kNeg;
      n->lhs = unary();
      return n;
    }
    if (accept('+')) return unary();
    return power();
  }

  // power := primary ('^' unary)?
  NodePtr power() {
    NodePtr base = primary();
    if (accept('^')) return binary(Node::Op::kPow, base, unary());
    return base;
  }

  NodePtr primary() {
    skip();
    if (pos_ >= src_.size()) fail("unexpected end of input");
    const char c = src_[pos_];
    if (accept('(')) {
      NodePtr n = expr();
      if (!accept(')')) fail("expected ')'");
      return n;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const std::string rest(src_.substr(pos_));
      char* end = nullptr;
      const double v = std::strtod(rest.c_str(), &end);
      if (end == rest.c_str()) fail("bad number");
      pos_ += static_cast<std::size_t>(end - rest.c_str());
      auto n = std::make_shared<Node>();
      n->value = v;
      return n;
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      const std::size_t start = pos_;
      while (pos_ < src_.size() && std::isalnum(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      const std::string_view name = src_.substr(start, pos_ - start);
      auto n = std::make_shared<Node>();
      if (name == "x" || name == "y" || name == "z") {
        n->op = Node::Op::kVar;
        n->var = name[0] - 'x';
        return n;
      }
      if (name == "pi") {
        n->value = std::numbers::pi;
        return n;
      }
      if (name == "e") {
        n->value = std::numbers::e;
        return n;
      }
      static constexpr std::pair<std::string_view, Node::Fn> kFunctions[] = {
          {"sin", Node::Fn::kSin},   {"cos", Node::Fn::kCos}, {"tanh", Node::Fn::kTanh},
          {"exp", Node::Fn::kExp},   {"abs", Node::Fn::kAbs}, {"sqrt", Node::Fn::kSqrt},
          {"log", Node::Fn::kLog},
      };
      for (const auto& [fname, fn] : kFunctions) {
        if (name == fname) {
          if (!accept('(')) fail("expected '(' after " + std::string(name));
          n->op = Node::Op::kCall;
          n->fn = fn;
          n->lhs = expr();
          if (!accept(')')) fail("expected ')'");
          return n;
        }
      }
      pos_ = start;
      fail("unknown identifier '" + std::string(name) + "'");
    }
    fail(std::string("unexpected character '") + c + "'");
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

}  // namespace

Expression Expression::parse(std::string_view source) {
  Expression e;
  e.root_ = Parser(source).parse();
  e.source_ = std::string(source);
  return e;
}

double Expression::operator()(double x, double y, double z) const {
  if (!root_) return 0.0;
  const double vars[3] = {x, y, z};
  return root_->eval(vars);
}

bool Expression::uses(char variable) const {
  if (!root_ || variable < 'x' || variable > 'z') return false;
  return root_->uses(variable - 'x');
}

}  // namespace levyavg
