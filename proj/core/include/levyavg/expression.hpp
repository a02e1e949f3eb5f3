#pragma once

#include <memory>
#include <string>
#include <string_view>

namespace levyavg {

/// Compiled scalar expression in the variables x, y and z.
///
/// Grammar: numbers, x y z, pi, e, unary and binary + - * /, ^ (right
/// associative), parentheses, and the functions sin cos tanh exp abs
/// sqrt log. Parse failures throw InvalidConfig with the column.
class Expression {
 public:
  struct Node;

  Expression() = default;
  static Expression parse(std::string_view source);

  double operator()(double x, double y = 0.0, double z = 0.0) const;

  const std::string& source() const noexcept { return source_; }
  bool uses(char variable) const;

 private:
  std::shared_ptr<const Node> root_;
  std::string source_;
};

}  // namespace levyavg
