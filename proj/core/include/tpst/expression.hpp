#pragma once

#include <memory>
#include <string>

#include "tpst/types.hpp"

namespace tpst {

namespace detail {
struct ExprNode;
}

/// A compiled scalar expression in the variables x, y, z. Copyable; copies
/// share the immutable parse tree.
class Expression {
 public:
  Expression() = default;
  double operator()(double x, double y, double z) const;
  double operator()(const Point3& p) const { return (*this)(p.x, p.y, p.z); }
  bool empty() const { return root_ == nullptr; }
  const std::string& text() const { return text_; }

 private:
  friend Expression parse_expression(const std::string&);
  std::shared_ptr<const detail::ExprNode> root_;
  std::string text_;
};

/// Parse an arithmetic expression with + - * / ^ (right-associative power),
/// parentheses, the functions sin cos tan exp log sqrt abs, the constant pi,
/// and the variables x y z. Throws UsageError naming the offending position.
Expression parse_expression(const std::string& text);

}  // namespace tpst
