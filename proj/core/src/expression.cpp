#include "tpst/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <vector>

namespace tpst {

namespace detail {

struct ExprNode {
  enum class Kind { kConst, kVar, kUnary, kBinary, kCall };
  Kind kind = Kind::kConst;
  double value = 0;                       // kConst
  int var = 0;                            // kVar: 0=x 1=y 2=z
  char op = 0;                            // kUnary ('-') / kBinary
  double (*fn)(double) = nullptr;         // kCall
  std::shared_ptr<const ExprNode> lhs, rhs;

  double eval(double x, double y, double z) const {
    switch (kind) {
      case Kind::kConst:
        return value;
      case Kind::kVar:
        return var == 0 ? x : (var == 1 ? y : z);
      case Kind::kUnary:
        return -lhs->eval(x, y, z);
      case Kind::kCall:
        return fn(lhs->eval(x, y, z));
      case Kind::kBinary: {
        const double a = lhs->eval(x, y, z);
        const double b = rhs->eval(x, y, z);
        switch (op) {
          case '+': return a + b;
          case '-': return a - b;
          case '*': return a * b;
          case '/': return a / b;
          default: return std::pow(a, b);
        }
      }
    }
    return 0;
  }
};

namespace {

using NodePtr = std::shared_ptr<const ExprNode>;

NodePtr make_const(double v) {
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprNode::Kind::kConst;
  n->value = v;
  return n;
}

NodePtr make_var(int var) {
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprNode::Kind::kVar;
  n->var = var;
  return n;
}

NodePtr make_binary(char op, NodePtr a, NodePtr b) {
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprNode::Kind::kBinary;
  n->op = op;
  n->lhs = std::move(a);
  n->rhs = std::move(b);
  return n;
}

NodePtr make_neg(NodePtr a) {
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprNode::Kind::kUnary;
  n->op = '-';
  n->lhs = std::move(a);
  return n;
}

NodePtr make_call(double (*fn)(double), NodePtr a) {
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprNode::Kind::kCall;
  n->fn = fn;
  n->lhs = std::move(a);
  return n;
}

/// Recursive-descent parser over the raw string; `pos_` always points at the
/// next unconsumed character.
class Parser {
 public:
  explicit Parser(const std::string& text) : text_(text) {}

  NodePtr parse() {
    NodePtr e = sum();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected trailing input");
    return e;
  }

 private:
  const std::string& text_;
  std::size_t pos_ = 0;

  [[noreturn]] void fail(const std::string& what) const {
    throw UsageError("expression error at position " + std::to_string(pos_ + 1) + ": " +
                     what + " in \"" + text_ + "\"");
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool eat(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  char peek() {
    skip_space();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  NodePtr sum() {
    NodePtr e = product();
    for (;;) {
      if (eat('+')) {
        e = make_binary('+', e, product());
      } else if (eat('-')) {
        e = make_binary('-', e, product());
      } else {
        return e;
      }
    }
  }

  NodePtr product() {
    NodePtr e = unary();
    for (;;) {
      if (eat('*')) {
        e = make_binary('*', e, unary());
      } else if (eat('/')) {
        e = make_binary('/', e, unary());
      } else {
        return e;
      }
    }
  }

  NodePtr unary() {
    if (eat('-')) return make_neg(unary());
    if (eat('+')) return unary();
    return power();
  }

  NodePtr power() {
    NodePtr base = atom();
    if (eat('^')) return make_binary('^', base, unary());  // right-associative
    return base;
  }

  NodePtr atom() {
    const char c = peek();
    if (c == '(') {
      ++pos_;
      NodePtr e = sum();
      if (!eat(')')) fail("expected ')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    fail(c == '\0' ? "unexpected end of expression"
                   : std::string("unexpected character '") + c + "'");
  }

  NodePtr number() {
    skip_space();
    const char* begin = text_.c_str() + pos_;
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin) fail("malformed number");
    pos_ += static_cast<std::size_t>(end - begin);
    return make_const(v);
  }

  NodePtr identifier() {
    skip_space();
    std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
      ++pos_;
    }
    const std::string name = text_.substr(start, pos_ - start);
    if (name == "x") return make_var(0);
    if (name == "y") return make_var(1);
    if (name == "z") return make_var(2);
    if (name == "pi") return make_const(3.14159265358979323846);

    static const struct {
      const char* name;
      double (*fn)(double);
    } kFns[] = {{"sin", std::sin}, {"cos", std::cos},   {"tan", std::tan},
                {"exp", std::exp}, {"log", std::log},   {"sqrt", std::sqrt},
                {"abs", std::fabs}};
    for (const auto& f : kFns) {
      if (name == f.name) {
        if (!eat('(')) fail("expected '(' after " + name);
        NodePtr arg = sum();
        if (!eat(')')) fail("expected ')' closing " + name);
        return make_call(f.fn, arg);
      }
    }
    pos_ = start;
    fail("unknown identifier \"" + name + "\"");
  }
};

}  // namespace
}  // namespace detail

double Expression::operator()(double x, double y, double z) const {
  if (!root_) throw UsageError("evaluating an empty expression");
  return root_->eval(x, y, z);
}

Expression parse_expression(const std::string& text) {
  detail::Parser parser(text);
  Expression e;
  e.root_ = parser.parse();
  e.text_ = text;
  return e;
}

}  // namespace tpst
