#include "rsctl/cli/expression.hpp"

#include <charconv>
#include <cctype>
#include <cmath>
#include <functional>

#include "rsctl/errors.hpp"

namespace rsctl::cli {

const char* variable_name(Variable v) {
  switch (v) {
    case Variable::T: return "t";
    case Variable::S: return "s";
    case Variable::Tau: return "tau";
    case Variable::X: return "x";
    case Variable::U: return "u";
  }
  return "?";
}

enum class Kind { Number, Var, Neg, Add, Sub, Mul, Div, Pow, Call };
enum class Fn { Exp, Log, Tanh, Sin, Cos, Abs, Min, Max, Pow };

struct Node {
  Kind kind = Kind::Number;
  double value = 0.0;
  Variable var = Variable::X;
  Fn fn = Fn::Exp;
  std::vector<std::unique_ptr<Node>> args;
  size_t begin = 0, end = 0;  // source span
};

namespace {

struct FnInfo {
  const char* name;
  Fn fn;
  int arity;
};

constexpr FnInfo kFunctions[] = {{"exp", Fn::Exp, 1}, {"log", Fn::Log, 1}, {"tanh", Fn::Tanh, 1},
                                 {"sin", Fn::Sin, 1}, {"cos", Fn::Cos, 1}, {"abs", Fn::Abs, 1},
                                 {"min", Fn::Min, 2}, {"max", Fn::Max, 2}, {"pow", Fn::Pow, 2}};

std::string caret_excerpt(const std::string& text, size_t offset) {
  return "  " + text + "\n  " + std::string(offset, ' ') + "^";
}

class Parser {
 public:
  explicit Parser(const std::string& text) : text_(text) {}

  std::unique_ptr<Node> parse_all() {
    auto root = parse_sum();
    skip_space();
    if (pos_ < text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    return root;
  }

  std::array<bool, kVariableCount> used{};

 private:
  [[noreturn]] void fail(const std::string& what, size_t at) const {
    throw ConfigError("expression syntax error at byte " + std::to_string(at) + ": " + what + "\n" +
                          caret_excerpt(text_, at),
                      {{"expression", text_}, {"offset", std::to_string(at)}});
  }
  [[noreturn]] void fail(const std::string& what) const { fail(what, pos_); }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  std::unique_ptr<Node> binary(Kind kind, std::unique_ptr<Node> lhs, std::unique_ptr<Node> rhs) {
    auto n = std::make_unique<Node>();
    n->kind = kind;
    n->begin = lhs->begin;
    n->end = rhs->end;
    n->args.push_back(std::move(lhs));
    n->args.push_back(std::move(rhs));
    return n;
  }

  std::unique_ptr<Node> parse_sum() {
    auto lhs = parse_product();
    for (;;) {
      if (accept('+')) lhs = binary(Kind::Add, std::move(lhs), parse_product());
      else if (accept('-')) lhs = binary(Kind::Sub, std::move(lhs), parse_product());
      else return lhs;
    }
  }

  std::unique_ptr<Node> parse_product() {
    auto lhs = parse_unary();
    for (;;) {
      if (accept('*')) lhs = binary(Kind::Mul, std::move(lhs), parse_unary());
      else if (accept('/')) lhs = binary(Kind::Div, std::move(lhs), parse_unary());
      else return lhs;
    }
  }

  std::unique_ptr<Node> parse_unary() {
    skip_space();
    const size_t start = pos_;
    if (accept('-')) {
      auto n = std::make_unique<Node>();
      n->kind = Kind::Neg;
      n->args.push_back(parse_unary());
      n->begin = start;
      n->end = n->args[0]->end;
      return n;
    }
    if (accept('+')) return parse_unary();
    return parse_power();
  }

  std::unique_ptr<Node> parse_power() {
    auto base = parse_primary();
    if (accept('^')) return binary(Kind::Pow, std::move(base), parse_unary());
    return base;
  }

  std::unique_ptr<Node> parse_primary() {
    skip_space();
    if (pos_ >= text_.size()) fail("unexpected end of expression");
    const size_t start = pos_;
    const char c = text_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      auto n = std::make_unique<Node>();
      const char* first = text_.data() + pos_;
      const auto res = std::from_chars(first, text_.data() + text_.size(), n->value);
      if (res.ec != std::errc()) fail("malformed number");
      pos_ += static_cast<size_t>(res.ptr - first);
      n->begin = start;
      n->end = pos_;
      return n;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) ++pos_;
      const std::string name = text_.substr(start, pos_ - start);
      skip_space();
      if (pos_ < text_.size() && text_[pos_] == '(') return parse_call(name, start);
      for (int v = 0; v < kVariableCount; ++v)
        if (name == variable_name(static_cast<Variable>(v))) {
          auto n = std::make_unique<Node>();
          n->kind = Kind::Var;
          n->var = static_cast<Variable>(v);
          used[static_cast<size_t>(v)] = true;
          n->begin = start;
          n->end = start + name.size();
          return n;
        }
      fail("unknown variable '" + name + "' (allowed: t, s, tau, x, u)", start);
    }
    if (accept('(')) {
      auto inner = parse_sum();
      if (!accept(')')) fail("expected ')'");
      inner->begin = start;
      inner->end = pos_;
      return inner;
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  std::unique_ptr<Node> parse_call(const std::string& name, size_t start) {
    const FnInfo* info = nullptr;
    for (const auto& f : kFunctions)
      if (name == f.name) info = &f;
    if (!info) fail("unknown function '" + name + "'", start);
    accept('(');
    auto n = std::make_unique<Node>();
    n->kind = Kind::Call;
    n->fn = info->fn;
    n->begin = start;
    if (!accept(')')) {
      do n->args.push_back(parse_sum());
      while (accept(','));
      if (!accept(')')) fail("expected ')' or ','");
    }
    if (static_cast<int>(n->args.size()) != info->arity)
      fail(name + " takes " + std::to_string(info->arity) + " argument(s)", start);
    n->end = pos_;
    return n;
  }

  const std::string& text_;
  size_t pos_ = 0;
};

double evaluate(const Node& n, const Bindings& b, const std::string& text) {
  auto sub = [&](const Node& node) { return text.substr(node.begin, node.end - node.begin); };
  switch (n.kind) {
    case Kind::Number: return n.value;
    case Kind::Var:
      if (!b.bound(n.var))
        throw ConfigError(std::string("unbound variable '") + variable_name(n.var) + "'", {{"expression", text}});
      return b.get(n.var);
    case Kind::Neg: return -evaluate(*n.args[0], b, text);
    case Kind::Add: return evaluate(*n.args[0], b, text) + evaluate(*n.args[1], b, text);
    case Kind::Sub: return evaluate(*n.args[0], b, text) - evaluate(*n.args[1], b, text);
    case Kind::Mul: return evaluate(*n.args[0], b, text) * evaluate(*n.args[1], b, text);
    case Kind::Div: {
      const double num = evaluate(*n.args[0], b, text), den = evaluate(*n.args[1], b, text);
      if (den == 0.0) throw NumericError("division by zero in '" + sub(n) + "'", {{"expression", text}});
      return num / den;
    }
    case Kind::Pow: return std::pow(evaluate(*n.args[0], b, text), evaluate(*n.args[1], b, text));
    case Kind::Call: {
      const double a = evaluate(*n.args[0], b, text);
      switch (n.fn) {
        case Fn::Exp: return std::exp(a);
        case Fn::Log:
          if (!(a > 0)) throw NumericError("logarithm of a non-positive value in '" + sub(n) + "'", {{"expression", text}});
          return std::log(a);
        case Fn::Tanh: return std::tanh(a);
        case Fn::Sin: return std::sin(a);
        case Fn::Cos: return std::cos(a);
        case Fn::Abs: return std::abs(a);
        case Fn::Min: return std::min(a, evaluate(*n.args[1], b, text));
        case Fn::Max: return std::max(a, evaluate(*n.args[1], b, text));
        case Fn::Pow: return std::pow(a, evaluate(*n.args[1], b, text));
      }
    }
  }
  return 0.0;
}

}  // namespace

Expression Expression::parse(const std::string& text) {
  Parser parser(text);
  std::unique_ptr<Node> root = parser.parse_all();
  Expression e;
  e.text_ = text;
  e.root_ = std::shared_ptr<const Node>(std::move(root));
  e.used_ = parser.used;
  return e;
}

double Expression::eval(const Bindings& bindings) const {
  if (!root_) throw ConfigError("empty expression");
  return evaluate(*root_, bindings, text_);
}

bool Expression::uses(Variable v) const { return used_[static_cast<size_t>(v)]; }

double eval_expression(const std::string& text, const Bindings& bindings) {
  return Expression::parse(text).eval(bindings);
}

}  // namespace rsctl::cli
