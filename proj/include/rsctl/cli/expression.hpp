#pragma once

// Arithmetic expressions for coefficient functions.
//
// Grammar (lowest to highest precedence): + -, * /, unary -, ^ (right-associative).
// Variables: t, s, tau, x, u. Functions: exp log tanh sin cos abs (one argument),
// min max pow (two arguments).

#include <array>
#include <memory>
#include <string>
#include <vector>

namespace rsctl::cli {

enum class Variable { T = 0, S, Tau, X, U };
constexpr int kVariableCount = 5;
const char* variable_name(Variable v);

/// Values for the free variables; unset variables raise on use.
class Bindings {
 public:
  Bindings& set(Variable v, double value) {
    values_[static_cast<size_t>(v)] = value;
    bound_[static_cast<size_t>(v)] = true;
    return *this;
  }
  bool bound(Variable v) const { return bound_[static_cast<size_t>(v)]; }
  double get(Variable v) const { return values_[static_cast<size_t>(v)]; }

 private:
  std::array<double, kVariableCount> values_{};
  std::array<bool, kVariableCount> bound_{};
};

struct Node;

class Expression {
 public:
  Expression() = default;
  /// Throws ConfigError carrying the byte offset and a caret excerpt on syntax errors.
  static Expression parse(const std::string& text);

  /// Throws ConfigError for an unbound variable and NumericError (naming the subexpression)
  /// for division by zero or a logarithm of a non-positive number.
  double eval(const Bindings& bindings) const;

  const std::string& text() const { return text_; }
  bool empty() const { return !root_; }
  bool uses(Variable v) const;

  bool operator==(const Expression& other) const { return text_ == other.text_; }

 private:
  std::string text_;
  std::shared_ptr<const Node> root_;
  std::array<bool, kVariableCount> used_{};
};

/// Parse and evaluate in one call.
double eval_expression(const std::string& text, const Bindings& bindings);

}  // namespace rsctl::cli
