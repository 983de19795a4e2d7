#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace goh {

/// Coordinate families an expression may reference.
enum class VarKind : std::uint8_t { t, s, x, u, a, w0, w };

struct VarRef {
  VarKind kind = VarKind::x;
  int index = 0;  // 0-based for x, u, a, w; always 0 for scalars

  friend bool operator==(const VarRef&, const VarRef&) = default;
};

std::string to_string(const VarRef& v);

/// Declared dimensions used to validate identifiers at parse time.
struct Dims {
  int n = 0;  // state
  int m = 0;  // unbounded controls (u and w)
  int q = 0;  // bounded controls
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line, int column);
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Values of every coordinate family; vectors shorter than an index an
/// expression uses count as unassigned.
struct EvalPoint {
  double t = 0.0;
  double s = 0.0;
  double w0 = 0.0;
  Eigen::VectorXd x;
  Eigen::VectorXd u;
  Eigen::VectorXd a;
  Eigen::VectorXd w;

  double get(const VarRef& v) const;
  void set(const VarRef& v, double value);
};

enum class Op : std::uint8_t { constant, variable, add, sub, mul, div, pow, neg, abs };

struct Node {
  Op op = Op::constant;
  double value = 0.0;  // constant value, or the exponent for pow
  VarRef var{};
  int lhs = -1;
  int rhs = -1;
};

/// Argument of one abs node, with its gradient in the requested coordinates.
struct KinkArgument {
  int ordinal = 0;  // position among the abs nodes of the expression
  double value = 0.0;
  Eigen::VectorXd gradient;
};

/// Immutable expression tree stored as a flat node array (children precede
/// parents). min/max are desugared to abs at parse time.
class Expr {
 public:
  Expr();  // the constant 0

  static Expr parse(std::string_view text, const Dims& dims);
  static Expr constant(double value);

  std::string str() const;

  double eval(const EvalPoint& point) const;

  /// Value and gradient with respect to `coords`. `forced` optionally fixes
  /// the sign used for abs'(z) per abs ordinal (0 = use sign of the argument).
  double eval_gradient(const EvalPoint& point, std::span<const VarRef> coords,
                       Eigen::Ref<Eigen::VectorXd> gradient,
                       std::span<const std::int8_t> forced = {}) const;

  /// Arguments of all abs nodes at `point`, differentiated under `forced`.
  std::vector<KinkArgument> kink_arguments(const EvalPoint& point,
                                           std::span<const VarRef> coords,
                                           std::span<const std::int8_t> forced = {}) const;

  int kink_count() const { return kink_count_; }
  bool uses(VarKind kind) const;
  bool is_constant() const;
  std::span<const Node> nodes() const { return *nodes_; }
  int root() const { return root_; }

  friend bool operator==(const Expr& a, const Expr& b);
  friend double parse_constant(std::string_view text);

 private:
  Expr(std::shared_ptr<const std::vector<Node>> nodes, int root);

  std::shared_ptr<const std::vector<Node>> nodes_;
  int root_ = 0;
  int kink_count_ = 0;
};

/// Parses a constant expression (no identifiers), e.g. "2^0.5/2".
double parse_constant(std::string_view text);

/// Shortest decimal text that reads back to exactly `value`.
std::string format_number(double value);

}  // namespace goh
