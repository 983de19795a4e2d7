#pragma once

#include "goh/expr.hpp"

#include <Eigen/Core>

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace goh {

constexpr double default_kink_tol = 1e-9;

/// One abs node: component index and ordinal among that component's abs nodes.
struct KinkId {
  int component = 0;
  int ordinal = 0;

  friend bool operator==(const KinkId&, const KinkId&) = default;
};

struct KinkReport {
  std::vector<KinkId> active;
};

/// Per-component forced abs signs (0 = natural sign).
using SignTable = std::vector<std::vector<std::int8_t>>;

struct SignPattern {
  std::vector<KinkId> kinks;
  std::vector<std::int8_t> signs;  // one of -1, +1 per kink
  double radius = 0.0;            // ball radius in which the pattern was realized
};

struct PatternJacobian {
  SignPattern pattern;
  Eigen::MatrixXd jacobian;
};

struct PatternOptions {
  double kink_tol = default_kink_tol;
  int cap = 16;
  int samples = 64;
  std::uint64_t seed = 0;
};

/// Vector field whose components are expressions, differentiated with respect
/// to an ordered coordinate list (x1..xn unless stated otherwise). Other
/// variables (a, t, ...) are read from an evaluation context.
class NonsmoothField {
 public:
  NonsmoothField() = default;
  NonsmoothField(std::vector<Expr> components, std::vector<VarRef> coords);

  static NonsmoothField parse(const std::vector<std::string>& components, const Dims& dims);
  static std::vector<VarRef> state_coords(int n);

  int size() const { return static_cast<int>(components_.size()); }
  int arity() const { return static_cast<int>(coords_.size()); }
  const std::vector<Expr>& components() const { return components_; }
  const std::vector<VarRef>& coords() const { return coords_; }
  int kink_count() const;
  std::string str() const;

  std::optional<double> lipschitz;

  /// Context with the coordinates overwritten by z.
  EvalPoint at(const Eigen::VectorXd& z, const EvalPoint& ctx = {}) const;

  Eigen::VectorXd eval(const Eigen::VectorXd& z, const EvalPoint& ctx = {}) const;

  /// Jacobian with the given forced signs (empty table = natural signs).
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& z, const EvalPoint& ctx = {},
                           const SignTable& forced = {}) const;

  /// Kinks whose argument magnitude is at most tol at z.
  std::vector<KinkId> active_kinks(const Eigen::VectorXd& z, const EvalPoint& ctx = {},
                                   double tol = default_kink_tol) const;

  /// Smallest kink argument magnitude at z (infinity when there are no kinks).
  double kink_margin(const Eigen::VectorXd& z, const EvalPoint& ctx = {}) const;

  /// Concatenation of the components of two fields over the same coordinates.
  static NonsmoothField stack(const NonsmoothField& a, const NonsmoothField& b);

 private:
  std::vector<Expr> components_;
  std::vector<VarRef> coords_;
};

/// Classical Jacobian away from kinks, otherwise the list of active kinks.
std::variant<Eigen::MatrixXd, KinkReport> jacobian_ae(const NonsmoothField& f,
                                                      const Eigen::VectorXd& z,
                                                      const EvalPoint& ctx = {},
                                                      double kink_tol = default_kink_tol);

/// Feasible sign assignments of the kinks active at z, each with the
/// Jacobian obtained by substituting those signs.
std::vector<PatternJacobian> sign_patterns(const NonsmoothField& f, const Eigen::VectorXd& z,
                                           double radius, const EvalPoint& ctx = {},
                                           const PatternOptions& opts = {});

}  // namespace goh
