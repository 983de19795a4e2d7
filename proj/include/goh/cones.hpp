#pragma once

#include <Eigen/Core>

#include <optional>
#include <string>
#include <vector>

namespace goh {

/// Conic hull of finitely many generators; a generator flagged as a line
/// contributes both of its directions.
class PolyhedralCone {
 public:
  explicit PolyhedralCone(int dim = 0) : dim_(dim) {}
  PolyhedralCone(int dim, std::vector<Eigen::VectorXd> generators, std::vector<bool> lines = {});

  /// Product of coordinate half-lines: '+' (R+), '-' (R-), '*' (R), '0' ({0}).
  static PolyhedralCone from_signs(const std::string& signs);
  static PolyhedralCone whole_space(int dim);

  int dim() const { return dim_; }
  const std::vector<Eigen::VectorXd>& generators() const { return generators_; }
  const std::vector<bool>& lines() const { return lines_; }
  bool is_zero() const { return generators_.empty(); }

  /// Generators as columns with each line contributing +g and -g.
  Eigen::MatrixXd spanning_matrix() const;

  bool contains(const Eigen::VectorXd& v, double tol = 1e-9) const;

 private:
  int dim_;
  std::vector<Eigen::VectorXd> generators_;
  std::vector<bool> lines_;
};

using Multicone = std::vector<PolyhedralCone>;

/// {mu : mu . c <= 0 for every c in C}, by double description.
PolyhedralCone polar(const PolyhedralCone& c);

/// Same set: every generator of each cone lies in the other.
bool equivalent(const PolyhedralCone& a, const PolyhedralCone& b, double tol = 1e-7);

PolyhedralCone intersection(const PolyhedralCone& a, const PolyhedralCone& b);

/// C1 - C2 = R^d.
bool is_transversal(const PolyhedralCone& c1, const PolyhedralCone& c2);

/// Nonzero mu with mu.c1 >= 0 on C1 and mu.c2 <= 0 on C2, |mu|_1 = 1.
std::optional<Eigen::VectorXd> linearly_separated(const PolyhedralCone& c1, const PolyhedralCone& c2);

bool is_strongly_transversal(const PolyhedralCone& c1, const PolyhedralCone& c2);
bool is_strongly_transversal(const Multicone& m1, const Multicone& m2);

}  // namespace goh
