#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

namespace goh {

constexpr double hull_dedup_tol = 1e-10;

/// Convex hull of finitely many matrices (rows x cols) or vectors (cols = 1).
/// Vertices are stored flattened in column-major order.
class ConvexHullSet {
 public:
  ConvexHullSet() = default;
  ConvexHullSet(std::vector<Eigen::VectorXd> vertices, int rows, int cols = 1);

  static ConvexHullSet from_matrices(const std::vector<Eigen::MatrixXd>& mats);
  static ConvexHullSet from_vectors(std::vector<Eigen::VectorXd> vecs);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool is_vector() const { return cols_ == 1; }
  int size() const { return static_cast<int>(vertices_.size()); }
  bool empty() const { return vertices_.empty(); }
  const std::vector<Eigen::VectorXd>& vertices() const { return vertices_; }
  const Eigen::VectorXd& vertex(int i) const { return vertices_[i]; }
  Eigen::MatrixXd matrix(int i) const;

  /// Removes duplicates and vertices lying in the hull of the others.
  ConvexHullSet reduced(double tol = hull_dedup_tol) const;
  ConvexHullSet negated() const;
  double diameter() const;

  // construction metadata
  std::string method;
  std::vector<double> radii;
  int samples = 0;

 private:
  std::vector<Eigen::VectorXd> vertices_;
  int rows_ = 0;
  int cols_ = 1;
};

/// Nearest point of conv(points) to `target` (Wolfe's min-norm-point method).
Eigen::VectorXd project_to_hull(const std::vector<Eigen::VectorXd>& points,
                                const Eigen::VectorXd& target);

double hull_distance(const ConvexHullSet& set, const Eigen::VectorXd& target);

/// Exact for finite-vertex hulls: the farthest point is always a vertex.
double hausdorff(const ConvexHullSet& a, const ConvexHullSet& b);

}  // namespace goh
