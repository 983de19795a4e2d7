#pragma once

#include <Eigen/Core>

#include <vector>

namespace goh::lp {

enum class Sense { le, eq, ge };
enum class Status { optimal, infeasible, unbounded };

struct Result {
  Status status = Status::infeasible;
  double objective = 0.0;
  Eigen::VectorXd x;
  // When infeasible: y with y^T A <= 0 on the nonnegative columns, y^T A = 0
  // on free ones, and y^T b > 0 (constraint rows in insertion order, with
  // rows of sense ge / le contributing through their slacks).
  Eigen::VectorXd farkas;
};

/// Dense two-phase simplex for min c^T x subject to linear rows. Variables
/// are nonnegative unless marked free. Bland's rule; intended for small
/// problems (tens of rows, a few hundred columns).
class Problem {
 public:
  explicit Problem(int num_vars);

  int num_vars() const { return static_cast<int>(free_.size()); }
  void set_free(int j, bool is_free = true) { free_[j] = is_free; }
  void set_objective(const Eigen::VectorXd& c) { objective_ = c; }
  void add(const Eigen::VectorXd& row, Sense sense, double rhs);

  Result solve(double tol = 1e-9) const;

 private:
  struct Row {
    Eigen::VectorXd coeffs;
    Sense sense;
    double rhs;
  };
  std::vector<bool> free_;
  Eigen::VectorXd objective_;
  std::vector<Row> rows_;
};

/// Is `target` a conic (nonnegative) combination of the columns of `gens`?
bool in_conic_hull(const Eigen::MatrixXd& gens, const Eigen::VectorXd& target, double tol = 1e-9);

}  // namespace goh::lp
