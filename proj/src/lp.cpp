#include "goh/lp.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace goh::lp {

namespace {

constexpr double pivot_tol = 1e-12;
constexpr int max_iterations = 100000;

struct Tableau {
  Eigen::MatrixXd t;  // rows: constraints; last column: rhs
  std::vector<int> basis;

  int rows() const { return static_cast<int>(t.rows()); }
  int cols() const { return static_cast<int>(t.cols()) - 1; }
  double rhs(int i) const { return t(i, cols()); }

  void pivot(int r, int c) {
    t.row(r) /= t(r, c);
    for (int i = 0; i < rows(); ++i) {
      if (i != r && t(i, c) != 0.0) t.row(i) -= t(i, c) * t.row(r);
    }
    basis[r] = c;
  }

  Eigen::VectorXd reduced_costs(const Eigen::VectorXd& c) const {
    Eigen::VectorXd r = c;
    for (int i = 0; i < rows(); ++i) {
      const double cb = c[basis[i]];
      if (cb != 0.0) r -= cb * t.row(i).head(cols()).transpose();
    }
    return r;
  }

  // Returns false when unbounded.
  bool optimize(const Eigen::VectorXd& c, const std::vector<bool>& allowed, double tol) {
    for (int iter = 0; iter < max_iterations; ++iter) {
      const Eigen::VectorXd rc = reduced_costs(c);
      int enter = -1;
      for (int j = 0; j < cols(); ++j) {
        if (allowed[j] && rc[j] < -tol) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return true;
      int leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int i = 0; i < rows(); ++i) {
        const double a = t(i, enter);
        if (a <= pivot_tol) continue;
        const double ratio = rhs(i) / a;
        if (ratio < best - 1e-14 || (std::abs(ratio - best) <= 1e-14 && basis[i] < basis[leave])) {
          best = ratio;
          leave = i;
        }
      }
      if (leave < 0) return false;
      pivot(leave, enter);
    }
    throw std::runtime_error("simplex iteration limit reached");
  }
};

}  // namespace

Problem::Problem(int num_vars) : free_(num_vars, false), objective_(Eigen::VectorXd::Zero(num_vars)) {}

void Problem::add(const Eigen::VectorXd& row, Sense sense, double rhs) {
  if (row.size() != num_vars()) throw std::invalid_argument("lp row has wrong length");
  rows_.push_back({row, sense, rhs});
}

Result Problem::solve(double tol) const {
  const int n = num_vars();
  const int m = static_cast<int>(rows_.size());

  // Column layout: original (split when free), slacks, artificials.
  std::vector<int> pos(n), neg(n, -1);
  int cols = 0;
  for (int j = 0; j < n; ++j) {
    pos[j] = cols++;
    if (free_[j]) neg[j] = cols++;
  }
  std::vector<int> slack(m, -1);
  for (int i = 0; i < m; ++i) {
    if (rows_[i].sense != Sense::eq) slack[i] = cols++;
  }
  const int first_art = cols;
  cols += m;

  Tableau tab;
  tab.t = Eigen::MatrixXd::Zero(m, cols + 1);
  tab.basis.resize(m);
  std::vector<double> flip(m, 1.0);
  for (int i = 0; i < m; ++i) {
    const Row& r = rows_[i];
    for (int j = 0; j < n; ++j) {
      tab.t(i, pos[j]) = r.coeffs[j];
      if (neg[j] >= 0) tab.t(i, neg[j]) = -r.coeffs[j];
    }
    if (slack[i] >= 0) tab.t(i, slack[i]) = r.sense == Sense::le ? 1.0 : -1.0;
    tab.t(i, cols) = r.rhs;
    if (r.rhs < 0.0) {
      tab.t.row(i) *= -1.0;
      flip[i] = -1.0;
    }
    tab.t(i, first_art + i) = 1.0;
    tab.basis[i] = first_art + i;
  }

  Eigen::VectorXd c1 = Eigen::VectorXd::Zero(cols);
  c1.tail(m).setOnes();
  std::vector<bool> allowed(cols, true);
  tab.optimize(c1, allowed, tol);

  Result res;
  double infeas = 0.0;
  for (int i = 0; i < m; ++i) {
    if (tab.basis[i] >= first_art) infeas += tab.rhs(i);
  }
  double scale = 1.0;
  for (const Row& r : rows_) scale = std::max(scale, std::abs(r.rhs));
  if (infeas > tol * scale) {
    res.status = Status::infeasible;
    const Eigen::VectorXd rc = tab.reduced_costs(c1);
    res.farkas.resize(m);
    for (int i = 0; i < m; ++i) res.farkas[i] = flip[i] * (1.0 - rc[first_art + i]);
    return res;
  }

  // Drive zero-level artificials out of the basis where possible.
  for (int i = 0; i < m; ++i) {
    if (tab.basis[i] < first_art) continue;
    for (int j = 0; j < first_art; ++j) {
      if (std::abs(tab.t(i, j)) > 1e-9) {
        tab.pivot(i, j);
        break;
      }
    }
  }

  Eigen::VectorXd c2 = Eigen::VectorXd::Zero(cols);
  for (int j = 0; j < n; ++j) {
    c2[pos[j]] = objective_[j];
    if (neg[j] >= 0) c2[neg[j]] = -objective_[j];
  }
  for (int j = first_art; j < cols; ++j) allowed[j] = false;
  if (!tab.optimize(c2, allowed, tol)) {
    res.status = Status::unbounded;
    return res;
  }

  Eigen::VectorXd z = Eigen::VectorXd::Zero(cols);
  for (int i = 0; i < m; ++i) z[tab.basis[i]] = tab.rhs(i);
  res.status = Status::optimal;
  res.x.resize(n);
  for (int j = 0; j < n; ++j) res.x[j] = z[pos[j]] - (neg[j] >= 0 ? z[neg[j]] : 0.0);
  res.objective = objective_.dot(res.x);
  return res;
}

bool in_conic_hull(const Eigen::MatrixXd& gens, const Eigen::VectorXd& target, double tol) {
  const int d = static_cast<int>(target.size());
  const int k = static_cast<int>(gens.cols());
  if (k == 0) return target.lpNorm<Eigen::Infinity>() <= tol;
  // min sum |residual| via split residual variables.
  Problem lp(k + 2 * d);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(k + 2 * d);
  c.tail(2 * d).setOnes();
  lp.set_objective(c);
  for (int i = 0; i < d; ++i) {
    Eigen::VectorXd row = Eigen::VectorXd::Zero(k + 2 * d);
    row.head(k) = gens.row(i).transpose();
    row[k + i] = 1.0;
    row[k + d + i] = -1.0;
    lp.add(row, Sense::eq, target[i]);
  }
  const Result r = lp.solve();
  const double scale = std::max(1.0, target.lpNorm<Eigen::Infinity>());
  return r.status == Status::optimal && r.objective <= tol * scale;
}

}  // namespace goh::lp
