#pragma once

#include "goh/problem.hpp"

#include <Eigen/Core>

#include <functional>
#include <vector>

namespace goh {

struct IntegrateOptions {
  double rel_step = 1e-4;  // step as a fraction of the piece length
  double max_step = 1e-3;
  double blowup = 1e12;
};

/// Solution of the rescaled extended system along a piecewise-constant
/// schedule. Nodes are stored per piece so that breakpoints restart exactly.
class Trajectory {
 public:
  struct Segment {
    double s0 = 0.0;
    double h = 0.0;
    std::vector<Eigen::VectorXd> y;   // (y0, y, yl, beta) at s0 + k h
    std::vector<Eigen::VectorXd> dy;  // derivative from inside the piece
  };

  ControlSchedule controls;
  std::vector<Segment> segments;

  double S() const;
  const Eigen::VectorXd& endpoint() const { return segments.back().y.back(); }
  /// Extended state at s (cubic Hermite between nodes).
  Eigen::VectorXd at(double s) const;
  /// Strict state y(s).
  Eigen::VectorXd state(const StrictProblem& P, double s) const { return at(s).segment(1, P.n); }
  /// Uniform grid plus breakpoints, sorted.
  std::vector<double> sample_grid(int per_unit) const;
};

/// Rates (1 + zeta) w0 and (1 + zeta) w of one piece.
std::pair<double, Eigen::VectorXd> effective_rates(const ControlPiece& piece);

Trajectory solve_forward(const StrictProblem& P, const ControlSchedule& ctrl, const Eigen::VectorXd& y_init,
                         const IntegrateOptions& opts = {});

/// Initial extended state (0, x0, 0, 0).
Eigen::VectorXd initial_state(const StrictProblem& P);

/// Extended process of a strict one, integrated from x0.
Trajectory extend_process(const StrictProblem& P, const StrictProcess& sp, const std::vector<double>& rates = {},
                          const IntegrateOptions& opts = {});

/// V(s2) for dV/ds = M(s) V, V(s1) = I, by RK4 with `steps` steps (s2 < s1 allowed).
Eigen::MatrixXd fundamental_matrix(const std::function<Eigen::MatrixXd(double)>& M, double s1, double s2,
                                   int steps);

/// Costate path: analytic expressions in s, or samples with derivatives.
class Costate {
 public:
  Costate() = default;
  static Costate analytic(std::vector<Expr> components);
  static Costate sampled(std::vector<double> s, std::vector<Eigen::VectorXd> p, std::vector<Eigen::VectorXd> dp);
  static Costate zero(int n);

  bool is_analytic() const { return analytic_; }
  int size() const;
  Eigen::VectorXd at(double s) const;
  Eigen::VectorXd derivative(double s) const;
  const std::vector<Expr>& expressions() const { return exprs_; }

 private:
  bool analytic_ = true;
  std::vector<Expr> exprs_;
  std::vector<double> s_;
  std::vector<Eigen::VectorXd> p_;
  std::vector<Eigen::VectorXd> dp_;
};

struct Multipliers {
  double p0 = 0.0;
  Costate p;
  double lambda = 0.0;
  double pi = 0.0;
  SelectionPolicy policy;
};

struct AdjointOptions {
  int steps_per_piece = 200;
  JacobianQuery query;
};

/// Backward propagator of the adjoint along a trajectory under one policy:
/// p(s) = p(S) U(s) + lambda q(s).
struct AdjointPropagator {
  std::vector<double> s;              // nodes, increasing
  std::vector<Eigen::MatrixXd> U;     // n x n
  std::vector<Eigen::VectorXd> q;     // n
  std::vector<std::vector<ExtendedJacobian>> limits;  // all limits at each node
  std::vector<ExtendedJacobian> selected;             // policy element at each node
  std::vector<int> piece;             // piece the node's derivative is taken from
  bool consistent = true;             // every explicit sign was realizable
};

AdjointPropagator adjoint_propagator(const StrictProblem& P, const Trajectory& traj, const SelectionPolicy& policy,
                                     const AdjointOptions& opts = {});

struct AdjointResult {
  Costate p;
  double max_residual = 0.0;
  double argmax_s = 0.0;
  bool consistent = true;
};

/// Integrates dp/ds = -p M + lambda omega backward from p(S) and reports the
/// distance of dp/ds to -d_x H at every node.
AdjointResult solve_adjoint(const StrictProblem& P, const Trajectory& traj, const Eigen::VectorXd& p_final,
                            double lambda, const SelectionPolicy& policy, const AdjointOptions& opts = {});
AdjointResult solve_adjoint(const AdjointPropagator& prop, const Eigen::VectorXd& p_final, double lambda);

struct MembershipResidual {
  double max_residual = 0.0;
  double argmax_s = 0.0;
};

/// max over the grid of dist(-dp/ds, d_x H) with H's generalized gradient
/// built from all joint limits at y(s).
MembershipResidual verify_adjoint_membership(const StrictProblem& P, const Trajectory& traj, const Multipliers& mult,
                                             const std::vector<double>& grid, const JacobianQuery& query = {},
                                             int jobs = 1);

/// Transport of variations of (y0, y, yl) from s_k to S under the policy:
/// [[1, 0, 0], [0, Phi(S, s_k), 0], [0, int omega Phi(s, s_k) ds, 1]].
Eigen::MatrixXd transport_matrix(const StrictProblem& P, const Trajectory& traj, double s_k,
                                 const SelectionPolicy& policy = {}, const AdjointOptions& opts = {});

}  // namespace goh
